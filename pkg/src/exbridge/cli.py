"""Command-line entry points.

Every run writes its artifacts plus a manifest into --out; `rerun` replays
a manifest and must reproduce the artifacts byte for byte.  Exit codes:
0 success, 2 configuration error, 3 data error, 4 runtime/engine error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from . import io as iomod
from .betaess import ess_report
from .decisions import recommend_next_dose, starting_dose
from .errors import ConfigError, DataError, ExbridgeError
from .mcmc import prior_predictive, run_posterior, summarize_p
from .scenarios import SCENARIOS, AnalysisModelVariant
from .simulate import SimulationDesign, operating_characteristics, run_campaign
from .types import ModelConfig

CONFIG_ENV_VAR = "EXBRIDGE_CONFIG"


def packaged_data_path(name: str) -> Path:
    return Path(resources.files("exbridge").joinpath("data", name))


def resolve_config_path(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    from_env = os.environ.get(CONFIG_ENV_VAR)
    if from_env:
        return Path(from_env)
    return packaged_data_path("default_config.json")


def _restrict_model(model: ModelConfig, subgroups: tuple[str, ...]) -> ModelConfig:
    """The configured model narrowed to the subgroups actually being fit."""
    return ModelConfig(
        species=model.species,
        subgroups=subgroups,
        hyper=model.hyper,
        translation=model.translation,
        weights={sub: model.weights_for(sub) for sub in subgroups},
    )


def _load_common(args) -> tuple[iomod.AppConfig, list, dict]:
    config_path = resolve_config_path(args.config)
    cfg = iomod.load_config(config_path)
    inputs = {"config": iomod.manifest_input(config_path)}
    studies = []
    if not getattr(args, "no_animal_data", False):
        animal_path = Path(args.animal_data) if args.animal_data else packaged_data_path(
            "animal_studies.csv"
        )
        studies = iomod.load_animal_data(animal_path, cfg.grid.reference_dose)
        inputs["animal_data"] = iomod.manifest_input(animal_path)
    return cfg, studies, inputs


def _seed(args, cfg: iomod.AppConfig, full_budget: bool) -> int:
    return args.seed if args.seed is not None else cfg.settings(full_budget).seed


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    cfg, studies, inputs = _load_common(args)
    trials = []
    for i, path in enumerate(args.trial):
        trials.append(iomod.load_trial_state(path))
        inputs[f"trial_{i}"] = iomod.manifest_input(path)
    if not trials:
        raise ConfigError("fit needs at least one --trial")
    subgroups = tuple(t.subgroup_id for t in trials)
    model = _restrict_model(cfg.model, subgroups)
    seed = _seed(args, cfg, args.full_budget)
    settings = replace(cfg.settings(args.full_budget), seed=seed)

    result = run_posterior(studies, trials, model, settings)

    names = sorted(result.param_draws)
    draws = np.stack([result.param_draws[n] for n in names], axis=-1)
    fit_payload = {
        "schema_version": iomod.SCHEMA_VERSION,
        "seed": seed,
        "settings": iomod._sampler_payload(settings),
        "subgroups": list(subgroups),
        "posteriors": {
            sub: iomod.posterior_to_payload(result, cfg.thresholds, sub) for sub in subgroups
        },
        "acceptance": {k: iomod.round4(v) for k, v in sorted(result.acceptance.items())},
        "diagnostics": iomod.diagnostics_to_payload(result),
        "draws": {"file": "draws.npy", "parameters": names, "shape": list(draws.shape)},
    }
    iomod.write_results(
        {"fit.json": fit_payload, "draws.npy": iomod.array_bytes(draws)},
        args.out,
        command="fit",
        seed=seed,
        inputs=inputs,
        parameters={
            "full_budget": args.full_budget,
            "no_animal_data": args.no_animal_data,
            "n_trials": len(trials),
        },
    )
    for sub in subgroups:
        for row in fit_payload["posteriors"][sub]["summaries"]:
            print(
                f"{sub} dose {row['dose']:g}: median {row['median']:.4f} "
                f"[{row['lower']:.4f}, {row['upper']:.4f}]  "
                f"under/target/over {row['p_under']:.4f}/{row['p_target']:.4f}/{row['p_over']:.4f}"
            )
    return 0


# ---------------------------------------------------------------------------
# prior-predict / ess


def cmd_prior_predict(args) -> int:
    cfg, studies, inputs = _load_common(args)
    seed = _seed(args, cfg, args.full_budget)
    settings = replace(cfg.settings(args.full_budget), seed=seed)
    trials = [cfg.empty_trial(sub) for sub in cfg.model.subgroups]
    pred = prior_predictive(studies, cfg.model, settings, trials)
    payload = iomod.predictive_to_payload(pred.rows)
    iomod.write_results(
        {"prior_predictive.json": payload},
        args.out,
        command="prior-predict",
        seed=seed,
        inputs=inputs,
        parameters={"full_budget": args.full_budget, "no_animal_data": args.no_animal_data},
    )
    for row in payload["rows"]:
        print(
            f"{row['subgroup']} dose {row['dose']:g}: median {row['median']:.4f} "
            f"mean {row['mean']:.4f} sd {row['sd']:.4f}"
        )
    return 0


def cmd_ess(args) -> int:
    payload = iomod.load_json(args.predictive, kind="predictive summaries")
    iomod.check_schema(payload, str(args.predictive))
    rows = [SimpleNamespace(**row) for row in payload["rows"]]
    report = ess_report(rows)
    out_payload = iomod.ess_rows_to_payload(report)
    iomod.write_results(
        {"ess.json": out_payload},
        args.out,
        command="ess",
        seed=0,
        inputs={"predictive": iomod.manifest_input(args.predictive)},
        parameters={},
    )
    for r in report:
        if r.infeasible:
            print(f"{r.subgroup} dose {r.dose:g}: no matching beta (sd too large)")
        else:
            print(
                f"{r.subgroup} dose {r.dose:g}: ESS {r.ess:.1f} (a {r.a:.1f}, b {r.b:.1f})"
            )
    return 0


# ---------------------------------------------------------------------------
# recommend


def cmd_recommend(args) -> int:
    cfg, studies, inputs = _load_common(args)
    trials = []
    for i, path in enumerate(args.trial):
        trials.append(iomod.load_trial_state(path))
        inputs[f"trial_{i}"] = iomod.manifest_input(path)
    if not trials:
        raise ConfigError("recommend needs at least one --trial")
    subgroup = args.subgroup or trials[-1].subgroup_id
    by_id = {t.subgroup_id: t for t in trials}
    if subgroup not in by_id:
        raise ConfigError(f"--subgroup {subgroup!r} not among the loaded trials {sorted(by_id)}")
    model = _restrict_model(cfg.model, tuple(t.subgroup_id for t in trials))
    seed = _seed(args, cfg, args.full_budget)
    settings = replace(cfg.settings(args.full_budget), seed=seed)

    result = run_posterior(studies, trials, model, settings)
    trial = by_id[subgroup]
    draws = result.p_pooled(subgroup)
    if trial.cohorts:
        decision = recommend_next_dose(draws, trial, cfg.thresholds)
    else:
        decision = starting_dose(draws, cfg.thresholds)
    payload = iomod.recommendation_to_payload(
        decision,
        trial.grid,
        subgroup=subgroup,
        n_cohorts=len(trial.cohorts),
        fit_seed=seed,
        data_digest=iomod.sha256_payload(iomod.trial_to_payload(trial)),
    )
    iomod.write_results(
        {"recommendation.json": payload},
        args.out,
        command="recommend",
        seed=seed,
        inputs=inputs,
        parameters={
            "subgroup": subgroup,
            "full_budget": args.full_budget,
            "no_animal_data": args.no_animal_data,
            "n_trials": len(trials),
        },
    )
    dose = "none" if payload["dose"] is None else f"{payload['dose']:g} mg/kg"
    print(f"{subgroup}: {payload['kind']} -> {dose}")
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    cfg, studies, inputs = _load_common(args)
    if args.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {args.scenario!r}; valid: {sorted(SCENARIOS)}")
    scenario = SCENARIOS[args.scenario]
    variant = AnalysisModelVariant(tag=args.model_variant, robust_weight=args.robust_weight)
    seed = _seed(args, cfg, args.full_budget)
    design = SimulationDesign(
        animal_studies=tuple(studies),
        model_config=cfg.model,
        grid=cfg.grid,
        thresholds=cfg.thresholds,
        sampler=replace(cfg.settings(args.full_budget), seed=seed),
        max_sample_size=cfg.max_sample_size,
        cohort_size=cfg.cohort_size,
    )
    records = run_campaign(scenario, variant, design, args.replicates, seed, n_jobs=args.jobs)
    report = operating_characteristics(records, scenario)
    iomod.write_results(
        {
            "oc_report.json": iomod.oc_report_to_payload(report),
            "replicates.json": iomod.records_to_payload(records),
        },
        args.out,
        command="simulate",
        seed=seed,
        inputs=inputs,
        parameters={
            "scenario": args.scenario,
            "model_variant": args.model_variant,
            "robust_weight": args.robust_weight,
            "replicates": args.replicates,
            "jobs": args.jobs,
            "full_budget": args.full_budget,
            "no_animal_data": args.no_animal_data,
        },
    )
    for sub, oc in report.trials.items():
        correct = "n/a" if oc.pct_correct is None else f"{oc.pct_correct:.1f}%"
        print(
            f"scenario {report.scenario} model {report.variant} {sub}: "
            f"correct {correct}, stopped early {oc.pct_stopped_early:.1f}%, "
            f"no MTD {oc.pct_no_mtd:.1f}%"
        )
    return 0


# ---------------------------------------------------------------------------
# serve / rerun


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg, studies, _ = _load_common(args)
    app = create_app(cfg, tuple(studies), token=args.token, full_budget=args.full_budget)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_rerun(args) -> int:
    manifest = iomod.load_manifest(args.manifest)
    for label, entry in manifest.inputs.items():
        path = Path(entry["path"])
        if not path.exists():
            raise DataError(f"manifest input {label} missing: {path}")
        digest = iomod.sha256_file(path)
        if digest != entry["sha256"]:
            raise DataError(
                f"manifest input {label} changed since the original run: {path} "
                f"(expected {entry['sha256'][:12]}, found {digest[:12]})"
            )

    params = manifest.parameters
    base = {
        "config": manifest.inputs["config"]["path"],
        "animal_data": manifest.inputs.get("animal_data", {}).get("path"),
        "seed": manifest.seed,
        "out": args.out,
        "no_animal_data": bool(params.get("no_animal_data", False)),
        "full_budget": bool(params.get("full_budget", False)),
    }
    if manifest.command == "fit":
        trial_paths = [
            manifest.inputs[f"trial_{i}"]["path"] for i in range(int(params["n_trials"]))
        ]
        return cmd_fit(SimpleNamespace(**base, trial=trial_paths))
    if manifest.command == "prior-predict":
        return cmd_prior_predict(SimpleNamespace(**base))
    if manifest.command == "ess":
        return cmd_ess(
            SimpleNamespace(predictive=manifest.inputs["predictive"]["path"], out=args.out)
        )
    if manifest.command == "recommend":
        trial_paths = [
            manifest.inputs[f"trial_{i}"]["path"] for i in range(int(params["n_trials"]))
        ]
        return cmd_recommend(
            SimpleNamespace(**base, trial=trial_paths, subgroup=params["subgroup"])
        )
    if manifest.command == "simulate":
        return cmd_simulate(
            SimpleNamespace(
                **base,
                scenario=params["scenario"],
                model_variant=params["model_variant"],
                robust_weight=float(params.get("robust_weight", 0.0)),
                replicates=int(params["replicates"]),
                jobs=int(params.get("jobs", 1)),
            )
        )
    raise ConfigError(f"manifest command {manifest.command!r} cannot be rerun")


# ---------------------------------------------------------------------------
# parser


def _add_common(p, *, animal=True):
    p.add_argument("--config", help=f"config file (default: ${CONFIG_ENV_VAR} or packaged)")
    if animal:
        p.add_argument("--animal-data", help="animal study table (default: packaged)")
        p.add_argument(
            "--no-animal-data",
            action="store_true",
            help="fit without animal studies (species components stay at their priors)",
        )
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--full-budget",
        action="store_true",
        help="use the full sampler settings instead of the reduced ones",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exbridge",
        description="Dose-escalation engine borrowing animal and cross-subgroup evidence",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="sample the joint posterior for one or more trials")
    _add_common(p)
    p.add_argument("--trial", action="append", default=[], help="trial state file (repeatable)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("prior-predict", help="predictive toxicity before any human data")
    _add_common(p)
    p.set_defaults(func=cmd_prior_predict)

    p = sub.add_parser("ess", help="beta moment-match a predictive summary table")
    p.add_argument("--predictive", required=True, help="prior-predict output file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ess)

    p = sub.add_parser("recommend", help="starting dose or next-cohort recommendation")
    _add_common(p)
    p.add_argument("--trial", action="append", default=[], help="trial state file (repeatable)")
    p.add_argument("--subgroup", help="decision subgroup (default: last --trial)")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("simulate", help="replicate paired-trial campaigns")
    _add_common(p)
    p.add_argument("--scenario", required=True, help="scenario name (1-6)")
    p.add_argument("--model-variant", required=True, help="analysis variant (A-E)")
    p.add_argument("--robust-weight", type=float, default=0.0,
                   help="extra stand-alone weight for variant B")
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the trial-conduct HTTP service")
    p.add_argument("--config", help=f"config file (default: ${CONFIG_ENV_VAR} or packaged)")
    p.add_argument("--animal-data", help="animal study table (default: packaged)")
    p.add_argument("--no-animal-data", action="store_true")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--token", help="require this bearer token on every request")
    p.add_argument("--full-budget", action="store_true")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("rerun", help="re-execute a recorded run from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ExbridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except json.JSONDecodeError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # anything else is a runtime failure, exit 4
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
