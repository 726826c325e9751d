"""Configuration files, data files, persisted artifacts, run manifests.

All structured artifacts are JSON with a schema_version field; loaders
reject unknown major versions.  Tabular animal data is delimited text with
a fixed header.  Serialization is canonical (sorted keys, fixed separators)
so a rerun that produces equal values produces equal bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .decisions import DoseDecision, IntervalThresholds, dose_interval_table
from .errors import ConfigError, DataError
from .mcmc import REDUCED_SETTINGS, SamplerSettings
from .simulate import InterimDecision, TrialPairRecord, TrialRecord
from .types import (
    AnimalStudy,
    BridgingPrior,
    Cohort,
    DoseGrid,
    HumanTrialState,
    HyperpriorConfig,
    LogNormalPrior,
    MixtureWeights,
    ModelConfig,
    NonExchangeablePrior,
    TranslationPriors,
)

SCHEMA_VERSION = "1.0"
ANIMAL_DATA_HEADER = ("study_id", "species", "dose", "n", "r")


# ---------------------------------------------------------------------------
# JSON plumbing


def dump_json(payload: Any, path: str | Path) -> Path:
    """Canonical JSON write: sorted keys, 2-space indent, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def load_json(path: str | Path, *, kind: str) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {kind} file {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{kind} file {path} is not valid JSON: {exc}") from exc


def check_schema(payload: Mapping[str, Any], where: str) -> None:
    version = payload.get("schema_version")
    if not isinstance(version, str) or "." not in version:
        raise DataError(f"{where}: missing or malformed schema_version")
    major = version.split(".", 1)[0]
    if major != SCHEMA_VERSION.split(".", 1)[0]:
        raise DataError(
            f"{where}: schema_version {version} not supported (expected major {SCHEMA_VERSION.split('.', 1)[0]})"
        )


def sha256_bytes(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def sha256_payload(payload: Any) -> str:
    return sha256_bytes(
        json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()
    )


class _Cursor:
    """Typed, path-addressed access into a parsed JSON payload."""

    def __init__(self, payload: Any, where: str):
        self.payload = payload
        self.where = where

    def child(self, key: str) -> "_Cursor":
        if not isinstance(self.payload, Mapping):
            raise ConfigError(f"{self.where}: expected an object")
        if key not in self.payload:
            raise ConfigError(f"{self.where}.{key}: missing")
        return _Cursor(self.payload[key], f"{self.where}.{key}")

    def get(self, key: str, default: Any) -> "_Cursor":
        if not isinstance(self.payload, Mapping):
            raise ConfigError(f"{self.where}: expected an object")
        return _Cursor(self.payload.get(key, default), f"{self.where}.{key}")

    def number(self) -> float:
        if not isinstance(self.payload, (int, float)) or isinstance(self.payload, bool):
            raise ConfigError(f"{self.where}: expected a number, got {self.payload!r}")
        return float(self.payload)

    def integer(self) -> int:
        if not isinstance(self.payload, int) or isinstance(self.payload, bool):
            raise ConfigError(f"{self.where}: expected an integer, got {self.payload!r}")
        return self.payload

    def string(self) -> str:
        if not isinstance(self.payload, str):
            raise ConfigError(f"{self.where}: expected a string, got {self.payload!r}")
        return self.payload

    def numbers(self) -> tuple[float, ...]:
        if not isinstance(self.payload, Sequence) or isinstance(self.payload, str):
            raise ConfigError(f"{self.where}: expected an array of numbers")
        return tuple(_Cursor(v, f"{self.where}[{i}]").number() for i, v in enumerate(self.payload))

    def strings(self) -> tuple[str, ...]:
        if not isinstance(self.payload, Sequence) or isinstance(self.payload, str):
            raise ConfigError(f"{self.where}: expected an array of strings")
        return tuple(_Cursor(v, f"{self.where}[{i}]").string() for i, v in enumerate(self.payload))

    def mapping(self) -> Mapping[str, Any]:
        if not isinstance(self.payload, Mapping):
            raise ConfigError(f"{self.where}: expected an object")
        return self.payload


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class AppConfig:
    """One loaded configuration file: model, thresholds, budgets, protocol."""

    model: ModelConfig
    grid: DoseGrid
    thresholds: IntervalThresholds = IntervalThresholds()
    sampler: SamplerSettings = SamplerSettings()
    reduced_sampler: SamplerSettings = REDUCED_SETTINGS
    max_sample_size: int = 24
    cohort_size: int = 3

    def __post_init__(self):
        if self.max_sample_size < self.cohort_size or self.cohort_size < 1:
            raise ConfigError("need cohort_size >= 1 and max_sample_size >= cohort_size")

    def settings(self, full_budget: bool) -> SamplerSettings:
        return self.sampler if full_budget else self.reduced_sampler

    def empty_trial(self, subgroup_id: str) -> HumanTrialState:
        return HumanTrialState(
            subgroup_id=subgroup_id,
            grid=self.grid,
            cohorts=(),
            max_sample_size=self.max_sample_size,
            cohort_size=self.cohort_size,
        )


def default_app_config() -> AppConfig:
    """The shipped defaults: two species, two subgroups, standard budgets."""
    hyper = HyperpriorConfig()
    translation = TranslationPriors(
        allometric={
            "Rat": LogNormalPrior(log_location=-1.820, log_scale=0.323),
            "Monkey": LogNormalPrior(log_location=-1.127, log_scale=0.273),
        },
    )
    weights = {
        "T1": MixtureWeights(species=(0.2, 0.6), human=0.0, robust=0.2),
        "T2": MixtureWeights(species=(0.1, 0.5), human=0.2, robust=0.2),
    }
    model = ModelConfig(
        species=("Rat", "Monkey"),
        subgroups=("T1", "T2"),
        hyper=hyper,
        translation=translation,
        weights=weights,
    )
    return AppConfig(
        model=model,
        grid=DoseGrid(doses=(0.1, 0.5, 1.0, 5.0, 10.0, 20.0), reference_dose=5.0),
    )


def _sampler_payload(s: SamplerSettings) -> dict:
    return {
        "n_chains": s.n_chains,
        "n_iterations": s.n_iterations,
        "n_burnin": s.n_burnin,
        "thinning": s.thinning,
        "seed": s.seed,
    }


def config_to_payload(cfg: AppConfig) -> dict:
    m = cfg.model
    return {
        "schema_version": SCHEMA_VERSION,
        "grid": {"doses": list(cfg.grid.doses), "reference_dose": cfg.grid.reference_dose},
        "species": list(m.species),
        "subgroups": list(m.subgroups),
        "hyperpriors": {
            "intercept_mean": m.hyper.intercept_mean,
            "intercept_sd": m.hyper.intercept_sd,
            "log_slope_mean": m.hyper.log_slope_mean,
            "log_slope_sd": m.hyper.log_slope_sd,
            "study_sd_scales": list(m.hyper.study_sd_scales),
            "human_sd_scales": list(m.hyper.human_sd_scales),
            "species_sd_scales": list(m.hyper.species_sd_scales),
            "non_exchangeable": {
                "mean": list(m.hyper.non_exchangeable.mean),
                "sd": list(m.hyper.non_exchangeable.sd),
                "correlation": m.hyper.non_exchangeable.correlation,
            },
        },
        "translation": {
            "allometric": {
                sp: {"log_location": p.log_location, "log_scale": p.log_scale}
                for sp, p in m.translation.allometric.items()
            },
            "bridging": {
                "default": {
                    "scale": m.translation.default_bridging.scale,
                    "upper": m.translation.default_bridging.upper,
                },
                **{
                    sub: {"scale": p.scale, "upper": p.upper}
                    for sub, p in m.translation.bridging.items()
                },
            },
        },
        "weights": {
            sub: {
                "species": {sp: wt for sp, wt in zip(m.species, w.species)},
                "human": w.human,
                "robust": w.robust,
            }
            for sub, w in m.weights.items()
        },
        "thresholds": {
            "underdose_cut": cfg.thresholds.underdose_cut,
            "overdose_cut": cfg.thresholds.overdose_cut,
            "target": cfg.thresholds.target,
            "feasibility_bound": cfg.thresholds.feasibility_bound,
            "start_confidence": cfg.thresholds.start_confidence,
        },
        "sampler": _sampler_payload(cfg.sampler),
        "reduced_sampler": _sampler_payload(cfg.reduced_sampler),
        "trial": {"max_sample_size": cfg.max_sample_size, "cohort_size": cfg.cohort_size},
    }


def _sampler_from(c: _Cursor, base: SamplerSettings) -> SamplerSettings:
    return replace(
        base,
        n_chains=c.get("n_chains", base.n_chains).integer(),
        n_iterations=c.get("n_iterations", base.n_iterations).integer(),
        n_burnin=c.get("n_burnin", base.n_burnin).integer(),
        thinning=c.get("thinning", base.thinning).integer(),
        seed=c.get("seed", base.seed).integer(),
    )


def config_from_payload(payload: Mapping[str, Any], where: str = "config") -> AppConfig:
    check_schema(payload, where)
    root = _Cursor(payload, where)

    grid_c = root.child("grid")
    grid = DoseGrid(
        doses=grid_c.child("doses").numbers(),
        reference_dose=grid_c.child("reference_dose").number(),
    )

    species = root.child("species").strings()
    subgroups = root.child("subgroups").strings()

    h = root.child("hyperpriors")
    nex_c = h.child("non_exchangeable")
    hyper = HyperpriorConfig(
        intercept_mean=h.child("intercept_mean").number(),
        intercept_sd=h.child("intercept_sd").number(),
        log_slope_mean=h.child("log_slope_mean").number(),
        log_slope_sd=h.child("log_slope_sd").number(),
        study_sd_scales=h.child("study_sd_scales").numbers(),
        human_sd_scales=h.child("human_sd_scales").numbers(),
        species_sd_scales=h.child("species_sd_scales").numbers(),
        non_exchangeable=NonExchangeablePrior(
            mean=nex_c.child("mean").numbers(),
            sd=nex_c.child("sd").numbers(),
            correlation=nex_c.child("correlation").number(),
        ),
    )

    t = root.child("translation")
    allometric = {}
    for sp, sub_payload in t.child("allometric").mapping().items():
        c = _Cursor(sub_payload, f"{t.where}.allometric.{sp}")
        allometric[sp] = LogNormalPrior(
            log_location=c.child("log_location").number(),
            log_scale=c.child("log_scale").number(),
        )
    bridging_map = dict(t.get("bridging", {}).mapping())
    default_bridging = BridgingPrior()
    bridging = {}
    for sub, sub_payload in bridging_map.items():
        c = _Cursor(sub_payload, f"{t.where}.bridging.{sub}")
        prior = BridgingPrior(scale=c.child("scale").number(), upper=c.child("upper").number())
        if sub == "default":
            default_bridging = prior
        else:
            bridging[sub] = prior
    translation = TranslationPriors(
        allometric=allometric, bridging=bridging, default_bridging=default_bridging
    )

    weights = {}
    for sub, w_payload in root.child("weights").mapping().items():
        c = _Cursor(w_payload, f"{where}.weights.{sub}")
        by_species = c.child("species").mapping()
        missing = [sp for sp in species if sp not in by_species]
        if missing:
            raise ConfigError(f"{c.where}.species: missing weight for {missing[0]!r}")
        try:
            weights[sub] = MixtureWeights(
                species=tuple(
                    _Cursor(by_species[sp], f"{c.where}.species.{sp}").number() for sp in species
                ),
                human=c.child("human").number(),
                robust=c.child("robust").number(),
            )
        except ConfigError as exc:
            raise ConfigError(f"{c.where}: {exc} (subgroup {sub!r})") from exc

    model = ModelConfig(
        species=species,
        subgroups=subgroups,
        hyper=hyper,
        translation=translation,
        weights=weights,
    )

    th = root.child("thresholds")
    thresholds = IntervalThresholds(
        underdose_cut=th.child("underdose_cut").number(),
        overdose_cut=th.child("overdose_cut").number(),
        target=th.child("target").number(),
        feasibility_bound=th.child("feasibility_bound").number(),
        start_confidence=th.child("start_confidence").number(),
    )

    trial = root.child("trial")
    return AppConfig(
        model=model,
        grid=grid,
        thresholds=thresholds,
        sampler=_sampler_from(root.child("sampler"), SamplerSettings()),
        reduced_sampler=_sampler_from(root.child("reduced_sampler"), REDUCED_SETTINGS),
        max_sample_size=trial.child("max_sample_size").integer(),
        cohort_size=trial.child("cohort_size").integer(),
    )


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    try:
        check_schema(payload, str(path))
    except DataError as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_payload(payload, where="config")


def write_config(cfg: AppConfig, path: str | Path) -> Path:
    return dump_json(config_to_payload(cfg), path)


# ---------------------------------------------------------------------------
# animal data (delimited text)


def load_animal_data(path: str | Path, reference_dose: float = 5.0) -> list[AnimalStudy]:
    """Parse the (study_id, species, dose, n, r) table into per-study records.

    Rows belonging to one study may appear in any order; doses within a
    study must be distinct.  Line numbers in errors count the header line.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read animal data file {path}: {exc}") from exc
    reader = csv.reader(line for line in text.splitlines() if line.strip())
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    if header != ANIMAL_DATA_HEADER:
        raise DataError(f"{path}: header must be {','.join(ANIMAL_DATA_HEADER)}, got {','.join(header)}")

    rows: dict[str, list[tuple[float, int, int]]] = {}
    species_of: dict[str, str] = {}
    for lineno, raw in enumerate(reader, start=2):
        if len(raw) != 5:
            raise DataError(f"{path} line {lineno}: expected 5 fields, got {len(raw)}")
        study_id, species, dose_s, n_s, r_s = (f.strip() for f in raw)
        try:
            dose = float(dose_s)
            n = int(n_s)
            r = int(r_s)
        except ValueError as exc:
            raise DataError(f"{path} line {lineno}: {exc}") from exc
        if r > n:
            raise DataError(f"{path} line {lineno}: r={r} exceeds n={n}")
        if study_id in species_of and species_of[study_id] != species:
            raise DataError(
                f"{path} line {lineno}: study {study_id} switches species "
                f"{species_of[study_id]} -> {species}"
            )
        species_of[study_id] = species
        rows.setdefault(study_id, []).append((dose, n, r))

    studies = []
    for study_id, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        doses = [e[0] for e in entries]
        if len(set(doses)) != len(doses):
            raise DataError(f"{path}: study {study_id} repeats a dose")
        studies.append(
            AnimalStudy(
                study_id=study_id,
                species=species_of[study_id],
                grid=DoseGrid(doses=tuple(doses), reference_dose=reference_dose),
                n_treated=tuple(e[1] for e in entries),
                n_events=tuple(e[2] for e in entries),
            )
        )
    return studies


def write_animal_data(studies: Sequence[AnimalStudy], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(ANIMAL_DATA_HEADER)]
    for s in studies:
        for dose, n, r in zip(s.grid.doses, s.n_treated, s.n_events):
            lines.append(f"{s.study_id},{s.species},{dose:g},{n},{r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# trial state


def trial_to_payload(trial: HumanTrialState) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "subgroup_id": trial.subgroup_id,
        "grid": {"doses": list(trial.grid.doses), "reference_dose": trial.grid.reference_dose},
        "max_sample_size": trial.max_sample_size,
        "cohort_size": trial.cohort_size,
        "cohorts": [
            {"dose_index": c.dose_index, "n_treated": c.n_treated, "n_events": c.n_events}
            for c in trial.cohorts
        ],
    }


def trial_from_payload(payload: Mapping[str, Any], where: str = "trial") -> HumanTrialState:
    check_schema(payload, where)
    root = _Cursor(payload, where)
    grid_c = root.child("grid")
    cohorts = []
    raw = root.child("cohorts").payload
    if not isinstance(raw, Sequence) or isinstance(raw, str):
        raise ConfigError(f"{where}.cohorts: expected an array")
    for i, c_payload in enumerate(raw):
        c = _Cursor(c_payload, f"{where}.cohorts[{i}]")
        cohorts.append(
            Cohort(
                dose_index=c.child("dose_index").integer(),
                n_treated=c.child("n_treated").integer(),
                n_events=c.child("n_events").integer(),
            )
        )
    return HumanTrialState(
        subgroup_id=root.child("subgroup_id").string(),
        grid=DoseGrid(
            doses=grid_c.child("doses").numbers(),
            reference_dose=grid_c.child("reference_dose").number(),
        ),
        cohorts=tuple(cohorts),
        max_sample_size=root.child("max_sample_size").integer(),
        cohort_size=root.child("cohort_size").integer(),
    )


def load_trial_state(path: str | Path) -> HumanTrialState:
    payload = load_json(path, kind="trial state")
    try:
        return trial_from_payload(payload, where=str(path))
    except ConfigError as exc:
        raise DataError(str(exc)) from exc


def write_trial_state(trial: HumanTrialState, path: str | Path) -> Path:
    return dump_json(trial_to_payload(trial), path)


# ---------------------------------------------------------------------------
# replicate records


def decision_to_payload(d: DoseDecision) -> dict:
    return {
        "kind": d.kind,
        "dose_index": d.dose_index,
        "rationale": [list(triple) for triple in d.rationale],
    }


def decision_from_payload(payload: Mapping[str, Any]) -> DoseDecision:
    return DoseDecision(
        kind=payload["kind"],
        dose_index=payload["dose_index"],
        rationale=tuple(tuple(float(x) for x in t) for t in payload["rationale"]),
    )


def _trial_record_to_payload(r: TrialRecord) -> dict:
    return {
        "subgroup": r.subgroup,
        "cohorts": [
            {"dose_index": c.dose_index, "n_treated": c.n_treated, "n_events": c.n_events}
            for c in r.cohorts
        ],
        "decisions": [
            {
                "n_cohorts": d.n_cohorts,
                "fit_seed": d.fit_seed,
                "decision": decision_to_payload(d.decision),
            }
            for d in r.decisions
        ],
        "stopped_early": r.stopped_early,
        "mtd_index": r.mtd_index,
        "bridging_mean": r.bridging_mean,
        "component_means": list(r.component_means) if r.component_means is not None else None,
    }


def _trial_record_from_payload(payload: Mapping[str, Any]) -> TrialRecord:
    return TrialRecord(
        subgroup=payload["subgroup"],
        cohorts=tuple(
            Cohort(c["dose_index"], c["n_treated"], c["n_events"]) for c in payload["cohorts"]
        ),
        decisions=tuple(
            InterimDecision(
                n_cohorts=d["n_cohorts"],
                fit_seed=d["fit_seed"],
                decision=decision_from_payload(d["decision"]),
            )
            for d in payload["decisions"]
        ),
        stopped_early=payload["stopped_early"],
        mtd_index=payload["mtd_index"],
        bridging_mean=payload["bridging_mean"],
        component_means=(
            tuple(payload["component_means"]) if payload["component_means"] is not None else None
        ),
    )


def records_to_payload(records: Sequence[TrialPairRecord]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "records": [
            {
                "scenario": r.scenario,
                "variant": r.variant,
                "replicate_seed": r.replicate_seed,
                "first": _trial_record_to_payload(r.first),
                "second": _trial_record_to_payload(r.second),
            }
            for r in records
        ],
    }


def records_from_payload(payload: Mapping[str, Any], where: str = "records") -> list[TrialPairRecord]:
    check_schema(payload, where)
    return [
        TrialPairRecord(
            scenario=r["scenario"],
            variant=r["variant"],
            replicate_seed=r["replicate_seed"],
            first=_trial_record_from_payload(r["first"]),
            second=_trial_record_from_payload(r["second"]),
        )
        for r in payload["records"]
    ]


def load_replicates(path: str | Path) -> list[TrialPairRecord]:
    return records_from_payload(load_json(path, kind="replicates"), where=str(path))


# ---------------------------------------------------------------------------
# reports

def round4(x):
    return None if x is None else round(float(x), 4)


def _round_list(xs, digits=4):
    return [round(float(x), digits) for x in xs]


def oc_report_to_payload(report) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": report.scenario,
        "variant": report.variant,
        "n_replicates": report.n_replicates,
        "trials": {
            sub: {
                "n_replicates": oc.n_replicates,
                "pct_stopped_early": round(oc.pct_stopped_early, 2),
                "pct_no_mtd": round(oc.pct_no_mtd, 2),
                "pct_mtd": _round_list(oc.pct_mtd, 2),
                "pct_correct": None if oc.pct_correct is None else round(oc.pct_correct, 2),
                "mean_patients_per_dose": _round_list(oc.mean_patients_per_dose, 3),
                "mean_dlt_count": round(oc.mean_dlt_count, 3),
            }
            for sub, oc in report.trials.items()
        },
    }


def recommendation_to_payload(
    decision: DoseDecision,
    grid: DoseGrid,
    *,
    subgroup: str,
    n_cohorts: int,
    fit_seed: int,
    data_digest: str,
    projection: bool = False,
) -> dict:
    """The one recommendation shape served by both the CLI and the service."""
    return {
        "schema_version": SCHEMA_VERSION,
        "subgroup": subgroup,
        "kind": decision.kind,
        "dose_index": decision.dose_index,
        "dose": None if decision.dose_index is None else grid.doses[decision.dose_index],
        "rationale": [
            {
                "dose": grid.doses[j],
                "p_under": round4(under),
                "p_target": round4(target),
                "p_over": round4(over),
            }
            for j, (under, target, over) in enumerate(decision.rationale)
        ],
        "n_cohorts": n_cohorts,
        "fit_seed": fit_seed,
        "data_digest": data_digest,
        "projection": projection,
    }


def posterior_to_payload(result, thresholds: IntervalThresholds, subgroup: str) -> dict:
    """Per-dose summaries, interval probabilities, component weights, scale factor."""
    pooled = result.p_pooled(subgroup)
    table = dose_interval_table(pooled, thresholds)
    med = np.median(pooled, axis=0)
    lo, hi = np.quantile(pooled, [0.025, 0.975], axis=0)
    mean = pooled.mean(axis=0)
    sd = pooled.std(axis=0, ddof=1)
    bridging = result.bridging_pooled(subgroup)
    b_lo, b_med, b_hi = np.quantile(bridging, [0.025, 0.5, 0.975])
    return {
        "subgroup": subgroup,
        "doses": list(result.doses[subgroup]),
        "summaries": [
            {
                "dose": dose,
                "median": round4(med[j]),
                "lower": round4(lo[j]),
                "upper": round4(hi[j]),
                "mean": round4(mean[j]),
                "sd": round4(sd[j]),
                "p_under": round4(table[j][0]),
                "p_target": round4(table[j][1]),
                "p_over": round4(table[j][2]),
            }
            for j, dose in enumerate(result.doses[subgroup])
        ],
        "components": {
            "labels": list(result.component_names),
            "weights": _round_list(result.component_frequencies(subgroup)),
        },
        "bridging": {
            "mean": round4(bridging.mean()),
            "sd": round4(bridging.std(ddof=1)),
            "median": round4(b_med),
            "lower": round4(b_lo),
            "upper": round4(b_hi),
        },
    }


def diagnostics_to_payload(result) -> dict:
    return {
        name: {
            "split_rhat": round4(d.split_rhat),
            "ess": None if d.ess is None else round(float(d.ess), 1),
            "degenerate": d.degenerate,
        }
        for name, d in sorted(result.diagnostics().items())
    }


def ess_rows_to_payload(rows) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "rows": [
            {
                "subgroup": r.subgroup,
                "dose": r.dose,
                "mean": round4(r.mean),
                "sd": round4(r.sd),
                "a": round4(r.a),
                "b": round4(r.b),
                "ess": round4(r.ess),
                "infeasible": r.infeasible,
            }
            for r in rows
        ],
    }


def predictive_to_payload(rows) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "rows": [
            {
                "subgroup": r.subgroup,
                "dose": r.dose,
                "median": round4(r.median),
                "lower": round4(r.lower),
                "upper": round4(r.upper),
                "mean": round4(r.mean),
                "sd": round4(r.sd),
            }
            for r in rows
        ],
    }


# ---------------------------------------------------------------------------
# run manifests


@dataclass(frozen=True)
class RunManifest:
    """Content-addressed description of one CLI run, written next to its outputs."""

    command: str
    seed: int
    engine: str
    engine_version: str
    created_utc: str
    inputs: Mapping[str, Mapping[str, str]]  # label -> {path, sha256}
    parameters: Mapping[str, Any]
    outputs: Mapping[str, str]  # filename -> sha256
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "inputs", {k: dict(v) for k, v in self.inputs.items()})
        object.__setattr__(self, "parameters", dict(self.parameters))
        object.__setattr__(self, "outputs", dict(self.outputs))


def manifest_to_payload(m: RunManifest) -> dict:
    return {
        "schema_version": m.schema_version,
        "command": m.command,
        "seed": m.seed,
        "engine": {"name": m.engine, "version": m.engine_version},
        "created_utc": m.created_utc,
        "inputs": {k: dict(v) for k, v in m.inputs.items()},
        "parameters": dict(m.parameters),
        "outputs": dict(m.outputs),
    }


def manifest_from_payload(payload: Mapping[str, Any], where: str = "manifest") -> RunManifest:
    check_schema(payload, where)
    root = _Cursor(payload, where)
    engine = root.child("engine")
    return RunManifest(
        command=root.child("command").string(),
        seed=root.child("seed").integer(),
        engine=engine.child("name").string(),
        engine_version=engine.child("version").string(),
        created_utc=root.child("created_utc").string(),
        inputs={k: dict(v) for k, v in root.child("inputs").mapping().items()},
        parameters=dict(root.child("parameters").mapping()),
        outputs={k: str(v) for k, v in root.child("outputs").mapping().items()},
    )


def load_manifest(path: str | Path) -> RunManifest:
    return manifest_from_payload(load_json(path, kind="manifest"), where=str(path))


def manifest_input(path: str | Path) -> dict[str, str]:
    return {"path": str(Path(path).resolve()), "sha256": sha256_file(path)}


def write_results(
    artifacts: Mapping[str, Any],
    out_dir: str | Path,
    *,
    command: str,
    seed: int,
    inputs: Mapping[str, Mapping[str, str]],
    parameters: Mapping[str, Any],
) -> RunManifest:
    """Persist artifacts plus the manifest describing how they were made.

    artifacts maps filename to a JSON payload, or to raw bytes for binary
    formats (filename decides: .json gets canonical JSON treatment).
    """
    from . import __version__

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, content in artifacts.items():
        target = out / name
        if isinstance(content, (bytes, bytearray)):
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(bytes(content))
        else:
            dump_json(content, target)
        digests[name] = sha256_file(target)
    manifest = RunManifest(
        command=command,
        seed=seed,
        engine="exbridge",
        engine_version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        inputs=inputs,
        parameters=parameters,
        outputs=digests,
    )
    dump_json(manifest_to_payload(manifest), out / "manifest.json")
    return manifest


def array_bytes(arr: np.ndarray) -> bytes:
    """Serialized ndarray (portable .npy bytes, full precision)."""
    import io as _io

    buf = _io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()
