"""HTTP service for live trial conduct.

One session per running trial.  Mutations (cohort submissions) are
serialized per session and atomic: the cohort, the refreshed posterior,
and the log entry land together or not at all.  Reads never block and
never mutate; what-if projections fit a hypothetical state and are kept
out of the decision log.

Every fit inside a session is seeded by (session seed, cohort count), so
an auditor can replay the decision log offline and reproduce each
recommendation exactly.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Mapping, Sequence

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import io as iomod
from . import rng as rngmod
from .cli import _restrict_model
from .decisions import recommend_next_dose, starting_dose
from .errors import ConfigError, DataError, ExbridgeError
from .mcmc import PosteriorResult, run_posterior
from .types import AnimalStudy, Cohort, HumanTrialState

API_PREFIX = "/v1"


class CohortPayload(BaseModel):
    dose_index: int = Field(ge=0)
    n_treated: int = Field(gt=0)
    n_dlt: int = Field(ge=0)


class CodataTrialPayload(BaseModel):
    subgroup_id: str
    cohorts: list[CohortPayload] = []


class CreateTrialRequest(BaseModel):
    subgroup_id: str
    use_animal_data: bool = True
    codata_trials: list[CodataTrialPayload] = []
    seed: int | None = None
    max_sample_size: int | None = Field(default=None, gt=0)
    cohort_size: int | None = Field(default=None, gt=0)


class SubmitCohortRequest(CohortPayload):
    override: bool = False


@dataclass
class TrialSession:
    """Mutable server-side state for one running trial."""

    session_id: str
    seed: int
    trial: HumanTrialState
    codata: tuple[HumanTrialState, ...]
    animal: tuple[AnimalStudy, ...]
    model: Any
    thresholds: Any
    settings: Any
    log: list[dict] = field(default_factory=list)
    cache: PosteriorResult | None = None
    cache_digest: str | None = None
    last_recommended: int | None = None
    busy: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)

    def data_digest(self) -> str:
        return iomod.sha256_payload(iomod.trial_to_payload(self.trial))

    def fit_seed(self, n_cohorts: int) -> int:
        return rngmod.mix64(self.seed, rngmod.stream_word(rngmod.SESSION, n_cohorts))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fit_session(session: TrialSession, trial: HumanTrialState) -> PosteriorResult:
    trials = [*session.codata, trial]
    settings = replace(session.settings, seed=session.fit_seed(len(trial.cohorts)))
    return run_posterior(session.animal, trials, session.model, settings)


def _decide(session: TrialSession, trial: HumanTrialState, result: PosteriorResult):
    draws = result.p_pooled(trial.subgroup_id)
    if trial.cohorts:
        return recommend_next_dose(draws, trial, session.thresholds)
    return starting_dose(draws, session.thresholds)


def _recommendation_payload(
    session: TrialSession, trial: HumanTrialState, decision, *, projection: bool
) -> dict:
    return iomod.recommendation_to_payload(
        decision,
        trial.grid,
        subgroup=trial.subgroup_id,
        n_cohorts=len(trial.cohorts),
        fit_seed=session.fit_seed(len(trial.cohorts)),
        data_digest=iomod.sha256_payload(iomod.trial_to_payload(trial)),
        projection=projection,
    )


def create_app(
    config,
    animal_studies: Sequence[AnimalStudy] = (),
    *,
    token: str | None = None,
    full_budget: bool = False,
) -> FastAPI:
    """The trial-conduct API bound to one loaded configuration."""
    app = FastAPI(title="exbridge trial conduct", version="1")
    sessions: dict[str, TrialSession] = {}
    registry_lock = threading.Lock()
    settings = config.settings(full_budget)

    def require_token(request: Request) -> None:
        if token is None:
            return
        supplied = request.headers.get("authorization", "")
        if supplied != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    guarded = [Depends(require_token)]

    def get_session(session_id: str) -> TrialSession:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    def cached_posterior(session: TrialSession) -> PosteriorResult:
        """Posterior for the session's current data, reusing the cache when
        its digest still matches.  Computation runs without the session lock;
        the cache is only swapped in if the data did not move meanwhile."""
        trial = session.trial
        digest = iomod.sha256_payload(iomod.trial_to_payload(trial))
        if session.cache is not None and session.cache_digest == digest:
            return session.cache
        result = _fit_session(session, trial)
        if session.trial is trial:
            session.cache = result
            session.cache_digest = digest
        return result

    @app.exception_handler(ExbridgeError)
    async def engine_error_handler(request: Request, exc: ExbridgeError):
        status = 422 if isinstance(exc, (ConfigError, DataError)) else 500
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.post(f"{API_PREFIX}/trials", status_code=201, dependencies=guarded)
    def create_trial(body: CreateTrialRequest) -> dict:
        codata = tuple(
            HumanTrialState(
                subgroup_id=c.subgroup_id,
                grid=config.grid,
                cohorts=tuple(
                    Cohort(p.dose_index, p.n_treated, p.n_dlt) for p in c.cohorts
                ),
                max_sample_size=max(
                    config.max_sample_size,
                    sum(p.n_treated for p in c.cohorts),
                ),
                cohort_size=config.cohort_size,
            )
            for c in body.codata_trials
        )
        trial = HumanTrialState(
            subgroup_id=body.subgroup_id,
            grid=config.grid,
            cohorts=(),
            max_sample_size=body.max_sample_size or config.max_sample_size,
            cohort_size=body.cohort_size or config.cohort_size,
        )
        subgroups = (*(c.subgroup_id for c in codata), body.subgroup_id)
        model = _restrict_model(config.model, subgroups)
        seed = body.seed if body.seed is not None else uuid.uuid4().int % 2**63
        session = TrialSession(
            session_id=uuid.uuid4().hex,
            seed=seed,
            trial=trial,
            codata=codata,
            animal=tuple(animal_studies) if body.use_animal_data else (),
            model=model,
            thresholds=config.thresholds,
            settings=settings,
        )
        session.log.append(
            {
                "index": 0,
                "kind": "created",
                "at": _now(),
                "seed": seed,
                "subgroup_id": body.subgroup_id,
                "use_animal_data": body.use_animal_data,
                "codata_subgroups": [c.subgroup_id for c in codata],
                "max_sample_size": trial.max_sample_size,
                "cohort_size": trial.cohort_size,
            }
        )
        with registry_lock:
            sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "subgroup_id": trial.subgroup_id,
            "seed": seed,
            "doses": list(config.grid.doses),
            "reference_dose": config.grid.reference_dose,
            "max_sample_size": trial.max_sample_size,
            "cohort_size": trial.cohort_size,
        }

    @app.get(f"{API_PREFIX}/trials/{{session_id}}", dependencies=guarded)
    def get_status(session_id: str) -> dict:
        session = get_session(session_id)
        trial = session.trial
        return {
            "session_id": session.session_id,
            "subgroup_id": trial.subgroup_id,
            "n_cohorts": len(trial.cohorts),
            "n_enrolled": trial.n_enrolled,
            "n_events": sum(c.n_events for c in trial.cohorts),
            "is_full": trial.is_full,
            "busy": session.busy,
            "seed": session.seed,
            "data_digest": session.data_digest(),
            "accrual": [
                {"dose_index": c.dose_index, "n_treated": c.n_treated, "n_events": c.n_events}
                for c in trial.cohorts
            ],
        }

    @app.get(f"{API_PREFIX}/trials/{{session_id}}/posterior", dependencies=guarded)
    def get_posterior(session_id: str) -> dict:
        session = get_session(session_id)
        trial = session.trial
        result = cached_posterior(session)
        payload = iomod.posterior_to_payload(result, session.thresholds, trial.subgroup_id)
        payload.update(
            {
                "schema_version": iomod.SCHEMA_VERSION,
                "n_cohorts": len(trial.cohorts),
                "fit_seed": session.fit_seed(len(trial.cohorts)),
                "data_digest": iomod.sha256_payload(iomod.trial_to_payload(trial)),
            }
        )
        return payload

    @app.get(f"{API_PREFIX}/trials/{{session_id}}/recommendation", dependencies=guarded)
    def get_recommendation(session_id: str) -> dict:
        session = get_session(session_id)
        trial = session.trial
        result = cached_posterior(session)
        decision = _decide(session, trial, result)
        if session.trial is trial and decision.dose_index is not None:
            session.last_recommended = decision.dose_index
        return _recommendation_payload(session, trial, decision, projection=False)

    @app.post(f"{API_PREFIX}/trials/{{session_id}}/cohorts", dependencies=guarded)
    def submit_cohort(session_id: str, body: SubmitCohortRequest) -> dict:
        session = get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise HTTPException(
                status_code=409,
                detail="another submission is in progress for this session; retry shortly",
                headers={"Retry-After": "2"},
            )
        try:
            session.busy = True
            trial = session.trial
            if trial.is_full:
                raise HTTPException(status_code=409, detail="trial is already full")
            if (
                session.last_recommended is not None
                and body.dose_index != session.last_recommended
                and not body.override
            ):
                raise HTTPException(
                    status_code=409,
                    detail=(
                        f"dose_index {body.dose_index} is not the recommended "
                        f"{session.last_recommended}; set override to force"
                    ),
                )
            try:
                new_trial = trial.with_cohort(
                    Cohort(body.dose_index, body.n_treated, body.n_dlt)
                )
            except ExbridgeError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc

            result = _fit_session(session, new_trial)
            decision = _decide(session, new_trial, result)
            payload = _recommendation_payload(session, new_trial, decision, projection=False)

            # commit point: state, cache, and log move together
            session.trial = new_trial
            session.cache = result
            session.cache_digest = payload["data_digest"]
            if decision.dose_index is not None:
                session.last_recommended = decision.dose_index
            session.log.append(
                {
                    "index": len(session.log),
                    "kind": "cohort",
                    "at": _now(),
                    "cohort": {
                        "dose_index": body.dose_index,
                        "n_treated": body.n_treated,
                        "n_dlt": body.n_dlt,
                    },
                    "override": body.override,
                    "recommendation": payload,
                }
            )
            return payload
        finally:
            session.busy = False
            session.lock.release()

    @app.post(f"{API_PREFIX}/trials/{{session_id}}/what-if", dependencies=guarded)
    def what_if(session_id: str, body: CohortPayload) -> dict:
        session = get_session(session_id)
        trial = session.trial
        if trial.is_full:
            raise HTTPException(status_code=409, detail="trial is already full")
        try:
            hypothetical = trial.with_cohort(
                Cohort(body.dose_index, body.n_treated, body.n_dlt)
            )
        except ExbridgeError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        result = _fit_session(session, hypothetical)
        decision = _decide(session, hypothetical, result)
        return _recommendation_payload(session, hypothetical, decision, projection=True)

    @app.get(f"{API_PREFIX}/trials/{{session_id}}/log", dependencies=guarded)
    def get_log(session_id: str) -> dict:
        session = get_session(session_id)
        return {"session_id": session.session_id, "entries": list(session.log)}

    return app


def replay_log(entries: Sequence[Mapping[str, Any]], config) -> HumanTrialState:
    """Reconstruct the trial state from a session's decision log."""
    if not entries or entries[0].get("kind") != "created":
        raise DataError("log must start with a creation entry")
    head = entries[0]
    trial = HumanTrialState(
        subgroup_id=head["subgroup_id"],
        grid=config.grid,
        cohorts=(),
        max_sample_size=head["max_sample_size"],
        cohort_size=head["cohort_size"],
    )
    for entry in entries[1:]:
        if entry.get("kind") != "cohort":
            raise DataError(f"unexpected log entry kind {entry.get('kind')!r}")
        c = entry["cohort"]
        trial = trial.with_cohort(Cohort(c["dose_index"], c["n_treated"], c["n_dlt"]))
    return trial
