"""HTTP/JSON session API for the interactive planning loop.

Sessions live in memory with an append-only NDJSON journal; replaying the
journal at startup reconstructs every session exactly (the belief is a
deterministic function of the recorded observations).  Per-session writes
are serialized with a lock; reads never mutate state.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from assayplan import __version__
from assayplan.belief import BeliefContext, CandidateState, KernelConfig
from assayplan.config import RunConfig
from assayplan.data import Dataset, FeatureKind
from assayplan.ensemble import (
    EnsembleConfig,
    Mlasp,
    ParetoPoint,
    build_mlasp,
    pareto_sweep,
    run_ensemble,
    vote_actions,
)
from assayplan.env import RewardConfig
from assayplan.planner import PlannerParams

SCHEMA_VERSION = 1

# Interactive defaults: a reduced search budget keeps request latency
# tolerable; batch-scale budgets belong to the CLI.
INTERACTIVE_MEMBERS = 20
INTERACTIVE_ITERS = 2000


@dataclass
class Session:
    session_id: str
    state: CandidateState
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    version: int = 0  # bumped on every outcome; invalidates the cache
    recommendation_cache: dict = field(default_factory=dict)


class SessionStore:
    def __init__(
        self,
        dataset: Dataset,
        kernel_config: KernelConfig,
        run_config: RunConfig,
        journal_path: str | Path | None = None,
    ):
        self.dataset = dataset
        self.kernel_config = kernel_config
        self.run_config = run_config
        self.ctx = BeliefContext(dataset, kernel_config)
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        self.journal_path = Path(journal_path) if journal_path else None
        if self.journal_path and self.journal_path.exists():
            self._replay()

    # -- journal ------------------------------------------------------------

    def _journal(self, event: dict):
        if not self.journal_path:
            return
        event = dict(event)
        event["ts"] = time.time()
        with open(self.journal_path, "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay(self):
        for line in self.journal_path.read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["event"] == "created":
                session = Session(
                    session_id=event["session_id"],
                    state=CandidateState(known_features=dict(event["features"])),
                )
                self.sessions[session.session_id] = session
            elif event["event"] == "outcome":
                session = self.sessions[event["session_id"]]
                revealed = {
                    self.dataset.assay(a).outcome_feature: v
                    for a, v in event["outcomes"].items()
                }
                session.state = session.state.with_observations(
                    revealed, tuple(sorted(event["outcomes"]))
                )
                session.version += 1

    # -- helpers ------------------------------------------------------------

    def _stats(self, state: CandidateState):
        return self.ctx.stats_of(self.ctx.state_distances(state))

    def reward_config(self, overrides: dict | None = None) -> RewardConfig:
        cfg = self.run_config
        merged = {
            "tau": cfg.tau,
            "epsilon": cfg.epsilon,
            "gamma": cfg.gamma,
            "penalty": cfg.penalty,
            "mode": cfg.mode,
        }
        if overrides:
            merged.update({k: v for k, v in overrides.items() if v is not None})
        rho = cfg.rho
        if rho is None:
            rho = (1.0,) + (0.0,) * (len(self.dataset.cost_components) - 1)
        return RewardConfig(
            mode=merged["mode"],
            rho=rho,
            gamma=merged["gamma"],
            penalty=merged["penalty"],
            horizon=cfg.horizon,
            epsilon=merged["epsilon"],
            tau=merged["tau"],
        )

    # -- operations ----------------------------------------------------------

    def create_session(self, features: dict[str, float]) -> tuple[Session, dict]:
        known = {f.feature_id for f in self.dataset.feature_specs}
        unknown = sorted(set(features) - known)
        if unknown:
            raise ApiError(400, f"unknown feature(s): {', '.join(unknown)}")
        predictors = {
            f.feature_id
            for f in self.dataset.feature_specs
            if f.kind is FeatureKind.PREDICTOR
        }
        # An empty feature set is a legal cold start (uniform belief), but a
        # partial predictor panel is almost certainly a client mistake.
        if features and predictors and not predictors <= set(features):
            missing = sorted(predictors - set(features))
            raise ApiError(422, f"missing required predictor(s): {', '.join(missing)}")
        session = Session(
            session_id=uuid.uuid4().hex[:12],
            state=CandidateState(known_features=dict(features)),
        )
        with self.lock:
            self.sessions[session.session_id] = session
        self._journal(
            {
                "event": "created",
                "session_id": session.session_id,
                "features": features,
            }
        )
        stats = self._stats(session.state)
        return session, {
            "schema_version": SCHEMA_VERSION,
            "session_id": session.session_id,
            "h": stats.uncertainty,
            "l": stats.goal_likelihood,
            "g_mean": stats.g_mean,
        }

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, f"unknown session {session_id!r}")
        return session

    def record_outcome(self, session_id: str, outcomes: dict[str, float]) -> dict:
        session = self.get(session_id)
        with session.lock:
            assay_ids = {a.assay_id for a in self.dataset.assay_specs}
            unknown = sorted(set(outcomes) - assay_ids)
            if unknown:
                raise ApiError(400, f"unknown assay(s): {', '.join(unknown)}")
            dupes = sorted(set(outcomes) & set(session.state.measured_assays))
            if dupes:
                raise ApiError(409, f"assay(s) already measured: {', '.join(dupes)}")
            revealed = {
                self.dataset.assay(a).outcome_feature: float(v)
                for a, v in outcomes.items()
            }
            session.state = session.state.with_observations(
                revealed, tuple(sorted(outcomes))
            )
            session.version += 1
            session.recommendation_cache.clear()
            self._journal(
                {
                    "event": "outcome",
                    "session_id": session_id,
                    "outcomes": outcomes,
                }
            )
            stats = self._stats(session.state)
            return {
                "schema_version": SCHEMA_VERSION,
                "session_id": session_id,
                "h": stats.uncertainty,
                "l": stats.goal_likelihood,
                "g_mean": stats.g_mean,
                "measured_assays": list(session.state.measured_assays),
                "top_analogs": self._top_analogs(session.state, 5),
            }

    def _top_analogs(self, state: CandidateState, top_k: int) -> list[dict]:
        d = self.ctx.state_distances(state)
        weights = self.ctx.weights_of(d, set())
        order = sorted(
            range(len(weights.normalized)),
            key=lambda i: (-weights.normalized[i], i),
        )[: max(top_k, 0)]
        return [
            {
                "record_index": i + 1,
                "record_id": self.dataset.records[i].record_id,
                "weight": float(weights.normalized[i]),
                "target": self.dataset.records[i].target_g,
            }
            for i in order
        ]

    def belief(self, session_id: str, top_k: int) -> dict:
        session = self.get(session_id)
        stats = self._stats(session.state)
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session_id,
            "h": stats.uncertainty,
            "l": stats.goal_likelihood,
            "g_mean": stats.g_mean,
            "measured_assays": list(session.state.measured_assays),
            "top_analogs": self._top_analogs(session.state, top_k),
        }

    def recommendation(self, session_id: str, overrides: dict) -> dict:
        session = self.get(session_id)
        with session.lock:
            reward_config = self.reward_config(overrides)
            stats = self._stats(session.state)
            if stats.uncertainty <= reward_config.epsilon:
                raise ApiError(
                    409,
                    "session is terminal: uncertainty "
                    f"{stats.uncertainty:.6g} <= epsilon {reward_config.epsilon:.6g}",
                )
            ne = overrides.get("ne") or INTERACTIVE_MEMBERS
            iters = overrides.get("iters") or INTERACTIVE_ITERS
            cache_key = (
                session.version,
                reward_config.tau,
                reward_config.epsilon,
                ne,
                iters,
            )
            cached = session.recommendation_cache.get(cache_key)
            if cached is not None:
                return cached
            params = PlannerParams(
                n_itr=iters,
                c_ucb=self.run_config.c_ucb,
                max_batch=self.run_config.m,
            )
            ens = EnsembleConfig(
                n_members=ne, base_seed=self.run_config.seed, planner=params
            )
            policies = run_ensemble(
                session.state, self.dataset, self.kernel_config, reward_config, ens
            )
            mlasp = build_mlasp(
                policies, session.state, self.dataset, self.kernel_config,
                reward_config,
            )
            root_key = (tuple(sorted(session.state.measured_assays)), ())
            hist = vote_actions(policies, root_key)
            points = pareto_sweep(
                session.state,
                self.dataset,
                self.kernel_config,
                reward_config,
                EnsembleConfig(
                    n_members=max(2, ne // 4),
                    base_seed=self.run_config.seed,
                    planner=params,
                ),
                list(self.run_config.sweep_grid),
                self.run_config.sweep,
            )
            body = {
                "schema_version": SCHEMA_VERSION,
                "session_id": session_id,
                "h": stats.uncertainty,
                "l": stats.goal_likelihood,
                "mlasp": _mlasp_dict(mlasp, self.dataset),
                "votes": _votes_dict(hist),
                "pareto": [_pareto_dict(p) for p in points],
            }
            session.recommendation_cache[cache_key] = body
            return body


def _mlasp_dict(mlasp: Mlasp, dataset: Dataset) -> dict:
    return {
        "constraint_met": mlasp.constraint_met,
        "truncated": mlasp.truncated,
        "final_h": mlasp.final_h,
        "final_l": mlasp.final_l,
        "cost_components": list(dataset.cost_components),
        "total_cost": list(mlasp.total_cost()),
        "steps": [
            {
                "action": s.action.label(),
                "assays": list(s.action.assays),
                "stop": s.action.stop,
                "vote_fraction": s.vote_fraction,
                "cumulative_cost": list(s.cumulative_cost),
                "post_step_h": s.post_step_h,
            }
            for s in mlasp.steps
        ],
    }


def _votes_dict(hist) -> list[dict]:
    ranked = sorted(hist.counts.items(), key=lambda kv: (-kv[1], kv[0].sort_key()))
    out = [
        {"action": action.label(), "votes": count} for action, count in ranked
    ]
    out.append({"action": "abstain", "votes": hist.abstentions})
    return out


def _pareto_dict(p: ParetoPoint) -> dict:
    return {
        "tolerance": p.tolerance,
        "sweep": p.sweep_kind,
        "spend": p.spend,
        "first_action": p.first_action.label(),
        "constraint_met": p.constraint_met,
        "dominated": p.dominated,
    }


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def create_app(
    dataset: Dataset,
    kernel_config: KernelConfig | None = None,
    run_config: RunConfig | None = None,
    journal_path: str | Path | None = None,
) -> FastAPI:
    store = SessionStore(
        dataset,
        kernel_config or KernelConfig(),
        run_config or RunConfig(),
        journal_path,
    )
    app = FastAPI(title="assayplan", version=__version__)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"schema_version": SCHEMA_VERSION, "error": exc.message},
        )

    @app.get("/health")
    def health():
        return {
            "schema_version": SCHEMA_VERSION,
            "status": "ok",
            "version": __version__,
            "kernel_backend": _backend_name(),
            "sessions": len(store.sessions),
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        features = body.get("features", {})
        if not isinstance(features, dict):
            raise ApiError(400, "features must be an object")
        _, response = store.create_session(
            {k: float(v) for k, v in features.items()}
        )
        return response

    @app.get("/sessions/{session_id}/recommendation")
    def recommendation(
        session_id: str,
        tau: float | None = None,
        epsilon: float | None = None,
        ne: int | None = None,
        iters: int | None = None,
    ):
        return store.recommendation(
            session_id, {"tau": tau, "epsilon": epsilon, "ne": ne, "iters": iters}
        )

    @app.post("/sessions/{session_id}/outcomes")
    def outcomes(session_id: str, body: dict):
        raw = body.get("outcomes", body)
        if not isinstance(raw, dict) or not raw:
            raise ApiError(400, "outcomes must be a non-empty object")
        return store.record_outcome(
            session_id, {k: float(v) for k, v in raw.items()}
        )

    @app.get("/sessions/{session_id}/belief")
    def belief(session_id: str, top_k: int = 5):
        return store.belief(session_id, top_k)

    return app


def _backend_name() -> str:
    from assayplan import kernels

    return kernels.BACKEND
