"""Similarity weights over historical records and the derived state functionals.

The weight of record i for a candidate state is exp(-lambda_w * d_i), with
d_i the variance-normalized squared distance over every feature currently
known for the candidate.  Weights are kept in a stabilized form
exp(-lambda_w * (d_i - min_j d_j)); the common factor cancels under
normalization and protects against total underflow far from the data.

Distances accumulate additively as outcomes arrive, so a belief update is
an O(N * batch) increment instead of a from-scratch recomputation — the two
agree to float rounding (tested to 1e-12).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from assayplan import kernels
from assayplan.data import Dataset, HistoricalRecord

COLLAPSE_FLOOR = 1e-300


class BeliefError(Exception):
    pass


class BeliefCollapseError(BeliefError):
    """Total weight over the target-support records underflowed."""


@dataclass(frozen=True)
class CandidateState:
    """Planning state: everything known about the candidate so far."""

    known_features: dict[str, float]
    measured_assays: tuple[str, ...] = ()
    step: int = 0

    def with_observations(
        self, revealed: dict[str, float], assay_ids: tuple[str, ...]
    ) -> "CandidateState":
        known = dict(self.known_features)
        known.update(revealed)
        return CandidateState(
            known_features=known,
            measured_assays=self.measured_assays + tuple(assay_ids),
            step=self.step + 1,
        )


@dataclass(frozen=True)
class KernelConfig:
    lambda_w: float = 1.0
    target_leak_guard: bool = True

    def __post_init__(self):
        if self.lambda_w <= 0:
            raise BeliefError("lambda_w must be positive")


@dataclass(frozen=True)
class BeliefWeights:
    """Belief over historical records for one candidate state.

    ``distances`` is the accumulated d_i vector; ``raw`` the stabilized
    kernel values; ``normalized`` sums to one.  ``incorporated`` lists the
    features already folded into the distances (guards double counting).
    """

    distances: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    incorporated: frozenset[str]


@dataclass(frozen=True)
class BeliefStats:
    target_mass: float
    g_mean: float
    uncertainty: float
    goal_likelihood: float


class BeliefContext:
    """Precomputed array views of a dataset for the weight kernels.

    Build once, share read-only across planner runs.
    """

    def __init__(self, dataset: Dataset, config: KernelConfig):
        if not dataset.stats_computed:
            raise BeliefError("compute_feature_stats must run before belief ops")
        self.dataset = dataset
        self.config = config
        n = dataset.n_records

        guard = config.target_leak_guard and dataset.target_feature_id is not None
        self.admissible: list[str] = [
            s.feature_id
            for s in dataset.feature_specs
            if not (guard and s.feature_id == dataset.target_feature_id)
        ]
        self.row_of = {fid: i for i, fid in enumerate(self.admissible)}

        self.matrix = np.empty((len(self.admissible), n), dtype=np.float64)
        self.coefs = np.empty(len(self.admissible), dtype=np.float64)
        for row, fid in enumerate(self.admissible):
            spec = dataset.feature(fid)
            col = np.array([r.features[fid] for r in dataset.records])
            if np.isnan(col).any():
                raise BeliefError(
                    f"feature {fid!r} has missing values but is used in distances"
                )
            self.matrix[row] = col
            self.coefs[row] = spec.lambda_k / spec.sigma2_k

        self.columns = {
            s.feature_id: np.array(
                [r.features[s.feature_id] for r in dataset.records]
            )
            for s in dataset.feature_specs
        }

        g_idx = sorted(i - 1 for i in dataset.target_index_set())
        self.g_idx = np.array(g_idx, dtype=np.int64)
        self.g_vals = np.array(
            [dataset.records[i].target_g for i in g_idx], dtype=np.float64
        )
        g_min, g_max = dataset.goal_range
        self.g_in = ((self.g_vals >= g_min) & (self.g_vals <= g_max)).astype(
            np.float64
        )
        self.n = n

    def _rows_for(self, features: dict[str, float]):
        items = sorted(
            ((self.row_of[f], v) for f, v in features.items() if f in self.row_of),
            key=lambda t: t[0],
        )
        rows = np.array([r for r, _ in items], dtype=np.int64)
        values = np.array([v for _, v in items], dtype=np.float64)
        return rows, values

    def state_distances(self, state: CandidateState) -> np.ndarray:
        rows, values = self._rows_for(state.known_features)
        base = np.zeros(self.n, dtype=np.float64)
        return kernels.distance_accumulate(
            base, self.matrix, rows, self.coefs[rows], values
        )

    def distances_after(self, distances: np.ndarray, obs: dict[str, float]):
        rows, values = self._rows_for(obs)
        return kernels.distance_accumulate(
            distances, self.matrix, rows, self.coefs[rows], values
        )

    def weights_of(self, distances: np.ndarray, incorporated) -> BeliefWeights:
        raw, _, total = kernels.weights_from_distances(
            distances, self.config.lambda_w
        )
        return BeliefWeights(
            distances=distances,
            raw=raw,
            normalized=raw / total,
            incorporated=frozenset(incorporated),
        )

    def stats_of(self, distances: np.ndarray) -> BeliefStats:
        mass, gbar, h, l = kernels.target_stats(
            distances, self.config.lambda_w, self.g_idx, self.g_vals, self.g_in
        )
        if mass < COLLAPSE_FLOOR:
            raise BeliefCollapseError("belief collapsed off target support")
        return BeliefStats(
            target_mass=mass, g_mean=gbar, uncertainty=h, goal_likelihood=l
        )

    def sample_from(self, distances: np.ndarray, u: float) -> int:
        return kernels.sample_index(distances, self.config.lambda_w, u)


def distance(
    state: CandidateState,
    record: HistoricalRecord,
    dataset: Dataset,
    config: KernelConfig,
) -> float:
    """Variance-normalized squared distance from the state to one record.

    Scalar reference path, independent of the array kernels; the two are
    cross-checked in tests.
    """
    guard = config.target_leak_guard and dataset.target_feature_id is not None
    total = 0.0
    for spec in dataset.feature_specs:
        fid = spec.feature_id
        if fid not in state.known_features:
            continue
        if guard and fid == dataset.target_feature_id:
            continue
        if spec.sigma2_k is None:
            raise BeliefError("compute_feature_stats must run before belief ops")
        if fid not in record.features:
            raise BeliefError(f"record {record.record_id!r} missing feature {fid!r}")
        diff = state.known_features[fid] - record.features[fid]
        total += spec.lambda_k * diff * diff / spec.sigma2_k
    return total


def compute_weights(
    state: CandidateState, dataset: Dataset, config: KernelConfig
) -> BeliefWeights:
    """Similarity weights for a state, from scratch (uniform when nothing
    is known)."""
    ctx = BeliefContext(dataset, config)
    d = ctx.state_distances(state)
    incorporated = {f for f in state.known_features if f in ctx.row_of}
    return ctx.weights_of(d, incorporated)


def update_weights_incremental(
    weights: BeliefWeights,
    new_observations: dict[str, float],
    dataset: Dataset,
    config: KernelConfig,
) -> BeliefWeights:
    """Fold new observations into the belief by additive distance update.

    Mathematically equal to recomputation on the augmented state; observing
    a feature twice would double-count its evidence, hence the error.
    """
    ctx = BeliefContext(dataset, config)
    dupes = weights.incorporated & set(new_observations)
    if dupes:
        raise BeliefError(
            f"feature(s) already incorporated in the belief: {sorted(dupes)}"
        )
    admissible_new = {f: v for f, v in new_observations.items() if f in ctx.row_of}
    if not admissible_new:
        return BeliefWeights(
            distances=weights.distances,
            raw=weights.raw,
            normalized=weights.normalized,
            incorporated=weights.incorporated,
        )
    d = ctx.distances_after(weights.distances, admissible_new)
    return ctx.weights_of(d, weights.incorporated | set(admissible_new))


def renormalize_over_targets(weights: BeliefWeights, dataset: Dataset) -> np.ndarray:
    """Restrict raw weights to records with a target value and renormalize.

    Returned vector is aligned with the sorted target index set.
    """
    g_idx = sorted(i - 1 for i in dataset.target_index_set())
    restricted = weights.raw[g_idx]
    mass = restricted.sum()
    if mass < COLLAPSE_FLOOR:
        raise BeliefCollapseError("belief collapsed off target support")
    return restricted / mass


def state_uncertainty(tilde_weights: np.ndarray, targets: np.ndarray) -> float:
    """Weighted variance of the target over the target-support records."""
    gbar = float(tilde_weights @ targets)
    return float(tilde_weights @ (targets - gbar) ** 2)


def goal_likelihood(
    tilde_weights: np.ndarray, targets: np.ndarray, goal_range: tuple[float, float]
) -> float:
    """Weighted probability that the target lands in the closed goal range."""
    inside = (targets >= goal_range[0]) & (targets <= goal_range[1])
    return float(tilde_weights @ inside.astype(np.float64))
