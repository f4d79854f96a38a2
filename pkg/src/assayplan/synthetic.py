"""Synthetic benchmark: linear generator, exact and similarity-based value
iteration baselines, and the policy-alignment protocol.

The generator draws independent truncated-normal features and a linear
target with truncated-normal noise, so the conditional variance of the
target given any measured subset has a closed form.  That makes an exact
optimal subset-selection policy computable and turns the planner's
alignment with it into a measurable score.

Moments entering the exact baseline are the empirical moments of the
generated sample: truncation perturbs the theoretical ones slightly, and
the similarity planners only ever see the sample.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from assayplan.belief import BeliefContext, CandidateState, KernelConfig
from assayplan.data import (
    AssaySpec,
    Dataset,
    FeatureKind,
    FeatureSpec,
    HistoricalRecord,
    compute_feature_stats,
)
from assayplan.ensemble import (
    EnsembleConfig,
    run_ensemble,
    top_k_actions,
    vote_actions,
)
from assayplan.env import RewardConfig
from assayplan.planner import PlannerParams

REJECTION_CAP = 10**6


class SyntheticError(Exception):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the linear generator and the benchmark MDP."""

    mu: tuple[float, ...]
    sigma: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    beta: tuple[float, ...]
    costs: tuple[float, ...]
    n_records: int = 200
    noise_mu: float = 0.0
    noise_sigma: float = 5.0
    noise_lower: float = -10.0
    noise_upper: float = 10.0
    target_cost: float = 10.0  # terminal measurement cost; not part of the recursion
    gamma: float = 0.95

    def __post_init__(self):
        m = self.n_assays
        for name in ("sigma", "lower", "upper", "beta", "costs"):
            if len(getattr(self, name)) != m:
                raise SyntheticError(f"{name} must have {m} entries")
        if any(s <= 0 for s in self.sigma):
            raise SyntheticError("sigma entries must be positive")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise SyntheticError("lower bounds must be below upper bounds")
        if any(c <= 0 for c in self.costs):
            raise SyntheticError("costs must be positive")

    @property
    def n_assays(self) -> int:
        return len(self.mu)

    @classmethod
    def standard(cls, n_records: int = 200) -> "SyntheticSpec":
        """The six-assay instantiation: mu_a = 50a/6, sigma_a = 0.3 mu_a,
        bounds (0, 2 mu_a), decaying coefficients, increasing costs."""
        mu = tuple(50.0 * a / 6.0 for a in range(1, 7))
        return cls(
            mu=mu,
            sigma=tuple(0.3 * m for m in mu),
            lower=(0.0,) * 6,
            upper=tuple(2.0 * m for m in mu),
            beta=(0.3, 0.25, 0.2, 0.15, 0.07, 0.03),
            costs=(1.0, 1.2, 1.5, 1.8, 2.0, 2.2),
            n_records=n_records,
        )


def sample_truncated_normal(
    mu: float,
    sigma: float,
    lower: float,
    upper: float,
    rng: np.random.Generator,
    size: int | None = None,
) -> float | np.ndarray:
    """Rejection sampling from the normal restricted to [lower, upper].

    Fine for bounds within a few sigma of the location; pathological
    bounds exhaust the draw budget and raise.
    """
    if lower >= upper:
        raise SyntheticError("lower bound must be below upper bound")
    if sigma <= 0:
        raise SyntheticError("sigma must be positive")
    if upper - lower <= 1e-8 * sigma:
        # Width->0 limit is a point mass at the interval; rejection would
        # never terminate here.
        mid = 0.5 * (lower + upper)
        return mid if size is None else np.full(int(size), mid)
    n = 1 if size is None else int(size)
    out = np.empty(n, dtype=np.float64)
    filled = 0
    drawn = 0
    while filled < n:
        want = max(n - filled, 16)
        if drawn + want > REJECTION_CAP:
            raise SyntheticError(
                f"rejection budget exhausted for bounds [{lower}, {upper}]"
            )
        cand = rng.normal(mu, sigma, size=want)
        drawn += want
        keep = cand[(cand >= lower) & (cand <= upper)]
        take = min(len(keep), n - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
    return float(out[0]) if size is None else out


@dataclass(frozen=True)
class SyntheticSample:
    """A generated dataset plus the raw draws behind it."""

    dataset: Dataset
    features: np.ndarray  # (N, M)
    noise: np.ndarray  # (N,)
    targets: np.ndarray  # (N,)
    spec: SyntheticSpec

    def empirical_feature_var(self, j: int) -> float:
        col = self.features[:, j]
        return float(np.mean((col - col.mean()) ** 2))

    def empirical_noise_var(self) -> float:
        return float(np.mean((self.noise - self.noise.mean()) ** 2))


def assay_id(j: int) -> str:
    return f"a{j + 1}"


def feature_id(j: int) -> str:
    return f"f{j + 1}"


def generate_dataset(spec: SyntheticSpec, rng: np.random.Generator) -> SyntheticSample:
    """Draw the historical table: independent features, linear target."""
    n, m = spec.n_records, spec.n_assays
    features = np.empty((n, m), dtype=np.float64)
    for j in range(m):
        features[:, j] = sample_truncated_normal(
            spec.mu[j], spec.sigma[j], spec.lower[j], spec.upper[j], rng, size=n
        )
    noise = sample_truncated_normal(
        spec.noise_mu, spec.noise_sigma, spec.noise_lower, spec.noise_upper, rng,
        size=n,
    )
    targets = features @ np.array(spec.beta) + noise

    feature_specs = tuple(
        FeatureSpec(
            feature_id=feature_id(j),
            name=feature_id(j),
            kind=FeatureKind.ASSAY_OUTCOME,
        )
        for j in range(m)
    )
    assay_specs = tuple(
        AssaySpec(
            assay_id=assay_id(j),
            outcome_feature=feature_id(j),
            cost=(spec.costs[j],),
        )
        for j in range(m)
    )
    records = tuple(
        HistoricalRecord(
            record_id=f"row{i + 1}",
            features={feature_id(j): float(features[i, j]) for j in range(m)},
            target_g=float(targets[i]),
        )
        for i in range(n)
    )
    dataset = Dataset(
        feature_specs=feature_specs,
        assay_specs=assay_specs,
        records=records,
        goal_range=(float(targets.min()), float(targets.max())),
        target_column="g",
    )
    dataset = compute_feature_stats(dataset)
    return SyntheticSample(
        dataset=dataset, features=features, noise=noise, targets=targets, spec=spec
    )


def draw_candidate(
    spec: SyntheticSpec, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """A fresh compound from the same generator: true feature vector and
    true target value."""
    values = np.array(
        [
            sample_truncated_normal(
                spec.mu[j], spec.sigma[j], spec.lower[j], spec.upper[j], rng
            )
            for j in range(spec.n_assays)
        ]
    )
    noise = sample_truncated_normal(
        spec.noise_mu, spec.noise_sigma, spec.noise_lower, spec.noise_upper, rng
    )
    return values, float(values @ np.array(spec.beta) + noise)


def exact_conditional_variance(sample: SyntheticSample, measured: frozenset[int]) -> float:
    """Closed-form Var(target | measured subset) under independence:
    unmeasured coefficient-weighted variances plus the noise variance."""
    total = sample.empirical_noise_var()
    for j in range(sample.spec.n_assays):
        if j not in measured:
            total += sample.spec.beta[j] ** 2 * sample.empirical_feature_var(j)
    return total


# -- subset-lattice value iteration -----------------------------------------


@dataclass
class SubsetPolicy:
    """Optimal action per measured-set bitmask, with the value table."""

    n_assays: int
    values: np.ndarray  # (2**M,)
    actions: dict[int, tuple[int, ...]]  # mask -> 0-based assay indices
    iterations: int
    sup_norm: float

    def first_action(self) -> tuple[int, ...]:
        return self.actions[0]

    def first_action_ids(self) -> tuple[str, ...]:
        return tuple(assay_id(j) for j in self.first_action())


def _subsets_of_complement(mask: int, m: int) -> list[tuple[int, ...]]:
    free = [j for j in range(m) if not (mask >> j) & 1]
    out = []
    for bits in range(1, 1 << len(free)):
        out.append(tuple(free[i] for i in range(len(free)) if (bits >> i) & 1))
    out.sort(key=lambda t: (len(t), t))
    return out


def _value_iteration(
    m: int,
    reward: dict[tuple[int, int], float],
    costs: tuple[float, ...],
    gamma: float,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> SubsetPolicy:
    """Bellman recursion on the subset lattice.

    ``reward[(mask, batch_bits)]`` is the immediate reward for running the
    batch from the measured set ``mask``.  The full set is terminal with
    value zero.  Ties resolve to lower batch cost, then canonical order.
    """
    size = 1 << m
    full = size - 1
    subsets = {mask: _subsets_of_complement(mask, m) for mask in range(size)}
    values = np.zeros(size, dtype=np.float64)
    sup = np.inf
    iterations = 0
    while sup > tol and iterations < max_iter:
        new = np.zeros(size, dtype=np.float64)
        for mask in range(size):
            if mask == full:
                continue
            best = -np.inf
            for batch in subsets[mask]:
                bits = 0
                for j in batch:
                    bits |= 1 << j
                q = reward[(mask, bits)] + gamma * values[mask | bits]
                if q > best:
                    best = q
            new[mask] = best
        sup = float(np.max(np.abs(new - values)))
        values = new
        iterations += 1
    actions: dict[int, tuple[int, ...]] = {}
    for mask in range(size):
        if mask == full:
            continue
        scored = []
        for batch in subsets[mask]:
            bits = 0
            for j in batch:
                bits |= 1 << j
            q = reward[(mask, bits)] + gamma * values[mask | bits]
            cost = sum(costs[j] for j in batch)
            scored.append((q, cost, batch))
        best_q = max(q for q, _, _ in scored)
        tied = [(cost, batch) for q, cost, batch in scored if q == best_q]
        actions[mask] = min(tied, key=lambda t: (t[0], len(t[1]), t[1]))[1]
    return SubsetPolicy(
        n_assays=m, values=values, actions=actions, iterations=iterations,
        sup_norm=sup,
    )


def vi_theo(sample: SyntheticSample) -> SubsetPolicy:
    """Value iteration with the exact analytic uncertainty reduction:
    measuring a batch removes each member's coefficient-weighted variance."""
    spec = sample.spec
    m = spec.n_assays
    per_assay = [
        spec.beta[j] ** 2 * sample.empirical_feature_var(j) for j in range(m)
    ]
    reward = {}
    for mask in range(1 << m):
        for batch in _subsets_of_complement(mask, m):
            bits = 0
            delta = 0.0
            cost = 0.0
            for j in batch:
                bits |= 1 << j
                delta += per_assay[j]
                cost += spec.costs[j]
            reward[(mask, bits)] = delta / cost
    return _value_iteration(m, reward, spec.costs, spec.gamma)


def similarity_conditional_variance(
    sample: SyntheticSample,
    kernel_config: KernelConfig,
    conditioning: str = "expected",
    candidate_values: np.ndarray | None = None,
) -> dict[int, float]:
    """Belief-weighted target variance for every measured subset.

    Hypothetically-measured features need a value to condition on; a
    deterministic planner has no sampled outcomes.  The default anchors
    each feature at its belief-expected value quantized to the nearest
    historical value, the same representative-outcome rule the consensus
    path uses.  ``conditioning="candidate"`` pins the candidate's true
    values instead: that variant inherits the candidate's own measurement
    scatter, and the resulting noise makes spuriously-superadditive batch
    rewards win the subset argmax.
    """
    spec = sample.spec
    m = spec.n_assays
    ctx = BeliefContext(sample.dataset, kernel_config)
    if conditioning == "candidate":
        if candidate_values is None:
            raise SyntheticError("candidate conditioning requires values")
        cond = [float(candidate_values[j]) for j in range(m)]
    elif conditioning == "expected":
        from assayplan.ensemble import expected_outcome

        zero = np.zeros(ctx.n)
        cond = [expected_outcome(ctx, zero, feature_id(j)) for j in range(m)]
    else:
        raise SyntheticError(f"unknown conditioning {conditioning!r}")
    out: dict[int, float] = {}
    for mask in range(1 << m):
        obs = {
            feature_id(j): cond[j] for j in range(m) if (mask >> j) & 1
        }
        d = ctx.distances_after(np.zeros(ctx.n), obs)
        out[mask] = ctx.stats_of(d).uncertainty
    return out


def vi_sim(
    sample: SyntheticSample,
    kernel_config: KernelConfig,
    conditioning: str = "expected",
    candidate_values: np.ndarray | None = None,
) -> SubsetPolicy:
    """Same recursion as vi_theo but with the similarity-estimated
    uncertainty reduction; deterministic per trial."""
    spec = sample.spec
    m = spec.n_assays
    var_hat = similarity_conditional_variance(
        sample, kernel_config, conditioning, candidate_values
    )
    reward = {}
    for mask in range(1 << m):
        for batch in _subsets_of_complement(mask, m):
            bits = 0
            cost = 0.0
            for j in batch:
                bits |= 1 << j
                cost += spec.costs[j]
            reward[(mask, bits)] = (var_hat[mask] - var_hat[mask | bits]) / cost
    return _value_iteration(m, reward, spec.costs, spec.gamma)


# -- alignment benchmark -----------------------------------------------------


@dataclass(frozen=True)
class BenchmarkConfig:
    n_trials: int = 100
    master_seed: int = 0
    n_members: int = 20
    n_itr: int = 5000
    c_ucb: float = 5.0
    lambda_w: float = 1.0
    epsilon_fraction: float = 0.10  # epsilon as a fraction of the initial H
    jobs: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise SyntheticError("empty protocol: n_trials must be >= 1")


@dataclass
class TrialRow:
    trial: int
    theo_action: tuple[int, ...]  # 1-based assay numbers
    top1: tuple[int, ...]
    top2_union: tuple[int, ...]
    t1_match: int
    t2_match: int
    sim_action: tuple[int, ...]
    sim_match: int


@dataclass
class AlignmentReport:
    rows: list[TrialRow]
    top1_rate: float
    top2_rate: float
    sim_rate: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            [
                "trial",
                "vi_theo",
                "top1",
                "t1_match",
                "top2",
                "t2_match",
                "vi_sim",
                "sim_match",
            ]
        )
        for r in self.rows:
            writer.writerow(
                [
                    r.trial,
                    _set_label(r.theo_action),
                    _set_label(r.top1),
                    r.t1_match,
                    _set_label(r.top2_union),
                    r.t2_match,
                    _set_label(r.sim_action),
                    r.sim_match,
                ]
            )
        return buf.getvalue()

    def summary_json(self) -> str:
        doc = {
            "schema_version": 1,
            "n_trials": len(self.rows),
            "top1_match_rate": self.top1_rate,
            "top2_match_rate": self.top2_rate,
            "sim_match_rate": self.sim_rate,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _set_label(indices: tuple[int, ...]) -> str:
    return "{" + ",".join(str(i) for i in indices) + "}"


def _assay_numbers(assays: tuple[str, ...]) -> tuple[int, ...]:
    return tuple(sorted(int(a[1:]) for a in assays))


def run_trial(
    trial: int, spec: SyntheticSpec, config: BenchmarkConfig
) -> TrialRow:
    """One benchmark trial: fresh data, fresh candidate, three planners."""
    rng = np.random.default_rng(config.master_seed + trial)
    sample = generate_dataset(spec, rng)
    candidate_values, _ = draw_candidate(spec, rng)
    kernel_config = KernelConfig(lambda_w=config.lambda_w)

    theo = vi_theo(sample)
    sim = vi_sim(sample, kernel_config, candidate_values=candidate_values)

    root = CandidateState(known_features={})
    ctx = BeliefContext(sample.dataset, kernel_config)
    h0 = ctx.stats_of(ctx.state_distances(root)).uncertainty
    reward_config = RewardConfig(
        mode="info_per_cost",
        rho=(1.0,),
        gamma=spec.gamma,
        epsilon=config.epsilon_fraction * h0,
        tau=0.0,
        horizon=spec.n_assays,
    )
    params = PlannerParams(
        n_itr=config.n_itr,
        c_ucb=config.c_ucb,
        max_batch=spec.n_assays,
    )
    ens = EnsembleConfig(
        n_members=config.n_members,
        base_seed=(config.master_seed + trial) * 10_000,
        planner=params,
    )
    policies = run_ensemble(root, sample.dataset, kernel_config, reward_config, ens)
    hist = vote_actions(policies, (tuple(), tuple()))
    top = top_k_actions(hist, 2, sample.dataset, reward_config.rho)

    top1 = _assay_numbers(top[0].assays) if top and not top[0].stop else ()
    union: set[int] = set()
    for action in top:
        if not action.stop:
            union.update(_assay_numbers(action.assays))
    top2_union = tuple(sorted(union))

    theo_action = tuple(j + 1 for j in theo.first_action())
    sim_action = tuple(j + 1 for j in sim.first_action())
    t1 = int(set(theo_action) <= set(top1))
    t2 = int(set(theo_action) <= set(top2_union))
    sim_match = int(set(sim_action) == set(theo_action))
    return TrialRow(
        trial=trial,
        theo_action=theo_action,
        top1=top1,
        top2_union=top2_union,
        t1_match=t1,
        t2_match=t2,
        sim_action=sim_action,
        sim_match=sim_match,
    )


def run_alignment_benchmark(
    spec: SyntheticSpec, config: BenchmarkConfig
) -> AlignmentReport:
    """The full protocol: independent trials, each scoring the ensemble
    planner's root votes against the exact and similarity baselines."""
    trials = range(1, config.n_trials + 1)
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(_trial_star, [(t, spec, config) for t in trials]))
    else:
        rows = [run_trial(t, spec, config) for t in trials]
    n = len(rows)
    return AlignmentReport(
        rows=rows,
        top1_rate=sum(r.t1_match for r in rows) / n,
        top2_rate=sum(r.t2_match for r in rows) / n,
        sim_rate=sum(r.sim_match for r in rows) / n,
    )


def _trial_star(args) -> TrialRow:
    return run_trial(*args)


# -- bundled two-tier cost scenario -------------------------------------------


def make_cost_tier_standin(n_records: int = 220, seed: int = 715):
    """Synthetic stand-in for the cheap-screens vs definitive-assay setting.

    A latent trait drives three cheap in-vitro readouts (each with a noisy
    predictor column) and an expensive in-vivo readout that doubles as the
    planning target, so its assay is excluded from distances by the leak
    guard.  Costs: three assays at (400, 7), one at (4000, 21).  Measured
    outcomes carry a higher distance weight than predictions.

    Returns the dataset (stats computed) and candidate predictor-value
    dicts keyed "good" / "borderline" / "poor" by true latent quality.
    """
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, 1.0, n_records)
    vitro_noise = (0.12, 0.18, 0.25)
    pred_noise = (0.6, 0.7, 0.8)
    vitro = {
        f"vitro_{s}": z + rng.normal(0.0, vitro_noise[i], n_records)
        for i, s in enumerate("abc")
    }
    pred = {
        f"pred_{s}": vitro[f"vitro_{s}"] + rng.normal(0.0, pred_noise[i], n_records)
        for i, s in enumerate("abc")
    }
    kpuu = 3.0 / (1.0 + np.exp(-1.5 * z)) + rng.normal(0.0, 0.04, n_records)

    feature_specs = tuple(
        [
            FeatureSpec(f"pred_{s}", f"pred_{s}", FeatureKind.PREDICTOR, 1.0)
            for s in "abc"
        ]
        + [
            FeatureSpec(f"vitro_{s}", f"vitro_{s}", FeatureKind.ASSAY_OUTCOME, 2.5)
            for s in "abc"
        ]
        + [FeatureSpec("kpuu", "kpuu", FeatureKind.ASSAY_OUTCOME, 1.0)]
    )
    assay_specs = tuple(
        [AssaySpec(f"assay_{s}", f"vitro_{s}", (400.0, 7.0)) for s in "abc"]
        + [AssaySpec("assay_kpuu", "kpuu", (4000.0, 21.0))]
    )
    records = []
    for i in range(n_records):
        features = {name: float(col[i]) for name, col in {**pred, **vitro}.items()}
        features["kpuu"] = float(kpuu[i])
        records.append(
            HistoricalRecord(
                record_id=f"cmp{i + 1:03d}",
                features=features,
                target_g=float(kpuu[i]),
            )
        )
    dataset = Dataset(
        feature_specs=feature_specs,
        assay_specs=assay_specs,
        records=tuple(records),
        goal_range=(0.25, 1.6),
        target_column="kpuu",
        cost_components=("money", "days"),
        target_feature_id="kpuu",
    )
    dataset = compute_feature_stats(dataset)

    crng = np.random.default_rng(17)
    candidates = {
        label: {f"pred_{s}": float(zc + crng.normal(0.0, 0.65)) for s in "abc"}
        for label, zc in (("good", -0.9), ("borderline", -0.15), ("poor", 0.9))
    }
    return dataset, candidates
