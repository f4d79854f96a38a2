"""Command-line front door: validate, plan, benchmark, serve.

Every run writes its fully-resolved configuration next to its outputs.
Exit codes: 0 success, 1 validation/config problem, 2 I/O or parse failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from assayplan.belief import BeliefContext, CandidateState, KernelConfig
from assayplan.config import ConfigError, RunConfig, effective_config_text, resolve_config
from assayplan.data import (
    DataError,
    Dataset,
    compute_feature_stats,
    load_dataset,
    parse_schema,
    validate_dataset,
)
from assayplan.ensemble import (
    EnsembleConfig,
    build_mlasp,
    mlasp_to_json,
    pareto_sweep,
    pareto_to_csv,
    run_ensemble,
    vote_actions,
    votes_to_csv,
)
from assayplan.env import RewardConfig
from assayplan.planner import PlannerParams
from assayplan.synthetic import BenchmarkConfig, SyntheticSpec, run_alignment_benchmark


def _load(cfg: RunConfig) -> Dataset:
    if not cfg.dataset or not cfg.schema:
        raise ConfigError("both --dataset and --schema are required")
    schema = parse_schema(cfg.schema)
    dataset = load_dataset(cfg.dataset, schema)
    return compute_feature_stats(dataset)


def _read_candidate(path: str) -> dict[str, float]:
    features = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataError(f"{path}:{lineno}: expected 'feature = value'")
        key, _, value = stripped.partition("=")
        features[key.strip()] = float(value)
    return features


def _reward_config(cfg: RunConfig, dataset: Dataset) -> RewardConfig:
    rho = cfg.rho
    if rho is None:
        rho = (1.0,) + (0.0,) * (len(dataset.cost_components) - 1)
    return RewardConfig(
        mode=cfg.mode,
        rho=rho,
        gamma=cfg.gamma,
        penalty=cfg.penalty,
        horizon=cfg.horizon,
        epsilon=cfg.epsilon,
        tau=cfg.tau,
    )


def cmd_validate(cfg: RunConfig) -> int:
    try:
        dataset = _load(cfg)
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = validate_dataset(dataset)
    for violation in report.violations:
        print(f"violation: {violation}")
    for warning in report.warnings:
        print(f"warning: {warning}")
    if report.ok:
        n_g = len(dataset.target_index_set())
        print(
            f"ok: {dataset.n_records} records, "
            f"{len(dataset.feature_specs)} features, "
            f"{len(dataset.assay_specs)} assays, {n_g} with target"
        )
        return 0
    return 1


def cmd_plan(cfg: RunConfig) -> int:
    try:
        dataset = _load(cfg)
        candidate = _read_candidate(cfg.candidate) if cfg.candidate else {}
    except (DataError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    kernel_config = KernelConfig(lambda_w=cfg.lambda_w)
    reward_config = _reward_config(cfg, dataset)
    root = CandidateState(known_features=candidate)
    ctx = BeliefContext(dataset, kernel_config)
    stats = ctx.stats_of(ctx.state_distances(root))
    problems = reward_config.check_penalty_dominance(dataset, stats.uncertainty)
    if problems:
        for p in problems:
            print(f"config inconsistency: {p}", file=sys.stderr)
        return 1

    params = PlannerParams(n_itr=cfg.iters, c_ucb=cfg.c_ucb, max_batch=cfg.m)
    ens = EnsembleConfig(n_members=cfg.ne, base_seed=cfg.seed, planner=params)
    policies = run_ensemble(root, dataset, kernel_config, reward_config, ens)
    mlasp = build_mlasp(policies, root, dataset, kernel_config, reward_config)
    root_key = (tuple(sorted(root.measured_assays)), ())
    hist = vote_actions(policies, root_key)
    points = pareto_sweep(
        root, dataset, kernel_config, reward_config, ens,
        list(cfg.sweep_grid), cfg.sweep,
    )

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "mlasp.json").write_text(mlasp_to_json(mlasp, dataset))
    (out / "votes.csv").write_text(votes_to_csv(hist))
    (out / "pareto.csv").write_text(pareto_to_csv(points))
    (out / "config.txt").write_text(effective_config_text(cfg))

    print(f"initial H = {stats.uncertainty:.4f}, L = {stats.goal_likelihood:.4f}")
    print(f"constraint {'met' if mlasp.constraint_met else 'unmet'}; "
          f"final H = {mlasp.final_h:.4f}")
    for i, step in enumerate(mlasp.steps):
        cost = ", ".join(f"{c:g}" for c in step.cumulative_cost)
        print(
            f"step {i}: {step.action.label()} "
            f"(votes {step.vote_fraction:.0%}, cumulative cost [{cost}], "
            f"H -> {step.post_step_h:.4f})"
        )
    if not mlasp.steps:
        print("plan: nothing to do (root state already terminal)")
    print(f"wrote mlasp.json, votes.csv, pareto.csv, config.txt to {out}")
    return 0


def cmd_benchmark(cfg: RunConfig) -> int:
    if cfg.n_trials < 1:
        print("error: empty protocol (n_trials must be >= 1)", file=sys.stderr)
        return 1
    spec = SyntheticSpec.standard()
    bench = BenchmarkConfig(
        n_trials=cfg.n_trials,
        master_seed=cfg.seed,
        n_members=cfg.benchmark_members,
        n_itr=cfg.benchmark_iters,
        c_ucb=cfg.c_ucb,
        lambda_w=cfg.lambda_w,
        jobs=cfg.jobs,
    )
    try:
        report = run_alignment_benchmark(spec, bench)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "alignment.csv").write_text(report.to_csv())
        (out / "summary.json").write_text(report.summary_json())
        (out / "config.txt").write_text(effective_config_text(cfg))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"top-1 match rate: {report.top1_rate:.2f}, "
        f"top-2: {report.top2_rate:.2f}, "
        f"deterministic baseline: {report.sim_rate:.2f}"
    )
    print(f"wrote alignment.csv, summary.json to {out}")
    return 0


def cmd_serve(cfg: RunConfig) -> int:
    try:
        dataset = _load(cfg)
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    import uvicorn

    from assayplan.service import create_app

    app = create_app(
        dataset,
        KernelConfig(lambda_w=cfg.lambda_w),
        cfg,
        journal_path=cfg.journal,
    )
    host, _, port = cfg.serve_addr.partition(":")
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    except (OSError, SystemExit) as exc:
        print(f"error: could not serve on {cfg.serve_addr}: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assayplan",
        description="Plan cost-efficient assay sequences from historical outcomes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--dataset", help="historical data CSV")
        p.add_argument("--schema", help="ingestion schema file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")

    p_validate = sub.add_parser("validate", help="load a dataset and check invariants")
    common(p_validate)

    p_plan = sub.add_parser("plan", help="ensemble planning for one candidate")
    common(p_plan)
    p_plan.add_argument("--candidate", help="candidate feature file (feature = value)")
    p_plan.add_argument("--tau", type=float, help="goal-likelihood threshold")
    p_plan.add_argument("--epsilon", type=float, help="terminal uncertainty threshold")
    p_plan.add_argument("--ne", type=int, help="ensemble size")
    p_plan.add_argument("--iters", type=int, help="search iterations per tree")
    p_plan.add_argument("--m", type=int, help="max assays per batch")
    p_plan.add_argument("--mode", choices=["cost", "info_per_cost"])
    p_plan.add_argument("--sweep", choices=["tau", "epsilon"])
    p_plan.add_argument("--gamma", type=float, help="discount factor")
    p_plan.add_argument("--penalty", type=float, help="constraint penalty (negative)")

    p_bench = sub.add_parser("benchmark", help="synthetic policy-alignment benchmark")
    common(p_bench)
    p_bench.add_argument("--n-trials", dest="n_trials", type=int)
    p_bench.add_argument("--ne", dest="benchmark_members", type=int)
    p_bench.add_argument("--iters", dest="benchmark_iters", type=int)
    p_bench.add_argument("--jobs", type=int, help="parallel trial workers")

    p_serve = sub.add_parser("serve", help="run the session HTTP API")
    common(p_serve)
    p_serve.add_argument("--serve-addr", dest="serve_addr", help="host:port")
    p_serve.add_argument("--journal", help="session journal path (NDJSON)")
    p_serve.add_argument("--tau", type=float)
    p_serve.add_argument("--epsilon", type=float)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config") and v is not None
    }
    try:
        cfg = resolve_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    handler = {
        "validate": cmd_validate,
        "plan": cmd_plan,
        "benchmark": cmd_benchmark,
        "serve": cmd_serve,
    }[args.command]
    return handler(cfg)


if __name__ == "__main__":
    sys.exit(main())
