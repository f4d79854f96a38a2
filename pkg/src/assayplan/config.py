"""Run configuration: defaults, flat key-value config files, flag overrides.

Precedence is flag > file > default, per parameter.  Every run echoes its
fully-resolved configuration next to its outputs so results can be
reproduced from the output directory alone.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset: str | None = None
    schema: str | None = None
    candidate: str | None = None
    out: str = "out"
    seed: int = 0
    tau: float = 0.6
    epsilon: float = 0.10
    ne: int = 50
    iters: int = 20000
    c_ucb: float = 5.0
    lambda_w: float = 1.0
    gamma: float = 0.95
    penalty: float = -1e6
    mode: str = "cost"
    m: int | None = None
    horizon: int | None = None
    rho: tuple[float, ...] | None = None  # None: weight only the first component
    sweep: str = "tau"
    sweep_grid: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(11))
    n_trials: int = 100
    benchmark_members: int = 20
    benchmark_iters: int = 5000
    jobs: int = 1
    serve_addr: str = "127.0.0.1:8000"
    journal: str | None = None


_INT_KEYS = {"seed", "ne", "iters", "m", "horizon", "n_trials",
             "benchmark_members", "benchmark_iters", "jobs"}
_FLOAT_KEYS = {"tau", "epsilon", "c_ucb", "lambda_w", "gamma", "penalty"}
_TUPLE_KEYS = {"rho", "sweep_grid"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _TUPLE_KEYS:
        return tuple(float(v.strip()) for v in raw.split(","))
    return raw


def read_config_file(path: str | Path) -> dict:
    """Parse a flat ``key = value`` file (# starts a comment)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    valid = {f.name for f in fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in valid:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def resolve_config(
    file_path: str | Path | None, flag_overrides: dict
) -> RunConfig:
    """Merge defaults, config file, and flags (flags win)."""
    cfg = RunConfig()
    if file_path is not None:
        cfg = replace(cfg, **read_config_file(file_path))
    overrides = {k: v for k, v in flag_overrides.items() if v is not None}
    return replace(cfg, **overrides)


def effective_config_text(cfg: RunConfig) -> str:
    """The fully-resolved configuration, in the same flat format."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
