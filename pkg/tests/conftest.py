import numpy as np
import pytest

from assayplan.data import (
    AssaySpec,
    Dataset,
    FeatureKind,
    FeatureSpec,
    HistoricalRecord,
    compute_feature_stats,
)


def make_dataset(
    columns: dict[str, list[float]],
    targets: list[float | None],
    goal_range=(0.0, 1.0),
    kinds: dict[str, FeatureKind] | None = None,
    assays: list[tuple[str, str, tuple[float, ...]]] | None = None,
    sigma2: dict[str, float] | None = None,
    lambdas: dict[str, float] | None = None,
    target_column: str = "g",
    cost_components: tuple[str, ...] = ("cost",),
    target_feature_id: str | None = None,
) -> Dataset:
    """Assemble a dataset directly; sigma2 overrides skip the empirical
    stats (several worked examples fix the variance by hand)."""
    kinds = kinds or {}
    lambdas = lambdas or {}
    names = list(columns)
    n = len(targets)
    feature_specs = tuple(
        FeatureSpec(
            feature_id=name,
            name=name,
            kind=kinds.get(name, FeatureKind.ASSAY_OUTCOME),
            lambda_k=lambdas.get(name, 1.0),
            sigma2_k=(sigma2 or {}).get(name),
        )
        for name in names
    )
    if assays is None:
        assays = [
            (f"assay_{name}", name, (1.0,) * len(cost_components))
            for name in names
            if feature_specs[names.index(name)].kind is FeatureKind.ASSAY_OUTCOME
        ]
    assay_specs = tuple(
        AssaySpec(assay_id=a, outcome_feature=f, cost=c) for a, f, c in assays
    )
    records = tuple(
        HistoricalRecord(
            record_id=f"row{i + 1}",
            features={name: float(columns[name][i]) for name in names},
            target_g=None if targets[i] is None else float(targets[i]),
        )
        for i in range(n)
    )
    dataset = Dataset(
        feature_specs=feature_specs,
        assay_specs=assay_specs,
        records=records,
        goal_range=goal_range,
        target_column=target_column,
        cost_components=cost_components,
        target_feature_id=target_feature_id,
    )
    if sigma2 is None:
        return compute_feature_stats(dataset)
    return dataset


@pytest.fixture
def toy_dataset():
    """Three one-feature records at 0, 1, 2 with unit variance forced, the
    setup of the worked weight-evolution example."""
    return make_dataset(
        columns={"x": [0.0, 1.0, 2.0]},
        targets=[0.0, 1.0, 2.0],
        goal_range=(0.5, 1.5),
        sigma2={"x": 1.0},
        assays=[("ax", "x", (1.0,))],
    )


def random_dataset(rng: np.random.Generator, n_records=None, n_features=None):
    """A small random dataset for property tests."""
    n = n_records or int(rng.integers(2, 9))
    k = n_features or int(rng.integers(1, 4))
    columns = {
        f"f{j}": (rng.normal(0.0, 1.0 + rng.random(), size=n)).tolist()
        for j in range(k)
    }
    targets = rng.normal(0.0, 1.0, size=n).tolist()
    assays = [(f"a{j}", f"f{j}", (float(rng.uniform(0.5, 3.0)),)) for j in range(k)]
    return make_dataset(
        columns=columns,
        targets=targets,
        goal_range=(-0.5, 0.5),
        assays=assays,
    )
