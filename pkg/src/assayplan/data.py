"""Historical dataset model: schemas, CSV ingestion, empirical statistics.

The dataset is immutable after construction.  Records keep the CSV row
order; record indices in reports are 1-based.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path


class DataError(Exception):
    """Raised on ingestion or schema problems."""


class FeatureKind(enum.Enum):
    PREDICTOR = "predictor"
    ASSAY_OUTCOME = "assay_outcome"


@dataclass(frozen=True)
class FeatureSpec:
    feature_id: str
    name: str
    kind: FeatureKind
    lambda_k: float = 1.0
    sigma2_k: float | None = None
    mean_k: float | None = None

    def __post_init__(self):
        if self.lambda_k < 0:
            raise DataError(f"feature {self.feature_id}: lambda_k must be >= 0")


@dataclass(frozen=True)
class AssaySpec:
    assay_id: str
    outcome_feature: str
    cost: tuple[float, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.cost):
            raise DataError(f"assay {self.assay_id}: negative cost component")


@dataclass(frozen=True)
class HistoricalRecord:
    record_id: str
    features: dict[str, float]
    target_g: float | None = None


@dataclass(frozen=True)
class Dataset:
    feature_specs: tuple[FeatureSpec, ...]
    assay_specs: tuple[AssaySpec, ...]
    records: tuple[HistoricalRecord, ...]
    goal_range: tuple[float, float]
    target_column: str
    cost_components: tuple[str, ...] = ("cost",)
    # Set when the target column doubles as an assay-outcome feature.
    target_feature_id: str | None = None

    def __post_init__(self):
        if len(self.records) < 1:
            raise DataError("dataset must contain at least one record")
        if self.goal_range[0] > self.goal_range[1]:
            raise DataError("goal_range must satisfy g_min <= g_max")
        if not self.target_index_set():
            raise DataError("no record carries a target value (|I_g| >= 1 required)")

    @property
    def n_records(self) -> int:
        return len(self.records)

    def feature(self, feature_id: str) -> FeatureSpec:
        for spec in self.feature_specs:
            if spec.feature_id == feature_id:
                return spec
        raise KeyError(feature_id)

    def assay(self, assay_id: str) -> AssaySpec:
        for spec in self.assay_specs:
            if spec.assay_id == assay_id:
                return spec
        raise KeyError(assay_id)

    def target_index_set(self) -> set[int]:
        """1-based indices of records with an available target value."""
        return {i + 1 for i, r in enumerate(self.records) if r.target_g is not None}

    @property
    def stats_computed(self) -> bool:
        return all(s.sigma2_k is not None for s in self.feature_specs)


@dataclass(frozen=True)
class IngestionSchema:
    """Parsed schema file: maps CSV columns onto the dataset model."""

    target_column: str
    g_min: float
    g_max: float
    features: tuple[FeatureSpec, ...]
    assays: tuple[AssaySpec, ...]
    cost_components: tuple[str, ...] = ("cost",)
    id_column: str | None = None


def _parse_number(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"non-numeric cell at {where}: {text!r}") from None


def parse_schema(path: str | Path) -> IngestionSchema:
    """Parse the flat key-value schema file.

    Recognized keys::

        target = <column name>
        g_min = <float>
        g_max = <float>
        cost_components = money, days
        id_column = <column name>            (optional)
        feature.<name>.kind = predictor | assay_outcome
        feature.<name>.lambda = <float>      (optional, default 1.0)
        assay.<id>.reveals = <feature name>
        assay.<id>.cost = <float>[, <float> ...]
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"schema file not found: {path}")
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        pairs[key.strip()] = value.strip()

    for required in ("target", "g_min", "g_max"):
        if required not in pairs:
            raise DataError(f"schema missing required key {required!r}")

    feature_names: list[str] = []
    kinds: dict[str, str] = {}
    lambdas: dict[str, float] = {}
    assay_ids: list[str] = []
    reveals: dict[str, str] = {}
    costs: dict[str, tuple[float, ...]] = {}
    for key, value in pairs.items():
        parts = key.split(".")
        if parts[0] == "feature" and len(parts) == 3:
            name = parts[1]
            if name not in feature_names:
                feature_names.append(name)
            if parts[2] == "kind":
                kinds[name] = value
            elif parts[2] == "lambda":
                lambdas[name] = _parse_number(value, key)
            else:
                raise DataError(f"unknown schema key {key!r}")
        elif parts[0] == "assay" and len(parts) == 3:
            aid = parts[1]
            if aid not in assay_ids:
                assay_ids.append(aid)
            if parts[2] == "reveals":
                reveals[aid] = value
            elif parts[2] == "cost":
                costs[aid] = tuple(
                    _parse_number(v.strip(), key) for v in value.split(",")
                )
            else:
                raise DataError(f"unknown schema key {key!r}")

    if not feature_names:
        raise DataError("schema declares no features")

    features = []
    for name in feature_names:
        if name not in kinds:
            raise DataError(f"feature {name!r} missing kind")
        try:
            kind = FeatureKind(kinds[name])
        except ValueError:
            raise DataError(
                f"feature {name!r}: kind must be predictor or assay_outcome"
            ) from None
        features.append(
            FeatureSpec(
                feature_id=name, name=name, kind=kind, lambda_k=lambdas.get(name, 1.0)
            )
        )

    components = tuple(
        c.strip() for c in pairs.get("cost_components", "cost").split(",")
    )
    assays = []
    for aid in assay_ids:
        if aid not in reveals:
            raise DataError(f"assay {aid!r} missing reveals")
        cost = costs.get(aid, (0.0,) * len(components))
        if len(cost) != len(components):
            raise DataError(
                f"assay {aid!r}: expected {len(components)} cost components, "
                f"got {len(cost)}"
            )
        assays.append(AssaySpec(assay_id=aid, outcome_feature=reveals[aid], cost=cost))

    return IngestionSchema(
        target_column=pairs["target"],
        g_min=_parse_number(pairs["g_min"], "g_min"),
        g_max=_parse_number(pairs["g_max"], "g_max"),
        features=tuple(features),
        assays=tuple(assays),
        cost_components=components,
        id_column=pairs.get("id_column"),
    )


def load_dataset(path: str | Path, schema: IngestionSchema) -> Dataset:
    """Load a headered CSV into a Dataset.

    Rows with a blank target cell get ``target_g = None`` and drop out of
    the target index set.  Blank feature cells are rejected, except for a
    feature that coincides with the target column (there, blank follows
    the target-availability rule).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty table") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataError("empty table")

    feature_names = [f.feature_id for f in schema.features]
    target_is_feature = schema.target_column in feature_names
    needed = set(feature_names)
    if not target_is_feature:
        needed.add(schema.target_column)
    if schema.id_column:
        needed.add(schema.id_column)
    missing = sorted(needed - set(header))
    if missing:
        raise DataError(f"missing column(s): {', '.join(missing)}")
    col_of = {name: header.index(name) for name in needed}

    records = []
    for i, row in enumerate(rows):
        where = f"row {i + 1}"
        if len(row) < len(header):
            raise DataError(f"{where}: expected {len(header)} cells, got {len(row)}")
        target_cell = row[col_of[schema.target_column]].strip()
        target_g = None if target_cell == "" else _parse_number(target_cell, where)
        features: dict[str, float] = {}
        for name in feature_names:
            cell = row[col_of[name]].strip()
            if cell == "":
                if target_is_feature and name == schema.target_column:
                    features[name] = math.nan
                    continue
                raise DataError(f"{where}: blank value for feature {name!r}")
            features[name] = _parse_number(cell, f"{where}, column {name!r}")
        record_id = (
            row[col_of[schema.id_column]].strip() if schema.id_column else f"row{i + 1}"
        )
        records.append(
            HistoricalRecord(record_id=record_id, features=features, target_g=target_g)
        )

    return Dataset(
        feature_specs=schema.features,
        assay_specs=schema.assays,
        records=tuple(records),
        goal_range=(schema.g_min, schema.g_max),
        target_column=schema.target_column,
        cost_components=schema.cost_components,
        target_feature_id=schema.target_column if target_is_feature else None,
    )


def compute_feature_stats(dataset: Dataset) -> Dataset:
    """Populate per-feature mean and population variance (divisor N).

    A zero-variance feature is a hard error: the distance normalizes by
    the variance, so silently dropping the feature would change planning
    behavior invisibly.
    """
    new_specs = []
    for spec in dataset.feature_specs:
        values = [r.features[spec.feature_id] for r in dataset.records]
        values = [v for v in values if not math.isnan(v)]
        if not values:
            raise DataError(f"feature {spec.feature_id!r} has no values")
        n = len(values)
        mean = sum(values) / n
        var = sum((v - mean) ** 2 for v in values) / n
        if var == 0.0:
            raise DataError(f"feature {spec.feature_id!r} has zero variance")
        new_specs.append(replace(spec, sigma2_k=var, mean_k=mean))
    return replace(dataset, feature_specs=tuple(new_specs))


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(dataset: Dataset) -> ValidationReport:
    """Check dataset invariants; problems go into the report, not raises."""
    report = ValidationReport()
    feature_ids = {f.feature_id for f in dataset.feature_specs}
    outcome_ids = {
        f.feature_id
        for f in dataset.feature_specs
        if f.kind is FeatureKind.ASSAY_OUTCOME
    }
    for assay in dataset.assay_specs:
        if assay.outcome_feature not in feature_ids:
            report.violations.append(
                f"assay {assay.assay_id!r} references unknown feature "
                f"{assay.outcome_feature!r}"
            )
        elif assay.outcome_feature not in outcome_ids:
            report.violations.append(
                f"assay {assay.assay_id!r} outcome feature "
                f"{assay.outcome_feature!r} is not of kind assay_outcome"
            )
        if any(c < 0 for c in assay.cost):
            report.violations.append(f"assay {assay.assay_id!r} has a negative cost")
        if len(assay.cost) != len(dataset.cost_components):
            report.violations.append(
                f"assay {assay.assay_id!r} cost has {len(assay.cost)} components, "
                f"expected {len(dataset.cost_components)}"
            )
    for spec in dataset.feature_specs:
        if spec.lambda_k < 0:
            report.violations.append(f"feature {spec.feature_id!r} has lambda_k < 0")
        if spec.sigma2_k is not None and spec.sigma2_k <= 0:
            report.violations.append(
                f"feature {spec.feature_id!r} has non-positive variance"
            )
        if spec.sigma2_k is None:
            report.violations.append(f"feature {spec.feature_id!r} stats not computed")
    n_g = len(dataset.target_index_set())
    if dataset.goal_range[0] > dataset.goal_range[1]:
        report.violations.append("goal_range is not well-ordered")
    if n_g / dataset.n_records < 0.1:
        report.warnings.append(
            "fewer than 10% of records carry a target value; the renormalized "
            "weighted variance may be underestimated"
        )
    return report


def save_dataset(dataset: Dataset, csv_path: str | Path, schema_path: str | Path):
    """Write a dataset back to CSV + schema so it can be reloaded."""
    feature_names = [f.feature_id for f in dataset.feature_specs]
    target_is_feature = dataset.target_feature_id is not None
    columns = ["record_id"] + feature_names
    if not target_is_feature:
        columns.append(dataset.target_column)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for record in dataset.records:
            row = [record.record_id]
            for name in feature_names:
                value = record.features[name]
                row.append("" if math.isnan(value) else repr(value))
            if not target_is_feature:
                row.append("" if record.target_g is None else repr(record.target_g))
            writer.writerow(row)

    lines = [
        f"target = {dataset.target_column}",
        f"g_min = {dataset.goal_range[0]!r}",
        f"g_max = {dataset.goal_range[1]!r}",
        f"cost_components = {', '.join(dataset.cost_components)}",
        "id_column = record_id",
    ]
    for spec in dataset.feature_specs:
        lines.append(f"feature.{spec.feature_id}.kind = {spec.kind.value}")
        lines.append(f"feature.{spec.feature_id}.lambda = {spec.lambda_k!r}")
    for assay in dataset.assay_specs:
        lines.append(f"assay.{assay.assay_id}.reveals = {assay.outcome_feature}")
        lines.append(
            f"assay.{assay.assay_id}.cost = {', '.join(repr(c) for c in assay.cost)}"
        )
    Path(schema_path).write_text("\n".join(lines) + "\n")
