"""Dataset schema, CSV ingestion and writing, and the synthetic generator.

The wedge-assay dataset has two identity columns (``drug``, ``replicate``),
fifteen numeric predictor columns, and one label column (``risk``). The real
measurements behind the published analysis are not distributed; the
synthetic generator reproduces the dataset's shape (28 drugs in three risk
groups, four replicates each, grouped drug-replicate noise structure) for
tests and demos.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .model import CLASS_ORDER, Dataset, Observation, RiskClass

FEATURE_NAMES: tuple[str, ...] = (
    "tdp_score",
    "jt",
    "jtp",
    "jtp_ratio",
    "qs_2000",
    "qs_500",
    "qs_ratio_500",
    "qte",
    "qte_ratio",
    "qt_qs_ratio",
    "tpe_qt_ratio",
    "tpe_qt_ratio_alt",
    "tpe",
    "tpe_ratio",
    "ead_score",
)

DRUG_COLUMN = "drug"
REPLICATE_COLUMN = "replicate"
RISK_COLUMN = "risk"
ALL_COLUMNS: tuple[str, ...] = (DRUG_COLUMN, REPLICATE_COLUMN) + FEATURE_NAMES + (RISK_COLUMN,)

_LABEL_WORDS = {
    "l": RiskClass.LOW,
    "low": RiskClass.LOW,
    "m": RiskClass.MEDIUM,
    "medium": RiskClass.MEDIUM,
    "intermediate": RiskClass.MEDIUM,
    "h": RiskClass.HIGH,
    "high": RiskClass.HIGH,
}

# Typical magnitude (offset) and spread (scale) per column, so generated
# files look like assay output: interval columns in milliseconds, ratios
# near one, scores in small units. The model is scale-agnostic under
# standardization; these only shape the raw numbers.
_FEATURE_PROFILE: dict[str, tuple[float, float]] = {
    "tdp_score": (2.5, 1.5),
    "jt": (180.0, 25.0),
    "jtp": (120.0, 20.0),
    "jtp_ratio": (1.1, 0.15),
    "qs_2000": (320.0, 30.0),
    "qs_500": (280.0, 30.0),
    "qs_ratio_500": (1.05, 0.12),
    "qte": (260.0, 35.0),
    "qte_ratio": (1.15, 0.18),
    "qt_qs_ratio": (0.85, 0.1),
    "tpe_qt_ratio": (0.22, 0.05),
    "tpe_qt_ratio_alt": (0.24, 0.05),
    "tpe": (55.0, 12.0),
    "tpe_ratio": (1.2, 0.2),
    "ead_score": (1.0, 0.8),
}

_SALT_SYNTH = 105


def parse_risk_label(text: str) -> RiskClass:
    """Map a label token to a risk class; accepts letters and the word forms."""
    key = text.strip().lower()
    if key not in _LABEL_WORDS:
        raise ValueError(f"unknown risk label {text!r}")
    return _LABEL_WORDS[key]


def load_csv(stream) -> Dataset:
    """Parse a schema CSV from a binary stream into a dataset.

    The header must contain exactly the schema columns (any order); rows are
    checked cell by cell and every failure is reported with its row number
    (1-based, counting data rows) and column name.
    """
    try:
        text = io.TextIOWrapper(stream, encoding="utf-8", newline="")
        reader = csv.reader(text)
        rows = list(reader)
    except UnicodeDecodeError as exc:
        raise DataError(f"input is not valid UTF-8: {exc}") from exc
    if not rows:
        raise DataError("input is empty: expected a header row")
    header = rows[0]
    problems: list[str] = []
    seen: set[str] = set()
    for name in header:
        if name in seen:
            problems.append(f"duplicate column {name!r}")
        seen.add(name)
    for name in ALL_COLUMNS:
        if name not in seen:
            problems.append(f"missing column {name!r}")
    for name in header:
        if name not in ALL_COLUMNS:
            problems.append(f"unknown column {name!r}")
    if problems:
        raise DataError(
            "header does not match the dataset schema:\n  " + "\n  ".join(problems),
            diagnostics=problems,
        )
    col = {name: header.index(name) for name in ALL_COLUMNS}
    if len(rows) == 1:
        raise DataError("empty dataset: the file contains a header but no data rows")

    observations: list[Observation] = []
    seen_ids: dict[tuple[str, int], int] = {}
    for row_no, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            problems.append(
                f"row {row_no}: expected {len(header)} cells, found {len(row)}"
            )
            continue
        row_ok = True
        drug = row[col[DRUG_COLUMN]].strip()
        if not drug:
            problems.append(f"row {row_no}, column {DRUG_COLUMN}: empty cell")
            row_ok = False
        rep_text = row[col[REPLICATE_COLUMN]].strip()
        replicate = None
        if not rep_text:
            problems.append(f"row {row_no}, column {REPLICATE_COLUMN}: empty cell")
            row_ok = False
        else:
            try:
                replicate = int(rep_text)
                if replicate < 1:
                    raise ValueError
            except ValueError:
                problems.append(
                    f"row {row_no}, column {REPLICATE_COLUMN}: "
                    f"{rep_text!r} is not a positive integer"
                )
                row_ok = False
        features = np.empty(len(FEATURE_NAMES))
        for j, name in enumerate(FEATURE_NAMES):
            cell = row[col[name]].strip()
            if not cell:
                problems.append(f"row {row_no}, column {name}: empty cell")
                row_ok = False
                continue
            try:
                value = float(cell)
            except ValueError:
                problems.append(
                    f"row {row_no}, column {name}: {cell!r} is not a number"
                )
                row_ok = False
                continue
            if not np.isfinite(value):
                problems.append(
                    f"row {row_no}, column {name}: {cell!r} is not finite"
                )
                row_ok = False
                continue
            features[j] = value
        risk_text = row[col[RISK_COLUMN]].strip()
        label = None
        if not risk_text:
            problems.append(f"row {row_no}, column {RISK_COLUMN}: empty cell")
            row_ok = False
        else:
            try:
                label = parse_risk_label(risk_text)
            except ValueError:
                problems.append(
                    f"row {row_no}, column {RISK_COLUMN}: "
                    f"unknown risk label {risk_text!r}"
                )
                row_ok = False
        if not row_ok:
            continue
        key = (drug, replicate)
        if key in seen_ids:
            problems.append(
                f"row {row_no}: duplicate (drug, replicate) pair "
                f"({drug!r}, {replicate}) first seen at row {seen_ids[key]}"
            )
            continue
        seen_ids[key] = row_no
        observations.append(
            Observation(drug_id=drug, replicate=replicate, features=features, label=label)
        )
    if problems:
        raise DataError(
            f"{len(problems)} problem(s) in the data rows:\n  " + "\n  ".join(problems),
            diagnostics=problems,
        )
    return Dataset(feature_names=FEATURE_NAMES, observations=tuple(observations))


def write_csv(dataset: Dataset, stream) -> None:
    """Write a dataset as CSV: LF line endings, shortest round-trip numerics."""
    lines = [",".join((DRUG_COLUMN, REPLICATE_COLUMN) + dataset.feature_names + (RISK_COLUMN,))]
    for obs in dataset.observations:
        cells = [obs.drug_id, str(obs.replicate)]
        cells.extend(repr(float(v)) for v in obs.features)
        cells.append(obs.label.letter)
        lines.append(",".join(cells))
    stream.write(("\n".join(lines) + "\n").encode("utf-8"))


@dataclass(frozen=True)
class SynthConfig:
    """Shape and signal strength of a synthetic dataset.

    ``class_drug_counts`` is (high, medium, low); the defaults reproduce the
    28-drug, 4-replicate, 112-row layout. ``class_separation`` scales how far
    apart the class-level latent means sit (0 means the features carry no
    label signal); drugs scatter around their class mean with unit spread and
    replicates around their drug mean with ``replicate_noise``.
    """

    class_drug_counts: tuple[int, int, int] = (8, 11, 9)
    replicates_per_drug: int = 4
    class_separation: float = 0.35
    replicate_noise: float = 0.5
    seed: int = 0

    def __post_init__(self):
        counts = tuple(int(c) for c in self.class_drug_counts)
        object.__setattr__(self, "class_drug_counts", counts)
        if len(counts) != 3 or any(c < 1 for c in counts):
            raise DataError(
                f"class_drug_counts must be three positive integers, got {counts!r}"
            )
        if self.replicates_per_drug < 1:
            raise DataError("replicates_per_drug must be positive")
        if not np.isfinite(self.class_separation) or self.class_separation < 0.0:
            raise DataError("class_separation must be a finite non-negative real")
        if not np.isfinite(self.replicate_noise) or self.replicate_noise < 0.0:
            raise DataError("replicate_noise must be a finite non-negative real")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise DataError(f"seed must be a non-negative integer, got {self.seed!r}")


def synthesize_dataset(config: SynthConfig | None = None) -> Dataset:
    """Deterministic synthetic dataset with drug-grouped replicate structure.

    Per class a latent mean vector (scaled by ``class_separation``) is drawn,
    each drug scatters around its class mean with unit spread, and each
    replicate around its drug mean with ``replicate_noise``. The latent
    values are then mapped to plausible assay magnitudes per column.
    """
    if config is None:
        config = SynthConfig()
    rng = np.random.default_rng(np.random.SeedSequence([_SALT_SYNTH, int(config.seed)]))
    p = len(FEATURE_NAMES)
    class_means = {
        c: config.class_separation * rng.standard_normal(p) for c in CLASS_ORDER
    }
    n_high, n_medium, n_low = config.class_drug_counts
    drug_classes = (
        [RiskClass.HIGH] * n_high + [RiskClass.MEDIUM] * n_medium + [RiskClass.LOW] * n_low
    )
    width = max(2, len(str(len(drug_classes))))
    offsets = np.array([_FEATURE_PROFILE[name][0] for name in FEATURE_NAMES])
    scales = np.array([_FEATURE_PROFILE[name][1] for name in FEATURE_NAMES])
    observations = []
    for d, cls in enumerate(drug_classes, start=1):
        drug_mean = class_means[cls] + rng.standard_normal(p)
        for r in range(1, config.replicates_per_drug + 1):
            latent = drug_mean + config.replicate_noise * rng.standard_normal(p)
            observations.append(
                Observation(
                    drug_id=f"drug_{d:0{width}d}",
                    replicate=r,
                    features=offsets + scales * latent,
                    label=cls,
                )
            )
    return Dataset(feature_names=FEATURE_NAMES, observations=tuple(observations))


def select_features(dataset: Dataset, names) -> Dataset:
    """Dataset restricted to the given predictor columns, in the given order."""
    names = tuple(names)
    if not names:
        raise DataError("at least one feature must be selected")
    if len(set(names)) != len(names):
        raise DataError("selected feature names must be unique")
    missing = [n for n in names if n not in dataset.feature_names]
    if missing:
        raise DataError(
            f"unknown feature column(s): {', '.join(repr(n) for n in missing)}"
        )
    cols = [dataset.feature_names.index(n) for n in names]
    observations = tuple(
        Observation(
            drug_id=obs.drug_id,
            replicate=obs.replicate,
            features=obs.features[cols],
            label=obs.label,
        )
        for obs in dataset.observations
    )
    return Dataset(feature_names=names, observations=observations)
