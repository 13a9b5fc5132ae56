"""Resampling protocols: accuracy, splits, cross-validation, bootstrap, importance.

Every operation here is a pure, seeded function of its inputs. Units of work
(folds, bootstrap replicates, shuffled predictors) draw from independent
derived random streams and are merged by index, so results do not depend on
execution order or on the ``threads`` argument.

Grouping ``by_observation`` resamples individual rows; ``by_drug`` keeps all
replicates of one drug on the same side of every partition.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import trainer
from .errors import EvaluationError
from .model import CLASS_ORDER, Dataset, RiskClass
from .trainer import TrainConfig

GROUPING_BY_OBSERVATION = "by_observation"
GROUPING_BY_DRUG = "by_drug"
GROUPINGS = (GROUPING_BY_OBSERVATION, GROUPING_BY_DRUG)

# Distinct salts keep the random streams of unrelated protocols independent
# even when the caller reuses one seed everywhere.
_SALT_SPLIT = 101
_SALT_FOLDS = 102
_SALT_BOOTSTRAP = 103
_SALT_PERMUTE = 104

_RESAMPLE_ATTEMPTS = 100


def _check_seed(seed) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0 or seed > 2**64 - 1:
        raise EvaluationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def _check_grouping(grouping: str) -> str:
    if grouping not in GROUPINGS:
        raise EvaluationError(
            f"grouping must be one of {GROUPINGS}, got {grouping!r}"
        )
    return grouping


def _derive_seed(*parts: int) -> int:
    """Deterministic child seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def _map_indexed(fn, items, threads: int):
    """Apply ``fn`` over ``items``, optionally on a thread pool, keeping order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def accuracy(truth: Sequence[RiskClass], predicted: Sequence[RiskClass]) -> float:
    """Fraction of positions where the predicted class equals the true class."""
    truth = list(truth)
    predicted = list(predicted)
    if not truth:
        raise EvaluationError("accuracy of empty sequences is undefined")
    if len(truth) != len(predicted):
        raise EvaluationError(
            f"length mismatch: {len(truth)} true labels vs {len(predicted)} predictions"
        )
    matches = sum(1 for t, p in zip(truth, predicted) if t == p)
    return matches / len(truth)


@dataclass(frozen=True)
class SplitSpec:
    """How to cut a dataset into one training and one test part."""

    train_fraction: float = 0.8
    seed: int = 0
    grouping: str = GROUPING_BY_OBSERVATION
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise EvaluationError(
                f"train_fraction must lie strictly between 0 and 1, "
                f"got {self.train_fraction!r}"
            )
        _check_seed(self.seed)
        _check_grouping(self.grouping)


@dataclass(frozen=True)
class CVReport:
    """Result of one k-fold cross-validation run."""

    k: int
    fold_assignments: tuple[int, ...]
    per_fold_accuracy: tuple[float, ...]
    mean_accuracy: float


@dataclass(frozen=True)
class ReplicateMeta:
    """Provenance of one bootstrap replicate."""

    fold: int
    replicate: int
    seed: int


@dataclass(frozen=True)
class SkippedReplicate:
    """A replicate abandoned after the resample redraw budget ran out."""

    replicate: int
    fold: int
    reason: str


@dataclass(frozen=True)
class BootstrapDistribution:
    """Accuracies of completed bootstrap replicates, in replicate order.

    ``len(accuracies) + len(skipped)`` equals the configured replicate count;
    on any dataset where classes are not vanishingly rare, ``skipped`` is
    empty. Statistics derived from the distribution sort it first, so they do
    not depend on replicate order.
    """

    accuracies: tuple[float, ...]
    replicate_meta: tuple[ReplicateMeta, ...]
    skipped: tuple[SkippedReplicate, ...]
    master_seed: int


@dataclass(frozen=True)
class ImportanceEntry:
    """Accuracy drop caused by shuffling one predictor in held-out folds."""

    feature_name: str
    raw_importance: float
    normalized_importance: float | None = None
    clipped: bool = False


@dataclass(frozen=True)
class ImportanceTable:
    entries: tuple[ImportanceEntry, ...]
    baseline_accuracy: float


def _drug_groups(data: Dataset) -> tuple[list[str], dict[str, list[int]]]:
    """Drug ids in first-appearance order and their observation indices."""
    order: list[str] = []
    groups: dict[str, list[int]] = {}
    for i, obs in enumerate(data.observations):
        if obs.drug_id not in groups:
            groups[obs.drug_id] = []
            order.append(obs.drug_id)
        groups[obs.drug_id].append(i)
    return order, groups


def _greedy_class_allocation(
    class_units: list[np.ndarray], k: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Assign each class's units to k bins so bin totals differ by at most one.

    Units of each class are shuffled, split into chunks whose sizes differ by
    at most one, and the +1 chunks go to the currently smallest bins (ties by
    bin id). Returns, per bin, the array of assigned unit values.
    """
    totals = [0] * k
    bins: list[list[int]] = [[] for _ in range(k)]
    for units in class_units:
        perm = rng.permutation(units)
        base, extra = divmod(len(perm), k)
        counts = [base] * k
        order = sorted(range(k), key=lambda f: (totals[f], f))
        for f in order[:extra]:
            counts[f] += 1
        pos = 0
        for f in range(k):
            bins[f].extend(int(u) for u in perm[pos:pos + counts[f]])
            totals[f] += counts[f]
            pos += counts[f]
    return [np.array(sorted(b), dtype=np.int64) for b in bins]


def _assign_folds(data: Dataset, k: int, seed: int, grouping: str) -> np.ndarray:
    """Stratified fold id per observation, seeded and deterministic."""
    if k < 2:
        raise EvaluationError(f"k must be at least 2, got {k}")
    _check_grouping(grouping)
    rng = np.random.default_rng(np.random.SeedSequence([_SALT_FOLDS, _check_seed(seed)]))
    fold_ids = np.empty(data.n, dtype=np.int64)
    if grouping == GROUPING_BY_OBSERVATION:
        if k > data.n:
            raise EvaluationError(f"k={k} exceeds the {data.n} observations")
        labels = data.label_indices
        class_units = []
        for c in CLASS_ORDER:
            idx = np.flatnonzero(labels == c.index)
            if idx.size < k:
                raise EvaluationError(
                    f"class {c.letter} has {idx.size} observations; stratified "
                    f"{k}-fold assignment needs at least {k} per class"
                )
            class_units.append(idx)
        bins = _greedy_class_allocation(class_units, k, rng)
        for f, members in enumerate(bins):
            fold_ids[members] = f
    else:
        order, groups = _drug_groups(data)
        if k > len(order):
            raise EvaluationError(f"k={k} exceeds the {len(order)} drugs")
        drug_label = {d: data.observations[groups[d][0]].label for d in order}
        class_units = []
        for c in CLASS_ORDER:
            drugs_c = np.array(
                [i for i, d in enumerate(order) if drug_label[d] == c], dtype=np.int64
            )
            if drugs_c.size < 2:
                raise EvaluationError(
                    f"class {c.letter} has {drugs_c.size} drug(s); by-drug fold "
                    f"assignment needs at least 2 so every training side keeps the class"
                )
            class_units.append(drugs_c)
        bins = _greedy_class_allocation(class_units, k, rng)
        for f, members in enumerate(bins):
            for drug_pos in members:
                fold_ids[groups[order[drug_pos]]] = f
    return fold_ids


def _largest_remainder_counts(
    sizes: list[int], fraction: float, target: int
) -> list[int]:
    """Per-class training counts: floor of the ideal share, remainder by largest fraction."""
    ideals = [fraction * s for s in sizes]
    counts = [int(np.floor(v)) for v in ideals]
    leftover = target - sum(counts)
    order = sorted(range(len(sizes)), key=lambda i: (-(ideals[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def train_test_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Cut the dataset into disjoint, exhaustive training and test parts.

    Under ``by_observation`` the training size is ``round(train_fraction * n)``
    (round half to even); under ``by_drug`` whole drugs are allocated and the
    rounding happens at the drug level. Stratification keeps each class's
    share within one observation (or drug) of proportional and guarantees the
    training side keeps every class.
    """
    rng = np.random.default_rng(np.random.SeedSequence([_SALT_SPLIT, spec.seed]))
    if spec.grouping == GROUPING_BY_OBSERVATION:
        n_units = data.n
        unit_members = None
    else:
        order, groups = _drug_groups(data)
        n_units = len(order)
        unit_members = [groups[d] for d in order]
    target = round(spec.train_fraction * n_units)
    if target <= 0 or target >= n_units:
        raise EvaluationError(
            f"train_fraction {spec.train_fraction} leaves an empty part "
            f"({target} of {n_units} units on the training side)"
        )
    if spec.stratified:
        if spec.grouping == GROUPING_BY_OBSERVATION:
            unit_class = data.label_indices
        else:
            unit_class = np.array(
                [data.observations[m[0]].label.index for m in unit_members],
                dtype=np.int64,
            )
        class_idx = [np.flatnonzero(unit_class == c.index) for c in CLASS_ORDER]
        counts = _largest_remainder_counts(
            [idx.size for idx in class_idx], spec.train_fraction, target
        )
        for c, idx, cnt in zip(CLASS_ORDER, class_idx, counts):
            if idx.size > 0 and cnt == 0:
                raise EvaluationError(
                    f"stratified split would leave class {c.letter} out of the "
                    f"training side entirely"
                )
        train_units: list[int] = []
        for idx, cnt in zip(class_idx, counts):
            perm = rng.permutation(idx)
            train_units.extend(int(u) for u in perm[:cnt])
        train_set = set(train_units)
    else:
        perm = rng.permutation(n_units)
        train_set = {int(u) for u in perm[:target]}
    if spec.grouping == GROUPING_BY_OBSERVATION:
        train_idx = [i for i in range(data.n) if i in train_set]
        test_idx = [i for i in range(data.n) if i not in train_set]
    else:
        train_idx = [
            i for u in range(n_units) if u in train_set for i in unit_members[u]
        ]
        test_idx = [
            i for u in range(n_units) if u not in train_set for i in unit_members[u]
        ]
        train_idx.sort()
        test_idx.sort()
    return data.subset(train_idx), data.subset(test_idx)


def _fold_accuracy(data: Dataset, model, test_idx: np.ndarray) -> float:
    truth = [data.observations[int(i)].label for i in test_idx]
    preds = [
        trainer.predict(model, data.observations[int(i)].features)[1]
        for i in test_idx
    ]
    return accuracy(truth, preds)


def k_fold_cv(
    data: Dataset,
    k: int = 5,
    seed: int = 0,
    grouping: str = GROUPING_BY_OBSERVATION,
    train_config: TrainConfig | None = None,
    threads: int = 1,
) -> CVReport:
    """Stratified k-fold cross-validation; each fold is the test set once.

    Fitting (including feature standardization) sees only the k-1 training
    folds of each iteration. The reported mean is the arithmetic mean of the
    per-fold accuracies.
    """
    fold_ids = _assign_folds(data, k, seed, grouping)

    def run_fold(f: int) -> float:
        train_idx = np.flatnonzero(fold_ids != f)
        test_idx = np.flatnonzero(fold_ids == f)
        model = trainer.fit(data.subset(train_idx), train_config)
        return _fold_accuracy(data, model, test_idx)

    per_fold = _map_indexed(run_fold, range(k), threads)
    return CVReport(
        k=k,
        fold_assignments=tuple(int(f) for f in fold_ids),
        per_fold_accuracy=tuple(per_fold),
        mean_accuracy=float(np.mean(per_fold)),
    )


def _draw_resample(
    train_idx: np.ndarray,
    labels: np.ndarray,
    master_seed: int,
    replicate: int,
    max_attempts: int = _RESAMPLE_ATTEMPTS,
) -> tuple[np.ndarray | None, int | None, int]:
    """With-replacement resample of the training indices containing all classes.

    Draws with seeds derived from (master_seed, replicate, attempt) until the
    resample covers every class or the attempt budget runs out. Returns the
    chosen indices, the successful derived seed, and the number of attempts
    used (indices and seed are None when every attempt failed).
    """
    attempts = 0
    for attempt in range(max_attempts):
        attempts += 1
        seed = _derive_seed(_SALT_BOOTSTRAP, master_seed, replicate, attempt)
        rng = np.random.default_rng(seed)
        pick = rng.integers(0, train_idx.size, train_idx.size)
        chosen = train_idx[pick]
        if np.bincount(labels[chosen], minlength=3).min() > 0:
            return chosen, seed, attempts
    return None, None, attempts


def bootstrap_accuracy(
    data: Dataset,
    k: int = 5,
    total_replicates: int = 1000,
    master_seed: int = 0,
    train_config: TrainConfig | None = None,
    grouping: str = GROUPING_BY_OBSERVATION,
    threads: int = 1,
) -> BootstrapDistribution:
    """Empirical accuracy distribution from bootstrap refits over a fixed partition.

    One k-fold partition is fixed from ``master_seed``; replicate ``i``
    targets fold ``i % k``: its training portion is resampled with
    replacement at equal size, a model is fitted to the resample (training
    statistics re-derived from it), and accuracy is recorded on the untouched
    test fold. Resamples missing a class are redrawn with the next derived
    seed, up to 100 attempts, after which the replicate is recorded as
    skipped. Results are identical for any ``threads`` value.
    """
    if total_replicates < 1:
        raise EvaluationError(
            f"total_replicates must be positive, got {total_replicates}"
        )
    master_seed = _check_seed(master_seed)
    fold_ids = _assign_folds(data, k, master_seed, grouping)
    labels = data.label_indices
    fold_train = [np.flatnonzero(fold_ids != f) for f in range(k)]
    fold_test = [np.flatnonzero(fold_ids == f) for f in range(k)]

    def run_replicate(i: int):
        f = i % k
        chosen, seed, attempts = _draw_resample(fold_train[f], labels, master_seed, i)
        if chosen is None:
            reason = (
                f"resample missed a class in all {attempts} attempts"
            )
            return SkippedReplicate(replicate=i, fold=f, reason=reason)
        model = trainer.fit(data.subset(chosen), train_config)
        acc = _fold_accuracy(data, model, fold_test[f])
        return acc, ReplicateMeta(fold=f, replicate=i, seed=seed)

    results = _map_indexed(run_replicate, range(total_replicates), threads)
    accuracies: list[float] = []
    meta: list[ReplicateMeta] = []
    skipped: list[SkippedReplicate] = []
    for res in results:
        if isinstance(res, SkippedReplicate):
            skipped.append(res)
        else:
            acc, m = res
            accuracies.append(acc)
            meta.append(m)
    return BootstrapDistribution(
        accuracies=tuple(accuracies),
        replicate_meta=tuple(meta),
        skipped=tuple(skipped),
        master_seed=master_seed,
    )


def percentile_ci(dist: BootstrapDistribution, level: float = 0.95) -> tuple[float, float]:
    """Central percentile interval of the sorted accuracies.

    Quantiles use linear interpolation between order statistics (the
    ``(n-1)p`` convention).
    """
    if not 0.0 < level < 1.0:
        raise EvaluationError(f"level must lie strictly between 0 and 1, got {level!r}")
    if not dist.accuracies:
        raise EvaluationError("cannot form a confidence interval from zero replicates")
    values = np.sort(np.asarray(dist.accuracies, dtype=np.float64))
    alpha = (1.0 - level) / 2.0
    lo = float(np.quantile(values, alpha, method="linear"))
    hi = float(np.quantile(values, 1.0 - alpha, method="linear"))
    return lo, hi


def permutation_importance(
    data: Dataset,
    k: int = 5,
    seed: int = 0,
    repeats: int = 100,
    train_config: TrainConfig | None = None,
    grouping: str = GROUPING_BY_OBSERVATION,
    threads: int = 1,
) -> ImportanceTable:
    """Accuracy drop per predictor when it is shuffled within each test fold.

    Fits one model per fold (reused, never refitted), then for every
    predictor and repeat re-runs the prediction pass with that column
    permuted inside each test fold. The raw importance is the mean drop from
    the fold's baseline accuracy over all repeats and folds.
    """
    if repeats < 1:
        raise EvaluationError(f"repeats must be positive, got {repeats}")
    seed = _check_seed(seed)
    fold_ids = _assign_folds(data, k, seed, grouping)
    models = []
    fold_test = []
    for f in range(k):
        train_idx = np.flatnonzero(fold_ids != f)
        models.append(trainer.fit(data.subset(train_idx), train_config))
        fold_test.append(np.flatnonzero(fold_ids == f))
    baseline_accs = [
        _fold_accuracy(data, models[f], fold_test[f]) for f in range(k)
    ]
    baseline = float(np.mean(baseline_accs))
    fold_truth = [
        [data.observations[int(i)].label for i in fold_test[f]] for f in range(k)
    ]

    def run_feature(j: int) -> float:
        drops = []
        for r in range(repeats):
            for f in range(k):
                rng = np.random.default_rng(_derive_seed(_SALT_PERMUTE, seed, j, r, f))
                X = data.matrix[fold_test[f]].copy()
                X[:, j] = X[rng.permutation(X.shape[0]), j]
                preds = [
                    trainer.predict(models[f], X[row])[1]
                    for row in range(X.shape[0])
                ]
                drops.append(baseline_accs[f] - accuracy(fold_truth[f], preds))
        return float(np.mean(drops))

    raws = _map_indexed(run_feature, range(data.p), threads)
    entries = tuple(
        ImportanceEntry(feature_name=name, raw_importance=raw)
        for name, raw in zip(data.feature_names, raws)
    )
    return ImportanceTable(entries=entries, baseline_accuracy=baseline)


def normalize_importance(table: ImportanceTable) -> ImportanceTable:
    """Scale raw importances by the largest one; non-positive entries clip to zero."""
    max_raw = max(e.raw_importance for e in table.entries)
    if max_raw <= 0.0:
        raise EvaluationError(
            "all raw importances are non-positive: the model shows no measurable "
            "dependence on any predictor"
        )
    entries = tuple(
        ImportanceEntry(
            feature_name=e.feature_name,
            raw_importance=e.raw_importance,
            normalized_importance=(
                e.raw_importance / max_raw if e.raw_importance > 0.0 else 0.0
            ),
            clipped=e.raw_importance <= 0.0,
        )
        for e in table.entries
    )
    return ImportanceTable(entries=entries, baseline_accuracy=table.baseline_accuracy)
