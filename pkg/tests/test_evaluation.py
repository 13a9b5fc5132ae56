"""Resampling-protocol tests: splits, CV, bootstrap, quantiles, importance."""

import numpy as np
import pytest

from tdprisk import (
    CLASS_ORDER,
    EvaluationError,
    GROUPING_BY_DRUG,
    RiskClass,
    SplitSpec,
    SynthConfig,
    TrainConfig,
    accuracy,
    bootstrap_accuracy,
    k_fold_cv,
    normalize_importance,
    percentile_ci,
    permutation_importance,
    synthesize_dataset,
    train_test_split,
)
from tdprisk import evaluation as ev
from tdprisk.evaluation import (
    BootstrapDistribution,
    ImportanceEntry,
    ImportanceTable,
    _draw_resample,
)
from conftest import clustered_instance, dataset_from_arrays
from oracles import quantile_interpolated


class TestAccuracy:
    def test_eighty_nine_of_one_twelve(self):
        truth = [RiskClass.LOW] * 112
        predicted = [RiskClass.LOW] * 89 + [RiskClass.HIGH] * 23
        assert accuracy(truth, predicted) == 89 / 112

    def test_identical_sequences(self):
        seq = [RiskClass.LOW, RiskClass.MEDIUM, RiskClass.HIGH]
        assert accuracy(seq, list(seq)) == 1.0

    def test_total_disagreement(self):
        truth = [RiskClass.LOW, RiskClass.MEDIUM]
        predicted = [RiskClass.MEDIUM, RiskClass.HIGH]
        assert accuracy(truth, predicted) == 0.0

    def test_errors(self):
        with pytest.raises(EvaluationError):
            accuracy([], [])
        with pytest.raises(EvaluationError):
            accuracy([RiskClass.LOW], [RiskClass.LOW, RiskClass.HIGH])

    def test_values_are_rational_counts(self):
        rng = np.random.default_rng(50)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            truth = [CLASS_ORDER[i] for i in rng.integers(0, 3, n)]
            predicted = [CLASS_ORDER[i] for i in rng.integers(0, 3, n)]
            acc = accuracy(truth, predicted)
            assert acc == round(acc * n) / n


class TestTrainTestSplit:
    def test_sizes_round_half_to_even(self, default_fixture):
        train, test = train_test_split(default_fixture, SplitSpec(seed=1))
        assert (train.n, test.n) == (90, 22)

    def test_deterministic(self, default_fixture):
        spec = SplitSpec(seed=9)
        a_train, a_test = train_test_split(default_fixture, spec)
        b_train, b_test = train_test_split(default_fixture, spec)
        assert [o.drug_id for o in a_train.observations] == [
            o.drug_id for o in b_train.observations
        ]
        assert [o.replicate for o in a_test.observations] == [
            o.replicate for o in b_test.observations
        ]

    def test_disjoint_and_exhaustive(self, default_fixture):
        train, test = train_test_split(default_fixture, SplitSpec(seed=4))
        train_ids = {(o.drug_id, o.replicate) for o in train.observations}
        test_ids = {(o.drug_id, o.replicate) for o in test.observations}
        all_ids = {(o.drug_id, o.replicate) for o in default_fixture.observations}
        assert train_ids.isdisjoint(test_ids)
        assert train_ids | test_ids == all_ids

    def test_stratified_preserves_class_shares(self, default_fixture):
        train, _ = train_test_split(default_fixture, SplitSpec(seed=2))
        total = default_fixture.class_counts()
        got = train.class_counts()
        for c in CLASS_ORDER:
            ideal = 0.8 * total[c]
            assert abs(got[c] - ideal) <= 1.0

    def test_by_drug_keeps_replicates_together(self, default_fixture):
        spec = SplitSpec(seed=5, grouping=GROUPING_BY_DRUG)
        train, test = train_test_split(default_fixture, spec)
        assert {o.drug_id for o in train.observations}.isdisjoint(
            {o.drug_id for o in test.observations}
        )
        assert (train.n, test.n) == (88, 24)

    def test_rejects_fraction_leaving_empty_part(self):
        rng = np.random.default_rng(51)
        data = dataset_from_arrays(rng.standard_normal((4, 1)), [0, 1, 2, 0])
        with pytest.raises(EvaluationError):
            train_test_split(data, SplitSpec(train_fraction=0.05))

    def test_rejects_class_dropped_from_training_side(self):
        rng = np.random.default_rng(52)
        labels = [0] * 10 + [1] * 10 + [2]
        data = dataset_from_arrays(rng.standard_normal((21, 1)), labels)
        with pytest.raises(EvaluationError, match="H"):
            train_test_split(data, SplitSpec(train_fraction=0.25))

    def test_spec_validation(self):
        with pytest.raises(EvaluationError):
            SplitSpec(train_fraction=1.0)
        with pytest.raises(EvaluationError):
            SplitSpec(grouping="by_lab")
        with pytest.raises(EvaluationError):
            SplitSpec(seed=-1)


class TestKFoldCV:
    def test_fold_sizes_112_by_5(self, default_fixture):
        report = k_fold_cv(default_fixture, k=5, seed=0)
        sizes = sorted(
            report.fold_assignments.count(f) for f in range(5)
        )
        assert sizes == [22, 22, 22, 23, 23]

    def test_fold_sizes_differ_by_at_most_one_for_many_seeds(self, default_fixture):
        for seed in range(8):
            report = k_fold_cv(default_fixture, k=4, seed=seed)
            sizes = [report.fold_assignments.count(f) for f in range(4)]
            assert max(sizes) - min(sizes) <= 1

    def test_partition_is_exhaustive_and_stratified(self, default_fixture):
        report = k_fold_cv(default_fixture, k=5, seed=6)
        assignments = np.array(report.fold_assignments)
        assert assignments.shape == (112,)
        assert set(assignments.tolist()) == {0, 1, 2, 3, 4}
        labels = default_fixture.label_indices
        for c in range(3):
            per_fold = [
                int(np.sum((assignments == f) & (labels == c))) for f in range(5)
            ]
            assert max(per_fold) - min(per_fold) <= 1

    def test_mean_is_arithmetic_mean(self, default_fixture):
        report = k_fold_cv(default_fixture, k=5, seed=1)
        assert abs(
            report.mean_accuracy - sum(report.per_fold_accuracy) / 5
        ) <= 1e-12

    def test_deterministic(self, default_fixture):
        a = k_fold_cv(default_fixture, k=5, seed=3)
        b = k_fold_cv(default_fixture, k=5, seed=3)
        assert a == b

    def test_separable_data_scores_high(self, separable_fixture):
        report = k_fold_cv(separable_fixture, k=5, seed=2)
        assert report.mean_accuracy >= 0.95

    def test_permuted_labels_score_near_chance(self):
        data = synthesize_dataset(SynthConfig(class_separation=0.0, seed=60))
        report = k_fold_cv(data, k=5, seed=60)
        assert 0.15 <= report.mean_accuracy <= 0.55

    def test_by_drug_keeps_drug_in_one_fold_and_balances_groups(self, default_fixture):
        report = k_fold_cv(default_fixture, k=5, seed=8, grouping=GROUPING_BY_DRUG)
        fold_of_drug = {}
        for obs, f in zip(default_fixture.observations, report.fold_assignments):
            fold_of_drug.setdefault(obs.drug_id, set()).add(f)
        assert all(len(folds) == 1 for folds in fold_of_drug.values())
        drug_counts = [0] * 5
        for folds in fold_of_drug.values():
            drug_counts[folds.pop()] += 1
        assert max(drug_counts) - min(drug_counts) <= 1

    def test_preconditions(self, default_fixture):
        rng = np.random.default_rng(53)
        with pytest.raises(EvaluationError):
            k_fold_cv(default_fixture, k=1)
        tiny = dataset_from_arrays(rng.standard_normal((9, 1)), [0, 0, 0, 1, 1, 1, 2, 2, 2])
        with pytest.raises(EvaluationError):
            k_fold_cv(tiny, k=10)
        with pytest.raises(EvaluationError, match="L"):
            k_fold_cv(tiny, k=4)

    def test_training_never_sees_test_fold(self, default_fixture, monkeypatch):
        """Checksum the observation identities each fit receives: they must be
        exactly the complement of that iteration's test fold."""
        seen = []
        real_fit = ev.trainer.fit

        def spy(data, config=None):
            seen.append(frozenset((o.drug_id, o.replicate) for o in data.observations))
            return real_fit(data, config)

        monkeypatch.setattr(ev.trainer, "fit", spy)
        report = k_fold_cv(default_fixture, k=5, seed=11)
        all_ids = {(o.drug_id, o.replicate) for o in default_fixture.observations}
        for f in range(5):
            test_ids = {
                (obs.drug_id, obs.replicate)
                for obs, fold in zip(default_fixture.observations, report.fold_assignments)
                if fold == f
            }
            assert seen[f].isdisjoint(test_ids)
            assert seen[f] | test_ids == all_ids


def _degenerate_three_class(n_per_class=5):
    """Constant features within each class: any sensible fit classifies perfectly."""
    X = np.repeat(np.array([[0.0, 0.0], [5.0, -5.0], [-5.0, 5.0]]), n_per_class, axis=0)
    labels = np.repeat([0, 1, 2], n_per_class)
    return dataset_from_arrays(X, labels)


class TestBootstrap:
    def test_round_robin_fold_scheduling(self, default_fixture):
        dist = bootstrap_accuracy(default_fixture, k=5, total_replicates=10, master_seed=1)
        assert [m.fold for m in dist.replicate_meta] == [0, 1, 2, 3, 4, 0, 1, 2, 3, 4]
        assert [m.replicate for m in dist.replicate_meta] == list(range(10))

    def test_deterministic_and_thread_invariant(self, default_fixture):
        a = bootstrap_accuracy(default_fixture, total_replicates=10, master_seed=2, threads=1)
        b = bootstrap_accuracy(default_fixture, total_replicates=10, master_seed=2, threads=4)
        assert a == b

    def test_degenerate_data_gives_point_interval_at_one(self):
        data = _degenerate_three_class()
        dist = bootstrap_accuracy(data, k=5, total_replicates=20, master_seed=3)
        assert len(dist.accuracies) + len(dist.skipped) == 20
        assert all(acc == 1.0 for acc in dist.accuracies)
        assert percentile_ci(dist) == (1.0, 1.0)

    def test_replicate_seeds_derive_from_master_and_index(self, default_fixture):
        dist = bootstrap_accuracy(default_fixture, total_replicates=6, master_seed=17)
        for meta in dist.replicate_meta:
            expected = ev._derive_seed(
                ev._SALT_BOOTSTRAP, 17, meta.replicate, 0
            )
            assert meta.seed == expected

    def test_resample_redraw_covers_missing_class(self):
        """A resample that drops a class is redrawn with the next derived seed."""
        labels = np.array([0] * 8 + [1] * 8 + [2] * 2, dtype=np.int64)
        train_idx = np.arange(18)
        hits = 0
        for replicate in range(200):
            chosen, seed, attempts = _draw_resample(train_idx, labels, 5, replicate)
            assert chosen is not None
            assert np.bincount(labels[chosen], minlength=3).min() > 0
            if attempts > 1:
                hits += 1
        assert hits > 0

    def test_resample_skips_when_class_unreachable(self):
        labels = np.array([0, 0, 1, 1, 2, 2], dtype=np.int64)
        train_idx = np.array([0, 1, 2, 3])
        chosen, seed, attempts = _draw_resample(train_idx, labels, 0, 0, max_attempts=25)
        assert chosen is None
        assert seed is None
        assert attempts == 25

    def test_skipped_replicates_are_recorded(self, default_fixture, monkeypatch):
        real = ev._draw_resample

        def flaky(train_idx, labels, master_seed, replicate, max_attempts=100):
            if replicate == 3:
                return None, None, max_attempts
            return real(train_idx, labels, master_seed, replicate, max_attempts)

        monkeypatch.setattr(ev, "_draw_resample", flaky)
        dist = bootstrap_accuracy(default_fixture, total_replicates=6, master_seed=4)
        assert len(dist.accuracies) == 5
        assert len(dist.skipped) == 1
        assert dist.skipped[0].replicate == 3
        assert dist.skipped[0].fold == 3
        assert "100 attempts" in dist.skipped[0].reason


class TestPercentileCI:
    def test_hand_checked_interpolation(self):
        dist = BootstrapDistribution(
            accuracies=(0.0, 0.25, 0.5, 0.75, 1.0),
            replicate_meta=(),
            skipped=(),
            master_seed=0,
        )
        lo, hi = percentile_ci(dist, level=0.95)
        assert lo == pytest.approx(quantile_interpolated(dist.accuracies, 0.025), abs=1e-15)
        assert hi == pytest.approx(quantile_interpolated(dist.accuracies, 0.975), abs=1e-15)
        assert (lo, hi) == pytest.approx((0.025, 0.975), abs=1e-15)

    def test_matches_oracle_on_random_distributions(self):
        rng = np.random.default_rng(54)
        for _ in range(50):
            n = int(rng.integers(2, 60))
            accs = tuple(rng.uniform(0, 1, n))
            dist = BootstrapDistribution(accs, (), (), 0)
            level = float(rng.uniform(0.5, 0.99))
            lo, hi = percentile_ci(dist, level)
            assert lo == pytest.approx(
                quantile_interpolated(accs, (1 - level) / 2), abs=1e-12
            )
            assert hi == pytest.approx(
                quantile_interpolated(accs, 1 - (1 - level) / 2), abs=1e-12
            )
            assert min(accs) <= lo <= hi <= max(accs)

    def test_order_independence(self):
        rng = np.random.default_rng(55)
        accs = rng.uniform(0, 1, 30)
        a = percentile_ci(BootstrapDistribution(tuple(accs), (), (), 0))
        b = percentile_ci(BootstrapDistribution(tuple(accs[::-1]), (), (), 0))
        assert a == b

    def test_constant_distribution(self):
        dist = BootstrapDistribution((0.8,) * 12, (), (), 0)
        assert percentile_ci(dist) == (0.8, 0.8)

    def test_errors(self):
        dist = BootstrapDistribution((), (), (), 0)
        with pytest.raises(EvaluationError):
            percentile_ci(dist)
        with pytest.raises(EvaluationError):
            percentile_ci(BootstrapDistribution((0.5,), (), (), 0), level=1.0)


class TestPermutationImportance:
    def _signal_dataset(self, rng, n_per_class=10):
        """Two informative columns plus one exactly constant column."""
        centers = np.array([[0.0, 0.0], [6.0, -6.0], [-6.0, 6.0]])
        labels = np.repeat(np.arange(3), n_per_class)
        signal = centers[labels] + 0.5 * rng.standard_normal((3 * n_per_class, 2))
        X = np.column_stack([signal[:, 0], np.full(3 * n_per_class, 3.75), signal[:, 1]])
        return dataset_from_arrays(X, labels)

    def test_constant_predictor_has_exactly_zero_importance(self):
        rng = np.random.default_rng(56)
        table = permutation_importance(self._signal_dataset(rng), k=5, seed=1, repeats=5)
        by_name = {e.feature_name: e for e in table.entries}
        assert by_name["f1"].raw_importance == 0.0
        assert by_name["f0"].raw_importance > 0.0

    def test_models_fitted_once_per_fold(self, monkeypatch):
        rng = np.random.default_rng(57)
        data = self._signal_dataset(rng)
        calls = []
        real_fit = ev.trainer.fit

        def spy(ds, config=None):
            calls.append(ds.n)
            return real_fit(ds, config)

        monkeypatch.setattr(ev.trainer, "fit", spy)
        permutation_importance(data, k=5, seed=2, repeats=4)
        assert len(calls) == 5

    def test_deterministic_and_thread_invariant(self):
        rng = np.random.default_rng(58)
        data = self._signal_dataset(rng)
        a = permutation_importance(data, k=5, seed=3, repeats=3, threads=1)
        b = permutation_importance(data, k=5, seed=3, repeats=3, threads=3)
        assert a == b

    def test_repeats_must_be_positive(self, default_fixture):
        with pytest.raises(EvaluationError):
            permutation_importance(default_fixture, repeats=0)


class TestNormalizeImportance:
    def _table(self, raws):
        entries = tuple(
            ImportanceEntry(feature_name=f"f{i}", raw_importance=r)
            for i, r in enumerate(raws)
        )
        return ImportanceTable(entries=entries, baseline_accuracy=0.9)

    def test_simple_arithmetic(self):
        table = normalize_importance(self._table([0.20, 0.10]))
        assert [e.normalized_importance for e in table.entries] == [1.0, 0.5]
        assert not any(e.clipped for e in table.entries)

    def test_single_positive_entry_normalizes_to_one(self):
        table = normalize_importance(self._table([0.07]))
        assert table.entries[0].normalized_importance == 1.0

    def test_top_entry_is_exactly_one(self):
        rng = np.random.default_rng(59)
        raws = list(rng.uniform(0.01, 0.4, 10))
        table = normalize_importance(self._table(raws))
        assert max(e.normalized_importance for e in table.entries) == 1.0
        assert all(e.normalized_importance <= 1.0 for e in table.entries)

    def test_non_positive_entries_clip_to_zero(self):
        table = normalize_importance(self._table([0.2, 0.0, -0.05]))
        assert table.entries[1].normalized_importance == 0.0
        assert table.entries[1].clipped
        assert table.entries[2].normalized_importance == 0.0
        assert table.entries[2].clipped

    def test_all_non_positive_is_an_error(self):
        with pytest.raises(EvaluationError):
            normalize_importance(self._table([0.0, -0.1]))
