"""Domain types and the mathematical core of the three-class risk model.

A drug observation carries a feature vector measured on a ventricular-wedge
preparation and a three-valued risk label. The model maps features to class
probabilities through per-class linear scores and a softmax, classifies by
the largest probability, and is fitted by maximum likelihood (see
:mod:`tdprisk.trainer`). All functions here are pure and thread-safe.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _core
from .errors import DataError, DimensionError, NumericError


class RiskClass(enum.Enum):
    """Risk category with canonical order LOW < MEDIUM < HIGH (indices 0, 1, 2)."""

    LOW = "L"
    MEDIUM = "M"
    HIGH = "H"

    @property
    def index(self) -> int:
        return _CLASS_TO_INDEX[self]

    @property
    def letter(self) -> str:
        return self.value

    @classmethod
    def from_index(cls, index: int) -> "RiskClass":
        if not 0 <= index <= 2:
            raise ValueError(f"risk class index must be 0, 1 or 2, got {index}")
        return CLASS_ORDER[index]

    @classmethod
    def from_letter(cls, letter: str) -> "RiskClass":
        try:
            return cls(letter.upper())
        except ValueError:
            raise ValueError(f"unknown risk class letter {letter!r}") from None


CLASS_ORDER = (RiskClass.LOW, RiskClass.MEDIUM, RiskClass.HIGH)
_CLASS_TO_INDEX = {c: i for i, c in enumerate(CLASS_ORDER)}


def _as_feature_array(values, *, context: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise DimensionError(f"{context}: feature values must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{context}: feature values must be finite (no NaN/inf)")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Observation:
    """One drug replicate: identity, features, and the known risk label."""

    drug_id: str
    replicate: int
    features: np.ndarray
    label: RiskClass

    def __post_init__(self):
        if not self.drug_id:
            raise DataError("observation needs a non-empty drug id")
        if not isinstance(self.replicate, int) or self.replicate < 1:
            raise DataError(
                f"drug {self.drug_id!r}: replicate index must be a positive integer, "
                f"got {self.replicate!r}"
            )
        if not isinstance(self.label, RiskClass):
            raise DataError(f"drug {self.drug_id!r}: label must be a RiskClass")
        arr = _as_feature_array(
            self.features, context=f"drug {self.drug_id!r} replicate {self.replicate}"
        )
        object.__setattr__(self, "features", arr)


@dataclass(frozen=True)
class Dataset:
    """A non-empty collection of observations sharing one feature layout.

    ``feature_names`` fixes the predictor order; every observation must carry
    exactly that many features. The loader and the synthetic generator
    guarantee unique ``(drug_id, replicate)`` pairs; datasets built here
    directly (for example bootstrap resamples) may repeat observations.
    """

    feature_names: tuple[str, ...]
    observations: tuple[Observation, ...]

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "observations", tuple(self.observations))
        if not self.observations:
            raise DataError("dataset must contain at least one observation")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("feature names must be unique")
        p = len(self.feature_names)
        for obs in self.observations:
            if obs.features.shape[0] != p:
                raise DimensionError(
                    f"drug {obs.drug_id!r} replicate {obs.replicate} has "
                    f"{obs.features.shape[0]} features, dataset declares {p}"
                )

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def p(self) -> int:
        return len(self.feature_names)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Feature matrix with shape (n, p), read-only."""
        if self.p == 0:
            m = np.empty((self.n, 0))
        else:
            m = np.vstack([obs.features for obs in self.observations])
        m.flags.writeable = False
        return m

    @cached_property
    def label_indices(self) -> np.ndarray:
        """Class index per observation (int64, read-only)."""
        idx = np.array([obs.label.index for obs in self.observations], dtype=np.int64)
        idx.flags.writeable = False
        return idx

    @cached_property
    def design(self) -> np.ndarray:
        """Feature matrix with a leading intercept column of ones, read-only."""
        d = np.column_stack([np.ones(self.n), self.matrix])
        d.flags.writeable = False
        return d

    def class_counts(self) -> dict[RiskClass, int]:
        counts = np.bincount(self.label_indices, minlength=3)
        return {c: int(counts[c.index]) for c in CLASS_ORDER}

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """New dataset from the given observation indices (order preserved)."""
        obs = tuple(self.observations[int(i)] for i in indices)
        return Dataset(self.feature_names, obs)


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """Per-class coefficients: row k holds the intercept followed by the p slopes."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != 3 or arr.shape[1] < 1:
            raise DimensionError(
                f"coefficient matrix must have shape (3, p+1), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise NumericError("coefficient matrix entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n_features(self) -> int:
        return self.values.shape[1] - 1

    @classmethod
    def zeros(cls, n_features: int) -> "CoefficientMatrix":
        return cls(np.zeros((3, n_features + 1)))


@dataclass(frozen=True)
class ClassProbabilities:
    """Probabilities of the three risk classes; sums to one within 1e-12."""

    p_low: float
    p_medium: float
    p_high: float

    def __post_init__(self):
        vals = (self.p_low, self.p_medium, self.p_high)
        for v in vals:
            if not np.isfinite(v) or v < 0.0 or v > 1.0:
                raise NumericError(f"class probability out of [0, 1]: {v!r}")
        if abs(sum(vals) - 1.0) > 1e-12:
            raise NumericError(f"class probabilities sum to {sum(vals)!r}, not 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_low, self.p_medium, self.p_high])


def _check_feature_input(x, n_features: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != n_features:
        actual = arr.shape[0] if arr.ndim == 1 else f"shape {arr.shape}"
        raise DimensionError(
            f"feature vector has {actual} entries, coefficients expect {n_features}"
        )
    if not np.all(np.isfinite(arr)):
        raise NumericError("feature vector must be finite")
    return arr


def linear_scores(beta: CoefficientMatrix, x) -> np.ndarray:
    """Per-class scores: intercept plus the feature dot product, shape (3,)."""
    arr = _check_feature_input(x, beta.n_features)
    scores = beta.values[:, 0] + beta.values[:, 1:] @ arr
    if not np.all(np.isfinite(scores)):
        raise NumericError("linear scores overflowed to non-finite values")
    return scores


def class_probabilities(beta: CoefficientMatrix, x) -> ClassProbabilities:
    """Softmax of the linear scores, stabilized by subtracting the max score."""
    scores = linear_scores(beta, x)
    shifted = scores - scores.max()
    e = np.exp(shifted)
    p = e / e.sum()
    return ClassProbabilities(float(p[0]), float(p[1]), float(p[2]))


def classify(probs: ClassProbabilities) -> RiskClass:
    """Class with the largest probability; ties go to the earliest canonical class."""
    return CLASS_ORDER[int(np.argmax(probs.as_array()))]


def _check_model_inputs(beta: CoefficientMatrix, data: Dataset, ridge: float):
    if beta.n_features != data.p:
        raise DimensionError(
            f"coefficients expect {beta.n_features} features, dataset has {data.p}"
        )
    if not np.isfinite(ridge) or ridge < 0.0:
        raise NumericError(f"ridge must be a finite non-negative real, got {ridge!r}")


def negative_log_likelihood(beta: CoefficientMatrix, data: Dataset, ridge: float = 0.0) -> float:
    """Summed negative log probability of the observed labels plus ridge penalty.

    The penalty is ``ridge/2`` times the squared non-intercept coefficients;
    intercepts are never penalized.
    """
    _check_model_inputs(beta, data, ridge)
    return float(_core.nll(data.design, data.label_indices, beta.values, float(ridge)))


def nll_gradient(beta: CoefficientMatrix, data: Dataset, ridge: float = 0.0) -> np.ndarray:
    """Gradient of :func:`negative_log_likelihood`, shape (3, p+1)."""
    _check_model_inputs(beta, data, ridge)
    return _core.nll_grad(data.design, data.label_indices, beta.values, float(ridge))
