"""Maximum-likelihood fitting of the coefficient matrix.

The objective (negative log-likelihood plus a small ridge penalty on the
non-intercept coefficients) is minimized by gradient descent with a
backtracking line search, starting from all-zero coefficients. The ridge
default keeps the over-parameterized softmax identifiable and the optimum
finite even on linearly separable data. Features are z-scored by default
using training-set statistics stored on the fitted model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _core
from .errors import DataError, TrainingError
from .model import (
    CLASS_ORDER,
    ClassProbabilities,
    CoefficientMatrix,
    Dataset,
    RiskClass,
    _check_feature_input,
    class_probabilities,
    classify,
)


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; the defaults are the ones every protocol uses."""

    ridge: float = 1e-4
    grad_tolerance: float = 1e-8
    max_iterations: int = 10000
    standardize: bool = True

    def __post_init__(self):
        if not np.isfinite(self.ridge) or self.ridge < 0.0:
            raise ValueError(f"ridge must be finite and >= 0, got {self.ridge!r}")
        if not np.isfinite(self.grad_tolerance) or self.grad_tolerance <= 0.0:
            raise ValueError(
                f"grad_tolerance must be finite and > 0, got {self.grad_tolerance!r}"
            )
        if self.max_iterations < 1:
            raise ValueError(
                f"max_iterations must be a positive integer, got {self.max_iterations!r}"
            )


@dataclass(frozen=True)
class FittedModel:
    """Coefficients plus everything needed to reproduce a prediction.

    ``standardization`` holds one (mean, standard deviation) pair per feature
    when the model was trained on z-scored inputs, else ``None``. Features
    that were constant in training keep standard deviation 1.0 and are listed
    in ``constant_features`` as a warning. ``final_nll`` is the objective at
    the returned coefficients, evaluated on the (standardized) training data.
    """

    beta: CoefficientMatrix
    feature_names: tuple[str, ...]
    standardization: tuple[tuple[float, float], ...] | None
    converged: bool
    iterations: int
    final_nll: float
    constant_features: tuple[str, ...] = ()

    def to_json(self) -> str:
        """Serialize to a JSON document; floats keep 17-significant-digit round-trip."""
        doc = {
            "beta": [[float(v) for v in row] for row in self.beta.values],
            "feature_names": list(self.feature_names),
            "standardization": (
                None
                if self.standardization is None
                else [[float(m), float(s)] for m, s in self.standardization]
            ),
            "converged": self.converged,
            "iterations": self.iterations,
            "final_nll": self.final_nll,
            "constant_features": list(self.constant_features),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"model document is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise DataError("model document must be a JSON object")
        missing = [
            k
            for k in ("beta", "feature_names", "standardization", "converged",
                      "iterations", "final_nll")
            if k not in doc
        ]
        if missing:
            raise DataError(f"model document is missing fields: {', '.join(missing)}")
        std = doc["standardization"]
        return cls(
            beta=CoefficientMatrix(np.array(doc["beta"], dtype=np.float64)),
            feature_names=tuple(doc["feature_names"]),
            standardization=(
                None if std is None else tuple((float(m), float(s)) for m, s in std)
            ),
            converged=bool(doc["converged"]),
            iterations=int(doc["iterations"]),
            final_nll=float(doc["final_nll"]),
            constant_features=tuple(doc.get("constant_features", ())),
        )


def fit(data: Dataset, config: TrainConfig | None = None) -> FittedModel:
    """Fit coefficients to a dataset by penalized maximum likelihood.

    Every risk class must appear in the data; an absent class would push its
    intercept to infinity because intercepts are unpenalized. Non-convergence
    within ``max_iterations`` is not an error: the model records how the
    optimizer stopped in ``converged`` and ``iterations``.
    """
    if config is None:
        config = TrainConfig()
    counts = np.bincount(data.label_indices, minlength=3)
    for c in CLASS_ORDER:
        if counts[c.index] == 0:
            raise TrainingError(
                f"training data has no observations of class {c.letter}"
            )
    constant: list[str] = []
    if config.standardize:
        means = data.matrix.mean(axis=0) if data.p else np.empty(0)
        stds = data.matrix.std(axis=0) if data.p else np.empty(0)
        for j, s in enumerate(stds):
            if s == 0.0:
                stds[j] = 1.0
                constant.append(data.feature_names[j])
        design = np.column_stack([np.ones(data.n), (data.matrix - means) / stds])
        standardization = tuple((float(m), float(s)) for m, s in zip(means, stds))
    else:
        design = data.design
        standardization = None
    beta, final_nll, iterations, converged = _core.descend(
        np.ascontiguousarray(design),
        data.label_indices,
        float(config.ridge),
        float(config.grad_tolerance),
        int(config.max_iterations),
    )
    return FittedModel(
        beta=CoefficientMatrix(beta),
        feature_names=data.feature_names,
        standardization=standardization,
        converged=bool(converged),
        iterations=int(iterations),
        final_nll=float(final_nll),
        constant_features=tuple(constant),
    )


def predict(model: FittedModel, x) -> tuple[ClassProbabilities, RiskClass]:
    """Class probabilities and label for one raw feature vector.

    Applies the stored training standardization (never recomputed), then the
    softmax and the argmax decision rule.
    """
    arr = _check_feature_input(x, len(model.feature_names))
    if model.standardization is not None:
        means = np.array([m for m, _ in model.standardization])
        stds = np.array([s for _, s in model.standardization])
        arr = (arr - means) / stds
    probs = class_probabilities(model.beta, arr)
    return probs, classify(probs)
