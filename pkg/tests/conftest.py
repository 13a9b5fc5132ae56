import numpy as np
import pytest

from tdprisk import CLASS_ORDER, Dataset, Observation, SynthConfig, synthesize_dataset


def dataset_from_arrays(X, label_indices, feature_names=None):
    """Build a dataset from a feature matrix and integer class labels."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    p = X.shape[1] if X.ndim == 2 else 0
    names = tuple(feature_names) if feature_names else tuple(f"f{j}" for j in range(p))
    observations = tuple(
        Observation(
            drug_id=f"d{i:03d}",
            replicate=1,
            features=X[i],
            label=CLASS_ORDER[int(label_indices[i])],
        )
        for i in range(n)
    )
    return Dataset(feature_names=names, observations=observations)


def clustered_instance(rng, n_per_class=10, p=2, spread=6.0, noise=1.0):
    """Three Gaussian clusters, one per class; large spread makes them separable."""
    centers = rng.standard_normal((3, p)) * spread
    labels = np.repeat(np.arange(3), n_per_class)
    X = centers[labels] + noise * rng.standard_normal((3 * n_per_class, p))
    return dataset_from_arrays(X, labels)


@pytest.fixture(scope="session")
def separable_fixture():
    """Default-shaped synthetic dataset with a large class separation."""
    return synthesize_dataset(
        SynthConfig(class_separation=8.0, replicate_noise=0.1, seed=20)
    )


@pytest.fixture(scope="session")
def default_fixture():
    return synthesize_dataset(SynthConfig(seed=7))
