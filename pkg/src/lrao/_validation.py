"""Input validation helpers shared by the functional core and the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def check_batch(X, *, name="X", min_length=1):
    """Return ``X`` as a C-contiguous float64 array of shape (n_sequences, n_samples).

    A 1-D input is treated as a single sequence.
    """
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    X = check_array(X, dtype=np.float64, ensure_2d=True, order="C",
                    input_name=name)
    if X.shape[1] < min_length:
        raise ValueError(f"{name} sequences have length {X.shape[1]}, "
                         f"need at least {min_length}")
    return X


def check_vector(x, *, name="x", length=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if x.size == 0:
        raise ValueError(f"{name} is empty")
    if length is not None and x.size != length:
        raise ValueError(f"{name} has length {x.size}, expected {length}")
    return x


def check_rng(rng):
    """Accept a Generator, a seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
