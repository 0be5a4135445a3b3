"""Synthetic noise with known Fisher information.

Filtered Cauchy noise ``w = A^{-1} z`` with ``z`` IID C(0, 1) and ``A`` the
lower-triangular AR whitening matrix has the closed-form shift information
``F = H^T A^T (I / 2) A H``. The spiky-Gaussian surrogate mimics sensor data
with correlated Gaussian background plus uncorrelated impulses.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg, signal

from ._validation import check_rng
from .stats import sample_cauchy

REFLECTION_BOUND = 0.95
CAUCHY_INTRINSIC_ACCURACY = 0.5


@dataclass(frozen=True)
class ArFilter:
    """AR coefficients of ``w_t = z_t + sum_k coeffs[k-1] w_{t-k}``."""

    coeffs: tuple

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=np.float64))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be a finite 1-D sequence")
        object.__setattr__(self, "coeffs", tuple(c.tolist()))
        if self.max_root_radius() >= 1:
            raise ValueError(f"AR filter {self.coeffs} is not stable")

    @property
    def order(self):
        return len(self.coeffs)

    @property
    def denominator(self):
        """Polynomial ``1 - a_1 z^-1 - ... - a_p z^-p``."""
        return np.concatenate([[1.0], -np.asarray(self.coeffs)])

    def max_root_radius(self):
        if not any(self.coeffs):
            return 0.0
        return float(np.max(np.abs(np.roots(self.denominator))))

    def is_identity(self):
        return not any(self.coeffs)

    def impulse_response(self, n):
        x = np.zeros(n)
        x[0] = 1.0
        return signal.lfilter([1.0], self.denominator, x)

    def whitening_matrix(self, n):
        """Lower-triangular Toeplitz ``A`` mapping ``w`` to ``z`` (zero initial state)."""
        col = np.zeros(n)
        den = self.denominator[:n]
        col[:den.size] = den
        return linalg.toeplitz(col, np.zeros(n))

    def psd(self, n, innovation_variance=1.0):
        """Exact PSD at f_i = i/n of the stationary AR process."""
        freqs = np.arange(n) / n
        _, resp = signal.freqz([1.0], self.denominator, worN=2 * np.pi * freqs)
        return innovation_variance * np.abs(resp) ** 2


def reflection_to_ar(reflection):
    """Step-up (Levinson) recursion from reflection coefficients to AR coefficients."""
    a = np.zeros(0)
    for km in np.asarray(reflection, dtype=np.float64):
        a = np.concatenate([a - km * a[::-1], [km]])
    return a


def random_stable_ar(order, rng=None, bound=REFLECTION_BOUND):
    if order < 1:
        raise ValueError("order must be >= 1")
    k = check_rng(rng).uniform(-bound, bound, size=order)
    return ArFilter(tuple(reflection_to_ar(k)))


@dataclass(frozen=True)
class CauchyNoiseModel:
    filter: ArFilter
    n: int
    burn_in: bool = True

    @property
    def burn_in_length(self):
        if not self.burn_in or self.filter.is_identity():
            return 0
        return 10 * self.filter.order


def ar_filter_batch(ar, z):
    """Run the AR recursion along the rows of ``z`` from a zero state."""
    if ar.is_identity():
        return np.array(z, dtype=np.float64)
    return signal.lfilter([1.0], ar.denominator, z, axis=-1)


def generate(model, count, rng=None):
    """``count`` filtered Cauchy sequences of length ``model.n``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    burn = model.burn_in_length
    z = sample_cauchy(count * (model.n + burn), rng).reshape(count, model.n + burn)
    return ar_filter_batch(model.filter, z)[:, burn:]


def analytic_fi(model, hm):
    """Fisher information ``(1/2) (A H)^T (A H)`` of the shift parameters."""
    if hm.n != model.n:
        raise ValueError(f"observation matrix has {hm.n} rows, model has n={model.n}")
    ah = model.filter.whitening_matrix(model.n) @ hm.h
    return CAUCHY_INTRINSIC_ACCURACY * (ah.T @ ah)


def spiky_gaussian_surrogate(n, count, spike_rate=0.02, spike_scale=10.0, ar=None, rng=None):
    """AR-filtered unit-variance Gaussian noise plus sparse +-spike_scale impulses.

    The impulses are IID and added after filtering, so they do not share the
    background correlation.
    """
    if not 0 <= spike_rate < 1:
        raise ValueError("spike_rate must lie in [0, 1)")
    if not spike_scale > 1:
        raise ValueError("spike_scale must exceed 1")
    rng = check_rng(rng)
    ar = ar if ar is not None else ArFilter((0.0,))
    burn = 10 * ar.order if not ar.is_identity() else 0
    g = rng.standard_normal((count, n + burn))
    g = ar_filter_batch(ar, g)[:, burn:]
    if not ar.is_identity():
        # unit marginal variance of the stationary background
        h = ar.impulse_response(4096)
        g = g / np.sqrt(np.sum(h ** 2))
    hits = rng.random((count, n)) < spike_rate
    signs = np.where(rng.random((count, n)) < 0.5, -1.0, 1.0)
    return g + hits * signs * spike_scale
