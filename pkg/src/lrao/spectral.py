"""Periodogram PSD estimation and the circulant (Toeplitz-asymptotic) covariance operators.

For a stationary sequence of length N the covariance matrix is approximately
diagonalized by the N-point DFT basis, with eigenvalues equal to the PSD sampled
at f_i = i/N. Inverting or square-rooting the covariance then reduces to a
per-bin division in the DFT domain.

All periodograms here carry the 1/N factor, ``|X[i]|**2 / N``, so that a
unit-variance white sequence has a flat PSD of 1.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from ._validation import check_batch, check_vector

FLOOR_RATIO = 1e-8

# Medians of the unit-mean periodogram bin distributions of Gaussian data:
# complex bins are chi2_2 / 2 (exponential), the DC and Nyquist bins chi2_1.
_MEDIAN_COMPLEX = np.log(2.0)
_MEDIAN_REAL = float(chi2.median(1))


@dataclass(frozen=True)
class SpectralModel:
    """A sampled PSD standing in for a stationary covariance matrix.

    Attributes
    ----------
    psd : ndarray of shape (n,)
        Symmetric, strictly positive PSD samples at f_i = i/n.
    n : int
        Sequence length.
    floor : float
        Clamp applied to vanishing bins.
    """

    psd: np.ndarray
    n: int
    floor: float

    def __post_init__(self):
        psd = np.asarray(self.psd, dtype=np.float64)
        if psd.ndim != 1 or psd.size != self.n:
            raise ValueError(f"psd must have shape ({self.n},), got {psd.shape}")
        if not np.all(np.isfinite(psd)) or np.any(psd <= 0):
            raise ValueError("psd entries must be finite and positive")
        psd.setflags(write=False)
        object.__setattr__(self, "psd", psd)

    @classmethod
    def from_psd(cls, psd, floor_ratio=FLOOR_RATIO):
        """Clamp and symmetrize raw PSD samples into a model."""
        psd = np.asarray(psd, dtype=np.float64)
        if psd.ndim != 1 or psd.size == 0:
            raise ValueError("psd must be a non-empty 1-D array")
        peak = psd.max()
        if not np.isfinite(peak) or peak <= 0:
            raise ValueError("psd must have a finite positive maximum")
        floor = floor_ratio * peak
        psd = symmetrize(np.maximum(psd, floor))
        return cls(psd=psd, n=psd.size, floor=floor)

    @classmethod
    def white(cls, n, variance=1.0):
        return cls(psd=np.full(n, float(variance)), n=n, floor=FLOOR_RATIO * variance)


def symmetrize(psd):
    """Average bins i and N-i so the PSD corresponds to a real process."""
    psd = np.asarray(psd, dtype=np.float64)
    return 0.5 * (psd + np.roll(psd[::-1], 1))


def dft(x):
    """N-point DFT along the last axis, ``X[i] = sum_n x[n] exp(-2j pi i n / N)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or x.shape[-1] == 0:
        raise ValueError("dft of empty input")
    return np.fft.fft(x, axis=-1)


def idft(spectrum):
    return np.fft.ifft(spectrum, axis=-1)


def periodogram(x):
    """Schuster periodogram ``|dft(x)|**2 / N`` along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or x.shape[-1] == 0:
        raise ValueError("periodogram of empty input")
    n = x.shape[-1]
    spec = np.fft.fft(x, axis=-1)
    return (spec.real ** 2 + spec.imag ** 2) / n


def median_consistency(n):
    """Per-bin factor mapping a median of Gaussian periodograms to their mean."""
    factor = np.full(n, _MEDIAN_COMPLEX)
    factor[0] = _MEDIAN_REAL
    if n % 2 == 0:
        factor[n // 2] = _MEDIAN_REAL
    return factor


def averaged_psd(batch, method="mean", *, consistent=True, floor_ratio=FLOOR_RATIO):
    """Average the periodograms of a batch of sequences into a SpectralModel.

    Parameters
    ----------
    batch : array-like of shape (n_sequences, n)
    method : {"mean", "median"}
        ``"median"`` is the outlier-robust variant.
    consistent : bool
        Rescale the median so it estimates the PSD (rather than the median
        periodogram) for Gaussian data. Ignored for ``"mean"``.
    """
    X = check_batch(batch, name="batch")
    pgrams = periodogram(X)
    if method == "mean":
        psd = pgrams.mean(axis=0)
    elif method == "median":
        psd = np.median(pgrams, axis=0)
        if consistent:
            psd = psd / median_consistency(X.shape[1])
    else:
        raise ValueError(f"method must be 'mean' or 'median', got {method!r}")
    return SpectralModel.from_psd(psd, floor_ratio=floor_ratio)


def _check_length(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != model.n:
        raise ValueError(f"input length {x.shape[-1] if x.ndim else 0} does not "
                         f"match model length {model.n}")
    return x


def _apply_weights(weights, x):
    out = np.fft.ifft(np.fft.fft(x, axis=-1) * weights, axis=-1)
    return out.real


def apply_inverse_cov(model, x):
    """Apply ``sum_i v_i v_i^H / psd[i]`` to ``x`` (last axis)."""
    x = _check_length(model, x)
    return _apply_weights(1.0 / model.psd, x)


def apply_whitening(model, x):
    """Apply the symmetric square root ``sum_i v_i v_i^H / sqrt(psd[i])``."""
    x = _check_length(model, x)
    return _apply_weights(1.0 / np.sqrt(model.psd), x)


def apply_cov(model, x):
    x = _check_length(model, x)
    return _apply_weights(model.psd, x)


def quadratic_form(model, a, b):
    """``a^T Sigma^{-1} b`` for the columns of ``a`` (n, p) and ``b`` (n, q)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64).T).T
    b = np.atleast_2d(np.asarray(b, dtype=np.float64).T).T
    if a.shape[0] != model.n or b.shape[0] != model.n:
        raise ValueError("operand length does not match model length")
    fa = np.fft.fft(a, axis=0)
    fb = np.fft.fft(b, axis=0)
    out = (fa.conj().T / model.psd) @ fb / model.n
    return out.real


def circulant_matrix(model, power=-1.0):
    """Dense ``sum_i v_i v_i^H psd[i]**power``; for tests and small problems."""
    n = model.n
    eye = np.eye(n)
    return _apply_weights(model.psd ** power, eye)


def robust_acs(x, max_lag):
    """Normalized autocorrelation with the median substituted for the mean.

    ``x`` may be a single sequence or a batch (rows); products are pooled over
    all rows before taking the median.
    """
    X = check_batch(x, name="x")
    lags = np.arange(max_lag + 1)
    r = np.empty(lags.size)
    for k in lags:
        prods = (X[:, k:] * X[:, :X.shape[1] - k]).ravel()
        r[k] = np.median(prods) if k else np.median(X.ravel() ** 2)
    return r / r[0]
