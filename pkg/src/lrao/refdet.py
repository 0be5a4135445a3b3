"""Reference detectors: robust whitening, a fixed scalar nonlinearity, then the
Gaussian GLRT quadratic form ``y^T D (D^T D)^{-1} D^T y`` with ``D`` the whitened
observation matrix."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import spectral
from ._validation import check_batch
from .lfi import guarded_inverse

LIMITER_LEVEL = 3.0


class NonlinearityKind(str, Enum):
    SIGN = "sign"
    LIMITER3 = "limiter3"
    IDENTITY = "identity"


def nonlinearity(kind, z):
    """Apply the elementwise nonlinearity ``kind`` to ``z``."""
    kind = NonlinearityKind(kind)
    z = np.asarray(z, dtype=np.float64)
    if kind is NonlinearityKind.SIGN:
        return np.sign(z)
    if kind is NonlinearityKind.LIMITER3:
        return np.clip(z, -LIMITER_LEVEL, LIMITER_LEVEL)
    return z


@dataclass(frozen=True)
class ReferenceDetector:
    spec_robust: spectral.SpectralModel
    hm: object
    kind: NonlinearityKind
    d: np.ndarray
    gram_inv: np.ndarray

    @property
    def n(self):
        return self.hm.n


def build_reference(train_noise, hm, kind, *, spec=None):
    """Fit the whitening PSD (median of periodograms) on noise-only training data.

    ``spec`` overrides the PSD estimate, e.g. to share an exact PSD with another detector.
    """
    kind = NonlinearityKind(kind)
    if spec is None:
        W = check_batch(train_noise, name="train_noise")
        if W.shape[1] != hm.n:
            raise ValueError(f"training sequences have length {W.shape[1]}, H has n={hm.n}")
        spec = spectral.averaged_psd(W, method="median")
    elif spec.n != hm.n:
        raise ValueError(f"PSD length {spec.n} does not match H with n={hm.n}")
    d = spectral.apply_whitening(spec, hm.h.T).T
    gram_inv = guarded_inverse(d.T @ d)
    d.setflags(write=False)
    gram_inv.setflags(write=False)
    return ReferenceDetector(spec_robust=spec, hm=hm, kind=kind, d=d, gram_inv=gram_inv)


def detect(det, x):
    """GLRT statistic for one sequence or each row of a batch; always >= 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != det.n:
        raise ValueError(f"x must have trailing length {det.n}, got shape {x.shape}")
    y = nonlinearity(det.kind, spectral.apply_whitening(det.spec_robust, x))
    u = y @ det.d
    return np.maximum(np.einsum("...i,ij,...j->...", u, det.gram_inv, u), 0.0)
