"""Linear Fisher information, the LBLUE, and the LRao / LLMP statistics.

Everything is expressed for the additive model ``x = H theta + w`` around
``theta0 = 0``: the Jacobian of the transformed mean is estimated from
noise-only data by central differences, the covariance of the transformed
noise is replaced by its circulant approximation (a SpectralModel), and

    J0     = G^T Sigma^{-1} G
    LBLUE  = theta0 + J0^{-1} G^T Sigma^{-1} (x - mu0)
    T_LRao = (x - mu0)^T Sigma^{-1} G J0^{-1} G^T Sigma^{-1} (x - mu0)

with ``G`` the Jacobian.
"""

from dataclasses import dataclass

import numpy as np

from . import spectral
from ._validation import check_batch
from .stats import Chi2Spec, chi2_quantile_right, chi2_right_tail

COND_LIMIT = 1e12


class SingularLFIError(np.linalg.LinAlgError):
    """The LFI matrix is too ill-conditioned to invert."""


@dataclass(frozen=True)
class JacobianEstimate:
    dmu: np.ndarray
    step: float
    source_count: int


@dataclass(frozen=True)
class DetectorContext:
    """Quantities frozen at fit time and needed by the LBLUE / LRao / LLMP."""

    mu0: np.ndarray
    jac: JacobianEstimate
    spec: spectral.SpectralModel
    j0: np.ndarray
    j0_inv: np.ndarray

    @property
    def n(self):
        return self.mu0.size

    @property
    def l(self):  # noqa: E743
        return self.j0.shape[0]


def interior_mask(n, margin):
    mask = np.ones(n)
    if margin:
        mask[:margin] = 0.0
        mask[n - margin:] = 0.0
    return mask


def jacobian_central_diff(transform, noise, hm, step=1e-2, margin=0):
    """Batch-averaged central-difference Jacobian of the transformed mean.

    Column j is the mean over sequences of
    ``[T(w + h_j * step) - T(w - h_j * step)] / (2 step)``, with the shift
    zeroed on the first and last ``margin`` samples.

    Parameters
    ----------
    transform : callable
        Maps a batch of shape (m, n) to a batch of the same shape.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if margin < 0 or 2 * margin >= hm.n:
        raise ValueError(f"invalid margin {margin} for n={hm.n}")
    W = check_batch(noise, name="noise")
    if W.shape[1] != hm.n:
        raise ValueError(f"noise length {W.shape[1]} does not match H with n={hm.n}")
    shifts = hm.h * interior_mask(hm.n, margin)[:, np.newaxis] * step
    dmu = np.empty_like(hm.h)
    for j in range(hm.l):
        plus = np.asarray(transform(W + shifts[:, j]))
        minus = np.asarray(transform(W - shifts[:, j]))
        if plus.shape != W.shape or minus.shape != W.shape:
            raise ValueError("transform must preserve the batch shape")
        diff = (plus - minus).mean(axis=0) / (2 * step)
        if not np.all(np.isfinite(diff)):
            raise FloatingPointError(f"non-finite transform output in column {j}")
        dmu[:, j] = diff
    return JacobianEstimate(dmu=dmu, step=float(step), source_count=W.shape[0])


def lfi_spectral(jac, spec):
    """``J[a, b] = (1/N) sum_i conj(V_a[i]) V_b[i] / psd[i]``, ``V = dft(dmu)``."""
    dmu = jac.dmu if isinstance(jac, JacobianEstimate) else np.asarray(jac, dtype=np.float64)
    if dmu.ndim != 2 or dmu.shape[0] != spec.n:
        raise ValueError(f"Jacobian shape {dmu.shape} does not match n={spec.n}")
    j = spectral.quadratic_form(spec, dmu, dmu)
    return 0.5 * (j + j.T)


def chain_rule_lfi(jstar, hm):
    """LFI of ``x = H theta + w`` from the LFI of ``x = theta* + w``: ``H^T J* H``."""
    jstar = np.asarray(jstar, dtype=np.float64)
    if jstar.shape != (hm.n, hm.n):
        raise ValueError(f"jstar must be {hm.n}x{hm.n}, got {jstar.shape}")
    j = hm.h.T @ jstar @ hm.h
    return 0.5 * (j + j.T)


def guarded_inverse(j, cond_limit=COND_LIMIT):
    """Inverse of a symmetric PSD matrix via eigendecomposition, refusing ill-conditioned input."""
    j = np.asarray(j, dtype=np.float64)
    vals, vecs = np.linalg.eigh(0.5 * (j + j.T))
    top = vals.max()
    if top <= 0 or vals.min() <= top / cond_limit:
        cond = np.inf if vals.min() <= 0 else top / vals.min()
        raise SingularLFIError(f"matrix condition number {cond:.3g} exceeds {cond_limit:.0e}")
    inv = (vecs / vals) @ vecs.T
    return 0.5 * (inv + inv.T)


def build_context(transform, noise, hm, *, step=1e-2, margin=0, mu0="zero",
                  psd_method="mean", spec=None, noise_for_psd=None):
    """Estimate the DetectorContext of ``transform`` from noise-only sequences.

    Parameters
    ----------
    mu0 : {"zero", "estimate"}
        ``"zero"`` relies on an odd transform and symmetric noise.
    spec : SpectralModel, optional
        Use this covariance model instead of estimating one.
    noise_for_psd : array-like, optional
        Separate sequences for the PSD estimate; defaults to ``noise``.
    """
    W = check_batch(noise, name="noise")
    jac = jacobian_central_diff(transform, W, hm, step=step, margin=margin)
    if mu0 == "zero":
        mu = np.zeros(hm.n)
    elif mu0 == "estimate":
        mu = np.asarray(transform(W)).mean(axis=0)
    else:
        raise ValueError(f"mu0 must be 'zero' or 'estimate', got {mu0!r}")
    if spec is None:
        P = W if noise_for_psd is None else check_batch(noise_for_psd, name="noise_for_psd")
        out = np.asarray(transform(P)) - mu
        spec = spectral.averaged_psd(out, method=psd_method)
    return context_from_parts(mu, jac, spec)


def context_from_parts(mu0, jac, spec):
    j0 = lfi_spectral(jac, spec)
    return DetectorContext(mu0=np.asarray(mu0, dtype=np.float64), jac=jac, spec=spec,
                           j0=j0, j0_inv=guarded_inverse(j0))


def _check_x(ctx, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != ctx.n:
        raise ValueError(f"x must have trailing length {ctx.n}, got shape {x.shape}")
    return x


def pessimistic_score(ctx, x):
    """``G^T Sigma^{-1} (x - mu0)`` for one sequence or each row of a batch."""
    x = _check_x(ctx, x)
    r = spectral.apply_inverse_cov(ctx.spec, x - ctx.mu0)
    return r @ ctx.jac.dmu


def lblue(ctx, x, theta0=None):
    """Locally best linear unbiased estimate of theta."""
    u = pessimistic_score(ctx, x)
    est = u @ ctx.j0_inv
    if theta0 is not None:
        est = est + np.asarray(theta0, dtype=np.float64)
    return est


def lrao(ctx, x):
    """LRao statistic ``u^T J0^{-1} u`` with ``u`` the pessimistic score."""
    u = pessimistic_score(ctx, x)
    return np.einsum("...i,ij,...j->...", u, ctx.j0_inv, u)


def llmp(ctx, x):
    """One-sided statistic ``u / sqrt(J0)``; defined only for a scalar parameter."""
    if ctx.l != 1:
        raise ValueError(f"llmp needs a scalar parameter, context has l={ctx.l}")
    return pessimistic_score(ctx, x)[..., 0] / np.sqrt(ctx.j0[0, 0])


def lrao_threshold(l, fpr):
    return chi2_quantile_right(Chi2Spec(l), fpr)


def lrao_asymptotic_tpr(l, lam, gamma):
    return chi2_right_tail(Chi2Spec(l, lam), gamma)


def noncentrality(ctx, theta1, theta0=None):
    d = np.asarray(theta1, dtype=np.float64)
    if theta0 is not None:
        d = d - np.asarray(theta0, dtype=np.float64)
    return float(d @ ctx.j0 @ d)
