"""Chi-squared tails, noise samplers, Gaussian-mixture scores and ROC evaluation."""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ._validation import check_rng

SERIES_RTOL = 1e-14


# ---------------------------------------------------------------------------
# chi-squared distributions


@dataclass(frozen=True)
class Chi2Spec:
    dof: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 1:
            raise ValueError(f"dof must be a positive integer, got {self.dof}")
        if not np.isfinite(self.noncentrality) or self.noncentrality < 0:
            raise ValueError(f"noncentrality must be >= 0, got {self.noncentrality}")


def _central_sf(dof, gamma):
    return special.gammaincc(0.5 * dof, 0.5 * gamma)


def _poisson_logpmf(k, mu):
    return -mu + k * np.log(mu) - special.gammaln(k + 1.0)


def _noncentral_sf_scalar(dof, lam, gamma):
    # Poisson(lam/2) mixture of central chi2_{dof+2k} tails, summed outward from
    # the Poisson mode until terms drop below SERIES_RTOL of the running sum.
    mu = 0.5 * lam
    if mu < 1e-300:
        return float(_central_sf(dof, gamma))
    mode = int(np.floor(mu))
    k_max = mode + int(50 * np.sqrt(mu)) + 1000
    total = 0.0
    # upward: central tails grow with k, so bound each term by its Poisson weight
    for k in range(mode, k_max):
        w = np.exp(_poisson_logpmf(k, mu))
        total += w * _central_sf(dof + 2 * k, gamma)
        if k > mode and w < SERIES_RTOL * total + 1e-300:
            break
    # downward: both factors shrink, the term itself is the bound
    for k in range(mode - 1, -1, -1):
        term = np.exp(_poisson_logpmf(k, mu)) * _central_sf(dof + 2 * k, gamma)
        total += term
        if term < SERIES_RTOL * total + 1e-300:
            break
    return min(max(total, 0.0), 1.0)


def chi2_right_tail(spec, gamma):
    """Right-tail probability ``P(T > gamma)`` for ``T ~ chi2'_dof(noncentrality)``.

    ``gamma`` may be a scalar or an array.
    """
    g = np.asarray(gamma, dtype=np.float64)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError("gamma must be >= 0")
    if spec.noncentrality == 0:
        out = _central_sf(spec.dof, g)
    else:
        flat = [_noncentral_sf_scalar(spec.dof, spec.noncentrality, gi) for gi in g.ravel()]
        out = np.asarray(flat).reshape(g.shape)
    return float(out) if out.ndim == 0 else out


def chi2_quantile_right(spec, alpha):
    """Threshold ``gamma`` with ``chi2_right_tail(spec, gamma) == alpha`` (central only)."""
    if spec.noncentrality != 0:
        raise ValueError("chi2_quantile_right supports the central distribution only")
    a = np.asarray(alpha, dtype=np.float64)
    if np.any(a <= 0) or np.any(a >= 1) or np.any(np.isnan(a)):
        raise ValueError("alpha must lie in (0, 1)")
    out = 2.0 * special.gammainccinv(0.5 * spec.dof, a)
    return float(out) if out.ndim == 0 else out


def noncentral_chi2_pdf(x, dof, lam):
    """Density of chi2'_dof(lam) via the modified Bessel representation."""
    x = np.asarray(x, dtype=np.float64)
    if lam == 0:
        return np.exp((0.5 * dof - 1) * np.log(x) - 0.5 * x
                      - 0.5 * dof * np.log(2) - special.gammaln(0.5 * dof))
    nu = 0.5 * dof - 1
    s = np.sqrt(lam * x)
    # ive(nu, s) = iv(nu, s) * exp(-s)
    log_pdf = (np.log(0.5) - 0.5 * (x + lam) + 0.5 * nu * np.log(x / lam)
               + np.log(special.ive(nu, s)) + s)
    return np.exp(log_pdf)


# ---------------------------------------------------------------------------
# samplers and Gaussian mixtures


@dataclass(frozen=True)
class GaussianMixture1D:
    weights: tuple
    means: tuple
    sigmas: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.sigmas, dtype=np.float64)
        if not (w.shape == m.shape == s.shape) or w.ndim != 1 or w.size == 0:
            raise ValueError("weights, means and sigmas must be 1-D of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
        if np.any(s <= 0):
            raise ValueError("sigmas must be positive")
        for name, arr in (("weights", w), ("means", m), ("sigmas", s)):
            object.__setattr__(self, name, tuple(arr.tolist()))

    @property
    def variance(self):
        w, m, s = map(np.asarray, (self.weights, self.means, self.sigmas))
        mean = np.dot(w, m)
        return float(np.dot(w, s ** 2 + m ** 2) - mean ** 2)

    def _component_logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)[..., np.newaxis]
        m = np.asarray(self.means)
        s = np.asarray(self.sigmas)
        with np.errstate(divide="ignore"):
            logw = np.log(np.asarray(self.weights))
        return logw - 0.5 * ((x - m) / s) ** 2 - np.log(s) - 0.5 * np.log(2 * np.pi)

    def logpdf(self, x):
        return special.logsumexp(self._component_logpdf(x), axis=-1)

    def pdf(self, x):
        return np.exp(self.logpdf(x))


DEFAULT_MIXTURE = GaussianMixture1D(weights=(0.5, 0.5), means=(0.0, 0.0), sigmas=(1.0, 10.0))


def sample_cauchy(n, rng=None):
    """IID standard Cauchy draws via ``tan(pi (u - 1/2))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = check_rng(rng).random(n)
    return np.tan(np.pi * (u - 0.5))


def sample_gm(mix, n, rng=None):
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = check_rng(rng)
    comp = rng.choice(len(mix.weights), size=n, p=mix.weights)
    z = rng.standard_normal(n)
    return np.asarray(mix.means)[comp] + np.asarray(mix.sigmas)[comp] * z


def gm_shift_score(mix, x):
    """Score of an additive shift, ``-p'(x) / p(x)``, evaluated elementwise."""
    logc = mix._component_logpdf(x)
    resp = np.exp(logc - special.logsumexp(logc, axis=-1, keepdims=True))
    xx = np.asarray(x, dtype=np.float64)[..., np.newaxis]
    slope = (xx - np.asarray(mix.means)) / np.asarray(mix.sigmas) ** 2
    return np.sum(resp * slope, axis=-1)


def location_fisher_information(score, pdf, *, support=(-np.inf, np.inf), points=None):
    """Intrinsic accuracy ``E[score(x)**2]`` of a density, by adaptive quadrature."""
    lo, hi = support

    def integrand(t):
        return score(t) ** 2 * pdf(t)

    if points is None or not np.isfinite(lo) or not np.isfinite(hi):
        # split at zero so the peak is seen by the adaptive rule on both halves
        left, _ = integrate.quad(integrand, lo, 0.0, epsabs=0, epsrel=1e-10, limit=400)
        right, _ = integrate.quad(integrand, 0.0, hi, epsabs=0, epsrel=1e-10, limit=400)
        return left + right
    val, _ = integrate.quad(integrand, lo, hi, points=points, epsabs=0,
                            epsrel=1e-10, limit=400)
    return val


def gm_shift_fi(mix):
    """Per-sample Fisher information of a location shift for a Gaussian mixture."""
    return location_fisher_information(lambda t: float(gm_shift_score(mix, t)),
                                       lambda t: float(mix.pdf(t)))


def cauchy_shift_score(x):
    x = np.asarray(x, dtype=np.float64)
    return 2.0 * x / (1.0 + x ** 2)


def cauchy_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    return 1.0 / (np.pi * (1.0 + x ** 2))


# ---------------------------------------------------------------------------
# ROC curves


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def _trapezoid(x, y):
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) * 0.5))


def roc(stats_h0, stats_h1):
    """Empirical ROC from sweeping a threshold over the pooled statistic values.

    One point per distinct pooled value; tied H0/H1 values produce a diagonal
    segment, so the trapezoidal AUC counts ties as one half.
    """
    s0 = np.asarray(stats_h0, dtype=np.float64).ravel()
    s1 = np.asarray(stats_h1, dtype=np.float64).ravel()
    if s0.size == 0 or s1.size == 0:
        raise ValueError("roc needs non-empty H0 and H1 statistics")
    if np.isnan(s0).any() or np.isnan(s1).any():
        raise ValueError("statistics contain NaN")
    thresholds = np.unique(np.concatenate([s0, s1]))[::-1]
    s0s = np.sort(s0)
    s1s = np.sort(s1)
    # fraction of values >= threshold
    fp = s0.size - np.searchsorted(s0s, thresholds, side="left")
    tp = s1.size - np.searchsorted(s1s, thresholds, side="left")
    fpr = np.concatenate([[0.0], fp / s0.size])
    tpr = np.concatenate([[0.0], tp / s1.size])
    return RocCurve(fpr=fpr, tpr=tpr, auc=_trapezoid(fpr, tpr))


def asymptotic_roc(dof, noncentrality, fpr_grid):
    """ROC of a detector distributed chi2_dof under H0 and chi2'_dof(lambda) under H1."""
    fpr = np.asarray(fpr_grid, dtype=np.float64).ravel()
    if fpr.size == 0 or np.any(np.isnan(fpr)) or np.any(fpr < 0) or np.any(fpr > 1):
        raise ValueError("fpr grid must be non-empty with values in [0, 1]")
    if np.any(np.diff(fpr) < 0):
        raise ValueError("fpr grid must be nondecreasing")
    h1 = Chi2Spec(dof, noncentrality)
    tpr = np.empty_like(fpr)
    for i, a in enumerate(fpr):
        if a <= 0:
            tpr[i] = 0.0
        elif a >= 1:
            tpr[i] = 1.0
        else:
            gamma = chi2_quantile_right(Chi2Spec(dof), a)
            tpr[i] = chi2_right_tail(h1, gamma)
    full_f = np.concatenate([[0.0], fpr, [1.0]])
    full_t = np.concatenate([[0.0], tpr, [1.0]])
    return RocCurve(fpr=fpr, tpr=tpr, auc=_trapezoid(full_f, full_t))


def tpr_at(curve, fpr_query):
    """TPR of an empirical curve at the given FPRs (step interpolation, upper envelope)."""
    q = np.atleast_1d(np.asarray(fpr_query, dtype=np.float64))
    idx = np.searchsorted(curve.fpr, q, side="right") - 1
    return curve.tpr[np.clip(idx, 0, curve.tpr.size - 1)]
