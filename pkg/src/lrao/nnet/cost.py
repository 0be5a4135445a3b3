"""Negative spectral LFI trace of the network output and its analytic gradient.

    C = -(1/N) sum_j sum_i |DFT(g_j)[i]|^2 / P[i]

with ``g_j`` the batch-averaged central-difference derivative of the output
mean along column j of H (shift restricted to the interior samples) and ``P``
the batch-mean periodogram of the transformed unshifted noise.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import spectral
from .._validation import check_batch
from ..lfi import interior_mask
from . import network


FORWARD_CHUNK = 2048  # rows per forward pass when no cache is kept


class DegenerateOutputError(FloatingPointError):
    """The network output carries no power, so the PSD denominator vanishes."""


def robust_normalize(x, axis=-1):
    """``(x - median) / (1.483 * MAD)`` along ``axis``; rows of a batch independently."""
    x = np.asarray(x, dtype=np.float64)
    med = np.median(x, axis=axis, keepdims=True)
    mad = np.median(np.abs(x - med), axis=axis, keepdims=True)
    if np.any(mad <= 0):
        raise ValueError("median absolute deviation is zero; cannot normalize")
    return (x - med) / (1.483 * mad)


@dataclass(frozen=True)
class InputScaling:
    """How raw sequences are normalized before entering the network.

    ``mode`` is ``"sequence"`` (robust per-sequence), ``"fixed"`` (one
    location/scale pair, typically fitted on training noise) or ``"none"``.
    """

    mode: str = "sequence"
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("sequence", "fixed", "none"):
            raise ValueError(f"unknown input scaling mode {self.mode!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def fitted(cls, X):
        X = np.asarray(X, dtype=np.float64)
        med = float(np.median(X))
        mad = float(np.median(np.abs(X - med)))
        if mad <= 0:
            raise ValueError("median absolute deviation is zero; cannot normalize")
        return cls("fixed", med, 1.483 * mad)

    def __call__(self, X):
        if self.mode == "sequence":
            return robust_normalize(X, axis=-1)
        if self.mode == "fixed":
            return (np.asarray(X, dtype=np.float64) - self.location) / self.scale
        return np.asarray(X, dtype=np.float64)


@dataclass
class CostBatch:
    """Network inputs for one cost evaluation: unshifted noise then +/- shifted copies."""

    inputs: np.ndarray
    m: int
    l: int  # noqa: E741
    step: float
    margin: int
    meta: dict = field(default_factory=dict)


def prepare_batch(noise, hm, step=1e-2, margin=0, scaling=None):
    """Stack ``[w; w + h_j step; w - h_j step]`` after input scaling.

    The shifts do not depend on the weights, so this is computed once per
    dataset and reused every epoch.
    """
    W = check_batch(noise, name="noise")
    if W.shape[1] != hm.n:
        raise ValueError(f"noise length {W.shape[1]} does not match H with n={hm.n}")
    if not step > 0:
        raise ValueError("step must be positive")
    scaling = scaling if scaling is not None else InputScaling()
    shifts = (hm.h * interior_mask(hm.n, margin)[:, np.newaxis] * step).T  # (l, n)
    plus = W[np.newaxis] + shifts[:, np.newaxis, :]
    minus = W[np.newaxis] - shifts[:, np.newaxis, :]
    stacked = np.concatenate([W, plus.reshape(-1, hm.n), minus.reshape(-1, hm.n)])
    return CostBatch(inputs=np.ascontiguousarray(scaling(stacked)), m=W.shape[0],
                     l=hm.l, step=float(step), margin=int(margin))


@dataclass
class CostResult:
    cost: float
    grads: list = None
    dgain: float = None
    psd: np.ndarray = None
    jacobian: np.ndarray = None


def _split(y, batch):
    m, l = batch.m, batch.l
    y0 = y[:m]
    yp = y[m:m + l * m].reshape(l, m, -1)
    ym = y[m + l * m:].reshape(l, m, -1)
    return y0, yp, ym


def evaluate(params, batch, *, grad=False, mu0="zero", freeze_psd=False,
             floor_ratio=spectral.FLOOR_RATIO):
    """Cost (and optionally its gradient) of ``params`` on a prepared batch."""
    if grad:
        y, cache = network.forward(params, batch.inputs, keep_cache=True)
    else:
        y = network.forward(params, batch.inputs, chunk=FORWARD_CHUNK)
    y0, yp, ym = _split(y, batch)
    m, n = y0.shape
    if mu0 == "zero":
        yc = y0
    elif mu0 == "estimate":
        yc = y0 - y0.mean(axis=0)
    else:
        raise ValueError(f"mu0 must be 'zero' or 'estimate', got {mu0!r}")

    g = (yp - ym).mean(axis=1) / (2 * batch.step)  # (l, n)
    fy = np.fft.fft(yc, axis=-1)
    p_raw = np.mean(fy.real ** 2 + fy.imag ** 2, axis=0) / n
    peak = p_raw.max()
    if not np.isfinite(peak) or peak <= 0:
        raise DegenerateOutputError("network output has zero power; PSD is degenerate")
    floor = floor_ratio * peak
    active = p_raw >= floor
    p = np.where(active, p_raw, floor)

    G = np.fft.fft(g, axis=-1)
    G2 = G.real ** 2 + G.imag ** 2
    cost = -float(np.sum(G2 / p)) / n
    result = CostResult(cost=cost, psd=p, jacobian=g.T)
    if not grad:
        return result

    dg = -2.0 * np.fft.ifft(G / p, axis=-1).real  # (l, n)
    dy = np.empty_like(y)
    d_shift = dg[:, np.newaxis, :] / (2 * batch.step * m)
    dy[m:m + batch.l * m] = np.broadcast_to(d_shift, (batch.l, m, n)).reshape(-1, n)
    dy[m + batch.l * m:] = -dy[m:m + batch.l * m]
    if freeze_psd:
        dy[:m] = 0.0
    else:
        dp = np.sum(G2, axis=0) / (p * p) / n * active
        dyc = (2.0 / m) * np.fft.ifft(dp * fy, axis=-1).real
        if mu0 == "estimate":
            dyc = dyc - dyc.mean(axis=0)
        dy[:m] = dyc
    result.grads, result.dgain = network.backward(params, cache, dy)
    return result


def cost(params, noise, hm, step=1e-2, margin=0, scaling=None, **kwargs):
    """Cost on raw noise sequences; convenience wrapper around :func:`evaluate`."""
    batch = prepare_batch(noise, hm, step=step, margin=margin, scaling=scaling)
    return evaluate(params, batch, **kwargs).cost


def cost_grad(params, noise, hm, step=1e-2, margin=0, scaling=None, **kwargs):
    batch = prepare_batch(noise, hm, step=step, margin=margin, scaling=scaling)
    res = evaluate(params, batch, grad=True, **kwargs)
    return res.cost, res.grads
