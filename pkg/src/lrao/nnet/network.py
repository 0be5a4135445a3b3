"""Bias-free tanh 1-D convolutional network with hand-written backpropagation.

All rows of a batch are laid end to end in one (time, channel) buffer with
zero gaps between them, so each filter tap is a single contiguous GEMM. The
gaps double as the zero padding that keeps the output length equal to the
input length. With no biases and an odd activation the network is an
odd function of its input for any weights.
"""

from dataclasses import dataclass, field

import numpy as np

from .._validation import check_rng


@dataclass
class ConvNetParams:
    """Kernels of shape (out_channels, in_channels, filter_width), one per layer.

    ``gain`` is a fixed output scale; it is never trained.
    """

    kernels: list
    gain: float = 1.0
    seed: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ks = [np.array(k, dtype=np.float64) for k in self.kernels]
        if not ks:
            raise ValueError("network needs at least one layer")
        for i, k in enumerate(ks):
            if k.ndim != 3:
                raise ValueError(f"kernel {i} must be 3-D, got shape {k.shape}")
            if k.shape[2] % 2 == 0:
                raise ValueError("filter width must be odd for same-length output")
            if not np.all(np.isfinite(k)):
                raise ValueError(f"kernel {i} has non-finite weights")
            if i and k.shape[1] != ks[i - 1].shape[0]:
                raise ValueError(f"kernel {i} expects {k.shape[1]} inputs, "
                                 f"previous layer has {ks[i - 1].shape[0]}")
        if ks[0].shape[1] != 1 or ks[-1].shape[0] != 1:
            raise ValueError("first layer must take 1 channel and last layer emit 1")
        self.kernels = ks

    @property
    def num_layers(self):
        return len(self.kernels)

    @property
    def channels(self):
        return self.kernels[0].shape[0] if self.num_layers > 1 else 1

    @property
    def filter_width(self):
        return self.kernels[0].shape[2]

    @property
    def receptive_field(self):
        return 1 + sum(k.shape[2] - 1 for k in self.kernels)

    @property
    def radius(self):
        return sum((k.shape[2] - 1) // 2 for k in self.kernels)

    def copy(self):
        return ConvNetParams([k.copy() for k in self.kernels], gain=self.gain,
                             seed=self.seed, meta=dict(self.meta))

    def flat(self):
        return np.concatenate([k.ravel() for k in self.kernels])

    def with_flat(self, vec):
        out, pos = [], 0
        for k in self.kernels:
            out.append(np.asarray(vec[pos:pos + k.size]).reshape(k.shape))
            pos += k.size
        return ConvNetParams(out, gain=self.gain, seed=self.seed, meta=dict(self.meta))


def init_params(num_layers=3, channels=20, filter_width=3, rng=None, seed=None):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) kernels; ``fan_in = in_channels * width``."""
    if num_layers < 1 or channels < 1 or filter_width < 1:
        raise ValueError("architecture sizes must be positive")
    rng = check_rng(seed if rng is None else rng)
    sizes = [1] + [channels] * (num_layers - 1) + [1]
    kernels = []
    for c_in, c_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(c_in * filter_width)
        kernels.append(rng.uniform(-bound, bound, size=(c_out, c_in, filter_width)))
    return ConvNetParams(kernels, seed=seed)


def _gap(p):
    return max((k.shape[2] - 1) // 2 for k in p.kernels)


def _embed(X, gap, channels=1):
    """Lay the rows end to end as one (total, channels) buffer with ``gap`` zeros
    before every row, so that no filter tap reaches into a neighbouring row."""
    b, n = X.shape[:2]
    buf = np.zeros((gap + b * (n + gap), channels))
    buf[gap:].reshape(b, n + gap, channels)[:, :n] = X.reshape(b, n, channels)
    return buf


def _rows(buf, b, n, gap):
    return buf[gap:].reshape(b, n + gap, -1)[:, :n]


def _zero_gaps(buf, b, n, gap):
    buf[:gap] = 0.0
    buf[gap:].reshape(b, n + gap, -1)[:, n:] = 0.0


def _check_input(p, X):
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[np.newaxis]
    if X.ndim != 2:
        raise ValueError(f"input must be 1-D or 2-D, got shape {X.shape}")
    if X.shape[1] < p.receptive_field:
        raise ValueError(f"sequence length {X.shape[1]} is shorter than the "
                         f"receptive field {p.receptive_field}")
    return X, squeeze


def forward(p, X, *, keep_cache=False, chunk=None):
    """Apply the network to a sequence or to each row of a batch.

    Returns the output, plus a cache for :func:`backward` if ``keep_cache``.
    """
    X, squeeze = _check_input(p, X)
    if chunk is not None and not keep_cache and X.shape[0] > chunk:
        out = np.concatenate([forward(p, X[i:i + chunk]) for i in range(0, X.shape[0], chunk)])
        return out[0] if squeeze else out
    b, n = X.shape
    gap = _gap(p)
    a = _embed(X, gap)
    span = a.shape[0] - 2 * gap
    cache = []
    for k in p.kernels:
        c_out, _, width = k.shape
        start = gap - (width - 1) // 2
        taps = np.ascontiguousarray(k.transpose(2, 1, 0))  # (width, c_in, c_out)
        z = a[start:start + span] @ taps[0]
        for tap in range(1, width):
            z += a[start + tap:start + tap + span] @ taps[tap]
        out = np.zeros((a.shape[0], c_out))
        np.tanh(z, out=out[gap:gap + span])
        _zero_gaps(out, b, n, gap)
        if keep_cache:
            cache.append((a, out))
        a = out
    y = p.gain * _rows(a, b, n, gap)[:, :, 0]
    if squeeze:
        y = y[0]
    if keep_cache:
        return y, (cache, b, n, gap)
    return y


def backward(p, cache, dy):
    """Gradients of a scalar loss w.r.t. the kernels and the fixed gain.

    ``dy`` is the loss gradient w.r.t. the (batched) network output.
    """
    layers, b, n, gap = cache
    dy = np.asarray(dy, dtype=np.float64)
    if dy.ndim == 1:
        dy = dy[np.newaxis]
    dgain = float(np.sum(dy * _rows(layers[-1][1], b, n, gap)[:, :, 0]))
    da = _embed(p.gain * dy, gap)
    grads = [None] * p.num_layers
    for i in range(p.num_layers - 1, -1, -1):
        k = p.kernels[i]
        width = k.shape[2]
        a_in, a = layers[i]
        span = a.shape[0] - 2 * gap
        start = gap - (width - 1) // 2
        act = a[gap:gap + span]
        dz = da[gap:gap + span] * (1.0 - act * act)
        dzt = np.ascontiguousarray(dz.T)
        g = np.empty_like(k)
        for tap in range(width):
            g[:, :, tap] = dzt @ a_in[start + tap:start + tap + span]
        grads[i] = g
        if i:
            taps = np.ascontiguousarray(k.transpose(2, 0, 1))  # (width, c_out, c_in)
            da = np.zeros_like(a_in)
            for tap in range(width):
                da[start + tap:start + tap + span] += dz @ taps[tap]
            _zero_gaps(da, b, n, gap)
    return grads, dgain
