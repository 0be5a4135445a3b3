"""Additive linear signal model ``x = H theta + w`` and the multi-harmonic basis."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_batch, check_rng, check_vector


@dataclass(frozen=True)
class ObservationMatrix:
    """Signal-space basis ``h`` of shape (n, l).

    For the periodic constructor, ``f0`` and ``k`` record the normalized
    fundamental and harmonic count; they are ``None`` for arbitrary bases.
    """

    h: np.ndarray
    f0: float = None
    k: int = None

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64)
        if h.ndim == 1:
            h = h[:, np.newaxis]
        if h.ndim != 2 or h.size == 0:
            raise ValueError("h must be a non-empty 2-D array")
        if not np.all(np.isfinite(h)):
            raise ValueError("h contains non-finite entries")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def n(self):
        return self.h.shape[0]

    @property
    def l(self):  # noqa: E743
        return self.h.shape[1]

    def resized(self, n):
        """The same periodic model on a different sequence length."""
        if self.f0 is None:
            raise ValueError("only periodic observation matrices can be resized")
        return periodic_observation_matrix(n, self.f0, self.k)


def periodic_observation_matrix(n, f0, k):
    """Cosine columns for harmonics 1..k followed by the matching sine columns."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if k < 1 or not (0 < k * f0 < 0.5):
        raise ValueError(f"harmonic {k} of f0={f0} is not strictly below Nyquist")
    t = np.arange(n)[:, np.newaxis]
    phase = 2 * np.pi * f0 * t * np.arange(1, k + 1)
    h = np.hstack([np.cos(phase), np.sin(phase)])
    return ObservationMatrix(h=h, f0=float(f0), k=int(k))


def synth_signal(hm, theta):
    theta = check_vector(theta, name="theta", length=hm.l)
    return hm.h @ theta


def params_from_amplitudes(amplitudes, phases):
    """``alpha_k = A_k cos(phi_k)``, ``beta_k = -A_k sin(phi_k)``, stacked as (alpha, beta)."""
    a = np.asarray(amplitudes, dtype=np.float64)
    p = np.asarray(phases, dtype=np.float64)
    return np.concatenate([a * np.cos(p), -a * np.sin(p)])


def random_equal_amplitude_params(amplitude, k, rng=None):
    """Parameters of k harmonics with equal amplitude and U(-pi, pi) phases."""
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    phases = check_rng(rng).uniform(-np.pi, np.pi, size=k)
    return params_from_amplitudes(np.full(k, float(amplitude)), phases)


def inject(noise, s):
    """Add the signal ``s`` to every sequence; returns a new array."""
    X = check_batch(noise, name="noise")
    s = check_vector(s, name="s", length=X.shape[1])
    return X + s


def robust_scale(x):
    """Normalized MAD, ``1.483 * median(|x - median(x)|)``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    return 1.483 * np.median(np.abs(x - np.median(x)))


def snr_db(s, noise_scale):
    """``10 log10(mean(s**2) / noise_scale**2)``; -inf for a zero signal."""
    if not noise_scale > 0:
        raise ValueError("noise_scale must be positive")
    power = np.mean(np.asarray(s, dtype=np.float64) ** 2)
    if power == 0:
        return -np.inf
    return 10.0 * np.log10(power / noise_scale ** 2)


def equal_amplitude_for_snr(snr, noise_scale, k):
    """Amplitude giving the target SNR for k equal harmonics, assuming mean power k a^2 / 2."""
    return noise_scale * np.sqrt(2.0 / k) * 10.0 ** (snr / 20.0)


def scale_to_snr(s, snr, noise_scale):
    """Rescale ``s`` so that its measured SNR equals ``snr`` exactly."""
    current = snr_db(s, noise_scale)
    if not np.isfinite(current):
        raise ValueError("cannot rescale a zero signal")
    return np.asarray(s, dtype=np.float64) * 10.0 ** ((snr - current) / 20.0)
