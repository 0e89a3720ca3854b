"""Per-link math: Rayleigh fading, AWGN, likelihoods, LLRs and first-hop error rates.

Every link carries a unit-energy BPSK symbol ``x in {-1, +1}``::

    y = h * x + w,    w ~ N(0, sigma^2)

Two knowledge scenarios are supported.  With known CSI the receiver knows the
fading envelope ``h``; with known statistics it only knows ``sigma_h^2``, the
Rayleigh scale, and works with the likelihood marginalized over ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Above this argument 1 - t*M(t) is evaluated from its asymptotic series.
LARGE_ARGUMENT = 26.0
# (2k-1)!! for k = 1..8
_ASYMPTOTIC_COEFFS = np.array([1.0, 3.0, 15.0, 105.0, 945.0, 10395.0, 135135.0, 2027025.0])


@dataclass(frozen=True)
class KnownCsi:
    """Receiver knows the realized fading envelope."""

    h: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h >= 0):
            raise ValueError(f"fading envelope must be finite and >= 0, got {self.h}")


@dataclass(frozen=True)
class KnownStats:
    """Receiver knows only the Rayleigh scale ``sigma_h^2 = E[h^2]``."""

    sigma_h_sq: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma_h_sq) and self.sigma_h_sq > 0):
            raise ValueError(f"sigma_h_sq must be finite and > 0, got {self.sigma_h_sq}")


ChannelMode = Union[KnownCsi, KnownStats]


@dataclass(frozen=True)
class StatsLikelihoodParams:
    """Constants of the fading-marginalized likelihood.

    ``a = sigma_h / (sigma * sqrt(2 sigma^2 + sigma_h^2))`` and ``normalizer`` is
    the prefactor ``sqrt(2/pi) sigma^3 a^2 / sigma_h^2``.
    """

    a: float
    normalizer: float

    @classmethod
    def from_variances(cls, noise_variance: float, sigma_h_sq: float) -> "StatsLikelihoodParams":
        sigma = math.sqrt(noise_variance)
        a = math.sqrt(sigma_h_sq) / (sigma * math.sqrt(2.0 * noise_variance + sigma_h_sq))
        normalizer = math.sqrt(2.0 / math.pi) * sigma**3 * a * a / sigma_h_sq
        return cls(a=a, normalizer=normalizer)


@dataclass(frozen=True)
class ChannelSpec:
    noise_variance: float
    mode: ChannelMode

    def __post_init__(self):
        if not (math.isfinite(self.noise_variance) and self.noise_variance > 0):
            raise ValueError(f"noise_variance must be finite and > 0, got {self.noise_variance}")
        if not isinstance(self.mode, (KnownCsi, KnownStats)):
            raise TypeError(f"unknown channel mode {self.mode!r}")

    @classmethod
    def known_csi(cls, h: float, noise_variance: float) -> "ChannelSpec":
        return cls(noise_variance, KnownCsi(float(h)))

    @classmethod
    def known_stats(cls, sigma_h_sq: float, noise_variance: float) -> "ChannelSpec":
        return cls(noise_variance, KnownStats(float(sigma_h_sq)))

    @property
    def is_csi(self) -> bool:
        return isinstance(self.mode, KnownCsi)

    def snr(self) -> float:
        if self.is_csi:
            return self.mode.h**2 / self.noise_variance
        return self.mode.sigma_h_sq / self.noise_variance

    def stats_params(self) -> StatsLikelihoodParams:
        if self.is_csi:
            raise ValueError("likelihood parameters only exist for known-statistics links")
        return StatsLikelihoodParams.from_variances(self.noise_variance, self.mode.sigma_h_sq)


def snr_db_to_linear(snr_db):
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def q_function(z):
    """Gaussian tail probability ``Q(z) = 1 - Phi(z)``, accurate deep in the tail."""
    out = 0.5 * special.erfc(np.asarray(z, dtype=float) / _SQRT2)
    return float(out) if np.ndim(out) == 0 else out


def sample_fading(spec: ChannelSpec, rng: np.random.Generator, size=None):
    """Draw Rayleigh envelopes with ``E[h^2] = sigma_h^2``."""
    if spec.is_csi:
        raise ValueError("fading is fixed for a known-CSI link; nothing to sample")
    return rng.rayleigh(scale=math.sqrt(spec.mode.sigma_h_sq / 2.0), size=size)


def sample_observation(x, spec: ChannelSpec, rng: np.random.Generator, size=None):
    """Draw ``y = h x + w``.

    Under known statistics ``h`` is drawn first and the Gaussian noise added on
    top, which samples the marginalized density exactly.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) != 1.0):
        raise ValueError("transmitted symbols must be -1 or +1")
    shape = x.shape if size is None else np.broadcast_shapes(x.shape, tuple(np.atleast_1d(size)))
    h = spec.mode.h if spec.is_csi else sample_fading(spec, rng, size=shape)
    w = rng.normal(0.0, math.sqrt(spec.noise_variance), size=shape)
    y = h * x + w
    return float(y) if np.ndim(y) == 0 else y


def likelihood_csi(y, h, x, sigma_sq):
    y = np.asarray(y, dtype=float)
    return np.exp(-((y - h * x) ** 2) / (2.0 * sigma_sq)) / np.sqrt(2.0 * np.pi * sigma_sq)


def log1p_t_mills(s):
    """``log(1 + s * Phi(s) / phi(s))`` for any real ``s``, without overflow.

    For ``s >= 0`` the term is assembled in the log domain.  For ``s = -u < 0``
    it equals ``1 - u M(u)`` with ``M`` the Mills ratio; beyond
    ``LARGE_ARGUMENT`` that difference is taken from the asymptotic series
    ``sum_k (-1)^(k+1) (2k-1)!! / u^(2k)`` to avoid cancellation.
    """
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)

    pos = s >= 0
    sp = s[pos]
    with np.errstate(divide="ignore"):
        log_term = np.log(sp) + special.log_ndtr(sp) + 0.5 * sp * sp + _LOG_SQRT_2PI
    out[pos] = np.logaddexp(0.0, log_term)

    out[~pos] = _log1m_u_mills(-s[~pos])
    return out


def _log1m_u_mills(u):
    """``log(1 - u M(u))`` for ``u >= 0``."""
    small = u <= LARGE_ARGUMENT
    res = np.empty_like(u)
    us = u[small]
    mills = math.sqrt(math.pi / 2.0) * special.erfcx(us / _SQRT2)
    res[small] = np.log1p(-us * mills)
    ul = u[~small]
    if ul.size:
        inv = 1.0 / (ul * ul)
        powers = inv[:, None] ** np.arange(1, _ASYMPTOTIC_COEFFS.size + 1)
        signs = np.where(np.arange(_ASYMPTOTIC_COEFFS.size) % 2 == 0, 1.0, -1.0)
        res[~small] = np.log(powers @ (signs * _ASYMPTOTIC_COEFFS))
    return res


def _check_params(params: StatsLikelihoodParams, sigma_sq: float, sigma_h_sq: float):
    expected = StatsLikelihoodParams.from_variances(sigma_sq, sigma_h_sq)
    if not math.isclose(expected.a, params.a, rel_tol=1e-12):
        raise ValueError("likelihood parameters do not match the supplied variances")


def log_likelihood_stats(y, x, params: StatsLikelihoodParams, sigma_sq: float):
    y = np.asarray(y, dtype=float)
    return (
        math.log(params.normalizer)
        - y * y / (2.0 * sigma_sq)
        + log1p_t_mills(params.a * np.asarray(x, dtype=float) * y)
    )


def likelihood_stats(y, x, params: StatsLikelihoodParams, sigma_sq: float, sigma_h_sq: float):
    """Density of ``y`` given ``x`` with the Rayleigh envelope integrated out."""
    _check_params(params, sigma_sq, sigma_h_sq)
    return np.exp(log_likelihood_stats(y, x, params, sigma_sq))


def llr_csi(y, h, sigma_sq):
    """``log f(y|+1) - log f(y|-1) = 2 y h / sigma^2``."""
    return 2.0 * np.asarray(y, dtype=float) * h / sigma_sq


def llr_stats(y, params_or_a):
    """Per-link LLR under known statistics; odd in ``y``.

    Accepts either a :class:`StatsLikelihoodParams` or the bare constant ``a``
    (scalar or array broadcastable against ``y``).
    """
    a = params_or_a.a if isinstance(params_or_a, StatsLikelihoodParams) else params_or_a
    t = np.asarray(a, dtype=float) * np.asarray(y, dtype=float)
    u = np.abs(t)
    # 1 + u Phi(u)/phi(u) = (phi(u) + u Phi(u)) / phi(u), finite for every u >= 0
    upper = np.log(np.exp(-0.5 * u * u) / _SQRT_2PI + u * special.ndtr(u)) + 0.5 * u * u + _LOG_SQRT_2PI
    lower = _log1m_u_mills(u.reshape(-1)).reshape(u.shape)
    out = np.copysign(upper - lower, t)
    return float(out) if np.ndim(out) == 0 else out


def ber_first_hop(spec: ChannelSpec) -> float:
    """Error probability of the sign detector on a single link.

    Known CSI gives ``Q(sqrt(gamma))``; known statistics gives the Rayleigh
    average ``(1 - sqrt((gamma/2) / (gamma/2 + 1))) / 2``.
    """
    gamma = spec.snr()
    if spec.is_csi:
        return q_function(math.sqrt(gamma))
    half = gamma / 2.0
    return 0.5 * (1.0 - math.sqrt(half / (half + 1.0)))
