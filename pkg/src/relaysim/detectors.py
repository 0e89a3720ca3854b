"""Decision rules of a relay or destination node.

Every rule reduces to the sign of a log-likelihood ratio built from the raw
per-link LLRs ``l_i = log f(y_i | +1) - log f(y_i | -1)``.  The vectorized
cores (``*_log_ratio``) take arrays whose last axis runs over incoming links
and are what the simulation engine calls; the ``*_detect`` functions are the
scalar per-node API over a :class:`DecisionContext`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .channel import ChannelSpec, llr_csi, llr_stats
from .pmf import JointPmf, MarginalSet, bit_matrix, pjp_pmf, product_pmf

# rows * 2^d budget for the dense mixture evaluation
_DENSE_BLOCK = 1 << 22
# below this a linear-domain sum is redone in the log domain
_UNDERFLOW = 1e-250


class Detector(str, enum.Enum):
    FIRST_GROUP_SIGN = "first_group_sign"
    FULL_MAP = "full_map"
    ID = "id"
    PJP = "pjp"
    MRC = "mrc"


class PmfSource(str, enum.Enum):
    MCS = "mcs"
    PS = "ps"
    PJP = "pjp"
    ID = "id"


@dataclass(frozen=True)
class DetectorKind:
    """A detector family plus the side information it runs on."""

    tag: Detector
    pmf_source: Optional[PmfSource] = None
    quant_bits: Optional[int] = None

    def __post_init__(self):
        tag = Detector(self.tag)
        src = None if self.pmf_source is None else PmfSource(self.pmf_source)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "pmf_source", src)
        allowed = {
            Detector.FULL_MAP: {PmfSource.MCS, PmfSource.PS, PmfSource.PJP},
            Detector.ID: {PmfSource.ID},
            Detector.PJP: {PmfSource.PJP},
            Detector.MRC: {None},
            Detector.FIRST_GROUP_SIGN: {None},
        }[tag]
        if src is None and None not in allowed:
            names = sorted(a.value for a in allowed)
            raise ValueError(f"missing required key 'pmf_scheme': detector {tag.value!r} needs one of {names}")
        if src not in allowed:
            names = sorted(a.value for a in allowed if a is not None) or ["none"]
            raise ValueError(f"detector {tag.value!r} needs pmf_scheme in {names}, got {src and src.value!r}")
        if self.quant_bits is not None and tag is not Detector.ID:
            raise ValueError("quantized probabilities only apply to the ID detector")


def sgn(v) -> np.ndarray:
    """Sign with the tie convention ``sgn(0) = +1``."""
    return np.where(np.asarray(v) >= 0, 1, -1).astype(np.int8)


def _poisson_binomial(llr: np.ndarray) -> np.ndarray:
    """Distribution of the number of successes with success log-odds ``llr``."""
    pi = expit(llr)
    pi_bar = expit(-llr)
    d = llr.shape[-1]
    q = np.zeros(llr.shape[:-1] + (d + 1,))
    q[..., 0] = 1.0
    for i in range(d):
        p, pb = pi[..., i, None], pi_bar[..., i, None]
        tail = q[..., :-1] * p
        q *= pb
        q[..., 1:] += tail
    return q


def _log_poisson_binomial(llr: np.ndarray) -> np.ndarray:
    log_pi = -np.logaddexp(0.0, -llr)
    log_pi_bar = -np.logaddexp(0.0, llr)
    d = llr.shape[-1]
    lq = np.full(llr.shape[:-1] + (d + 1,), -np.inf)
    lq[..., 0] = 0.0
    for i in range(d):
        lp, lpb = log_pi[..., i, None], log_pi_bar[..., i, None]
        shifted = lq[..., :-1] + lp
        lq = lq + lpb
        lq[..., 1:] = np.logaddexp(lq[..., 1:], shifted)
    return lq


def _exchangeable_log_ratio(llr: np.ndarray, class_values: np.ndarray) -> np.ndarray:
    # sum_k p(k) prod_i u_i^{z_i} = prod_i (1 + u_i) * sum_w c_w PB_w(sigmoid(l)),
    # and the prod_i (1 + u_i) factor cancels between numerator and denominator.
    c = class_values
    q = _poisson_binomial(llr)
    num = q @ c
    den = q @ c[::-1]
    bad = ~((num > _UNDERFLOW) & (den > _UNDERFLOW))
    with np.errstate(divide="ignore"):
        out = np.log(num) - np.log(den)
    if np.any(bad):
        lq = _log_poisson_binomial(llr[bad])
        with np.errstate(divide="ignore"):
            lc = np.log(c)
        out[bad] = logsumexp(lq + lc, axis=-1) - logsumexp(lq + lc[::-1], axis=-1)
    return out


def _dense_log_ratio(llr: np.ndarray, probs: np.ndarray) -> np.ndarray:
    d = llr.shape[-1]
    z = bit_matrix(d).astype(float)
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    logp_mirror = logp[::-1]
    flat = llr.reshape(-1, d)
    out = np.empty(flat.shape[0])
    step = max(1, _DENSE_BLOCK // z.shape[0])
    for start in range(0, flat.shape[0], step):
        a = flat[start : start + step] @ z.T
        out[start : start + step] = logsumexp(a + logp, axis=-1) - logsumexp(a + logp_mirror, axis=-1)
    return out.reshape(llr.shape[:-1])


def map_log_ratio(llr, pmf: JointPmf) -> np.ndarray:
    """Log of the MAP likelihood ratio for a group with joint decision pmf ``pmf``.

    The denominator uses the mirrored pmf, i.e. the pmf conditioned on
    ``x = -1``.  Exchangeable pmfs take an ``O(d^2)`` path; anything else is
    evaluated over all ``2^d`` outcomes with log-sum-exp.
    """
    llr = np.asarray(llr, dtype=float)
    if llr.shape[-1] != pmf.n:
        raise ValueError(f"{llr.shape[-1]} links but the pmf covers {pmf.n} nodes")
    if pmf.is_exchangeable:
        return _exchangeable_log_ratio(llr, pmf.class_values)
    return _dense_log_ratio(llr, pmf.probs)


def id_log_ratio(llr, p_correct) -> np.ndarray:
    """Sum over links of ``log(L P + (1-P)) - log(P + L (1-P))`` with ``L = exp(llr)``."""
    llr = np.asarray(llr, dtype=float)
    p = np.asarray(p_correct, dtype=float)
    with np.errstate(divide="ignore"):
        log_p, log_q = np.log(p), np.log1p(-p)
    terms = np.logaddexp(llr + log_p, log_q) - np.logaddexp(log_p, llr + log_q)
    return terms.sum(axis=-1)


def mrc_statistic(y, weights) -> np.ndarray:
    return np.sum(np.asarray(y, dtype=float) * weights, axis=-1)


@dataclass
class DecisionContext:
    """Everything one node sees: its received samples and what it knows about them."""

    received: np.ndarray
    link_specs: Sequence[ChannelSpec]
    prev_pmf: Optional[JointPmf] = None
    prev_marginals: Optional[MarginalSet] = None

    def __post_init__(self):
        self.received = np.atleast_1d(np.asarray(self.received, dtype=float))
        if self.received.ndim != 1 or len(self.link_specs) != self.received.size:
            raise ValueError("need one channel spec per received sample")
        if self.prev_pmf is not None and self.prev_pmf.n != self.received.size:
            raise ValueError("previous-group pmf does not match the number of links")
        if self.prev_marginals is not None and self.prev_marginals.n != self.received.size:
            raise ValueError("previous-group marginals do not match the number of links")

    @property
    def llrs(self) -> np.ndarray:
        return link_llrs(self.received, self.link_specs)


def link_llrs(received, link_specs: Sequence[ChannelSpec]) -> np.ndarray:
    out = np.empty(len(link_specs))
    for i, (y, spec) in enumerate(zip(np.atleast_1d(received), link_specs)):
        if spec.is_csi:
            out[i] = llr_csi(y, spec.mode.h, spec.noise_variance)
        else:
            out[i] = llr_stats(y, spec.stats_params())
    return out


def detect_first_group(y) -> int:
    return int(sgn(y))


def map_detect(ctx: DecisionContext) -> int:
    if ctx.prev_pmf is None:
        raise ValueError("MAP detection needs the previous group's joint pmf")
    return int(sgn(map_log_ratio(ctx.llrs, ctx.prev_pmf)))


def id_detect(ctx: DecisionContext) -> int:
    if ctx.prev_marginals is None:
        raise ValueError("ID detection needs the previous group's marginals")
    return int(sgn(id_log_ratio(ctx.llrs, ctx.prev_marginals.p_correct)))


def pjp_detect(ctx: DecisionContext, n_f: Optional[int] = None) -> int:
    pmf = pjp_pmf(ctx.received.size, n_f)
    return int(sgn(map_log_ratio(ctx.llrs, pmf)))


def mrc_weights(link_specs: Sequence[ChannelSpec]) -> np.ndarray:
    """Channel gain under known CSI, average SNR weight under known statistics."""
    return np.array([s.mode.h if s.is_csi else s.mode.sigma_h_sq for s in link_specs])


def mrc_detect(ctx: DecisionContext) -> int:
    return int(sgn(mrc_statistic(ctx.received, mrc_weights(ctx.link_specs))))


def map_detect_product(ctx: DecisionContext) -> int:
    """MAP rule with the product of the context's marginals as joint pmf."""
    return int(sgn(map_log_ratio(ctx.llrs, product_pmf(ctx.prev_marginals))))
