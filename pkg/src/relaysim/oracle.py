"""Exact BER of small known-CSI networks by enumeration and quadrature.

Independent of the simulation path: every node's decision rule is rebuilt
from first principles (the likelihoods of the received vector under both
hypotheses, mixed over the previous group's decisions) and the probability
that it decides +1 is integrated numerically for each configuration of the
symbols it hears.  Group pmfs are then chained exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import logsumexp

from .detectors import Detector
from .engine import SimConfig, build_topology
from .pmf import majority_threshold, pjp_pmf, quantize_probability

MAX_ORACLE_GROUP = 2
MAX_ORACLE_RELAY_GROUPS = 2
QUAD_TOL = 1e-8
_SPAN = 12.0  # standard deviations covered around each mean
_GRID = 801


class OracleUnavailable(ValueError):
    """The configuration is outside what exact enumeration supports."""


def _vectors(n: int) -> np.ndarray:
    """All +/-1 vectors of length n; row r has component i equal to +1 iff bit i of r is set."""
    r = np.arange(2**n)
    return np.where((r[:, None] >> np.arange(n)) & 1, 1.0, -1.0)


def _gauss_logpdf(y, mean, var):
    return -0.5 * (y - mean) ** 2 / var - 0.5 * np.log(2 * math.pi * var)


@dataclass(frozen=True)
class _Node:
    h: np.ndarray
    var: np.ndarray
    sources: np.ndarray


def _statistic(node: _Node, tag: Detector, belief):
    """Function of the received vectors ``(N, d)`` whose sign is the decision.

    ``belief`` is a pmf over the ``2^d`` symbol vectors the node hears,
    conditioned on the source sending +1; the rule compares the mixture
    likelihoods of the two hypotheses directly.
    """
    h, var = node.h, node.var
    if tag is Detector.FIRST_GROUP_SIGN:
        return lambda y: y[:, 0]
    if tag is Detector.MRC:
        return lambda y: y @ h
    d = h.size
    s = _vectors(d)
    with np.errstate(divide="ignore"):
        log_plus = np.log(np.asarray(belief, dtype=float))
    # P(s | x=-1) = P(-s | x=+1); -s is the row with all bits flipped
    log_minus = log_plus[::-1]

    def stat(y):
        ll = np.stack([_gauss_logpdf(y, h * row, var).sum(axis=1) for row in s], axis=1)
        return logsumexp(ll + log_plus, axis=1) - logsumexp(ll + log_minus, axis=1)

    return stat


def _prob_nonneg_1d(fn, mean: float, sd: float) -> float:
    """``P(fn(Y) >= 0)`` for ``Y ~ N(mean, sd^2)`` with ``fn`` piecewise of one sign."""
    ys = mean + sd * np.linspace(-_SPAN, _SPAN, _GRID)
    vals = fn(ys)
    pos = vals >= 0
    edges = [-np.inf]
    for k in np.nonzero(pos[1:] != pos[:-1])[0]:
        a, b = ys[k], ys[k + 1]
        edges.append(optimize.brentq(lambda t: float(fn(np.array([t]))[0]), a, b, xtol=1e-14, rtol=1e-14))
    edges.append(np.inf)
    cdf = stats.norm.cdf((np.array(edges) - mean) / sd)
    sign = bool(pos[0])
    total = 0.0
    for i in range(len(edges) - 1):
        if sign:
            total += cdf[i + 1] - cdf[i]
        sign = not sign
    return float(total)


def decision_probability(node: _Node, stat, symbols) -> float:
    """Probability that ``stat(y) >= 0`` when the node hears ``symbols``."""
    mean = node.h * np.asarray(symbols, dtype=float)
    sd = np.sqrt(node.var)
    if mean.size == 1:
        return _prob_nonneg_1d(lambda t: stat(t[:, None]), mean[0], sd[0])
    if mean.size != 2:
        raise OracleUnavailable("nodes with more than two incoming links are not enumerable here")

    def inner(y1):
        fn = lambda t: stat(np.column_stack([np.full_like(t, y1), t]))
        return stats.norm.pdf(y1, mean[0], sd[0]) * _prob_nonneg_1d(fn, mean[1], sd[1])

    lo, hi = mean[0] - _SPAN * sd[0], mean[0] + _SPAN * sd[0]
    val, _ = integrate.quad(inner, lo, hi, epsabs=QUAD_TOL * 1e-2, epsrel=QUAD_TOL, limit=400)
    return float(min(max(val, 0.0), 1.0))


def _group_nodes(topology, hop_index: int):
    hop = topology.hops[hop_index - 1]
    out = []
    for j in range(hop.n_next):
        specs = hop.links[j]
        if not all(s.is_csi for s in specs):
            raise OracleUnavailable("exact enumeration needs a fixed known-CSI channel grid")
        out.append(
            _Node(
                np.array([s.mode.h for s in specs]),
                np.array([s.noise_variance for s in specs]),
                np.asarray(hop.sources[j]),
            )
        )
    return out


def _restrict(pmf: np.ndarray, n: int, sources: np.ndarray) -> np.ndarray:
    """Marginal pmf of the nodes ``sources`` (in that order)."""
    vec = _vectors(n)
    sub = vec[:, sources]
    idx = ((sub > 0).astype(int) << np.arange(sources.size)).sum(axis=1)
    return np.bincount(idx, weights=pmf, minlength=2**sources.size)


def _product(marginals: np.ndarray) -> np.ndarray:
    vec = _vectors(marginals.size)
    return np.prod(np.where(vec > 0, marginals, 1.0 - marginals), axis=1)


def _propagate(nodes, n_prev: int, prev_pmf: np.ndarray, probs_plus) -> np.ndarray:
    """Joint pmf of the next group from the previous one and per-node P(+1 | heard symbols)."""
    prev_vec = _vectors(n_prev)
    n = len(nodes)
    out = np.zeros(2**n)
    z = _vectors(n)
    for r, s in enumerate(prev_vec):
        if prev_pmf[r] == 0.0:
            continue
        pj = np.array([probs_plus[j][tuple(s[node.sources])] for j, node in enumerate(nodes)])
        out += prev_pmf[r] * np.prod(np.where(z > 0, pj, 1.0 - pj), axis=1)
    return out


def exact_ber_small(config: SimConfig, topology=None) -> float:
    """Exact destination BER for known-CSI networks with at most 2 relay groups of at most 2 nodes."""
    # the destination is a single node; index 0 is "decided -1" given x = +1
    return float(exact_group_pmfs(config, topology)[-1][0])


def exact_group_pmfs(config: SimConfig, topology=None) -> list:
    """Exact joint decision pmfs given ``x = +1`` of groups ``1..K+1`` (the last is the destination)."""
    return _chain(config, topology)[0]


def exact_id_marginals(config: SimConfig, topology=None) -> list:
    """Independence-rule marginals ``P(x_i = x)`` of groups ``1..K`` as the ID nodes compute them."""
    if config.detector is not Detector.ID:
        raise OracleUnavailable("independence marginals only exist for the id detector")
    return _chain(config, topology)[1][:-1]


def _chain(config: SimConfig, topology=None):
    """Walk the network group by group; returns (true pmfs, ID marginals) per group.

    FullMap nodes use the exact joint pmf of the previous group whatever
    acquisition scheme the configuration names; ID nodes use exact
    independence marginals (quantized when configured); PJP nodes use the
    predefined pmf beyond the first group.
    """
    if config.mode != "known_csi" or config.csi_redraw != "per_campaign":
        raise OracleUnavailable("exact enumeration needs known_csi with csi_redraw: per_campaign")
    if config.relay_groups > MAX_ORACLE_RELAY_GROUPS or config.nodes_per_group > MAX_ORACLE_GROUP:
        raise OracleUnavailable(
            f"instance too large: at most {MAX_ORACLE_RELAY_GROUPS} relay groups of {MAX_ORACLE_GROUP} nodes"
        )
    topology = topology if topology is not None else build_topology(config)
    tag = config.detector
    quant = config.quant_bits if tag is Detector.ID else None

    true_pmf = np.array([0.0, 1.0])  # source sends +1
    belief_marg = np.ones(1)  # independence marginals used by ID nodes
    n_prev = 1
    pmfs, beliefs = [], []
    K = topology.hop_count
    for k in range(1, K + 2):
        nodes = _group_nodes(topology, k)
        probs_plus = []
        id_marg = np.empty(len(nodes))
        for j, node in enumerate(nodes):
            if tag is Detector.ID:
                belief = _product(belief_marg[node.sources])
            elif tag is Detector.PJP and k >= 3:
                belief = pjp_pmf(
                    n_prev, config.n_f if config.n_f is not None else majority_threshold(n_prev)
                ).probs
                belief = _restrict(belief, n_prev, node.sources)
            else:
                belief = _restrict(true_pmf, n_prev, node.sources)
            stat = _statistic(node, tag, belief)
            table = {}
            for s in _vectors(node.sources.size):
                table[tuple(s)] = decision_probability(node, stat, s)
            probs_plus.append(table)
            if tag is Detector.ID:
                prior = _product(belief_marg[node.sources])
                id_marg[j] = sum(
                    prior[r] * table[tuple(s)] for r, s in enumerate(_vectors(node.sources.size))
                )
        true_pmf = _propagate(nodes, n_prev, true_pmf, probs_plus)
        if tag is Detector.ID:
            belief_marg = id_marg if quant is None else quantize_probability(id_marg, quant)
        n_prev = len(nodes)
        pmfs.append(true_pmf)
        beliefs.append(belief_marg)
    return pmfs, beliefs


def oracle_supported(config: SimConfig) -> bool:
    return (
        config.mode == "known_csi"
        and config.csi_redraw == "per_campaign"
        and config.relay_groups <= MAX_ORACLE_RELAY_GROUPS
        and config.nodes_per_group <= MAX_ORACLE_GROUP
    )
