"""Monte Carlo BER campaigns over decode-and-forward relay networks.

A campaign first builds the per-group side information the detectors need
(the "pipeline": joint pmfs or marginals, group by group) and then runs
independent trials in fixed-size chunks.  Each chunk draws from its own
random substream keyed by ``(seed, chunk)``, so results do not depend on how
many threads process the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .channel import ChannelSpec, llr_stats, q_function
from .detectors import Detector, DetectorKind, PmfSource, id_log_ratio, map_log_ratio, sgn
from .pmf import (
    MAX_GROUP_SIZE,
    JointPmf,
    estimate_mcs,
    estimate_ps,
    majority_threshold,
    pjp_pmf,
    product_pmf,
    quantize_probability,
    symmetrize,
)
from .topology import MESH, MULTIHOP, Hop, NetworkTopology, build_mesh, build_multihop, common_channel

CHUNK_TRIALS = 4096
THREADS_ENV = "RELAYSIM_THREADS"

_STREAM_GRID = 1
_STREAM_PIPELINE = 2
_STREAM_TRIALS = 3
_STREAM_RECEIVER = 4


class SimConfig(BaseModel):
    """One simulation point.

    ``hops`` counts links on the source-destination path, so a network with
    ``hops`` hops has ``hops - 1`` relay groups.  Average link SNR is
    ``sigma_h^2 / sigma^2`` with ``sigma_h^2 = 1``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["mesh", "multihop"] = MESH
    hops: int = Field(1, ge=1)
    nodes_per_group: int = Field(10, ge=1, le=MAX_GROUP_SIZE)
    mode: Literal["known_stats", "known_csi"] = "known_stats"
    snr_db: float = Field(3.0, allow_inf_nan=False)
    detector: Detector
    pmf_scheme: Optional[PmfSource] = None
    mcs_samples: int = Field(100_000, ge=1)
    pilots: int = Field(100_000, ge=1)
    n_f: Optional[int] = Field(None, ge=0)
    quant_bits: Optional[int] = Field(None, ge=1, le=52)
    id_samples: int = Field(100_000, ge=1)
    trials: int = Field(1_000_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    csi_redraw: Literal["per_trial", "per_campaign"] = "per_trial"
    csi_marginal_samples: int = Field(256, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _default_scheme(cls, data):
        if isinstance(data, dict) and data.get("pmf_scheme") is None:
            det = data.get("detector")
            det = getattr(det, "value", det)
            if det in ("id", "pjp"):
                data = {**data, "pmf_scheme": det}
        return data

    @model_validator(mode="after")
    def _check_compatible(self):
        DetectorKind(self.detector, self.pmf_scheme, self.quant_bits)
        if self.n_f is not None and self.n_f > self.nodes_per_group:
            raise ValueError(f"n_f={self.n_f} exceeds nodes_per_group={self.nodes_per_group}")
        if self.detector is Detector.FIRST_GROUP_SIGN and self.hops > 1 and self.nodes_per_group > 1:
            raise ValueError("first_group_sign needs a single incoming link at every node")
        if (
            self.mode == "known_csi"
            and self.csi_redraw == "per_trial"
            and self.pmf_scheme in (PmfSource.MCS, PmfSource.PS)
        ):
            raise ValueError(
                f"pmf_scheme {self.pmf_scheme.value!r} needs a fixed channel grid; use csi_redraw: per_campaign"
            )
        return self

    @property
    def relay_groups(self) -> int:
        return self.hops - 1

    @property
    def noise_variance(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    @property
    def detector_kind(self) -> DetectorKind:
        return DetectorKind(self.detector, self.pmf_scheme, self.quant_bits)

    @property
    def per_trial_csi(self) -> bool:
        return self.mode == "known_csi" and self.csi_redraw == "per_trial"

    def with_(self, **changes) -> "SimConfig":
        return SimConfig(**{**self.model_dump(), **changes})


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def build_topology(config: SimConfig) -> NetworkTopology:
    """Network described by ``config``.

    Known-CSI campaigns with ``csi_redraw: per_campaign`` get one Rayleigh
    grid drawn from the seed; otherwise every link carries the statistics and
    fading is redrawn per trial.
    """
    sigma_sq = config.noise_variance
    if config.mode == "known_csi" and config.csi_redraw == "per_campaign":
        grid_rng = _rng(config.seed, _STREAM_GRID)
        scale = math.sqrt(0.5)

        def factory(hop, i, j):
            return ChannelSpec.known_csi(grid_rng.rayleigh(scale), sigma_sq)

    else:
        factory = common_channel(ChannelSpec.known_stats(1.0, sigma_sq))
    K = config.relay_groups
    if config.kind == MESH:
        return build_mesh(K, [config.nodes_per_group] * K, factory)
    return build_multihop(K, config.nodes_per_group, factory)


@dataclass(frozen=True, eq=False)
class LinkArrays:
    """Channel parameters of a hop as ``(n_next, in_degree)`` arrays."""

    sources: np.ndarray
    noise_var: np.ndarray
    sigma_h_sq: Optional[np.ndarray]
    h: Optional[np.ndarray]
    csi: bool
    full: bool

    @classmethod
    def from_grid(cls, grid, sources, csi: bool, full: bool) -> "LinkArrays":
        grid = np.asarray(grid, dtype=object)
        noise = np.vectorize(lambda s: s.noise_variance, otypes=[float])(grid)
        fixed = np.vectorize(lambda s: s.is_csi, otypes=[bool])(grid)
        if fixed.all():
            h = np.vectorize(lambda s: s.mode.h, otypes=[float])(grid)
            sh2 = None
        elif not fixed.any():
            h = None
            sh2 = np.vectorize(lambda s: s.mode.sigma_h_sq, otypes=[float])(grid)
        else:
            raise ValueError("a hop mixes known-CSI and known-statistics links")
        return cls(np.asarray(sources), noise, sh2, h, csi or h is not None, full)

    @classmethod
    def from_hop(cls, hop: Hop, csi: bool) -> "LinkArrays":
        grid = np.empty((hop.n_next, hop.in_degree), dtype=object)
        for j in range(hop.n_next):
            for m in range(hop.in_degree):
                grid[j, m] = hop.links[j][m]
        return cls.from_grid(grid, hop.sources, csi, hop.is_full)

    def rows(self, sel) -> "LinkArrays":
        pick = lambda a: None if a is None else a[sel]
        return LinkArrays(
            self.sources[sel], self.noise_var[sel], pick(self.sigma_h_sq), pick(self.h), self.csi, self.full
        )

    @property
    def a(self) -> np.ndarray:
        sh2 = self.sigma_h_sq
        return np.sqrt(sh2) / (np.sqrt(self.noise_var) * np.sqrt(2.0 * self.noise_var + sh2))

    def observe(self, prev_decisions: np.ndarray, rng: np.random.Generator):
        """Received samples ``(T, n_next, d)`` and the fading that produced them."""
        x = prev_decisions[:, self.sources]
        if self.h is not None:
            h = self.h
        else:
            h = rng.rayleigh(scale=np.sqrt(self.sigma_h_sq / 2.0), size=x.shape)
        w = rng.standard_normal(x.shape) * np.sqrt(self.noise_var)
        return h * x + w, h

    def llr(self, y: np.ndarray, h: np.ndarray) -> np.ndarray:
        if self.csi:
            return 2.0 * y * h / self.noise_var
        return llr_stats(y, self.a)

    def crossover(self) -> np.ndarray:
        """Per-link probability that the received sign is wrong."""
        if self.h is not None:
            return q_function(self.h / np.sqrt(self.noise_var))
        half = self.sigma_h_sq / self.noise_var / 2.0
        return 0.5 * (1.0 - np.sqrt(half / (half + 1.0)))


def hop_arrays(topology: NetworkTopology, config: SimConfig) -> list:
    return [LinkArrays.from_hop(h, config.mode == "known_csi") for h in topology.hops]


@dataclass(frozen=True, eq=False)
class GroupState:
    """What the next group knows about one group's decisions.

    ``marginals[i]`` is ``P(x_i = x)``; ``pmf`` the joint pmf given ``x = +1``
    (absent under the independence scheme).  ``per_trial`` marks marginals
    that depend on the fading draw and are recomputed inside each trial.
    """

    marginals: Optional[np.ndarray]
    pmf: Optional[JointPmf] = None
    independent: bool = False
    per_trial: bool = False


SOURCE_STATE = GroupState(np.ones(1), JointPmf.point_mass(1), independent=True)


@dataclass
class PmfPipeline:
    """Side information for groups ``1..K`` (``groups[k-1]`` is group ``k``)."""

    groups: list = field(default_factory=list)

    def state(self, k: int) -> Optional[GroupState]:
        if k == 0:
            return SOURCE_STATE
        return self.groups[k - 1]

    def __len__(self):
        return len(self.groups)

    def prefix(self, K: int) -> "PmfPipeline":
        return PmfPipeline(self.groups[:K])


def decide(kind: DetectorKind, arr: LinkArrays, y, h, prev: Optional[GroupState], marginals=None) -> np.ndarray:
    """Decisions ``(T, n_next)`` of every node of a hop.

    ``marginals`` overrides ``prev.marginals`` with per-trial values of shape
    ``(T, n_prev)``.
    """
    tag = kind.tag
    if tag is Detector.FIRST_GROUP_SIGN:
        if y.shape[-1] != 1:
            raise ValueError("first_group_sign needs exactly one incoming link")
        return sgn(y[..., 0])
    if tag is Detector.MRC:
        weights = h if arr.csi else arr.sigma_h_sq
        return sgn(np.sum(y * weights, axis=-1))
    llr = arr.llr(y, h)
    if tag is Detector.ID or prev.independent or prev.pmf is None or not arr.full:
        p = prev.marginals if marginals is None else marginals
        p = p[..., arr.sources]
        return sgn(id_log_ratio(llr, p))
    return sgn(map_log_ratio(llr, prev.pmf))


def _first_group_marginals(arr: LinkArrays) -> np.ndarray:
    return 1.0 - arr.crossover()[:, 0]


def _symmetric_error(stat, axis):
    # a zero statistic decides +1, which is wrong for half of the symbols
    return np.mean(stat < 0, axis=axis) + 0.5 * np.mean(stat == 0, axis=axis)


def _cascade_error(P, q):
    """Error rate of a one-link ID node: source correct w.p. ``P``, link flips w.p. ``q``.

    The node follows the received sign when ``P > 1/2`` and inverts it when
    ``P < 1/2``; at ``P = 1/2`` its statistic is zero and it is right half the time.
    """
    P, q = np.asarray(P, dtype=float), np.asarray(q, dtype=float)
    follow = P * q + (1 - P) * (1 - q)
    invert = P * (1 - q) + (1 - P) * q
    return np.where(P > 0.5, follow, np.where(P < 0.5, invert, 0.5))


def recursive_error_probability(
    links: Sequence[ChannelSpec],
    prev_marginals,
    samples: int,
    rng: np.random.Generator,
    *,
    csi: Optional[bool] = None,
) -> float:
    """Error probability of an ID node whose sources decide independently.

    Samples the mixture observations with each source correct with
    probability ``prev_marginals[i]`` and counts how often the summed ID
    log-likelihood falls below zero, with exact zeros counted as half an
    error (the tie rule is right for only one of the two symbols).  A single incoming link has a closed
    form (a binary symmetric channel cascade) and skips the sampling.
    """
    links = list(links)
    p = np.asarray(prev_marginals, dtype=float).reshape(-1)
    if p.size != len(links):
        raise ValueError("one marginal per incoming link is required")
    if csi is None:
        csi = all(s.is_csi for s in links)
    arr = LinkArrays.from_grid(np.array([links], dtype=object), np.arange(len(links))[None, :], csi, True)
    if len(links) == 1:
        return float(_cascade_error(p[0], arr.crossover()[0, 0]))
    latent = np.where(rng.random((samples, p.size)) < p, 1, -1).astype(np.int8)
    y, h = arr.rows(0).observe(latent, rng)
    return float(_symmetric_error(id_log_ratio(arr.rows(0).llr(y, h), p), axis=0))


def _quantize(config: SimConfig, p):
    if config.detector is Detector.ID and config.quant_bits is not None:
        return quantize_probability(np.clip(p, 0.0, 1.0), config.quant_bits)
    return p


def _exchangeable(config: SimConfig) -> bool:
    # identical iid links everywhere: decisions inside a group are exchangeable
    return config.mode == "known_stats"


def _id_group_state(config: SimConfig, arr: LinkArrays, hop: Hop, prev: GroupState, k: int) -> GroupState:
    rng = _rng(config.seed, _STREAM_PIPELINE, k)
    n = hop.n_next
    nodes = [0] if _exchangeable(config) and arr.full else range(n)
    p_err = np.empty(n)
    for j in nodes:
        p_err[j] = recursive_error_probability(
            hop.links[j], prev.marginals[hop.sources[j]], config.id_samples, rng, csi=arr.csi
        )
    if len(nodes) == 1:
        p_err[:] = p_err[0]
    return GroupState(_quantize(config, 1.0 - p_err), independent=True)


def build_pipeline(config: SimConfig, topology: Optional[NetworkTopology] = None) -> PmfPipeline:
    """Per-group pmfs or marginals for groups ``1..K``, built front to back.

    Group 1 always comes from the closed-form first-hop error rates (its
    decisions are independent).  Later groups follow the configured scheme:
    Monte Carlo sampling of the group on its predecessor's pmf, pilot-based
    estimation through the Kronecker inverse and simplex projection, the
    predefined PJP pmf, or the independence recursion.
    """
    topology = topology or build_topology(config)
    arrays = hop_arrays(topology, config)
    kind = config.detector_kind
    K = config.relay_groups
    if kind.tag in (Detector.MRC, Detector.FIRST_GROUP_SIGN):
        return PmfPipeline([None] * K)
    if K == 0:
        return PmfPipeline([])

    exch = _exchangeable(config)
    groups: list = []

    if config.per_trial_csi:
        groups.append(GroupState(None, independent=True, per_trial=True))
    else:
        pc1 = _first_group_marginals(arrays[0])
        if kind.pmf_source is PmfSource.ID:
            groups.append(GroupState(_quantize(config, pc1), independent=True))
        else:
            groups.append(GroupState(pc1, product_pmf(pc1), independent=True))

    pilots = None
    if kind.pmf_source is PmfSource.PS:
        y, h = arrays[0].observe(np.ones((config.pilots, 1), dtype=np.int8), _rng(config.seed, _STREAM_PIPELINE, 1))
        pilots = decide(kind, arrays[0], y, h, SOURCE_STATE)

    for k in range(2, K + 1):
        arr, hop, prev = arrays[k - 1], topology.hops[k - 1], groups[-1]
        n = hop.n_next
        src = kind.pmf_source
        if src is PmfSource.ID:
            state = GroupState(None, independent=True, per_trial=True) if config.per_trial_csi else (
                _id_group_state(config, arr, hop, prev, k)
            )
        elif src is PmfSource.PJP:
            pmf = pjp_pmf(n, config.n_f if config.n_f is not None else majority_threshold(n))
            state = GroupState(pmf.marginals(), pmf)
        elif src is PmfSource.MCS:
            rng = _rng(config.seed, _STREAM_PIPELINE, k)

            def run_group(latent, r, arr=arr, prev=prev):
                y, h = arr.observe(latent, r)
                return decide(kind, arr, y, h, prev)

            pmf = estimate_mcs(prev.pmf, run_group, config.mcs_samples, rng)
            if exch:
                pmf = symmetrize(pmf)
            state = GroupState(pmf.marginals(), pmf)
        else:
            y, h = arr.observe(pilots, _rng(config.seed, _STREAM_PIPELINE, k))
            pilots = decide(kind, arr, y, h, prev)
            receiver = arrays[k].rows(slice(0, 1)) if arrays[k].full else arrays[k]
            ry, _ = receiver.observe(pilots, _rng(config.seed, _STREAM_RECEIVER, k))
            signs = sgn(ry.reshape(ry.shape[0], -1))
            pc = 1.0 - receiver.crossover().reshape(-1)
            pmf = estimate_ps(signs, pc, symmetric=exch)
            state = GroupState(pmf.marginals(), pmf)
        groups.append(state)
    return PmfPipeline(groups)


def _trial_marginals(config, arr: LinkArrays, h, prev_marginals, k, rng) -> np.ndarray:
    """Per-trial ``P(x_j = x)`` of group ``k`` under redrawn known CSI, shape ``(T, n)``."""
    if k == 1:
        return _quantize(config, 1.0 - q_function(h[:, :, 0] / np.sqrt(arr.noise_var[:, 0])))
    T, n, d = h.shape
    if d == 1:
        q = q_function(h[:, :, 0] / np.sqrt(arr.noise_var[:, 0]))
        return _quantize(config, 1.0 - _cascade_error(prev_marginals[:, arr.sources[:, 0]], q))
    S = config.csi_marginal_samples
    out = np.empty((T, n))
    for j in range(n):
        p = prev_marginals[:, arr.sources[j]][:, None, :]
        hj = h[:, j, :][:, None, :]
        latent = np.where(rng.random((T, S, d)) < p, 1.0, -1.0)
        y = hj * latent + rng.standard_normal((T, S, d)) * np.sqrt(arr.noise_var[j])
        l = id_log_ratio(2.0 * y * hj / arr.noise_var[j], p)
        out[:, j] = 1.0 - _symmetric_error(l, axis=1)
    return _quantize(config, out)


def run_trials(config: SimConfig, arrays: list, pipeline: PmfPipeline, rng, aux_rng, n_trials: int):
    """Simulate ``n_trials`` independent transmissions; returns (decisions, truth)."""
    kind = config.detector_kind
    x = (rng.integers(0, 2, size=n_trials) * 2 - 1).astype(np.int8)
    dec = x[:, None]
    trial_marg = np.ones((n_trials, 1))
    K = len(arrays) - 1
    for k, arr in enumerate(arrays, start=1):
        y, h = arr.observe(dec, rng)
        prev = pipeline.state(k - 1) if kind.tag not in (Detector.MRC, Detector.FIRST_GROUP_SIGN) else None
        override = trial_marg if prev is not None and prev.per_trial else None
        new = decide(kind, arr, y, h, prev, override)
        if k <= K and prev is not None:
            nxt = pipeline.state(k)
            if nxt.per_trial:
                trial_marg = _trial_marginals(config, arr, h, override, k, aux_rng)
        dec = new
    return dec[:, 0], x


def run_trial(config: SimConfig, pipeline: PmfPipeline, rng: np.random.Generator, topology=None):
    """One transmission through the network; returns ``(decision, truth)``."""
    arrays = hop_arrays(topology or build_topology(config), config)
    d, x = run_trials(config, arrays, pipeline, rng, rng, 1)
    return int(d[0]), int(x[0])


@dataclass(frozen=True)
class BerEstimate:
    ber: float
    trials: int
    errors: int
    ci95_halfwidth: float

    @classmethod
    def from_counts(cls, errors: int, trials: int) -> "BerEstimate":
        p = errors / trials
        return cls(p, trials, int(errors), 1.96 * math.sqrt(p * (1.0 - p) / trials))

    @property
    def standard_error(self) -> float:
        return self.ci95_halfwidth / 1.96


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def simulate_ber(
    config: SimConfig,
    *,
    topology: Optional[NetworkTopology] = None,
    pipeline: Optional[PmfPipeline] = None,
    threads: Optional[int] = None,
) -> BerEstimate:
    """Estimate the destination's BER over ``config.trials`` trials."""
    topology = topology or build_topology(config)
    pipeline = pipeline if pipeline is not None else build_pipeline(config, topology)
    arrays = hop_arrays(topology, config)
    n_chunks = -(-config.trials // CHUNK_TRIALS)

    def run_chunk(c: int) -> int:
        n = min(CHUNK_TRIALS, config.trials - c * CHUNK_TRIALS)
        rng = _rng(config.seed, _STREAM_TRIALS, c, 0)
        aux = _rng(config.seed, _STREAM_TRIALS, c, 1)
        d, x = run_trials(config, arrays, pipeline, rng, aux, n)
        return int(np.count_nonzero(d != x))

    threads = resolve_threads(threads)
    if threads == 1:
        errors = sum(map(run_chunk, range(n_chunks)))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = sum(pool.map(run_chunk, range(n_chunks)))
    return BerEstimate.from_counts(errors, config.trials)


SWEEP_AXES = ("hops", "snr_db", "quant_bits", "group_size")
_AXIS_FIELD = {"hops": "hops", "snr_db": "snr_db", "quant_bits": "quant_bits", "group_size": "nodes_per_group"}


@dataclass(frozen=True)
class SweepPoint:
    value: object
    config: SimConfig
    estimate: BerEstimate


def _prefix_reusable(config: SimConfig) -> bool:
    # pipelines of shallower networks are prefixes of deeper ones when every
    # link is statistically identical and no receiver shape depends on depth
    return config.mode == "known_stats" and not (config.kind == MULTIHOP and config.pmf_scheme is PmfSource.PS)


def sweep(config: SimConfig, axis: str, values: Sequence, *, threads: Optional[int] = None) -> list:
    """One BER estimate per value of ``axis``; all points share the base seed."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    points = [config.with_(**{_AXIS_FIELD[axis]: v}) for v in values]
    shared = None
    if axis == "hops" and points and _prefix_reusable(config):
        deepest = max(points, key=lambda c: c.hops)
        shared = build_pipeline(deepest)
    out = []
    for v, cfg in zip(values, points):
        pipe = shared.prefix(cfg.relay_groups) if shared is not None else None
        out.append(SweepPoint(v, cfg, simulate_ber(cfg, pipeline=pipe, threads=threads)))
    return out
