"""Joint pmfs of a relay group's hard decisions, and how nodes obtain them.

Outcomes are indexed by the binary encoding ``k = sum_i z_i 2^i`` with
``z_i = (x_i + 1) / 2`` (node 0 is the least significant bit).  Every pmf is
conditioned on the source having sent ``x = +1``; the ``x = -1`` pmf is its
bitwise-complement mirror.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.special import comb

MAX_GROUP_SIZE = 20
SUM_TOLERANCE = 1e-12


class SingularTransitionError(ValueError):
    """A node with ``p_c = 0.5`` makes the pilot transition matrix singular."""

    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"uninformative nodes (p_c = 0.5) cannot be inverted: {self.nodes}")


def _check_size(n: int) -> None:
    if n < 1:
        raise ValueError(f"group size must be >= 1, got {n}")
    if n > MAX_GROUP_SIZE:
        raise ValueError(f"group size {n} exceeds the dense-pmf cap of {MAX_GROUP_SIZE}")


def bit_matrix(n: int) -> np.ndarray:
    """``(2^n, n)`` array of the bits ``z_i`` of every outcome index."""
    idx = np.arange(2**n)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


def popcounts(n: int) -> np.ndarray:
    return bit_matrix(n).sum(axis=1)


def encode(decisions) -> int:
    """Index of a vector of +/-1 decisions."""
    v = np.asarray(decisions)
    if v.ndim != 1:
        raise ValueError("expected a 1-D decision vector")
    return int(encode_many(v[None, :])[0])


def encode_many(decisions) -> np.ndarray:
    """Row-wise :func:`encode` for an ``(m, n)`` array."""
    v = np.asarray(decisions)
    if not np.all((v == 1) | (v == -1)):
        raise ValueError("decisions must be -1 or +1")
    bits = (v > 0).astype(np.int64)
    return bits @ (1 << np.arange(v.shape[-1], dtype=np.int64))


def decode(index: int, n: int) -> np.ndarray:
    return decode_many(np.array([index]), n)[0]


def decode_many(indices, n: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    return (((idx[..., None] >> np.arange(n)) & 1) * 2 - 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class JointPmf:
    n: int
    probs: np.ndarray

    def __post_init__(self):
        _check_size(self.n)
        p = np.array(self.probs, dtype=float)
        if p.shape != (2**self.n,):
            raise ValueError(f"expected {2**self.n} probabilities, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, weights) -> "JointPmf":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        n = int(round(math.log2(w.size)))
        return cls(n, w / w.sum())

    @classmethod
    def point_mass(cls, n: int, index: int | None = None) -> "JointPmf":
        """All mass on one outcome; all-correct by default."""
        p = np.zeros(2**n)
        p[2**n - 1 if index is None else index] = 1.0
        return cls(n, p)

    @classmethod
    def uniform(cls, n: int) -> "JointPmf":
        return cls(n, np.full(2**n, 2.0**-n))

    @cached_property
    def class_values(self) -> np.ndarray:
        return compress_symmetric(self)

    @cached_property
    def is_exchangeable(self) -> bool:
        expanded = self.class_values[popcounts(self.n)]
        return bool(np.allclose(expanded, self.probs, rtol=1e-9, atol=1e-15))

    def marginals(self) -> np.ndarray:
        """``P(x_i = +1 | x = +1)`` for every node."""
        return self.probs @ bit_matrix(self.n)

    def marginalize(self, nodes: Sequence[int]) -> "JointPmf":
        nodes = list(nodes)
        if nodes == list(range(self.n)):
            return self
        sub = bit_matrix(self.n)[:, nodes].astype(np.int64) @ (1 << np.arange(len(nodes)))
        return JointPmf.normalized(np.bincount(sub, weights=self.probs, minlength=2 ** len(nodes)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``(size, n)`` array of +/-1 decision vectors drawn from the pmf."""
        return decode_many(rng.choice(self.probs.size, size=size, p=self.probs), self.n)

    def __repr__(self):
        return f"JointPmf(n={self.n}, probs={np.array2string(self.probs, precision=4, threshold=16)})"


@dataclass(frozen=True)
class MarginalSet:
    p_correct: np.ndarray

    def __post_init__(self):
        p = np.array(self.p_correct, dtype=float).reshape(-1)
        if p.size == 0 or np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
            raise ValueError("marginal probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "p_correct", p)

    @property
    def n(self) -> int:
        return self.p_correct.size

    @property
    def p_error(self) -> np.ndarray:
        return 1.0 - self.p_correct


def product_pmf(marginals: MarginalSet | Sequence[float]) -> JointPmf:
    """Joint pmf of independent decisions with the given correct-decision probabilities."""
    pc = marginals.p_correct if isinstance(marginals, MarginalSet) else MarginalSet(marginals).p_correct
    bits = bit_matrix(pc.size)
    probs = np.prod(np.where(bits == 1, pc, 1.0 - pc), axis=1)
    return JointPmf.normalized(probs)


def mirror(pmf: JointPmf) -> JointPmf:
    """pmf of ``-x`` given ``x = +1``; equals the pmf conditioned on ``x = -1``."""
    # complementing every bit of the index reverses the vector
    return JointPmf(pmf.n, pmf.probs[::-1])


def majority_threshold(n: int) -> int:
    """Smallest strict majority ``ceil((n + 1) / 2)``."""
    return (n + 2) // 2


def pjp_pmf(n: int, n_f: int | None = None) -> JointPmf:
    """Uniform mass on every outcome with at least ``n_f`` correct decisions."""
    if n_f is None:
        n_f = majority_threshold(n)
    if not 0 <= n_f <= n:
        raise ValueError(f"n_f must lie in [0, {n}], got {n_f}")
    mask = popcounts(n) >= n_f
    return JointPmf(n, mask / mask.sum())


def compress_symmetric(pmf: JointPmf) -> np.ndarray:
    """Per-outcome probability for each number of correct decisions.

    Entry ``w`` is the mass on outcomes with ``w`` ones divided by ``C(n, w)``;
    exact for exchangeable pmfs, a class average otherwise.
    """
    mass = np.bincount(popcounts(pmf.n), weights=pmf.probs, minlength=pmf.n + 1)
    return mass / comb(pmf.n, np.arange(pmf.n + 1))


def expand_symmetric(values, n: int) -> JointPmf:
    values = np.asarray(values, dtype=float)
    if values.shape != (n + 1,):
        raise ValueError(f"expected {n + 1} class values, got shape {values.shape}")
    return JointPmf.normalized(values[popcounts(n)])


def symmetrize(pmf: JointPmf) -> JointPmf:
    """Closest exchangeable pmf with the same per-class masses."""
    return expand_symmetric(compress_symmetric(pmf), pmf.n)


def average_pmfs(pmfs: Sequence[JointPmf]) -> JointPmf:
    """Entrywise mean of several estimates of one pmf, renormalized."""
    return JointPmf.normalized(np.mean([p.probs for p in pmfs], axis=0))


def quantize_probability(p, bits: int):
    """Round to the nearest of the ``2^bits`` levels ``k / (2^bits - 1)``; ties round up."""
    if bits < 1:
        raise ValueError("quantization needs at least one bit")
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    levels = 2**bits - 1
    out = np.floor(arr * levels + 0.5) / levels
    return float(out) if out.ndim == 0 else out


def estimate_mcs(
    prev_pmf: JointPmf,
    decide: Callable[[np.ndarray, np.random.Generator], np.ndarray],
    samples: int,
    rng: np.random.Generator,
    *,
    x: int = 1,
    replicas: int = 1,
) -> JointPmf:
    """Monte Carlo estimate of a group's joint decision pmf.

    Each draw picks ONE latent decision vector for the previous group and
    hands it to ``decide``, which simulates every node of the group on it and
    returns their +/-1 decisions as an ``(samples, n)`` array.  Sharing the
    latent vector is what makes the group's decisions dependent.

    ``x = -1`` conditions on the other source symbol.  ``replicas > 1`` draws
    several independent estimates and averages them.
    """
    if samples < 1:
        raise ValueError("need at least one Monte Carlo sample")
    if x not in (1, -1):
        raise ValueError("x must be +1 or -1")
    latent_pmf = prev_pmf if x == 1 else mirror(prev_pmf)
    estimates = []
    for _ in range(replicas):
        latent = latent_pmf.sample(rng, samples)
        decisions = np.asarray(decide(latent, rng))
        n = decisions.shape[1]
        counts = np.bincount(encode_many(decisions), minlength=2**n)
        estimates.append(JointPmf(n, counts / samples))
    return estimates[0] if replicas == 1 else average_pmfs(estimates)


def _block_axes(vec: np.ndarray, n: int) -> np.ndarray:
    # C-order reshape puts node i on axis n-1-i
    return vec.reshape((2,) * n)


def _apply_blocks(vec, per_node_pc, make_block) -> np.ndarray:
    pc = np.asarray(per_node_pc, dtype=float).reshape(-1)
    n = pc.size
    v = np.asarray(vec, dtype=float)
    if v.shape != (2**n,):
        raise ValueError(f"vector of length {v.size} does not match {n} nodes")
    t = _block_axes(v.copy(), n)
    for i in range(n):
        axis = n - 1 - i
        t = np.moveaxis(np.tensordot(make_block(pc[i]), t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def transition_apply(p_zeta, per_node_pc) -> np.ndarray:
    """``P @ p_zeta`` for the Kronecker-structured pilot transition matrix."""
    return _apply_blocks(p_zeta, per_node_pc, lambda c: np.array([[c, 1 - c], [1 - c, c]]))


def transition_solve(p_kappa_hat, per_node_pc) -> np.ndarray:
    """``P^{-1} @ p_kappa_hat`` one 2x2 block at a time, O(n 2^n).

    The result sums to one but can have negative entries.
    """
    pc = np.asarray(per_node_pc, dtype=float).reshape(-1)
    singular = np.flatnonzero(pc == 0.5)
    if singular.size:
        raise SingularTransitionError(singular)

    def inverse(c):
        e = 1.0 - c
        return np.array([[c, -e], [-e, c]]) / (c - e)

    return _apply_blocks(p_kappa_hat, pc, inverse)


@dataclass(frozen=True)
class ProjectionResult:
    p_hat: np.ndarray
    xi: float
    correction_norm: float


def project_simplex(b, *, tol: float = 1e-9) -> ProjectionResult:
    """Least-norm correction of ``b`` onto the probability simplex.

    Solves ``min ||b - p||^2`` s.t. ``p >= 0``, ``sum p = 1``.  The minimizer is
    ``p_i = max(b_i - xi, 0)`` with the waterline ``xi`` found exactly from the
    sorted entries.
    """
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size == 0:
        raise ValueError("cannot project an empty vector")
    if abs(b.sum() - 1.0) > tol:
        raise ValueError(f"input must sum to 1 (got {b.sum()!r})")
    u = np.sort(b)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, b.size + 1)
    rho = np.flatnonzero(u - css / ks > 0)[-1]
    xi = css[rho] / (rho + 1)
    p = np.maximum(b - xi, 0.0)
    return ProjectionResult(p_hat=p, xi=float(xi), correction_norm=float(np.linalg.norm(b - p)))


def estimate_ps(pilot_signs, per_node_pc, *, symmetric: bool = False) -> JointPmf:
    """Joint pmf of the transmitting group from received pilot signs.

    ``pilot_signs`` is an ``(M, n)`` array with the sign of each link's
    observation over ``M`` pilots (source sent ``x = +1``); ``per_node_pc`` is
    each link's probability that the observed sign equals the transmitted
    symbol.  With ``symmetric=True`` the empirical frequencies are pooled over
    permutations of the nodes first, which is valid when the links are iid.
    """
    signs = np.asarray(pilot_signs)
    if signs.ndim != 2 or signs.shape[0] < 1:
        raise ValueError("need an (M, n) array of pilot signs with M >= 1")
    signs = np.where(signs > 0, 1, -1)
    n = signs.shape[1]
    p_kappa = np.bincount(encode_many(signs), minlength=2**n) / signs.shape[0]
    if symmetric:
        p_kappa = symmetrize(JointPmf(n, p_kappa)).probs
    b = transition_solve(p_kappa, per_node_pc)
    return JointPmf.normalized(project_simplex(b).p_hat)
