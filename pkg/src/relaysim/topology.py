"""Mesh and multi-branch multi-hop layouts.

Groups are numbered 0 (the source) to K+1 (the destination); hop ``k`` carries
group ``k-1``'s decisions to group ``k``.  ``K = 0`` is the direct
source-destination link.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .channel import ChannelSpec

ChannelFactory = Callable[[int, int, int], ChannelSpec]
"""Called as ``factory(hop, i, j)`` for the link from node i of group hop-1 to node j of group hop."""

MESH = "mesh"
MULTIHOP = "multihop"


def common_channel(spec: ChannelSpec) -> ChannelFactory:
    return lambda hop, i, j: spec


@dataclass(frozen=True, eq=False)
class Hop:
    """Links into one group.

    ``sources[j]`` lists the previous-group nodes heard by node ``j`` and
    ``links[j][m]`` is the channel from ``sources[j][m]``.  Every node of a hop
    has the same in-degree.
    """

    index: int
    sources: np.ndarray
    links: tuple

    def __post_init__(self):
        src = np.asarray(self.sources, dtype=np.int64)
        src.setflags(write=False)
        object.__setattr__(self, "sources", src)

    @property
    def n_prev(self) -> int:
        return int(self.sources.max()) + 1

    @property
    def n_next(self) -> int:
        return self.sources.shape[0]

    @property
    def in_degree(self) -> int:
        return self.sources.shape[1]

    @property
    def is_full(self) -> bool:
        """True when every node hears the whole previous group, in order."""
        return self.in_degree == self.n_prev and bool(np.all(self.sources == np.arange(self.n_prev)))

    def link_count(self) -> int:
        return self.sources.size

    def iter_links(self) -> Iterator[tuple]:
        for j in range(self.n_next):
            for m, i in enumerate(self.sources[j]):
                yield int(i), j, self.links[j][m]


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    kind: str
    hop_count: int
    group_sizes: tuple
    hops: tuple

    source_size = 1
    destination_size = 1

    @property
    def sizes(self) -> tuple:
        """Sizes of groups 0..K+1, source and destination included."""
        return (1,) + tuple(self.group_sizes) + (1,)

    def link_counts(self) -> list:
        return [h.link_count() for h in self.hops]

    def total_links(self) -> int:
        return sum(self.link_counts())

    def link_set(self) -> set:
        return {(h.index, i, j) for h in self.hops for i, j, _ in h.iter_links()}

    def channels(self, hop: int) -> np.ndarray:
        """Channel grid of a hop as an ``(n_next, in_degree)`` object array."""
        h = self.hops[hop - 1]
        grid = np.empty((h.n_next, h.in_degree), dtype=object)
        for j in range(h.n_next):
            for m in range(h.in_degree):
                grid[j, m] = h.links[j][m]
        return grid


def _make_hop(index: int, sources: np.ndarray, factory: ChannelFactory) -> Hop:
    links = tuple(
        tuple(factory(index, int(i), j) for i in sources[j]) for j in range(sources.shape[0])
    )
    return Hop(index, sources, links)


def _full_sources(n_prev: int, n_next: int) -> np.ndarray:
    return np.tile(np.arange(n_prev), (n_next, 1))


def _default_factory(factory: Optional[ChannelFactory]) -> ChannelFactory:
    return factory if factory is not None else common_channel(ChannelSpec.known_stats(1.0, 1.0))


def build_mesh(K: int, sizes: Sequence[int], channel_factory: Optional[ChannelFactory] = None) -> NetworkTopology:
    """Every node of group k hears every node of group k-1."""
    sizes = [int(s) for s in sizes]
    if K < 0:
        raise ValueError(f"hop count K must be >= 0, got {K}")
    if len(sizes) != K:
        raise ValueError(f"expected {K} group sizes, got {len(sizes)}")
    if any(s < 1 for s in sizes):
        raise ValueError("every relay group needs at least one node")
    factory = _default_factory(channel_factory)
    full = [1] + sizes + [1]
    hops = tuple(
        _make_hop(k, _full_sources(full[k - 1], full[k]), factory) for k in range(1, K + 2)
    )
    return NetworkTopology(MESH, K, tuple(sizes), hops)


def build_multihop(K: int, branches: int, channel_factory: Optional[ChannelFactory] = None) -> NetworkTopology:
    """``branches`` parallel relay chains; node i of group k hears node i of group k-1."""
    if K < 0:
        raise ValueError(f"hop count K must be >= 0, got {K}")
    if branches < 1:
        raise ValueError("a multihop network needs at least one branch")
    factory = _default_factory(channel_factory)
    sizes = [branches] * K
    full = [1] + sizes + [1]
    hops = []
    for k in range(1, K + 2):
        if k == 1 or k == K + 1:
            src = _full_sources(full[k - 1], full[k])
        else:
            src = np.arange(branches)[:, None]
        hops.append(_make_hop(k, src, factory))
    return NetworkTopology(MULTIHOP, K, tuple(sizes), tuple(hops))
