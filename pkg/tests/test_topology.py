import pytest
from hypothesis import given
from hypothesis import strategies as st

from relaysim.channel import ChannelSpec
from relaysim.topology import MESH, MULTIHOP, build_mesh, build_multihop


def test_mesh_link_counts():
    assert build_mesh(1, [2]).link_counts() == [2, 2]
    assert build_mesh(2, [3, 3]).link_counts() == [3, 9, 3]
    assert build_mesh(9, [10] * 9).total_links() == 820


def test_direct_link():
    t = build_mesh(0, [])
    assert t.link_counts() == [1]
    assert t.sizes == (1, 1)


def test_multihop_structure():
    t = build_multihop(3, 10)
    assert t.kind == MULTIHOP
    assert [h.in_degree for h in t.hops] == [1, 1, 1, 10]
    assert [h.is_full for h in t.hops] == [True, False, False, True]
    assert t.link_counts() == [10, 10, 10, 10]


def test_single_relay_group_multihop_equals_mesh():
    assert build_multihop(1, 4).link_set() == build_mesh(1, [4]).link_set()


@given(st.integers(0, 5), st.integers(1, 6))
def test_multihop_links_subset_of_mesh(K, n):
    mh = build_multihop(K, n).link_set()
    mesh = build_mesh(K, [n] * K).link_set()
    assert mh <= mesh
    assert len(mh) == (n * (K - 1) + 2 * n if K >= 1 else 1)


@given(st.lists(st.integers(1, 6), min_size=0, max_size=5))
def test_mesh_link_count_formula(sizes):
    t = build_mesh(len(sizes), sizes)
    full = [1] + sizes + [1]
    assert t.total_links() == sum(a * b for a, b in zip(full, full[1:]))
    assert all(h.is_full for h in t.hops)
    assert t.kind == MESH


def test_factory_sees_every_link():
    seen = []

    def factory(hop, i, j):
        seen.append((hop, i, j))
        return ChannelSpec.known_csi(1.0 + 0.1 * i, 0.5)

    t = build_mesh(2, [2, 3], factory)
    assert set(seen) == t.link_set()
    assert t.channels(2)[1, 1].mode.h == pytest.approx(1.1)


@pytest.mark.parametrize(
    "call",
    [
        lambda: build_mesh(2, [3]),
        lambda: build_mesh(-1, []),
        lambda: build_mesh(1, [0]),
        lambda: build_multihop(2, 0),
        lambda: build_multihop(-1, 2),
    ],
)
def test_invalid_layouts(call):
    with pytest.raises(ValueError):
        call()
