import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hostsym.graph import (
    GraphSpec, VertexId, build, build_lattice, dump_adjacency, horizontal_neighbors, vertical_neighbors,
)
from hostsym.percolation import LatticeSpec, SiteField, label_clusters, sample_sites


def brute_neighbors(g, h, torus=True):
    """Recount neighbours from coordinates alone."""
    out = set()
    for j in range(g.n_hosts):
        diff = np.abs(g.hosts[j] - g.hosts[h])
        if torus:
            diff = np.minimum(diff, g.L - diff)
        if diff.sum() == 1:
            out.add(j)
    return out


@settings(max_examples=25, deadline=None)
@given(d=st.integers(1, 3), L=st.integers(2, 7), p=st.floats(0.5, 1.0), seed=st.integers(0, 999),
       torus=st.booleans())
def test_adjacency_matches_recount(d, L, p, seed, torus):
    try:
        g = build(label_clusters(sample_sites(LatticeSpec(d, L, p, seed, torus))), 2)
    except ValueError:
        return
    for h in range(g.n_hosts):
        assert set(g.neighbors(h).tolist()) == brute_neighbors(g, h, torus)
    assert np.all(g.degree <= 2 * d) and np.all(g.degree >= 1)
    # symmetric adjacency
    pairs = {(h, int(j)) for h in range(g.n_hosts) for j in g.neighbors(h)}
    assert all((j, h) in pairs for h, j in pairs)


def test_full_lattice_is_regular():
    g = build_lattice(2, 6, 1.0, N=4)
    assert g.is_full_lattice and np.all(g.degree == 4)
    assert g.n_vertices == 36 * 4


def test_L2_dedups_double_neighbour():
    g = build_lattice(1, 2, 1.0)
    assert list(g.degree) == [1, 1]


def test_hosts_are_giant_only():
    spec = LatticeSpec(2, 6, 0.5)
    f = SiteField.from_sites(spec, [(0, 0), (0, 1), (0, 2), (3, 3), (3, 4)])
    g = build(label_clusters(f), 1)
    assert g.n_hosts == 3
    assert g.host_at((3, 3)) == -1 and g.host_at((0, 1)) == 1


def test_errors():
    with pytest.raises(ValueError):
        GraphSpec(0)
    spec = LatticeSpec(2, 6, 0.5)
    with pytest.raises(ValueError, match="single site"):
        build(label_clusters(SiteField.from_sites(spec, [(2, 2)])), 1)


def test_vertex_ids_and_neighbourhoods(ring10):
    g = ring10
    v = VertexId(3, 1)
    assert v.index(2) == 7 and VertexId.from_index(7, 2) == v
    assert vertical_neighbors(g, 7).tolist() == [6, 7]
    assert sorted(horizontal_neighbors(g, 7).tolist()) == [4, 5, 8, 9]


def test_dump_adjacency(ring10):
    text = dump_adjacency(ring10)
    assert text.splitlines()[0] == "0 0 : 1 9"
