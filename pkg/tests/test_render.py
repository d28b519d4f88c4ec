import numpy as np
import pytest

from hostsym.contact import ContactState
from hostsym.graph import build_lattice
from hostsym.percolation import LatticeSpec, SiteField, label_clusters
from hostsym.render import (
    EMPTY_SLOT, GIANT, NON_GIANT, OCCUPIED, TYPE1_COLOR, TYPE2_COLOR, WHITE, block_side, ppm_bytes, read_ppm,
    render_percolation, render_snapshot,
)
from hostsym.voter import VoterState


def test_ppm_header_and_roundtrip(tmp_path):
    img = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    data = ppm_bytes(img)
    assert data.startswith(b"P6\n3 2\n255\n") and len(data) == 11 + 18
    (tmp_path / "a.ppm").write_bytes(data)
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), img)
    with pytest.raises(ValueError):
        ppm_bytes(np.zeros((2, 2)))


def test_block_side():
    assert [block_side(n) for n in (1, 2, 4, 5, 9, 25, 26)] == [1, 2, 2, 3, 3, 5, 6]


def test_contact_slot_layout():
    g = build_lattice(2, 3, 1.0, 0, N=4)
    counts = np.zeros(g.n_hosts, dtype=np.int64)
    h = g.host_at((1, 2))
    counts[h] = 3
    img = render_snapshot(g, ContactState(counts))
    assert img.shape == (6, 6, 3)
    # host (1, 2) occupies rows 2..3, cols 4..5; slots 0,1 top row, 2 bottom-left occupied
    assert tuple(img[2, 4]) == OCCUPIED and tuple(img[2, 5]) == OCCUPIED
    assert tuple(img[3, 4]) == OCCUPIED and tuple(img[3, 5]) == EMPTY_SLOT
    assert tuple(img[0, 0]) == EMPTY_SLOT


def test_unused_cells_and_missing_hosts_white():
    g = build_lattice(2, 2, 1.0, 0, N=2)
    img = render_snapshot(g, np.zeros(g.n_hosts, dtype=np.int64))
    assert tuple(img[1, 0]) == WHITE and tuple(img[0, 1]) == EMPTY_SLOT
    spec = LatticeSpec(2, 4, 1.0, 0, True)
    from hostsym.graph import build
    g2 = build(label_clusters(SiteField.from_sites(spec, [(0, 0), (0, 1)])), 1)
    img2 = render_snapshot(g2, np.ones(2, dtype=np.int64))
    assert tuple(img2[0, 0]) == OCCUPIED and tuple(img2[3, 3]) == WHITE


def test_voter_colours():
    g = build_lattice(2, 2, 1.0, 0, N=1)
    types = np.array([1, 2, 2, 1], dtype=np.int8)
    img = render_snapshot(g, VoterState(types))
    assert tuple(img[0, 0]) == TYPE1_COLOR and tuple(img[0, 1]) == TYPE2_COLOR


def test_percolation_colours(tmp_path):
    spec = LatticeSpec(2, 5, 1.0, 0, False)
    labels = label_clusters(SiteField.from_sites(spec, [(0, 0), (0, 1), (3, 3)]))
    img = render_percolation(labels, tmp_path / "p.ppm", scale=2)
    assert img.shape == (10, 10, 3)
    assert tuple(img[0, 0]) == GIANT and tuple(img[6, 6]) == NON_GIANT and tuple(img[9, 0]) == WHITE
    assert np.array_equal(read_ppm(tmp_path / "p.ppm"), img)


def test_errors():
    with pytest.raises(ValueError):
        render_snapshot(build_lattice(1, 5, 1.0, 0, N=1), np.zeros(5, dtype=np.int64))
    g = build_lattice(2, 3, 1.0, 0, N=2)
    with pytest.raises(ValueError):
        render_snapshot(g, np.full(g.n_hosts, 3))
