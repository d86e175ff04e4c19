import numpy as np
import pytest

from bvtomo.mesh import (MeshError, Tag, build_mesh, generate_disc_mesh, interior_edge_counts,
                         load_triangle_format, signed_areas, tag_delta_zone)

from conftest import SQUARE_ELE, SQUARE_NODE


def test_disc_counts_close_to_reference_table(disc):
    # reference triangulation at h=0.27: 956 nodes, 1850 elements
    assert abs(disc.n_nodes - 956) <= 0.3 * 956
    assert abs(disc.n_triangles - 1850) <= 0.3 * 1850


def test_disc_refinement_scales_with_area(disc):
    fine = generate_disc_mesh(2.0, 0.15)
    ratio = fine.n_triangles / disc.n_triangles
    assert 0.6 * (0.27 / 0.15) ** 2 < ratio < 1.6 * (0.27 / 0.15) ** 2


@pytest.mark.parametrize("h", [0.5, 0.27, 0.15])
def test_disc_invariants(h):
    m = generate_disc_mesh(2.0, h)
    assert np.all(signed_areas(m.nodes, m.triangles) > 0)
    assert m.h / 2 <= h <= 2 * m.h
    rb = np.hypot(*m.nodes[m.boundary_nodes].T)
    assert np.allclose(rb, 2.0, atol=1e-12 * 2)
    assert np.all(np.hypot(*m.nodes.T) <= 2.0 + 1e-12)
    assert abs(m.areas.sum() - 4 * np.pi) < 0.02 * 4 * np.pi
    counts = interior_edge_counts(m)
    assert set(np.unique(counts)) <= {1, 2}
    assert (counts == 1).sum() == len(m.boundary_edges)


def test_boundary_cycle_is_closed_and_ccw(disc):
    e = disc.boundary_edges
    assert np.array_equal(e[1:, 0], e[:-1, 1])
    assert e[-1, 1] == e[0, 0]
    x, y = disc.nodes[e[:, 0]].T
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


def test_coarsest_disc_is_valid():
    m = generate_disc_mesh(1.0, 2.0)
    assert m.n_triangles >= 4
    assert np.all(m.areas > 0)


@pytest.mark.parametrize("radius,h", [(0, 0.1), (-1, 0.1), (2, 0), (2, -0.3)])
def test_disc_rejects_bad_parameters(radius, h):
    with pytest.raises(MeshError):
        generate_disc_mesh(radius, h)


def test_square_fixture():
    m = load_triangle_format(SQUARE_NODE, SQUARE_ELE)
    assert (m.n_nodes, m.n_triangles, len(m.boundary_edges)) == (4, 2, 4)


def test_index_base_invariance():
    one_node = "\n".join(
        [SQUARE_NODE.splitlines()[0]]
        + [f"{int(l.split()[0]) + 1} {l.split(None, 1)[1]}" for l in SQUARE_NODE.splitlines()[1:]])
    one_ele = "2 3 0\n1 1 2 3\n2 1 3 4\n"
    a = load_triangle_format(SQUARE_NODE, SQUARE_ELE)
    b = load_triangle_format(one_node, one_ele)
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.triangles, b.triangles)


def test_clockwise_triangle_is_reoriented():
    m = load_triangle_format(SQUARE_NODE, "2 3 0\n0 0 2 1\n1 0 2 3\n")
    assert np.all(signed_areas(m.nodes, m.triangles) > 0)


@pytest.mark.parametrize("node,ele,fragment", [
    ("x 2\n", SQUARE_ELE, "line 1"),
    (SQUARE_NODE, "2 3 0\n0 0 1 2\n1 0 2 9\n", "line 3"),
    (SQUARE_NODE, "3 3 0\n0 0 1 2\n1 0 2 3\n", "declares"),
    ("5 2 0 0\n0 0 0\n1 1 0\n", SQUARE_ELE, "declares"),
])
def test_loader_errors_name_the_problem(node, ele, fragment):
    with pytest.raises(MeshError, match=fragment):
        load_triangle_format(node, ele)


def test_degenerate_triangle_rejected():
    with pytest.raises(MeshError):
        build_mesh([[0, 0], [1, 0], [2, 0], [0, 1]], [[0, 1, 2], [0, 1, 3]])


def test_delta_zone_tags(disc):
    assert set(np.flatnonzero(disc.node_tags == Tag.BOUNDARY)) == set(disc.boundary_nodes)
    assert not np.any(disc.node_tags == Tag.DELTA_ZONE)
    z = tag_delta_zone(disc, 0.2)
    dist = 2.0 - np.hypot(*disc.nodes.T)
    assert np.all(z.node_tags[dist < 0.2] == Tag.DELTA_ZONE)
    assert np.all(z.node_tags[dist >= 0.2] == Tag.INTERIOR)
    # first interior ring sits one ring spacing inside
    assert z.in_delta_zone.sum() > len(disc.boundary_nodes)
    assert np.all(tag_delta_zone(disc, 4.0).in_delta_zone)
    # the original is untouched
    assert not np.any(disc.node_tags == Tag.DELTA_ZONE)


def test_negative_delta_rejected(disc):
    with pytest.raises(MeshError):
        tag_delta_zone(disc, -0.1)


def test_fingerprint_is_stable():
    assert generate_disc_mesh(2, 0.4).fingerprint() == generate_disc_mesh(2, 0.4).fingerprint()
    assert generate_disc_mesh(2, 0.4).fingerprint() != generate_disc_mesh(2, 0.3).fingerprint()
