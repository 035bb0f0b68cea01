import numpy as np
import pytest

from hybridfem import Patch, build_hierarchy


def test_build_rejects_degenerate_sizes():
    with pytest.raises(ValueError):
        build_hierarchy(0, 1)
    with pytest.raises(ValueError):
        build_hierarchy(1, 0)


def test_smallest_hierarchy_counts():
    m = build_hierarchy(1, 1)
    assert m.node_count(0) == 4
    assert m.node_count(1) == 9


def test_finest_plotted_ratio():
    # h = H/8 is the finest refinement ratio used in the experiments
    m = build_hierarchy(8, 3)
    assert m.spacing(3) == m.spacing(0) / 8


def test_node_count_formula():
    m = build_hierarchy(4, 2)
    assert m.node_count(2) == 17**2 == 289
    for l in range(3):
        assert m.node_count(l) == (4 * 2**l + 1) ** 2


def test_node_coords():
    m = build_hierarchy(2, 1)
    assert m.node_coords(0, 0) == (0.0, 0.0)
    assert m.node_coords(0, 4) == (0.5, 0.5)  # 3 nodes/side, (i,j)=(1,1)
    assert m.node_coords(1, 24) == (1.0, 1.0)  # 5 nodes/side, last node
    with pytest.raises(IndexError):
        m.node_coords(0, 9)


def test_patch_fine_nodes_single_patch_covers_domain():
    m = build_hierarchy(1, 1)
    assert list(m.patch_fine_nodes(Patch(0, 0), 1)) == list(range(9))


def test_patch_fine_nodes_subgrid():
    m = build_hierarchy(2, 1)
    nodes = m.patch_fine_nodes(Patch(0, 0), 1)
    assert len(nodes) == 9
    coords = [m.node_coords(1, k) for k in nodes]
    assert all(x <= 0.5 and y <= 0.5 for x, y in coords)
    # row-major within the patch: x fastest
    assert coords[0] == (0.0, 0.0) and coords[1] == (0.25, 0.0)


def test_center_node_shared_by_four_patches():
    m = build_hierarchy(2, 1)
    center = [
        k for k in range(m.node_count(1)) if m.node_coords(1, k) == (0.5, 0.5)
    ][0]
    owners = [
        p for p in m.patches() if center in m.patch_fine_nodes(p, 1)
    ]
    assert len(owners) == 4
    assert m.node_patch_count(1, center) == 4


def test_node_patch_count_cases():
    m = build_hierarchy(2, 1)
    nps = m.nodes_per_side(1)
    interior_of_patch = 1 * nps + 1  # (0.25, 0.25)
    assert m.node_patch_count(1, interior_of_patch) == 1
    shared_edge = 1 * nps + 2  # (0.5, 0.25)
    assert m.node_patch_count(1, shared_edge) == 2
    with pytest.raises(IndexError):
        m.node_patch_count(1, nps * nps)


@pytest.mark.parametrize("n0,level", [(2, 1), (3, 1), (2, 2), (4, 2)])
def test_partition_property_exhaustive(n0, level):
    m = build_hierarchy(n0, level)
    counts = np.zeros(m.node_count(level), dtype=int)
    for p in m.patches():
        counts[m.patch_fine_nodes(p, level)] += 1
    for k in range(m.node_count(level)):
        assert counts[k] == m.node_patch_count(level, k)


@pytest.mark.parametrize("n0,levels", [(1, 2), (3, 2), (4, 3)])
def test_nestedness_by_index_arithmetic(n0, levels):
    m = build_hierarchy(n0, levels)
    for l in range(levels):
        nps = m.nodes_per_side(l)
        for k in range(m.node_count(l)):
            i, j = k % nps, k // nps
            k_fine = (2 * j) * m.nodes_per_side(l + 1) + 2 * i
            assert m.node_coords(l, k) == m.node_coords(l + 1, k_fine)


def test_patch_range_checked():
    m = build_hierarchy(2, 1)
    with pytest.raises(ValueError):
        m.patch_fine_nodes(Patch(2, 0), 1)
