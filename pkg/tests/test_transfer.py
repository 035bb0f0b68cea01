import numpy as np
import pytest

from hybridfem import (
    FeFunction,
    Patch,
    build_hierarchy,
    fe_solve,
    interpolate_up,
    norm_l2,
    prolongate_patch,
    restrict_patch,
)
from hybridfem.transfer import patch_weights


def zero_boundary_vector(m, level, rng):
    v = rng.standard_normal(m.node_count(level))
    v[m.boundary_mask(level)] = 0.0
    return v


def test_interpolation_copies_coincident_nodes():
    m = build_hierarchy(2, 1)
    rng = np.random.default_rng(0)
    u = FeFunction(m, 0, rng.standard_normal(m.node_count(0)))
    fine = interpolate_up(u, 1)
    nps0, nps1 = m.nodes_per_side(0), m.nodes_per_side(1)
    for k in range(m.node_count(0)):
        i, j = k % nps0, k // nps0
        assert fine.coeffs[(2 * j) * nps1 + 2 * i] == u.coeffs[k]


def test_interpolation_center_is_corner_mean():
    m = build_hierarchy(1, 1)
    u = FeFunction(m, 0, np.array([1.0, 2.0, 3.0, 4.0]))
    fine = interpolate_up(u, 1)
    assert fine.coeffs[4] == 2.5  # center of the 3x3 grid


def test_interpolation_preserves_l2_norm():
    m = build_hierarchy(2, 2)
    u = fe_solve(m, 1, lambda x, y: np.sin(x) + y)
    assert np.isclose(norm_l2(interpolate_up(u, 2)), norm_l2(u), atol=1e-14)


def test_interpolation_rejects_downward():
    m = build_hierarchy(2, 2)
    u = fe_solve(m, 1, lambda x, y: np.ones_like(x))
    with pytest.raises(ValueError):
        interpolate_up(u, 1)


def test_restriction_is_pure_gather():
    m = build_hierarchy(2, 1)
    z = FeFunction(m, 1, np.zeros(m.node_count(1)))
    assert np.all(restrict_patch(z, Patch(0, 0)) == 0.0)

    rng = np.random.default_rng(1)
    u = FeFunction(m, 1, rng.standard_normal(m.node_count(1)))
    left = restrict_patch(u, Patch(0, 0))
    right = restrict_patch(u, Patch(1, 0))
    # shared vertical edge: last column of left patch == first column of right
    assert np.array_equal(left.reshape(3, 3)[:, 2], right.reshape(3, 3)[:, 0])
    # round-trip: scatter back reproduces u on the patch
    nodes = m.patch_fine_nodes(Patch(0, 0), 1)
    scattered = np.zeros_like(u.coeffs)
    scattered[nodes] = left
    assert np.array_equal(scattered[nodes], u.coeffs[nodes])


def test_prolongation_weights():
    m = build_hierarchy(2, 1)
    w = patch_weights(m, 1)
    nps = m.nodes_per_side(1)
    assert w[1 * nps + 1] == 1.0  # interior of patch (0,0)
    assert w[2 * nps + 2] == 0.25  # center node shared by 4 patches
    assert w[1 * nps + 2] == 0.5  # shared vertical patch edge
    assert np.all(w[m.boundary_mask(1)] == 0.0)


def test_prolongation_support_and_length_check():
    m = build_hierarchy(2, 1)
    v = np.ones(9)
    out = prolongate_patch(v, m, Patch(1, 1), 1)
    nodes = set(m.patch_fine_nodes(Patch(1, 1), 1))
    for k in range(m.node_count(1)):
        if k not in nodes:
            assert out[k] == 0.0
    with pytest.raises(ValueError):
        prolongate_patch(np.ones(8), m, Patch(0, 0), 1)


@pytest.mark.parametrize("n0,level", [(2, 1), (4, 2), (8, 3)])
def test_partition_of_unity_reconstruction(n0, level):
    m = build_hierarchy(n0, level)
    rng = np.random.default_rng(7)
    for _ in range(20):
        v = zero_boundary_vector(m, level, rng)
        u = FeFunction(m, level, v)
        total = np.zeros_like(v)
        for p in m.patches():
            total += prolongate_patch(restrict_patch(u, p), m, p, level)
        assert np.max(np.abs(total - v)) <= 1e-13


def test_operators_are_linear():
    m = build_hierarchy(2, 1)
    rng = np.random.default_rng(3)
    a, b = 1.7, -0.4
    u = FeFunction(m, 0, rng.standard_normal(m.node_count(0)))
    w = FeFunction(m, 0, rng.standard_normal(m.node_count(0)))
    comb = FeFunction(m, 0, a * u.coeffs + b * w.coeffs)
    assert np.allclose(
        interpolate_up(comb, 1).coeffs,
        a * interpolate_up(u, 1).coeffs + b * interpolate_up(w, 1).coeffs,
    )
    uf = FeFunction(m, 1, rng.standard_normal(m.node_count(1)))
    wf = FeFunction(m, 1, rng.standard_normal(m.node_count(1)))
    combf = FeFunction(m, 1, a * uf.coeffs + b * wf.coeffs)
    p = Patch(1, 0)
    assert np.allclose(
        restrict_patch(combf, p),
        a * restrict_patch(uf, p) + b * restrict_patch(wf, p),
    )
    va, vb = rng.standard_normal(9), rng.standard_normal(9)
    assert np.allclose(
        prolongate_patch(a * va + b * vb, m, p, 1),
        a * prolongate_patch(va, m, p, 1) + b * prolongate_patch(vb, m, p, 1),
    )
