"""Grid-transfer operators between nested levels and coarse-cell patches.

``interpolate_up`` represents a function exactly on a finer nested mesh;
``restrict_patch`` gathers nodal values onto one patch;
``prolongate_patch`` scatters patch values back with weight 1/n at nodes
shared by n patches and forces zeros on the domain boundary, so that the
sum over patches of prolongated restrictions reconstructs any function
with zero boundary trace exactly.
"""

from __future__ import annotations

import numpy as np

from .fem import FeFunction
from .mesh import MeshHierarchy, Patch

__all__ = ["interpolate_up", "restrict_patch", "prolongate_patch", "patch_weights"]


def interpolate_up(u: FeFunction, l_target: int, m: MeshHierarchy | None = None) -> FeFunction:
    """Exact representation of u on the finer nested level ``l_target``.

    Per refinement step: coincident nodes copy, edge midpoints average the
    2 endpoints, cell centers average the 4 corners.  ``m`` may supply a
    deeper hierarchy with the same n0 when interpolating past u's own.
    """
    if m is None:
        m = u.m
    if m.n0 != u.m.n0:
        raise ValueError("target hierarchy has different n0")
    if l_target <= u.level:
        raise ValueError(f"target level {l_target} must exceed source level {u.level}")
    m._check_level(l_target)
    nps = u.m.nodes_per_side(u.level)
    grid = u.coeffs.reshape(nps, nps)
    for _ in range(l_target - u.level):
        n = grid.shape[0]
        fine = np.empty((2 * n - 1, 2 * n - 1))
        fine[::2, ::2] = grid
        fine[::2, 1::2] = 0.5 * (grid[:, :-1] + grid[:, 1:])
        fine[1::2, ::2] = 0.5 * (grid[:-1, :] + grid[1:, :])
        fine[1::2, 1::2] = 0.25 * (
            grid[:-1, :-1] + grid[:-1, 1:] + grid[1:, :-1] + grid[1:, 1:]
        )
        grid = fine
    return FeFunction(m=m, level=l_target, coeffs=grid.ravel())


def restrict_patch(u: FeFunction, p: Patch) -> np.ndarray:
    """Nodal values of u on the patch subgrid, patch-local row-major."""
    return u.coeffs[u.m.patch_fine_nodes(p, u.level)]


def patch_weights(m: MeshHierarchy, level: int) -> np.ndarray:
    """Global vector of 1/n prolongation weights, 0 on the domain boundary."""
    nps = m.nodes_per_side(level)
    s = 2**level
    idx = np.arange(nps)
    axis = np.where(idx % s != 0, 1, 2)
    axis[0] = axis[-1] = 1
    counts = np.repeat(axis, nps) * np.tile(axis, nps)
    w = 1.0 / counts
    w[m.boundary_mask(level)] = 0.0
    return w


def prolongate_patch(v: np.ndarray, m: MeshHierarchy, p: Patch, level: int) -> np.ndarray:
    """Scatter patch-local values into a global level vector.

    Entry (1/n) * v at every patch node (n = number of containing
    patches), 0 elsewhere and on the domain boundary, keeping the result
    in the zero-trace space regardless of v.
    """
    nodes = m.patch_fine_nodes(p, level)
    v = np.asarray(v, dtype=float)
    if v.shape != nodes.shape:
        raise ValueError(f"patch vector length {v.shape} != {nodes.shape}")
    out = np.zeros(m.node_count(level))
    out[nodes] = v * patch_weights(m, level)[nodes]
    return out
