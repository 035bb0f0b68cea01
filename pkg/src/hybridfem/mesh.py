"""Nested uniform quadrilateral meshes on the unit square.

Level l of a hierarchy with n0 coarse cells per side has ``n0 * 2**l``
cells per side.  Node k at level l sits at grid position
``(i, j) = (k % nps, k // nps)`` with coordinates ``(i*h, j*h)``,
``h = 1/(n0 * 2**l)``; x runs fastest (row-major).  A patch is one coarse
cell; at level l it carries a contiguous ``(2**l + 1)**2`` node subgrid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MeshHierarchy", "Patch", "build_hierarchy"]


@dataclass(frozen=True)
class Patch:
    """Coarse-cell grid indices, each in [0, n0)."""

    ci: int
    cj: int


@dataclass(frozen=True)
class MeshHierarchy:
    """Immutable mesh hierarchy; safe to share across threads."""

    n0: int
    levels: int

    def _check_level(self, level: int) -> None:
        if not 0 <= level <= self.levels:
            raise ValueError(f"level {level} outside [0, {self.levels}]")

    def cells_per_side(self, level: int) -> int:
        self._check_level(level)
        return self.n0 * 2**level

    def nodes_per_side(self, level: int) -> int:
        return self.cells_per_side(level) + 1

    def node_count(self, level: int) -> int:
        return self.nodes_per_side(level) ** 2

    def spacing(self, level: int) -> float:
        """Mesh size h at the given level (H = spacing(0))."""
        return 1.0 / self.cells_per_side(level)

    def node_coords(self, level: int, k: int) -> tuple[float, float]:
        nps = self.nodes_per_side(level)
        if not 0 <= k < nps * nps:
            raise IndexError(f"node {k} outside level-{level} range {nps * nps}")
        h = self.spacing(level)
        return (k % nps) * h, (k // nps) * h

    def node_grid(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of all level nodes as flat (x, y) arrays, node order."""
        nps = self.nodes_per_side(level)
        ticks = np.arange(nps) * self.spacing(level)
        return np.tile(ticks, nps), np.repeat(ticks, nps)

    def boundary_mask(self, level: int) -> np.ndarray:
        nps = self.nodes_per_side(level)
        on_edge = np.zeros(nps, dtype=bool)
        on_edge[0] = on_edge[-1] = True
        return np.tile(on_edge, nps) | np.repeat(on_edge, nps)

    def cell_nodes(self, level: int) -> np.ndarray:
        """Corner node indices per cell, shape (ncells, 4), local order
        SW, SE, NE, NW; cells row-major with x fastest."""
        n = self.cells_per_side(level)
        nps = n + 1
        cx, cy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        sw = (cy * nps + cx).ravel()
        return np.column_stack([sw, sw + 1, sw + nps + 1, sw + nps])

    @property
    def patch_count(self) -> int:
        return self.n0 * self.n0

    def patches(self) -> list[Patch]:
        """All patches, row-major with ci fastest; the canonical order."""
        return [Patch(ci, cj) for cj in range(self.n0) for ci in range(self.n0)]

    def _check_patch(self, p: Patch) -> None:
        if not (0 <= p.ci < self.n0 and 0 <= p.cj < self.n0):
            raise ValueError(f"patch {p} outside [0, {self.n0})^2")

    def patch_fine_nodes(self, p: Patch, level: int) -> np.ndarray:
        """Level node indices covering patch p, row-major within the patch."""
        self._check_patch(p)
        self._check_level(level)
        s = 2**level
        nps = self.nodes_per_side(level)
        ii = p.ci * s + np.arange(s + 1)
        jj = p.cj * s + np.arange(s + 1)
        return (jj[:, None] * nps + ii[None, :]).ravel()

    def node_patch_count(self, level: int, k: int) -> int:
        """Number of patches containing node k (1, 2 or 4)."""
        nps = self.nodes_per_side(level)
        if not 0 <= k < nps * nps:
            raise IndexError(f"node {k} outside level-{level} range {nps * nps}")
        s = 2**level

        def axis_count(idx: int) -> int:
            if idx % s != 0:
                return 1  # interior to a patch along this axis
            return 1 if idx in (0, nps - 1) else 2

        return axis_count(k % nps) * axis_count(k // nps)


def build_hierarchy(n0: int, levels: int) -> MeshHierarchy:
    """Hierarchy of `levels` uniform refinements of the n0 x n0 coarse mesh."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    return MeshHierarchy(n0=n0, levels=levels)
