"""Q1 finite elements for the Poisson problem on hierarchy levels.

Assembly uses the exact bilinear element stiffness (mesh-size independent
in 2D) and 2x2 tensor Gauss quadrature, which is exact for all Q1
stiffness and mass integrands.  Homogeneous Dirichlet conditions are
imposed by row/column elimination to identity, which keeps the operator
symmetric positive definite on the interior block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import MeshHierarchy

__all__ = [
    "FeFunction",
    "SparseOperator",
    "SolverError",
    "assemble_stiffness",
    "assemble_load",
    "apply_dirichlet",
    "solve_cg",
    "fe_solve",
    "norm_l2",
    "seminorm_h1",
    "norm_l2_nodal",
    "error_vs_reference",
]

SourceFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Exact element stiffness for Q1 on a square, local order SW, SE, NE, NW.
ELEMENT_STIFFNESS = np.array(
    [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ]
) / 6.0

# 2x2 tensor Gauss rule on the reference square [0,1]^2, weight 1/4 each.
_G0 = 0.5 * (1.0 - 1.0 / np.sqrt(3.0))
_G1 = 0.5 * (1.0 + 1.0 / np.sqrt(3.0))
GAUSS_XI = np.array([_G0, _G1, _G0, _G1])
GAUSS_ETA = np.array([_G0, _G0, _G1, _G1])
GAUSS_W = 0.25


def _basis(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Q1 basis values at reference points, columns SW, SE, NE, NW."""
    return np.column_stack(
        [(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta]
    )


def _basis_dxi(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    return np.column_stack([-(1 - eta), (1 - eta), eta, -eta])


def _basis_deta(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    return np.column_stack([-(1 - xi), -xi, xi, (1 - xi)])


_PHI_Q = _basis(GAUSS_XI, GAUSS_ETA)  # (4 points, 4 basis)
_DXI_Q = _basis_dxi(GAUSS_XI, GAUSS_ETA)
_DETA_Q = _basis_deta(GAUSS_XI, GAUSS_ETA)


@dataclass
class FeFunction:
    """Nodal coefficient vector bound to one hierarchy level."""

    m: MeshHierarchy
    level: int
    coeffs: np.ndarray


@dataclass
class SparseOperator:
    """Symmetric CSR operator for one level; SPD on the interior block
    once Dirichlet rows/columns are eliminated."""

    level: int
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape


class SolverError(RuntimeError):
    """Linear solve failed; message carries the achieved residual."""


def assemble_stiffness(m: MeshHierarchy, level: int, apply_bc: bool = True) -> SparseOperator:
    """Assemble the Poisson stiffness matrix at the given level.

    With ``apply_bc`` the boundary rows/columns are eliminated to identity
    (the form used for solving); without it the raw Neumann-style matrix
    is returned (row sums vanish at interior nodes).
    """
    cells = m.cell_nodes(level)
    ncells = cells.shape[0]
    n = m.node_count(level)
    # entry t = 16*c + 4*a + b carries K[a, b] at (cells[c, a], cells[c, b])
    rows = np.repeat(cells, 4, axis=1).ravel()
    cols = np.tile(cells, (1, 4)).ravel()
    vals = np.tile(ELEMENT_STIFFNESS.ravel(), ncells)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    if apply_bc:
        A = _eliminate_boundary(A, m.boundary_mask(level))
    return SparseOperator(level=level, matrix=A)


def _eliminate_boundary(A: sp.csr_matrix, bnd: np.ndarray) -> sp.csr_matrix:
    keep = sp.diags((~bnd).astype(float))
    out = (keep @ A @ keep + sp.diags(bnd.astype(float))).tocsr()
    out.eliminate_zeros()
    return out


def assemble_load(m: MeshHierarchy, level: int, f: SourceFn) -> np.ndarray:
    """Load vector (f, phi_k) via 2x2 Gauss per cell; boundary entries zeroed."""
    cells = m.cell_nodes(level)
    h = m.spacing(level)
    n = m.cells_per_side(level)
    cx, cy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    x0 = (cx.ravel() * h)[:, None]  # cell SW corners
    y0 = (cy.ravel() * h)[:, None]
    xq = x0 + h * GAUSS_XI[None, :]
    yq = y0 + h * GAUSS_ETA[None, :]
    fq = np.asarray(f(xq, yq), dtype=float)
    if fq.shape != xq.shape:  # scalar-valued callables
        fq = np.broadcast_to(fq, xq.shape)
    local = (h * h * GAUSS_W) * (fq @ _PHI_Q)  # (ncells, 4)
    b = np.zeros(m.node_count(level))
    np.add.at(b, cells.ravel(), local.ravel())
    b[m.boundary_mask(level)] = 0.0
    return b


def apply_dirichlet(A: SparseOperator, b: np.ndarray) -> tuple[SparseOperator, np.ndarray]:
    """Eliminate homogeneous Dirichlet boundary rows/columns to identity."""
    n = A.matrix.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"dimension mismatch: operator {n}, load {b.shape[0]}")
    nps = int(round(np.sqrt(n)))
    if nps * nps != n:
        raise ValueError(f"operator dimension {n} is not a square node count")
    on_edge = np.zeros(nps, dtype=bool)
    on_edge[0] = on_edge[-1] = True
    bnd = np.tile(on_edge, nps) | np.repeat(on_edge, nps)
    out_b = b.copy()
    out_b[bnd] = 0.0
    return SparseOperator(level=A.level, matrix=_eliminate_boundary(A.matrix, bnd)), out_b


def solve_cg(
    A: SparseOperator,
    b: np.ndarray,
    rel_tol: float = 1e-10,
    max_iter: int | None = None,
) -> np.ndarray:
    """Conjugate gradients with zero initial guess.

    Returns x with ||Ax - b||_2 <= rel_tol * ||b||_2, verified on the true
    residual; raises SolverError with the achieved residual otherwise.
    """
    mat = A.matrix
    n = mat.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"dimension mismatch: operator {n}, load {b.shape[0]}")
    if max_iter is None:
        max_iter = 10 * n
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(n)
    tol = rel_tol * b_norm
    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for _ in range(max_iter):
        if np.sqrt(rr) <= tol:
            break
        Ap = mat @ p
        alpha = rr / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    res = np.linalg.norm(b - mat @ x)
    if res > tol:
        raise SolverError(
            f"CG did not converge within {max_iter} iterations: "
            f"residual {res:.3e} > {tol:.3e}"
        )
    return x


def fe_solve(m: MeshHierarchy, level: int, f: SourceFn, rel_tol: float = 1e-10) -> FeFunction:
    """Galerkin Q1 solution of -Laplace u = f, u = 0 on the boundary."""
    A = assemble_stiffness(m, level, apply_bc=False)
    b = assemble_load(m, level, f)
    A, b = apply_dirichlet(A, b)
    x = solve_cg(A, b, rel_tol=rel_tol)
    return FeFunction(m=m, level=level, coeffs=x)


def _cell_values(u: FeFunction) -> np.ndarray:
    return u.coeffs[u.m.cell_nodes(u.level)]  # (ncells, 4)


def norm_l2(u: FeFunction) -> float:
    """L2 norm by element-wise 2x2 Gauss (exact for Q1 functions)."""
    h = u.m.spacing(u.level)
    vals = _cell_values(u) @ _PHI_Q.T  # (ncells, 4 points)
    return float(np.sqrt(h * h * GAUSS_W * np.sum(vals**2)))


def seminorm_h1(u: FeFunction) -> float:
    """H1 seminorm ||grad u||_L2 by element-wise 2x2 Gauss (exact for Q1)."""
    cv = _cell_values(u)
    dx = cv @ _DXI_Q.T  # d/dx picks up 1/h, the cell measure h^2 cancels one h
    dy = cv @ _DETA_Q.T
    return float(np.sqrt(GAUSS_W * np.sum(dx**2 + dy**2)))


def norm_l2_nodal(values: np.ndarray) -> float:
    """Nodal l2 norm over a patch: sqrt of the sum of squared nodal values."""
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.sum(v * v)))


def error_vs_reference(u: FeFunction, u_ref: FeFunction) -> float:
    """L2 distance to a finer reference solution.

    u is interpolated (exactly, by nestedness) to the reference level and
    the difference is measured there.
    """
    if u.m.n0 != u_ref.m.n0:
        raise ValueError("mismatched hierarchies (different n0)")
    if u_ref.level <= u.level:
        raise ValueError("reference level must be finer than the target level")
    from .transfer import interpolate_up  # import here: transfer depends on fem

    ui = interpolate_up(u, u_ref.level, m=u_ref.m)
    return norm_l2(FeFunction(m=u_ref.m, level=u_ref.level, coeffs=ui.coeffs - u_ref.coeffs))
