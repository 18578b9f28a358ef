"""P1 assembly, Dirichlet elimination and a Jacobi-preconditioned CG solver."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConstraintError, SolverDivergenceError
from .mesh import DIRICHLET, Mesh

_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_EDGE_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


@dataclass
class SparseSystem:
    """Square CSR matrix with right-hand side and the set of constrained nodes."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))


def _scatter(mesh_cells: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    k = mesh_cells.shape[1]
    rows = np.repeat(mesh_cells, k, axis=1).ravel()
    cols = np.tile(mesh_cells, (1, k)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def local_stiffness(mesh: Mesh) -> np.ndarray:
    """(T, 3, 3) unit-coefficient element matrices |K| grad(l_i).grad(l_j)."""
    g = mesh.basis_gradients
    return mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", g, g)


def assemble_weighted_stiffness(mesh: Mesh, weight) -> sp.csr_matrix:
    w = np.broadcast_to(np.asarray(weight, dtype=float), (mesh.n_triangles,))
    if not np.all(np.isfinite(w)):
        raise AssemblyError("stiffness weight contains non-finite values")
    if np.any(w < 0):
        raise AssemblyError(f"stiffness weight must be >= 0 (min {w.min():.3e})")
    return _scatter(mesh.triangles, w[:, None, None] * local_stiffness(mesh), mesh.n_nodes)


def assemble_mass(mesh: Mesh, lumped: bool = False) -> sp.csr_matrix:
    if lumped:
        return sp.diags(mesh.lumped_mass).tocsr()
    return _scatter(mesh.triangles, mesh.areas[:, None, None] * _LOCAL_MASS, mesh.n_nodes)


def _edge_selection(mesh: Mesh, tag):
    if tag is None:
        return np.ones(len(mesh.boundary_edges), dtype=bool)
    return mesh.edge_tags == tag


def assemble_boundary_mass(mesh: Mesh, tag=None, lumped: bool = False) -> sp.csr_matrix:
    """Edge mass ``int l_i l_j ds`` over boundary edges; ``tag=None`` takes all of them."""
    sel = _edge_selection(mesh, tag)
    edges, lengths = mesh.boundary_edges[sel], mesh.edge_lengths[sel]
    if lumped:
        d = np.zeros(mesh.n_nodes)
        np.add.at(d, edges.ravel(), np.repeat(lengths / 2.0, 2))
        return sp.diags(d).tocsr()
    return _scatter(edges, lengths[:, None, None] * _EDGE_MASS, mesh.n_nodes)


def assemble_boundary_load(mesh: Mesh, tag=None) -> np.ndarray:
    """``int l_i ds`` over the selected boundary edges."""
    sel = _edge_selection(mesh, tag)
    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.boundary_edges[sel].ravel(), np.repeat(mesh.edge_lengths[sel] / 2.0, 2))
    return b


def assemble_load(mesh: Mesh, element_values) -> np.ndarray:
    """Load vector of a per-triangle constant source (one-point barycenter rule)."""
    v = np.broadcast_to(np.asarray(element_values, dtype=float), (mesh.n_triangles,))
    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.triangles.ravel(), np.repeat(v * mesh.areas / 3.0, 3))
    return b


def apply_dirichlet(system: SparseSystem, values, mesh: Mesh | None = None) -> SparseSystem:
    """Symmetric elimination of prescribed nodes.

    ``values`` maps node -> value (dict, or a pair of index/value arrays).
    Coupling to constrained nodes moves to the right-hand side and the
    constrained rows become identity rows, so the matrix stays SPD.
    """
    if isinstance(values, dict):
        idx = np.fromiter(values.keys(), dtype=np.int64, count=len(values))
        val = np.fromiter(values.values(), dtype=float, count=len(values))
    else:
        idx, val = values
        idx = np.asarray(idx, dtype=np.int64)
        val = np.asarray(val, dtype=float)
    if idx.size == 0:
        return system
    if mesh is not None:
        allowed = np.zeros(mesh.n_nodes, dtype=bool)
        allowed[mesh.dirichlet_nodes] = True
        bad = idx[~allowed[idx]]
        if bad.size:
            raise ConstraintError(f"node(s) {bad[:5].tolist()} do not lie on a Dirichlet edge")
    n = system.matrix.shape[0]
    x_c = np.zeros(n)
    x_c[idx] = val
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    rhs = system.rhs - system.matrix @ x_c
    rhs[mask] = val

    keep = sp.diags((~mask).astype(float))
    A = (keep @ system.matrix @ keep + sp.diags(mask.astype(float))).tocsr()
    A.eliminate_zeros()
    A.sort_indices()

    constrained = np.concatenate([system.constrained, idx])
    allvals = np.concatenate([system.values, val])
    return replace(system, matrix=A, rhs=rhs, constrained=constrained, values=allvals)


def solve_sparse(system: SparseSystem, rtol: float = 1e-12, max_iter: int | None = None,
                 x0: np.ndarray | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients until ||Ax - b|| <= rtol ||b||."""
    A = system.matrix.tocsr() if not sp.isspmatrix_csr(system.matrix) else system.matrix
    b = np.asarray(system.rhs, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = max(10 * n, 100)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if system.constrained.size:
        x[system.constrained] = system.values
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverDivergenceError("matrix has a non-positive diagonal; not SPD", residual=np.inf, iterations=0)
    dinv = 1.0 / d
    r = b - A @ x
    target = rtol * bnorm
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SolverDivergenceError("matrix is not positive definite", residual=rnorm / bnorm, iterations=it)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # recompute the true residual once to guard against drift
            true_r = np.linalg.norm(b - A @ x)
            if true_r <= target:
                return x
            r = b - A @ x
            z = dinv * r
            p = z.copy()
            rz = r @ z
            continue
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverDivergenceError(
        f"CG did not reach rtol={rtol:g} in {max_iter} iterations (relative residual {rnorm / bnorm:.3e})",
        residual=rnorm / bnorm, iterations=max_iter)


def dirichlet_values(mesh: Mesh, phi_D) -> tuple[np.ndarray, np.ndarray]:
    """Pair (nodes, values) for the Dirichlet nodes; ``phi_D`` is aligned with
    ``mesh.dirichlet_nodes`` or is a full nodal array."""
    nodes = mesh.dirichlet_nodes
    vals = np.asarray(phi_D, dtype=float)
    if vals.shape == (mesh.n_nodes,) and nodes.size != mesh.n_nodes:
        vals = vals[nodes]
    if vals.shape != nodes.shape:
        raise ConstraintError(f"expected {nodes.size} Dirichlet values, got shape {vals.shape}")
    return nodes, vals


__all__ = [
    "SparseSystem", "assemble_weighted_stiffness", "assemble_mass", "assemble_boundary_mass",
    "assemble_boundary_load", "assemble_load", "apply_dirichlet", "solve_sparse",
    "local_stiffness", "dirichlet_values", "DIRICHLET",
]
