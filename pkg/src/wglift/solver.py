"""Global assembly and solution of the WG system with homogeneous
Dirichlet data: find u_h with (grad_w u_h, grad_w v_h) = (f, v_0) for all
v_h in the homogeneous WG space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .localops import MeshOps, get_mesh_ops
from .mesh import PolytopalMesh
from .polybasis import WgFunction

__all__ = ["GlobalSystem", "SolverError", "local_stiffness", "assemble", "solve"]


class SolverError(Exception):
    pass


@dataclass
class GlobalSystem:
    mesh: PolytopalMesh
    k: int
    matrix: sp.csr_matrix  # boundary dofs eliminated
    load: np.ndarray
    ops: MeshOps
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]


def local_stiffness(mesh: PolytopalMesh, cell_id: int, k: int) -> np.ndarray:
    """Dense cell stiffness over local WG dofs (interior block first, then
    one block per face in the cell's face order).  Symmetric PSD with a
    one-dimensional kernel spanned by the constant WG function."""
    return get_mesh_ops(mesh, k).cell_ops(cell_id).stiffness


def assemble(mesh: PolytopalMesh, k: int, f) -> GlobalSystem:
    """Assemble stiffness and load; boundary-face dofs are eliminated."""
    mops = get_mesh_ops(mesh, k)
    rows, cols, vals = [], [], []
    load = np.zeros(mops.n_dofs)
    for cid in range(mesh.n_cells):
        ops = mops.cell_ops(cid)
        gidx = mops.cell_global_dofs(cid)
        keep = gidx >= 0
        S = ops.stiffness[np.ix_(keep, keep)]
        g = gidx[keep]
        rows.append(np.repeat(g, len(g)))
        cols.append(np.tile(g, len(g)))
        vals.append(S.ravel())
        w = ops.vol_rule.weights
        fv = f(ops.vol_rule.points + mesh.cells[cid].centroid)
        load[gidx[:mops.n0]] = ops.Ek.T @ (w * fv)
    A = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mops.n_dofs, mops.n_dofs)).tocsr()
    return GlobalSystem(mesh, k, A, load, mops)


def solve(system: GlobalSystem, tol: float = 1e-11, maxiter: int | None = None) -> WgFunction:
    """Solve the assembled system: diagonally preconditioned CG with a
    direct sparse fallback; relative residual <= tol is enforced."""
    A, b = system.matrix, system.load
    diag = system.diagnostics
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        diag["path"] = "trivial"
        return system.ops.vector_to_function(np.zeros(A.shape[0]))
    dinv = 1.0 / A.diagonal()
    M = spla.LinearOperator(A.shape, matvec=lambda x: dinv * x)
    if maxiter is None:
        maxiter = max(2000, 40 * int(np.sqrt(A.shape[0])) * 10)
    x, info = spla.cg(A, b, rtol=tol * 1e-1, atol=0.0, M=M, maxiter=maxiter)
    relres = np.linalg.norm(A @ x - b) / bnorm
    diag["cg_info"] = info
    diag["cg_relres"] = relres
    if info != 0 or relres > tol:
        x = spla.spsolve(A.tocsc(), b)
        relres = np.linalg.norm(A @ x - b) / bnorm
        diag["path"] = "direct"
    else:
        diag["path"] = "cg"
    diag["relres"] = relres
    if relres > tol:
        raise SolverError(f"linear solve failed: relative residual {relres:.3e}")
    return system.ops.vector_to_function(x)
