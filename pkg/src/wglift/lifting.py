"""Per-cell lifting of WG data to one P_{k+2} polynomial.

On each cell the stacked WG dofs are first projected, in the discrete
inner product  int_T u0 v0 + sum_e int_e ub vb,  onto the image of
P_{k+2}(T) under the elementwise projections {Q_0, Q_b}; inverting the
(injective) projection inside its image then gives the lifted polynomial.
Both steps collapse into one normal-equation solve per cell."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .localops import CertificateError, get_mesh_ops
from .mesh import PolytopalMesh
from .polybasis import WgFunction, dim_poly

__all__ = ["LiftOperator", "LiftedField", "CertificateError",
           "build_lift_operator", "lift", "energy_of_lift"]


@dataclass
class LiftOperator:
    """Cell matrices mapping stacked WG dofs to P_{k+2} coefficients."""

    cell_id: int
    Qmat: np.ndarray      # P_{k+2} coeffs -> stacked (Q_0 p; Q_b p per face)
    G: np.ndarray         # Gram of the Qmat columns in the discrete product
    lift_mat: np.ndarray  # stacked WG dofs -> P_{k+2} coeffs
    sigma_min: float      # smallest singular value of the weighted Qmat
    sigma_max: float


@dataclass
class LiftedField:
    """Discontinuous piecewise P_{k+2} field (one coefficient row per cell)."""

    mesh: PolytopalMesh
    k: int
    cell_coeffs: np.ndarray  # (n_cells, dim P_{k+2})

    @property
    def degree(self) -> int:
        return self.k + 2

    def eval_cell(self, cell_id: int, points: np.ndarray) -> np.ndarray:
        ops = get_mesh_ops(self.mesh, self.k).cell_ops(cell_id)
        E = ops.space_k2.eval(points - self.mesh.cells[cell_id].centroid)
        return E @ self.cell_coeffs[cell_id]

    def grad_cell(self, cell_id: int, points: np.ndarray) -> np.ndarray:
        ops = get_mesh_ops(self.mesh, self.k).cell_ops(cell_id)
        Eg = ops.space_k2.eval_grad(points - self.mesh.cells[cell_id].centroid)
        return np.einsum("pid,i->pd", Eg, self.cell_coeffs[cell_id])


def build_lift_operator(mesh: PolytopalMesh, cell_id: int, k: int) -> LiftOperator:
    ops = get_mesh_ops(mesh, k).cell_ops(cell_id)
    return LiftOperator(cell_id, ops.Qmat, ops.lift_gram, ops.lift_mat,
                        ops.sigma_min, ops.sigma_max)


def lift(mesh: PolytopalMesh, u_h: WgFunction) -> LiftedField:
    """Apply the cell lift operators to a WG function (boundary faces enter
    with their zero data)."""
    mops = get_mesh_ops(mesh, u_h.k)
    n2 = dim_poly(u_h.k + 2, mesh.dim)
    coeffs = np.zeros((mesh.n_cells, n2))
    for cid in range(mesh.n_cells):
        ops = mops.cell_ops(cid)
        coeffs[cid] = ops.lift(mops.gather_local(u_h, cid))
    return LiftedField(mesh, u_h.k, coeffs)


def energy_of_lift(mesh: PolytopalMesh, u_h: WgFunction,
                   lifted: LiftedField | None = None) -> float:
    """Broken H1 seminorm of the lifted field."""
    if lifted is None:
        lifted = lift(mesh, u_h)
    mops = get_mesh_ops(mesh, u_h.k)
    total = 0.0
    for cid in range(mesh.n_cells):
        ops = mops.cell_ops(cid)
        c = lifted.cell_coeffs[cid]
        total += c @ ops.grad_gram_k2 @ c
    return float(np.sqrt(total))
