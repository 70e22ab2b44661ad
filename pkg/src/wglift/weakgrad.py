"""Discrete weak gradients against an H(div)-constrained test space.

The test space on a cell T consists of piecewise P_{k+1}^d vector
polynomials over the simplicial decomposition of T that are H(div)
conforming, have a single P_k(T) divergence and a single P_{k+1}(e) normal
trace on each parent face.  The weak gradient of WG data {v_0, v_b} is the
unique member whose moments against every test function q equal

    int_{dT} v_b q.n dS - int_T v_0 div(q) dx.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .localops import CellOps, LambdaRankError, get_mesh_ops
from .mesh import PolytopalMesh
from .polybasis import WgFunction

__all__ = ["LambdaBasis", "WeakGradientCoeffs", "LambdaRankError",
           "build_lambda_basis", "weak_gradient", "weak_gradient_function"]


@dataclass
class LambdaBasis:
    """Cell test-space basis: per basis function and sub-simplex, cell-frame
    coefficients of a P_{k+1}^d vector polynomial, plus its one-piece
    divergence and per-face normal-trace representations."""

    cell_id: int
    n_basis: int
    coeffs: np.ndarray      # (n_basis, n_sub, d, dim P_{k+1})
    mass: np.ndarray        # (n_basis, n_basis), SPD
    div_repr: np.ndarray    # (n_basis, dim P_k) in the cell basis
    trace_repr: list        # per parent face: (n_basis, dim P_{k+1}(e))
    ops: CellOps


@dataclass
class WeakGradientCoeffs:
    cell_id: int
    coeffs: np.ndarray  # over the cell's LambdaBasis


def build_lambda_basis(mesh: PolytopalMesh, cell_id: int, k: int) -> LambdaBasis:
    ops = get_mesh_ops(mesh, k).cell_ops(cell_id)
    return LambdaBasis(cell_id, ops.n_basis, ops.lambda_coeffs,
                       ops.lambda_mass, ops.div_repr, ops.trace_repr, ops)


def weak_gradient(mesh: PolytopalMesh, cell_id: int, v: WgFunction,
                  basis: LambdaBasis | None = None) -> WeakGradientCoeffs:
    """Weak gradient of the restriction of v to one cell."""
    mops = get_mesh_ops(mesh, v.k)
    ops = basis.ops if basis is not None else mops.cell_ops(cell_id)
    u_loc = mops.gather_local(v, cell_id)
    return WeakGradientCoeffs(cell_id, ops.weak_gradient(u_loc))


def weak_gradient_function(mesh: PolytopalMesh, v: WgFunction) -> list:
    """Weak gradients of v on every cell."""
    return [weak_gradient(mesh, cid, v) for cid in range(mesh.n_cells)]
