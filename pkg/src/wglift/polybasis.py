"""Scaled monomial bases on cells and faces, and local L2 projections.

Cell bases are monomials in ((x - x_T)/h_T), face bases are monomials in an
orthonormal tangent frame of the face scaled by the face diameter; both keep
Gram conditioning independent of the mesh size.  Exponents are ordered by
total degree, so the P_{m-1} basis is a prefix of the P_m basis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import quadrature as quad
from .mesh import PolytopalMesh, canonical_frame

__all__ = [
    "dim_poly",
    "monomial_exponents",
    "eval_monomials",
    "eval_monomial_gradients",
    "diff_matrix",
    "CellPolySpace",
    "FacePolySpace",
    "WgFunction",
    "project_cell",
    "project_face",
    "project_Qh",
]


def dim_poly(degree: int, dim: int) -> int:
    """dim P_degree in `dim` variables."""
    from math import comb
    return comb(degree + dim, dim)


@lru_cache(maxsize=None)
def monomial_exponents(dim: int, degree: int) -> np.ndarray:
    """(n_basis, dim) exponent table, graded by total degree then lex."""
    rows = []
    for total in range(degree + 1):
        for combo in itertools.product(range(total + 1), repeat=dim):
            if sum(combo) == total:
                rows.append(combo)
    return np.array(rows, dtype=int)


def eval_monomials(expo: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """(n_pts, n_basis) values of x^alpha at the given (scaled) points."""
    pts = np.atleast_2d(pts)
    return np.prod(pts[:, None, :] ** expo[None, :, :], axis=2)


def eval_monomial_gradients(expo: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """(n_pts, n_basis, dim) gradients of x^alpha w.r.t. scaled coordinates."""
    pts = np.atleast_2d(pts)
    n, d = pts.shape
    out = np.zeros((n, len(expo), d))
    for a in range(d):
        e = expo.copy()
        mask = e[:, a] > 0
        e[mask, a] -= 1
        vals = np.prod(pts[:, None, :] ** e[None, :, :], axis=2)
        out[:, :, a] = vals * expo[:, a]
        out[:, ~mask, a] = 0.0
    return out


@lru_cache(maxsize=None)
def diff_matrix(dim: int, degree: int, axis: int) -> np.ndarray:
    """Matrix taking P_degree coefficients to P_{degree-1} coefficients of
    the derivative along `axis`, in scaled coordinates (no 1/h factor)."""
    src = monomial_exponents(dim, degree)
    dst = monomial_exponents(dim, degree - 1)
    index = {tuple(e): i for i, e in enumerate(dst)}
    D = np.zeros((len(dst), len(src)))
    for j, e in enumerate(src):
        if e[axis] > 0:
            t = e.copy()
            t[axis] -= 1
            D[index[tuple(t)], j] = e[axis]
    return D


def _gram(space, rule: quad.QuadratureRule) -> np.ndarray:
    E = space.eval(rule.points)
    return E.T @ (rule.weights[:, None] * E)


@dataclass
class CellPolySpace:
    """P_degree on a cell in centroid/diameter-scaled monomials."""

    degree: int
    center: np.ndarray
    scale: float
    gram: np.ndarray = None
    expo: np.ndarray = field(init=False)

    def __post_init__(self):
        self.expo = monomial_exponents(len(self.center), self.degree)
        self._cho = None

    @property
    def n_basis(self) -> int:
        return len(self.expo)

    def local(self, pts: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(pts) - self.center) / self.scale

    def eval(self, pts: np.ndarray) -> np.ndarray:
        return eval_monomials(self.expo, self.local(pts))

    def eval_grad(self, pts: np.ndarray) -> np.ndarray:
        return eval_monomial_gradients(self.expo, self.local(pts)) / self.scale

    def set_gram(self, rule: quad.QuadratureRule) -> None:
        self.gram = _gram(self, rule)

    def solve_gram(self, rhs: np.ndarray) -> np.ndarray:
        if self._cho is None:
            self._cho = cho_factor(self.gram)
        return cho_solve(self._cho, rhs)

    def project_values(self, rule: quad.QuadratureRule, values: np.ndarray) -> np.ndarray:
        E = self.eval(rule.points)
        return self.solve_gram(E.T @ (rule.weights * values))


@dataclass
class FacePolySpace:
    """P_degree on a face, in an orthonormal tangent frame of the face."""

    degree: int
    origin: np.ndarray  # face centroid
    tangents: np.ndarray  # (d, d-1)
    scale: float  # face diameter
    gram: np.ndarray = None
    expo: np.ndarray = field(init=False)

    def __post_init__(self):
        self.expo = monomial_exponents(self.tangents.shape[1], self.degree)
        self._cho = None

    @property
    def n_basis(self) -> int:
        return len(self.expo)

    def local(self, pts: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(pts) - self.origin) @ self.tangents / self.scale

    def eval(self, pts: np.ndarray) -> np.ndarray:
        return eval_monomials(self.expo, self.local(pts))

    def set_gram(self, rule: quad.QuadratureRule) -> None:
        self.gram = _gram(self, rule)

    def solve_gram(self, rhs: np.ndarray) -> np.ndarray:
        if self._cho is None:
            self._cho = cho_factor(self.gram)
        return cho_solve(self._cho, rhs)

    def project_values(self, rule: quad.QuadratureRule, values: np.ndarray) -> np.ndarray:
        E = self.eval(rule.points)
        return self.solve_gram(E.T @ (rule.weights * values))


def cell_space(mesh: PolytopalMesh, cell_id: int, degree: int,
               quad_degree: int | None = None) -> CellPolySpace:
    cell = mesh.cells[cell_id]
    space = CellPolySpace(degree, cell.centroid, cell.diameter)
    rule = quad.cell_rule(mesh, cell_id, quad_degree or 2 * degree + 2)
    space.set_gram(rule)
    return space


def face_space(mesh: PolytopalMesh, face_id: int, degree: int,
               quad_degree: int | None = None) -> FacePolySpace:
    face = mesh.faces[face_id]
    verts = mesh.vertices[list(face.vertex_ids)]
    _, tangents = canonical_frame(verts)
    space = FacePolySpace(degree, face.centroid, tangents, face.diameter)
    rule = quad.face_rule(mesh, face_id, quad_degree or 2 * degree + 2)
    space.set_gram(rule)
    return space


@dataclass
class WgFunction:
    """Weak function: one P_k polynomial per cell, one P_{k+1} per face."""

    k: int
    cell_coeffs: np.ndarray  # (n_cells, dim P_k)
    face_coeffs: np.ndarray  # (n_faces, dim P_{k+1})

    def copy(self) -> "WgFunction":
        return WgFunction(self.k, self.cell_coeffs.copy(), self.face_coeffs.copy())

    def __sub__(self, other: "WgFunction") -> "WgFunction":
        return WgFunction(self.k, self.cell_coeffs - other.cell_coeffs,
                          self.face_coeffs - other.face_coeffs)


def project_cell(f, mesh: PolytopalMesh, cell_id: int, degree: int,
                 quad_degree: int | None = None) -> np.ndarray:
    """Q_0: coefficients of the L2(T) projection of f onto P_degree(T)."""
    space = cell_space(mesh, cell_id, degree, quad_degree)
    rule = quad.cell_rule(mesh, cell_id, quad_degree or 2 * degree + 4)
    return space.project_values(rule, f(rule.points))


def project_face(f, mesh: PolytopalMesh, face_id: int, degree: int,
                 quad_degree: int | None = None) -> np.ndarray:
    """Q_b: coefficients of the L2(e) projection of f onto P_degree(e)."""
    space = face_space(mesh, face_id, degree, quad_degree)
    rule = quad.face_rule(mesh, face_id, quad_degree or 2 * degree + 4)
    return space.project_values(rule, f(rule.points))


def project_Qh(u, mesh: PolytopalMesh, k: int, homogeneous: bool = True,
               quad_degree: int | None = None) -> WgFunction:
    """Elementwise projection {Q_0 u, Q_b u} onto the WG space."""
    from .localops import get_mesh_ops
    return get_mesh_ops(mesh, k).project_qh(u, homogeneous=homogeneous)
