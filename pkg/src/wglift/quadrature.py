"""Quadrature on reference simplices, polytopal cells and faces.

Reference rules are tensorized Gauss/Gauss-Jacobi products collapsed onto
the simplex (Duffy transform), so any degree up to MAX_DEGREE is available
without tables.  Cell and face rules are composites over the simplicial
decomposition of a polytopal cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 14

__all__ = [
    "MAX_DEGREE",
    "QuadratureRule",
    "simplex_rule",
    "map_to_simplex",
    "simplex_quadrature",
    "facet_quadrature",
    "polygon_quadrature",
    "cell_rule",
    "face_rule",
    "sub_face_rule",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Points and measure-scaled weights (weights sum to the domain measure)."""

    points: np.ndarray  # (n, dim)
    weights: np.ndarray  # (n,)

    def integrate(self, values: np.ndarray) -> float | np.ndarray:
        return self.weights @ values


def _gauss_01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _jacobi_01(n: int, alpha: int):
    # nodes/weights for int_0^1 (1-t)^alpha f(t) dt
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


def _check_degree(degree: int) -> None:
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree {degree} outside supported range "
                         f"[1, {MAX_DEGREE}]")


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> QuadratureRule:
    """Rule on the reference simplex, exact for total degree <= degree.

    Reference domains: [0,1] (dim 1), triangle {x,y>=0, x+y<=1} (dim 2),
    tetrahedron {x,y,z>=0, x+y+z<=1} (dim 3).
    """
    _check_degree(degree)
    n = (degree + 2) // 2
    u, wu = _gauss_01(n)
    if dim == 1:
        return QuadratureRule(u[:, None], wu)
    if dim == 2:
        v, wv = _jacobi_01(n, 1)
        U, V = np.meshgrid(u, v, indexing="ij")
        W = np.outer(wu, wv)
        x = U * (1.0 - V)
        pts = np.stack([x.ravel(), V.ravel()], axis=1)
        return QuadratureRule(pts, W.ravel())
    if dim == 3:
        v, wv = _jacobi_01(n, 1)
        w, ww = _jacobi_01(n, 2)
        U, V, Wc = np.meshgrid(u, v, w, indexing="ij")
        Wt = wu[:, None, None] * wv[None, :, None] * ww[None, None, :]
        x = U * (1.0 - V) * (1.0 - Wc)
        y = V * (1.0 - Wc)
        pts = np.stack([x.ravel(), y.ravel(), Wc.ravel()], axis=1)
        return QuadratureRule(pts, Wt.ravel())
    raise ValueError(f"unsupported dimension {dim}")


_REF_MEASURE = {1: 1.0, 2: 0.5, 3: 1.0 / 6.0}


def map_to_simplex(rule: QuadratureRule, verts: np.ndarray) -> QuadratureRule:
    """Push a reference rule onto the physical simplex with rows `verts`."""
    verts = np.asarray(verts, dtype=float)
    d = verts.shape[1]
    J = (verts[1:] - verts[0]).T  # (d, d)
    det = abs(np.linalg.det(J))
    pts = verts[0] + rule.points @ J.T
    return QuadratureRule(pts, rule.weights * det)


def simplex_quadrature(verts: np.ndarray, degree: int) -> QuadratureRule:
    """Rule on the physical simplex given by (d+1, d) vertex rows."""
    verts = np.asarray(verts, dtype=float)
    return map_to_simplex(simplex_rule(verts.shape[1], degree), verts)


def facet_quadrature(verts: np.ndarray, degree: int) -> QuadratureRule:
    """Rule on a codimension-1 simplex: segment in 2D, triangle in 3D.

    `verts` has shape (d, d) with the facet vertices as rows.
    """
    verts = np.asarray(verts, dtype=float)
    d = verts.shape[1]
    if d == 2:
        ref = simplex_rule(1, degree)
        t = verts[1] - verts[0]
        pts = verts[0] + ref.points * t
        return QuadratureRule(pts, ref.weights * np.linalg.norm(t))
    if d == 3:
        ref = simplex_rule(2, degree)
        e1 = verts[1] - verts[0]
        e2 = verts[2] - verts[0]
        scale = np.linalg.norm(np.cross(e1, e2))  # area / ref area
        pts = verts[0] + np.outer(ref.points[:, 0], e1) + np.outer(ref.points[:, 1], e2)
        return QuadratureRule(pts, ref.weights * scale)
    raise ValueError(f"unsupported dimension {d}")


def polygon_quadrature(loop: np.ndarray, centroid: np.ndarray, degree: int) -> QuadratureRule:
    """Composite rule on a planar polygon (2D or embedded in 3D), fanned
    from `centroid` which must see the whole polygon."""
    loop = np.asarray(loop, dtype=float)
    m = len(loop)
    parts = []
    if m == 3:
        return facet_quadrature(loop, degree) if loop.shape[1] == 3 \
            else simplex_quadrature(loop, degree)
    for j in range(m):
        tri = np.array([centroid, loop[j], loop[(j + 1) % m]])
        if loop.shape[1] == 3:
            parts.append(facet_quadrature(tri, degree))
        else:
            parts.append(simplex_quadrature(tri, degree))
    return _concat(parts)


def _concat(rules) -> QuadratureRule:
    return QuadratureRule(np.vstack([r.points for r in rules]),
                          np.concatenate([r.weights for r in rules]))


def cell_rule(mesh, cell_id: int, degree: int) -> QuadratureRule:
    """Composite rule over the cell's simplicial decomposition."""
    decomp = mesh.decomposition(cell_id)
    return _concat([simplex_quadrature(s, degree) for s in decomp.simplices])


def face_rule(mesh, face_id: int, degree: int) -> QuadratureRule:
    """Rule over a mesh face (segment in 2D, planar polygon in 3D)."""
    face = mesh.faces[face_id]
    verts = mesh.vertices[list(face.vertex_ids)]
    if mesh.dim == 2:
        return facet_quadrature(verts, degree)
    return polygon_quadrature(verts, face.centroid, degree)


def sub_face_rule(mesh, cell_id: int, local_face: int, j: int, degree: int) -> QuadratureRule:
    """Rule over sub-face j of the given parent face of a decomposed cell."""
    decomp = mesh.decomposition(cell_id)
    _, facet = decomp.sub_faces[local_face][j]
    return facet_quadrature(facet, degree)
