"""Per-cell local operators, cached by cell shape.

All local constructions (scaled monomial spaces, H(div)-constrained test
space, weak-gradient and stiffness matrices, lifting operator) depend only
on the cell geometry relative to its centroid.  The generated mesh families
are highly repetitive, so congruent cells share one `CellOps` instance via
a shape-keyed cache; everything inside is read-only after construction.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import quadrature as quad
from .mesh import MeshError, PolytopalMesh, _decompose_loops, canonical_frame, \
    _polygon_centroid_3d
from .polybasis import (CellPolySpace, FacePolySpace, WgFunction, diff_matrix,
                        dim_poly, monomial_exponents)

__all__ = ["CellOps", "MeshOps", "get_mesh_ops", "LambdaRankError",
           "CertificateError"]

# singular values below RANK_TOL * s_max are nullspace; anything inside
# the deadband is ambiguous and rejected loudly
RANK_TOL = 1e-10
DEADBAND = (1e-12, 1e-8)
CERT_FAIL = 1e-10
CERT_WARN = 1e-6


class LambdaRankError(Exception):
    """Singular values of the constraint system fall in the rank deadband."""


class CertificateError(Exception):
    """Injectivity certificate of the lift operator failed."""


def _quad_degree(k: int) -> int:
    return 2 * (k + 2) + 2


class CellOps:
    """Local operators of one cell shape, in centroid-relative coordinates.

    Parameters are the outward-oriented face loops relative to the cell
    centroid, the canonical (fixed) face normals and the orientation signs
    sigma with normal_out = sigma * normal.
    """

    def __init__(self, d: int, k: int, loops_rel: list, normals: list,
                 sigmas: list, diameter: float, label: str = "cell"):
        self.d = d
        self.k = k
        self.diameter = diameter
        self.sigmas = list(sigmas)
        self.normals = [np.asarray(n, dtype=float) for n in normals]
        self.n_faces = len(loops_rel)
        self.label = label
        qd = _quad_degree(k)

        outward = [lp if s > 0 else lp[::-1] for lp, s in zip(loops_rel, sigmas)]
        origin = np.zeros(d)
        self.decomp = _decompose_loops(d, outward, origin, diameter)
        self.measure = float(self.decomp.volumes.sum())

        # volume quadrature and cell spaces
        self.vol_rule = quad.QuadratureRule(
            *_concat_rules([quad.simplex_quadrature(s, qd)
                            for s in self.decomp.simplices]))
        self.space_k = CellPolySpace(k, origin, diameter)
        self.space_k2 = CellPolySpace(k + 2, origin, diameter)
        w = self.vol_rule.weights
        self.Ek = self.space_k.eval(self.vol_rule.points)
        self.E2 = self.space_k2.eval(self.vol_rule.points)
        self.Ekg = self.space_k.eval_grad(self.vol_rule.points)
        self.E2g = self.space_k2.eval_grad(self.vol_rule.points)
        self.space_k.gram = self.Ek.T @ (w[:, None] * self.Ek)
        self.space_k2.gram = self.E2.T @ (w[:, None] * self.E2)
        self.grad_gram_k2 = np.einsum("pid,p,pjd->ij", self.E2g, w, self.E2g,
                                      optimize=True)

        # face spaces, rules and basis evaluations (canonical frames)
        self.face_spaces = []
        self.face_rules = []
        self.Ef = []
        self.E2f = []
        for lp, sign in zip(loops_rel, sigmas):
            nrm, tangents = canonical_frame(lp)
            if d == 2:
                fc = lp.mean(axis=0)
                rule = quad.facet_quadrature(lp, qd)
            else:
                fc = _polygon_centroid_3d(lp, nrm)[0]
                rule = quad.polygon_quadrature(lp if sign > 0 else lp[::-1], fc, qd)
            diam = _diam(lp)
            fsp = FacePolySpace(k + 1, fc, tangents, diam)
            Ef = fsp.eval(rule.points)
            fsp.gram = Ef.T @ (rule.weights[:, None] * Ef)
            self.face_spaces.append(fsp)
            self.face_rules.append(rule)
            self.Ef.append(Ef)
            self.E2f.append(self.space_k2.eval(rule.points))

        self.n0 = self.space_k.n_basis
        self.nbf = self.face_spaces[0].n_basis
        self.n_loc = self.n0 + self.n_faces * self.nbf

        self._build_lambda()
        self._build_weak_gradient()
        self._build_lift()

    # ------------------------------------------------------------------
    # Lambda_k(T): piecewise P_{k+1}^d, H(div), one-piece divergence and
    # one-piece normal trace per parent face

    def _build_lambda(self):
        d, k = self.d, self.k
        dec = self.decomp
        n_sub = len(dec.simplices)
        self.expo1 = monomial_exponents(d, k + 1)
        nb1 = len(self.expo1)
        n_raw = n_sub * d * nb1
        scale = self.diameter

        def sl(sub, comp):
            base = (sub * d + comp) * nb1
            return slice(base, base + nb1)

        def mono1(pts):
            from .polybasis import eval_monomials
            return eval_monomials(self.expo1, np.atleast_2d(pts) / scale)

        rows = []
        qd = 2 * (k + 1) + 2

        # (a) normal-moment continuity across interior sub-facets
        fexpo = monomial_exponents(d - 1, k + 1)
        for si, sj, facet in dec.interior_facets:
            n = _facet_normal(facet, d)
            rule = quad.facet_quadrature(facet, qd)
            _, tang = _any_frame(facet, n)
            fc = facet.mean(axis=0)
            loc = (rule.points - fc) @ tang / scale
            from .polybasis import eval_monomials
            Ephi = eval_monomials(fexpo, loc)
            Ec = mono1(rule.points)
            M = Ephi.T @ (rule.weights[:, None] * Ec)
            blk = np.zeros((M.shape[0], n_raw))
            for c in range(d):
                blk[:, sl(si, c)] += n[c] * M
                blk[:, sl(sj, c)] -= n[c] * M
            rows.append(blk)

        # (b) one-piece divergence: exact coefficient equality in the cell frame
        expok = monomial_exponents(d, k)
        nbk = len(expok)
        Dstack = np.stack([diff_matrix(d, k + 1, a) for a in range(d)]) / scale
        for s in range(1, n_sub):
            blk = np.zeros((nbk, n_raw))
            for c in range(d):
                blk[:, sl(s, c)] += Dstack[c]
                blk[:, sl(0, c)] -= Dstack[c]
            rows.append(blk)

        # (c) one-piece normal trace per parent face: the polynomial
        # extensions of q.n from each sub-face must coincide; equate their
        # moments over the full parent face
        for fi, entries in enumerate(dec.sub_faces):
            if len(entries) < 2:
                continue
            n = self.normals[fi]
            rule = self.face_rules[fi]
            Ephi = self.Ef[fi]
            Ec = mono1(rule.points)
            M = Ephi.T @ (rule.weights[:, None] * Ec)
            s0 = entries[0][0]
            for sj, _ in entries[1:]:
                blk = np.zeros((M.shape[0], n_raw))
                for c in range(d):
                    blk[:, sl(sj, c)] += n[c] * M
                    blk[:, sl(s0, c)] -= n[c] * M
                rows.append(blk)

        A = np.vstack(rows)
        norms = np.linalg.norm(A, axis=1)
        A = A / norms[:, None]
        s = np.linalg.svd(A, compute_uv=False)
        smax = s[0]
        if np.any((s > DEADBAND[0] * smax) & (s < DEADBAND[1] * smax)):
            raise LambdaRankError(
                f"{self.label}: constraint singular values in the deadband "
                f"{DEADBAND} (relative): {s / smax}")
        rank = int(np.sum(s >= RANK_TOL * smax))
        _, _, Vt = np.linalg.svd(A, full_matrices=True)
        null = Vt[rank:]
        if null.shape[0] == 0:
            raise LambdaRankError(f"{self.label}: empty test space "
                                  f"(constraint assembly bug)")
        self.n_basis = null.shape[0]
        self.lambda_coeffs = null.reshape(self.n_basis, n_sub, d, nb1)

        # Gram of the test space over the cell
        Q = self.lambda_coeffs
        M_lam = np.zeros((self.n_basis, self.n_basis))
        for si, simplex in enumerate(dec.simplices):
            rule = quad.simplex_quadrature(simplex, qd)
            E = mono1(rule.points)
            Gs = E.T @ (rule.weights[:, None] * E)
            flat = Q[:, si].reshape(self.n_basis, -1)
            flat_g = (Q[:, si] @ Gs).reshape(self.n_basis, -1)
            M_lam += flat_g @ flat.T
        self.lambda_mass = 0.5 * (M_lam + M_lam.T)
        self._lambda_cho = cho_factor(self.lambda_mass)

        # one-piece divergence in the P_k cell basis (sub-simplex 0 is
        # representative; the constraints force all pieces equal).  mono1
        # and space_k share the x/diameter scaling, so Dstack (with its
        # 1/scale factor) yields P_k coefficients directly.
        self.div_repr = np.einsum("ckm,icm->ik", Dstack, Q[:, 0])

        # one-piece normal trace per parent face, in the face basis
        self.trace_repr = []
        for fi, entries in enumerate(dec.sub_faces):
            n = self.normals[fi]
            mom = np.zeros((self.n_basis, self.nbf))
            for sj, facet in entries:
                rule = quad.facet_quadrature(facet, qd)
                Ephi = self.face_spaces[fi].eval(rule.points)
                Ec = mono1(rule.points)
                M = Ephi.T @ (rule.weights[:, None] * Ec)
                mom += np.einsum("c,icm,fm->if", n, Q[:, sj], M)
            tr = self.face_spaces[fi].solve_gram(mom.T).T
            self.trace_repr.append(tr)

    def eval_lambda(self, coeffs: np.ndarray, sub: int, pts: np.ndarray) -> np.ndarray:
        """Evaluate a test-space combination on sub-simplex `sub` at points
        (centroid-relative).  Returns (n_pts, d)."""
        from .polybasis import eval_monomials
        E = eval_monomials(self.expo1, np.atleast_2d(pts) / self.diameter)
        return np.einsum("i,icm,pm->pc", coeffs, self.lambda_coeffs[:, sub], E)

    # ------------------------------------------------------------------

    def _build_weak_gradient(self):
        B = np.zeros((self.n_basis, self.n_loc))
        B[:, :self.n0] = -self.div_repr @ self.space_k.gram
        for fi in range(self.n_faces):
            j0 = self.n0 + fi * self.nbf
            B[:, j0:j0 + self.nbf] = self.sigmas[fi] * (
                self.trace_repr[fi] @ self.face_spaces[fi].gram)
        self.B = B
        self.W = cho_solve(self._lambda_cho, B)
        S = B.T @ self.W
        self.stiffness = 0.5 * (S + S.T)

    def weak_gradient(self, u_loc: np.ndarray) -> np.ndarray:
        """Test-space coefficients of the weak gradient of local WG data
        (u0 coefficients followed by per-face coefficients)."""
        return self.W @ u_loc

    # ------------------------------------------------------------------

    def _build_lift(self):
        n2 = self.space_k2.n_basis
        w = self.vol_rule.weights
        Qmat = np.zeros((self.n_loc, n2))
        Qmat[:self.n0] = self.space_k.solve_gram(self.Ek.T @ (w[:, None] * self.E2))
        blocks = [self.space_k.gram]
        for fi in range(self.n_faces):
            rule = self.face_rules[fi]
            rhs = self.Ef[fi].T @ (rule.weights[:, None] * self.E2f[fi])
            j0 = self.n0 + fi * self.nbf
            Qmat[j0:j0 + self.nbf] = self.face_spaces[fi].solve_gram(rhs)
            blocks.append(self.face_spaces[fi].gram)
        D = np.zeros((self.n_loc, self.n_loc))
        j = 0
        for blk in blocks:
            m = blk.shape[0]
            D[j:j + m, j:j + m] = blk
            j += m
        L = np.linalg.cholesky(D)
        svals = np.linalg.svd(L.T @ Qmat, compute_uv=False)
        self.sigma_min = float(svals[-1])
        self.sigma_max = float(svals[0])
        rel = self.sigma_min / self.sigma_max
        if rel < CERT_FAIL:
            raise CertificateError(
                f"{self.label}: lift injectivity certificate failed "
                f"(sigma_min/sigma_max = {rel:.3e})")
        self.cert_warning = rel < CERT_WARN
        G = Qmat.T @ D @ Qmat
        G = 0.5 * (G + G.T)
        self.lift_gram = G
        self.Qmat = Qmat
        self.lift_mat = cho_solve(cho_factor(G), Qmat.T @ D)

    def lift(self, u_loc: np.ndarray) -> np.ndarray:
        """P_{k+2} coefficients of the lifted local WG data."""
        return self.lift_mat @ u_loc


def _concat_rules(rules):
    return (np.vstack([r.points for r in rules]),
            np.concatenate([r.weights for r in rules]))


def _diam(pts: np.ndarray) -> float:
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.max()))


def _facet_normal(facet: np.ndarray, d: int) -> np.ndarray:
    if d == 2:
        t = facet[1] - facet[0]
        n = np.array([t[1], -t[0]])
    else:
        n = np.cross(facet[1] - facet[0], facet[2] - facet[0])
    return n / np.linalg.norm(n)


def _any_frame(facet: np.ndarray, normal: np.ndarray):
    d = facet.shape[1]
    if d == 2:
        t = facet[1] - facet[0]
        t = t / np.linalg.norm(t)
        return normal, t[:, None]
    t1 = facet[1] - facet[0]
    t1 = t1 / np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    return normal, np.stack([t1, t2], axis=1)


# ---------------------------------------------------------------------------


class MeshOps:
    """Mesh-level orchestration: shape-cached cell operators, dof map,
    projections and gather/scatter helpers for one (mesh, k) pair."""

    def __init__(self, mesh: PolytopalMesh, k: int):
        if k < 1:
            raise ValueError("polynomial degree k must be >= 1")
        self.mesh = mesh
        self.k = k
        self.d = mesh.dim
        self.n0 = dim_poly(k, self.d)
        self.nbf = dim_poly(k + 1, self.d - 1)
        self._shape_cache: dict = {}
        self._cell_ops: list = [None] * mesh.n_cells

        # face -> (owning cell, local index); dof numbering
        self.face_owner = [None] * mesh.n_faces
        for cid in range(mesh.n_cells):
            for li, (fid, _) in enumerate(mesh.cell_to_faces[cid]):
                if self.face_owner[fid] is None:
                    self.face_owner[fid] = (cid, li)
        self.iface_index = np.full(mesh.n_faces, -1, dtype=int)
        rank = 0
        for fid in range(mesh.n_faces):
            if fid not in mesh.boundary_face_ids:
                self.iface_index[fid] = rank
                rank += 1
        self.n_interior_faces = rank
        self.n_dofs = mesh.n_cells * self.n0 + rank * self.nbf

    # -- cell operator access -------------------------------------------

    def cell_ops(self, cid: int) -> CellOps:
        ops = self._cell_ops[cid]
        if ops is not None:
            return ops
        mesh = self.mesh
        cell = mesh.cells[cid]
        loops_rel, normals, sigmas = [], [], []
        for fid, sign in mesh.cell_to_faces[cid]:
            ids = list(mesh.faces[fid].vertex_ids)
            loops_rel.append(mesh.vertices[ids] - cell.centroid)
            normals.append(mesh.faces[fid].normal)
            sigmas.append(sign)
        key = self._shape_key(loops_rel, sigmas, cell.diameter)
        ops = self._shape_cache.get(key)
        if ops is None:
            ops = CellOps(self.d, self.k, loops_rel, normals, sigmas,
                          cell.diameter, label=f"cell {cid}")
            self._shape_cache[key] = ops
        self._cell_ops[cid] = ops
        return ops

    def _shape_key(self, loops_rel, sigmas, diameter):
        parts = [self.k, self.d]
        for lp, s in zip(loops_rel, sigmas):
            ints = np.round(lp / diameter * 1e7).astype(np.int64)
            parts.append((s, ints.tobytes()))
        return tuple(parts)

    def build_all(self):
        for cid in range(self.mesh.n_cells):
            self.cell_ops(cid)
        return self

    # -- dof map ----------------------------------------------------------

    def cell_global_dofs(self, cid: int) -> np.ndarray:
        """Global indices of the cell's local dofs, -1 for boundary faces."""
        idx = np.empty(self.n0 + len(self.mesh.cell_to_faces[cid]) * self.nbf,
                       dtype=int)
        idx[:self.n0] = cid * self.n0 + np.arange(self.n0)
        base = self.mesh.n_cells * self.n0
        for li, (fid, _) in enumerate(self.mesh.cell_to_faces[cid]):
            j0 = self.n0 + li * self.nbf
            r = self.iface_index[fid]
            if r < 0:
                idx[j0:j0 + self.nbf] = -1
            else:
                idx[j0:j0 + self.nbf] = base + r * self.nbf + np.arange(self.nbf)
        return idx

    def gather_local(self, uh: WgFunction, cid: int) -> np.ndarray:
        parts = [uh.cell_coeffs[cid]]
        for fid, _ in self.mesh.cell_to_faces[cid]:
            parts.append(uh.face_coeffs[fid])
        return np.concatenate(parts)

    def zero_function(self) -> WgFunction:
        return WgFunction(self.k,
                          np.zeros((self.mesh.n_cells, self.n0)),
                          np.zeros((self.mesh.n_faces, self.nbf)))

    def vector_to_function(self, x: np.ndarray) -> WgFunction:
        uh = self.zero_function()
        uh.cell_coeffs[:] = x[:self.mesh.n_cells * self.n0].reshape(-1, self.n0)
        base = self.mesh.n_cells * self.n0
        for fid in range(self.mesh.n_faces):
            r = self.iface_index[fid]
            if r >= 0:
                uh.face_coeffs[fid] = x[base + r * self.nbf:base + (r + 1) * self.nbf]
        return uh

    def function_to_vector(self, uh: WgFunction) -> np.ndarray:
        x = np.zeros(self.n_dofs)
        x[:self.mesh.n_cells * self.n0] = uh.cell_coeffs.ravel()
        base = self.mesh.n_cells * self.n0
        for fid in range(self.mesh.n_faces):
            r = self.iface_index[fid]
            if r >= 0:
                x[base + r * self.nbf:base + (r + 1) * self.nbf] = uh.face_coeffs[fid]
        return x

    # -- quadrature in global coordinates ---------------------------------

    def cell_points(self, cid: int) -> np.ndarray:
        ops = self.cell_ops(cid)
        return ops.vol_rule.points + self.mesh.cells[cid].centroid

    def face_points(self, fid: int) -> np.ndarray:
        cid, li = self.face_owner[fid]
        ops = self.cell_ops(cid)
        return ops.face_rules[li].points + self.mesh.cells[cid].centroid

    # -- projections -------------------------------------------------------

    def project_qh(self, u, homogeneous: bool = True) -> WgFunction:
        uh = self.zero_function()
        for cid in range(self.mesh.n_cells):
            ops = self.cell_ops(cid)
            vals = u(self.cell_points(cid))
            w = ops.vol_rule.weights
            uh.cell_coeffs[cid] = ops.space_k.solve_gram(ops.Ek.T @ (w * vals))
        for fid in range(self.mesh.n_faces):
            if homogeneous and fid in self.mesh.boundary_face_ids:
                continue
            cid, li = self.face_owner[fid]
            ops = self.cell_ops(cid)
            vals = u(self.face_points(fid))
            w = ops.face_rules[li].weights
            uh.face_coeffs[fid] = ops.face_spaces[li].solve_gram(
                ops.Ef[li].T @ (w * vals))
        return uh

    def random_function(self, rng: np.random.Generator) -> WgFunction:
        uh = WgFunction(self.k,
                        rng.standard_normal((self.mesh.n_cells, self.n0)),
                        rng.standard_normal((self.mesh.n_faces, self.nbf)))
        for fid in self.mesh.boundary_face_ids:
            uh.face_coeffs[fid] = 0.0
        return uh


def get_mesh_ops(mesh: PolytopalMesh, k: int) -> MeshOps:
    ops = mesh._ops_cache.get(k)
    if ops is None:
        ops = MeshOps(mesh, k)
        mesh._ops_cache[k] = ops
    return ops
