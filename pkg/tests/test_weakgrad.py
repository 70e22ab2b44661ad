import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wglift import (build_lambda_basis, generate_mixed_polygon_mesh,
                    generate_quad_mesh, generate_wedge_mesh, project_Qh,
                    weak_gradient)
from wglift.localops import get_mesh_ops
from wglift.mesh import decompose_cell
from wglift.polybasis import dim_poly, monomial_exponents
from wglift.quadrature import facet_quadrature, simplex_quadrature


def _unit_square_mesh():
    from wglift.mesh import build_mesh_2d
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return build_mesh_2d(verts, [[0, 1, 2, 3]])


def _brute_force_nullity(mesh, cid, k, n_samples=400):
    """Independent dimension count of the constrained test space.

    Uses an unscaled monomial frame per sub-simplex (different enumeration
    than the production code) and enforces the continuity / one-piece
    conditions by dense point collocation instead of moments.
    """
    d = mesh.dim
    dec = decompose_cell(mesh, cid)
    n_sub = len(dec.simplices)
    # reversed-order plain monomials, no centroid shift, no diameter scaling
    expo = monomial_exponents(d, k + 1)[::-1]
    nb = len(expo)
    n_raw = n_sub * d * nb
    rng = np.random.default_rng(7)

    def ev(pts):
        return np.prod(pts[:, None, :] ** expo[None], axis=2)

    def dev(pts, axis):
        e = expo.copy()
        coef = e[:, axis].astype(float)
        e[:, axis] = np.maximum(e[:, axis] - 1, 0)
        return coef[None, :] * np.prod(pts[:, None, :] ** e[None], axis=2)

    def col(sub, comp):
        base = (sub * d + comp) * nb
        return slice(base, base + nb)

    rows = []
    # normal continuity across interior sub-facets, by collocation
    for si, sj, facet in dec.interior_facets:
        if d == 2:
            t = facet[1] - facet[0]
            n = np.array([t[1], -t[0]])
        else:
            n = np.cross(facet[1] - facet[0], facet[2] - facet[0])
        n /= np.linalg.norm(n)
        lam = rng.random((n_samples, facet.shape[0]))
        lam /= lam.sum(axis=1, keepdims=True)
        pts = lam @ facet
        E = ev(pts)
        for p in range(len(pts)):
            r = np.zeros(n_raw)
            for c in range(d):
                r[col(si, c)] += n[c] * E[p]
                r[col(sj, c)] -= n[c] * E[p]
            rows.append(r)
    # one-piece divergence, by collocation at shared random points
    pts = rng.random((n_samples, d)) * 2 - 1
    for s in range(1, n_sub):
        for p in range(len(pts)):
            r = np.zeros(n_raw)
            for c in range(d):
                r[col(s, c)] += dev(pts[p:p + 1], c)[0]
                r[col(0, c)] -= dev(pts[p:p + 1], c)[0]
            rows.append(r)
    # one-piece normal trace: polynomial extensions agree on the parent face
    for fi, entries in enumerate(dec.sub_faces):
        if len(entries) < 2:
            continue
        fid, _ = mesh.cell_to_faces[cid][fi]
        n = mesh.faces[fid].normal
        verts = mesh.vertices[list(mesh.faces[fid].vertex_ids)]
        lam = rng.random((n_samples, len(verts)))
        lam /= lam.sum(axis=1, keepdims=True)
        pts = lam @ verts
        E = ev(pts)
        s0 = entries[0][0]
        for sj, _ in entries[1:]:
            for p in range(len(pts)):
                r = np.zeros(n_raw)
                for c in range(d):
                    r[col(sj, c)] += n[c] * E[p]
                    r[col(s0, c)] -= n[c] * E[p]
                rows.append(r)

    A = np.vstack(rows)
    A /= np.linalg.norm(A, axis=1)[:, None]
    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > 1e-9 * s[0]))
    return n_raw - rank


@pytest.mark.parametrize("k", [1, 2])
def test_dimension_matches_brute_force_square(k):
    mesh = _unit_square_mesh()
    basis = build_lambda_basis(mesh, 0, k)
    assert basis.n_basis == _brute_force_nullity(mesh, 0, k)


def test_dimension_matches_brute_force_pentagon():
    mesh = generate_mixed_polygon_mesh(1)
    cid = next(c for c in range(mesh.n_cells)
               if len(mesh.cells[c].vertex_ids) == 5)
    basis = build_lambda_basis(mesh, cid, 1)
    assert basis.n_basis == _brute_force_nullity(mesh, cid, 1)


def test_dimension_matches_brute_force_wedge():
    mesh = generate_wedge_mesh(1)
    basis = build_lambda_basis(mesh, 0, 1)
    assert basis.n_basis == _brute_force_nullity(mesh, 0, 1, n_samples=150)


@pytest.mark.parametrize("gen,level,k", [
    (generate_quad_mesh, 2, 1), (generate_mixed_polygon_mesh, 1, 2),
    (generate_wedge_mesh, 1, 1),
])
def test_dimension_lower_bound(gen, level, k):
    """The test space contains the one-piece P_{k+1}^d fields."""
    mesh = gen(level)
    for cid in range(mesh.n_cells):
        basis = build_lambda_basis(mesh, cid, k)
        assert basis.n_basis >= mesh.dim * dim_poly(k + 1, mesh.dim)


@pytest.mark.parametrize("gen,k", [(generate_mixed_polygon_mesh, 1),
                                   (generate_wedge_mesh, 1),
                                   (generate_quad_mesh, 2)])
def test_member_invariants(gen, k):
    """Random members are H(div) with one-piece divergence and traces."""
    mesh = gen(1)
    cid = mesh.n_cells // 2
    basis = build_lambda_basis(mesh, cid, k)
    ops = basis.ops
    dec = ops.decomp
    rng = np.random.default_rng(3)
    centroid = mesh.cells[cid].centroid
    for _ in range(5):
        c = rng.standard_normal(basis.n_basis)
        # normal continuity across interior sub-facets
        for si, sj, facet in dec.interior_facets:
            if mesh.dim == 2:
                t = facet[1] - facet[0]
                n = np.array([t[1], -t[0]])
            else:
                n = np.cross(facet[1] - facet[0], facet[2] - facet[0])
            n /= np.linalg.norm(n)
            lam = rng.random((20, facet.shape[0]))
            lam /= lam.sum(axis=1, keepdims=True)
            pts = lam @ facet
            qi = ops.eval_lambda(c, si, pts) @ n
            qj = ops.eval_lambda(c, sj, pts) @ n
            assert np.allclose(qi, qj, atol=1e-10)
        # one-piece divergence against div_repr, by finite differences
        div_poly = c @ basis.div_repr
        for si, simplex in enumerate(dec.simplices):
            pts = simplex.mean(axis=0)[None] * 0.9
            h = 1e-6 * ops.diameter
            div = 0.0
            for a in range(mesh.dim):
                e = np.zeros(mesh.dim)
                e[a] = h
                div += (ops.eval_lambda(c, si, pts + e)[0, a]
                        - ops.eval_lambda(c, si, pts - e)[0, a]) / (2 * h)
            ref = ops.space_k.eval(pts) @ div_poly
            assert div == pytest.approx(ref[0], abs=1e-4 * (1 + abs(ref[0])))
        # one-piece normal trace against trace_repr
        for fi, entries in enumerate(dec.sub_faces):
            n_out = ops.sigmas[fi] * ops.normals[fi]
            tr_poly = c @ basis.trace_repr[fi]
            for sj, facet in entries:
                lam = rng.random((10, facet.shape[0]))
                lam /= lam.sum(axis=1, keepdims=True)
                pts = lam @ facet
                qn = ops.eval_lambda(c, sj, pts) @ ops.normals[fi]
                ref = ops.face_spaces[fi].eval(pts) @ tr_poly
                assert np.allclose(qn, ref, atol=1e-9)


def test_mass_matrix_spd():
    mesh = generate_mixed_polygon_mesh(1)
    for cid in range(mesh.n_cells):
        basis = build_lambda_basis(mesh, cid, 1)
        assert np.allclose(basis.mass, basis.mass.T)
        assert np.linalg.eigvalsh(basis.mass).min() > 0


@pytest.mark.parametrize("gen,k", [(generate_quad_mesh, 1),
                                   (generate_mixed_polygon_mesh, 1),
                                   (generate_wedge_mesh, 1),
                                   (generate_quad_mesh, 2)])
def test_defining_moments(gen, k):
    """The weak gradient satisfies its defining integral identity against
    every test-space basis member, evaluated by independent quadrature."""
    mesh = gen(1)
    mops = get_mesh_ops(mesh, k)
    rng = np.random.default_rng(11)
    v = mops.random_function(rng)
    for cid in range(min(mesh.n_cells, 6)):
        basis = build_lambda_basis(mesh, cid, k)
        ops = basis.ops
        wg = weak_gradient(mesh, cid, v, basis)
        centroid = mesh.cells[cid].centroid
        lhs = basis.mass @ wg.coeffs
        qd = 2 * (k + 2) + 2
        for i in range(basis.n_basis):
            e = np.zeros(basis.n_basis)
            e[i] = 1.0
            # -int_T v0 div q
            rhs = 0.0
            div_poly = e @ basis.div_repr
            for si, simplex in enumerate(ops.decomp.simplices):
                rule = simplex_quadrature(simplex + centroid, qd)
                v0 = ops.space_k.eval(rule.points - centroid) @ v.cell_coeffs[cid]
                dv = ops.space_k.eval(rule.points - centroid) @ div_poly
                rhs -= rule.weights @ (v0 * dv)
            # + int_dT v_b q.n
            for fi, (fid, sign) in enumerate(mesh.cell_to_faces[cid]):
                rule = ops.face_rules[fi]
                vb = ops.Ef[fi] @ v.face_coeffs[fid]
                qn = ops.Ef[fi] @ (e @ basis.trace_repr[fi])
                rhs += sign * rule.weights @ (vb * qn)
            assert lhs[i] == pytest.approx(rhs, abs=1e-11 * max(1, abs(rhs)))


@pytest.mark.parametrize("gen,k", [(generate_quad_mesh, 1),
                                   (generate_mixed_polygon_mesh, 1),
                                   (generate_wedge_mesh, 1)])
def test_exactness_on_smooth_polynomials(gen, k):
    """Interpolating a global polynomial of degree <= k+2 and taking the
    weak gradient recovers its exact gradient on every cell."""
    mesh = gen(1)
    d = mesh.dim
    expo = monomial_exponents(d, k + 2)
    rng = np.random.default_rng(5)
    coeffs = rng.standard_normal(len(expo))

    def u(x):
        return np.prod(x[:, None, :] ** expo[None], axis=2) @ coeffs

    def grad_u(x):
        out = np.zeros_like(x)
        for a in range(d):
            e = expo.copy()
            cf = e[:, a].astype(float)
            e[:, a] = np.maximum(e[:, a] - 1, 0)
            out[:, a] = np.prod(x[:, None, :] ** e[None], axis=2) @ (cf * coeffs)
        return out

    uh = project_Qh(u, mesh, k, homogeneous=False)
    rngp = np.random.default_rng(9)
    for cid in range(min(mesh.n_cells, 8)):
        basis = build_lambda_basis(mesh, cid, k)
        ops = basis.ops
        wg = weak_gradient(mesh, cid, uh, basis)
        centroid = mesh.cells[cid].centroid
        for si, simplex in enumerate(ops.decomp.simplices):
            lam = rngp.random((15, d + 1))
            lam /= lam.sum(axis=1, keepdims=True)
            pts = lam @ simplex
            got = ops.eval_lambda(wg.coeffs, si, pts)
            assert np.allclose(got, grad_u(pts + centroid), atol=1e-9)


def test_constant_has_zero_weak_gradient():
    mesh = generate_quad_mesh(2)
    uh = project_Qh(lambda x: np.full(len(x), 3.5), mesh, 1, homogeneous=False)
    for cid in range(mesh.n_cells):
        wg = weak_gradient(mesh, cid, uh)
        assert np.abs(wg.coeffs).max() < 1e-9


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_weak_gradient_is_linear(seed):
    mesh = generate_quad_mesh(1)
    mops = get_mesh_ops(mesh, 1)
    rng = np.random.default_rng(seed)
    a = mops.random_function(rng)
    b = mops.random_function(rng)
    alpha = float(rng.standard_normal())
    for cid in range(mesh.n_cells):
        ga = weak_gradient(mesh, cid, a).coeffs
        gb = weak_gradient(mesh, cid, b).coeffs
        comb = a.copy()
        comb.cell_coeffs = a.cell_coeffs + alpha * b.cell_coeffs
        comb.face_coeffs = a.face_coeffs + alpha * b.face_coeffs
        gc = weak_gradient(mesh, cid, comb).coeffs
        assert np.allclose(gc, ga + alpha * gb, atol=1e-10 * (1 + np.abs(gc).max()))
