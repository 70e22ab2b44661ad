"""Polytopal meshes: data model, generators, simplicial decomposition, I/O.

Three deterministic mesh families on the unit square/cube are provided:
perturbed quadrilaterals, a quad/pentagon/hexagon mix, and wedge (triangular
prism) grids.  Every face carries a fixed unit normal whose sign is chosen
by a purely geometric rule, so that the two cells sharing a face agree on
it and congruent cells produce identical local data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Face",
    "Cell",
    "PolytopalMesh",
    "SimplicialDecomposition",
    "MeshError",
    "canonical_frame",
    "build_mesh_2d",
    "build_mesh_3d",
    "generate_quad_mesh",
    "generate_mixed_polygon_mesh",
    "generate_wedge_mesh",
    "decompose_cell",
    "export_mesh",
    "load_mesh",
]

# geometric comparisons are made on coordinates rounded at this resolution
# (relative to the local length scale) so that congruent cells hash equal
_ROUND = 7


class MeshError(Exception):
    pass


@dataclass
class Face:
    vertex_ids: tuple  # 2D: ordered pair, 3D: planar loop; oriented with `normal`
    normal: np.ndarray  # fixed unit normal (canonical sign)
    centroid: np.ndarray
    measure: float
    diameter: float
    boundary: bool = False


@dataclass
class Cell:
    vertex_ids: tuple  # 2D: ccw loop; 3D: all vertex ids (no order implied)
    face_ids: tuple
    centroid: np.ndarray
    measure: float
    diameter: float


@dataclass
class SimplicialDecomposition:
    """Centroid-fan subdivision of one cell into triangles/tetrahedra."""

    cell_id: int
    simplices: np.ndarray  # (n_sub, d+1, d), positively oriented
    volumes: np.ndarray  # (n_sub,)
    # per local face of the parent cell: list of (simplex index, facet coords (d, d))
    sub_faces: list
    # (simplex_i, simplex_j, facet coords) for facets interior to the cell
    interior_facets: list


@dataclass
class PolytopalMesh:
    dim: int
    vertices: np.ndarray  # (n_verts, dim)
    cells: list
    faces: list
    cell_to_faces: list  # per cell: list of (face_id, orientation sign)
    boundary_face_ids: set
    h: float = 0.0  # max cell diameter
    _decomp_cache: dict = field(default_factory=dict, repr=False)
    _ops_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def decomposition(self, cell_id: int) -> SimplicialDecomposition:
        dec = self._decomp_cache.get(cell_id)
        if dec is None:
            dec = decompose_cell(self, cell_id)
            self._decomp_cache[cell_id] = dec
        return dec

    def outward_face_loops(self, cell_id: int) -> list:
        """Face vertex loops of a cell, each oriented with outward normal."""
        loops = []
        for fid, sign in self.cell_to_faces[cell_id]:
            ids = self.faces[fid].vertex_ids
            loops.append(self.vertices[list(ids if sign > 0 else ids[::-1])])
        return loops


def _lex_sign(v: np.ndarray, scale: float) -> int:
    """Sign of the first significantly-nonzero component of v/scale."""
    r = np.round(v / scale, _ROUND)
    for c in r:
        if c > 0:
            return 1
        if c < 0:
            return -1
    return 0


def _newell_normal(loop: np.ndarray) -> np.ndarray:
    n = np.zeros(3)
    for i in range(len(loop)):
        a, b = loop[i], loop[(i + 1) % len(loop)]
        n += np.cross(a, b)
    return n / np.linalg.norm(n)


def canonical_frame(loop: np.ndarray):
    """Fixed (normal, tangents) for a face, from its geometry alone.

    The sign of the normal and the tangent directions depend only on the
    vertex coordinates (not on ids or ordering), up to round-off absorbed
    by rounding, so the two cells sharing the face agree on the frame.
    Returns (normal (d,), tangents (d, d-1)).
    """
    loop = np.asarray(loop, dtype=float)
    d = loop.shape[1]
    diam = max(np.linalg.norm(loop[i] - loop[j])
               for i in range(len(loop)) for j in range(i + 1, len(loop)))
    if d == 2:
        t = loop[1] - loop[0]
        t = t / np.linalg.norm(t)
        if _lex_sign(t, 1.0) < 0:
            t = -t
        normal = np.array([t[1], -t[0]])
        return normal, t[:, None]
    normal = _newell_normal(loop)
    if _lex_sign(normal, 1.0) < 0:
        normal = -normal
    centroid = _polygon_centroid_3d(loop, normal)[0]
    rel = loop - centroid
    keys = [tuple(np.round(r / diam, _ROUND)) for r in rel]
    j = min(range(len(loop)), key=lambda i: keys[i])
    t1 = rel[j] - (rel[j] @ normal) * normal
    t1 = t1 / np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    return normal, np.stack([t1, t2], axis=1)


def _polygon_area_centroid_2d(loop: np.ndarray):
    x, y = loop[:, 0], loop[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    area = cr.sum() / 2.0
    cx = ((x + xn) * cr).sum() / (6.0 * area)
    cy = ((y + yn) * cr).sum() / (6.0 * area)
    return np.array([cx, cy]), area


def _polygon_centroid_3d(loop: np.ndarray, normal: np.ndarray):
    p0 = loop.mean(axis=0)
    area = 0.0
    cent = np.zeros(3)
    for i in range(len(loop)):
        a, b = loop[i], loop[(i + 1) % len(loop)]
        s = 0.5 * np.cross(a - p0, b - p0) @ normal
        area += s
        cent += s * (p0 + a + b) / 3.0
    return cent / area, area


def _diameter(pts: np.ndarray) -> float:
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.max()))


def build_mesh_2d(vertices: np.ndarray, cell_loops: Sequence[Sequence[int]]) -> PolytopalMesh:
    """Mesh from vertex coordinates and polygon vertex-id loops."""
    vertices = np.asarray(vertices, dtype=float)
    loops = []
    for loop in cell_loops:
        loop = list(loop)
        _, area = _polygon_area_centroid_2d(vertices[loop])
        if area < 0:
            loop = loop[::-1]
        loops.append(loop)

    edge_ids: dict = {}
    faces: list = []
    incidence: list = []
    cell_to_faces = []
    cells = []
    for loop in loops:
        coords = vertices[loop]
        centroid, area = _polygon_area_centroid_2d(coords)
        entry = []
        for i in range(len(loop)):
            a, b = loop[i], loop[(i + 1) % len(loop)]
            key = (min(a, b), max(a, b))
            fid = edge_ids.get(key)
            if fid is None:
                fid = len(faces)
                edge_ids[key] = fid
                normal, _ = canonical_frame(vertices[[a, b]])
                va, vb = (a, b)
                t = vertices[vb] - vertices[va]
                # store the pair oriented along the canonical tangent
                if _lex_sign(t / np.linalg.norm(t), 1.0) < 0:
                    va, vb = vb, va
                mid = (vertices[va] + vertices[vb]) / 2.0
                length = float(np.linalg.norm(vertices[vb] - vertices[va]))
                faces.append(Face((va, vb), normal, mid, length, length))
                incidence.append(0)
            incidence[fid] += 1
            tang = vertices[b] - vertices[a]
            n_out = np.array([tang[1], -tang[0]])
            sign = 1 if faces[fid].normal @ n_out > 0 else -1
            entry.append((fid, sign))
        cell_to_faces.append(entry)
        cells.append(Cell(tuple(loop), tuple(f for f, _ in entry),
                          centroid, float(area), _diameter(coords)))

    boundary = set()
    for fid, cnt in enumerate(incidence):
        if cnt == 1:
            faces[fid].boundary = True
            boundary.add(fid)
        elif cnt != 2:
            raise MeshError(f"edge {fid} shared by {cnt} cells")
    h = max(c.diameter for c in cells)
    return PolytopalMesh(2, vertices, cells, faces, cell_to_faces, boundary, h)


def build_mesh_3d(vertices: np.ndarray, cell_face_loops: Sequence[Sequence[Sequence[int]]]) -> PolytopalMesh:
    """Mesh from vertex coordinates and, per cell, outward-oriented face loops."""
    vertices = np.asarray(vertices, dtype=float)
    face_ids: dict = {}
    faces: list = []
    incidence: list = []
    cell_to_faces = []
    cells = []
    for floops in cell_face_loops:
        entry = []
        vids: set = set()
        for loop in floops:
            loop = tuple(loop)
            vids.update(loop)
            key = tuple(sorted(loop))
            fid = face_ids.get(key)
            coords = vertices[list(loop)]
            n_out = _newell_normal(coords)
            if fid is None:
                fid = len(faces)
                face_ids[key] = fid
                normal, _ = canonical_frame(coords)
                stored = loop if normal @ n_out > 0 else loop[::-1]
                cent, area = _polygon_centroid_3d(vertices[list(stored)], normal)
                faces.append(Face(stored, normal, cent, float(area),
                                  _diameter(coords)))
                incidence.append(0)
            incidence[fid] += 1
            sign = 1 if faces[fid].normal @ n_out > 0 else -1
            entry.append((fid, sign))
        cell_to_faces.append(entry)
        # measure/centroid by tetrahedra coned from the vertex mean
        p0 = vertices[sorted(vids)].mean(axis=0)
        vol = 0.0
        cent = np.zeros(3)
        for loop in floops:
            coords = vertices[list(loop)]
            fc = coords.mean(axis=0)
            for i in range(len(coords)):
                a, b = coords[i], coords[(i + 1) % len(coords)]
                v = np.dot(np.cross(a - p0, b - p0), fc - p0) / 6.0
                vol += v
                cent += v * (p0 + a + b + fc) / 4.0
        cells.append(Cell(tuple(sorted(vids)), tuple(f for f, _ in entry),
                          cent / vol, float(vol), _diameter(vertices[sorted(vids)])))

    boundary = set()
    for fid, cnt in enumerate(incidence):
        if cnt == 1:
            faces[fid].boundary = True
            boundary.add(fid)
        elif cnt != 2:
            raise MeshError(f"face {fid} shared by {cnt} cells")
    h = max(c.diameter for c in cells)
    return PolytopalMesh(3, vertices, cells, faces, cell_to_faces, boundary, h)


# ---------------------------------------------------------------------------
# mesh families


def generate_quad_mesh(level: int) -> PolytopalMesh:
    """Perturbed 2^level x 2^level quadrilateral grid on the unit square.

    Interior vertex (i*h, j*h) is shifted by (+0.1h, +0.1h) when i+j is
    even and by (-0.1h, -0.1h) when odd.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    n = 2 ** level
    h = 1.0 / n
    verts = np.zeros(((n + 1) ** 2, 2))
    for j in range(n + 1):
        for i in range(n + 1):
            x, y = i * h, j * h
            if 0 < i < n and 0 < j < n:
                off = 0.1 * h if (i + j) % 2 == 0 else -0.1 * h
                x, y = x + off, y + off
            verts[j * (n + 1) + i] = (x, y)
    vid = lambda i, j: j * (n + 1) + i
    loops = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
             for j in range(n) for i in range(n)]
    return build_mesh_2d(verts, loops)


def generate_mixed_polygon_mesh(level: int) -> PolytopalMesh:
    """Conforming quad/pentagon/hexagon mesh of the unit square.

    In every 2x2 block of the uniform grid the lower-left cell has its
    top-right corner cut at the edge midpoints (pentagon); the cut triangle
    is merged into the right neighbour (hexagon); the top neighbour picks
    up the midpoint vertex (pentagon).  The remaining cell stays a quad.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    n = 2 ** level
    h = 1.0 / n
    verts = [(i * h, j * h) for j in range(n + 1) for i in range(n + 1)]
    vid = lambda i, j: j * (n + 1) + i
    mids: dict = {}

    def mid(i2, j2):  # vertex at (i2*h/2, j2*h/2), half-integer grid
        key = (i2, j2)
        if key not in mids:
            mids[key] = len(verts)
            verts.append((i2 * h / 2.0, j2 * h / 2.0))
        return mids[key]

    loops = []
    for j in range(n):
        for i in range(n):
            bl, br = vid(i, j), vid(i + 1, j)
            tr, tl = vid(i + 1, j + 1), vid(i, j + 1)
            if i % 2 == 0 and j % 2 == 0:
                m1 = mid(2 * i + 2, 2 * j + 1)  # right edge midpoint
                m2 = mid(2 * i + 1, 2 * j + 2)  # top edge midpoint
                loops.append([bl, br, m1, m2, tl])
            elif i % 2 == 1 and j % 2 == 0:
                m1 = mid(2 * i, 2 * j + 1)
                m2 = mid(2 * i - 1, 2 * j + 2)
                loops.append([bl, br, tr, tl, m2, m1])
            elif i % 2 == 0 and j % 2 == 1:
                m2 = mid(2 * i + 1, 2 * j)
                loops.append([bl, m2, br, tr, tl])
            else:
                loops.append([bl, br, tr, tl])
    return build_mesh_2d(np.asarray(verts), loops)


def generate_wedge_mesh(level: int) -> PolytopalMesh:
    """Unit cube split into n^3 subcubes (n = 2^level), each cut into two
    triangular prisms by the vertical plane through the (1,0)-(0,1)
    diagonal of its horizontal cross-section."""
    if level < 1:
        raise ValueError("level must be >= 1")
    n = 2 ** level
    h = 1.0 / n
    verts = np.array([(i * h, j * h, kz * h)
                      for kz in range(n + 1) for j in range(n + 1) for i in range(n + 1)])
    vid = lambda i, j, kz: (kz * (n + 1) + j) * (n + 1) + i
    cells = []
    for kz in range(n):
        for j in range(n):
            for i in range(n):
                a00, a10 = vid(i, j, kz), vid(i + 1, j, kz)
                a01, a11 = vid(i, j + 1, kz), vid(i + 1, j + 1, kz)
                b00, b10 = vid(i, j, kz + 1), vid(i + 1, j, kz + 1)
                b01, b11 = vid(i, j + 1, kz + 1), vid(i + 1, j + 1, kz + 1)
                cells.append([  # lower-left wedge
                    (a00, a01, a10),          # bottom, normal -z
                    (b00, b10, b01),          # top, normal +z
                    (a00, a10, b10, b00),     # y = y_j
                    (a00, b00, b01, a01),     # x = x_i
                    (a10, a01, b01, b10),     # diagonal
                ])
                cells.append([  # upper-right wedge
                    (a10, a01, a11),
                    (b10, b11, b01),
                    (a10, a11, b11, b10),     # x = x_{i+1}
                    (a11, a01, b01, b11),     # y = y_{j+1}
                    (a10, b10, b01, a01),     # diagonal
                ])
    return build_mesh_3d(verts, cells)


# ---------------------------------------------------------------------------
# simplicial decomposition


def _decompose_loops(d: int, outward_loops: list, centroid: np.ndarray,
                     scale: float, cell_id: int = -1) -> SimplicialDecomposition:
    simplices = []
    volumes = []
    sub_faces = [[] for _ in outward_loops]
    if d == 2:
        # the outward loops are the ccw cell edges; fan from the centroid
        for li, seg in enumerate(outward_loops):
            tri = np.array([centroid, seg[0], seg[1]])
            a, b = seg[0] - centroid, seg[1] - centroid
            area = 0.5 * (a[0] * b[1] - a[1] * b[0])
            if area <= 0:
                raise MeshError(f"cell {cell_id}: centroid fan produces a "
                                f"non-positive triangle (non-star-shaped cell?)")
            simplices.append(tri)
            volumes.append(area)
            sub_faces[li].append((len(simplices) - 1, np.array(seg)))
    else:
        for li, loop in enumerate(outward_loops):
            if len(loop) == 3:
                tris = [np.asarray(loop)]
            else:
                fc = _polygon_centroid_3d(np.asarray(loop), _newell_normal(np.asarray(loop)))[0]
                tris = [np.array([loop[i], loop[(i + 1) % len(loop)], fc])
                        for i in range(len(loop))]
            for tri in tris:
                vol = np.dot(np.cross(tri[1] - tri[0], tri[2] - tri[0]),
                             centroid - tri[0]) / 6.0
                if vol >= 0:
                    raise MeshError(f"cell {cell_id}: face triangle not outward "
                                    f"oriented or centroid outside")
                # reorder to positive orientation, keep facet = first 3 verts
                tet = np.array([tri[0], tri[2], tri[1], centroid])
                simplices.append(tet)
                volumes.append(-vol)
                sub_faces[li].append((len(simplices) - 1,
                                      np.array([tri[0], tri[2], tri[1]])))
    simplices = np.array(simplices)

    # pair up the remaining (interior) facets by rounded coordinates
    facet_map: dict = {}
    parent_keys = set()
    for entries in sub_faces:
        for si, facet in entries:
            parent_keys.add(_facet_key(facet, centroid, scale))
    n_loc = simplices.shape[1]
    for si, simplex in enumerate(simplices):
        for drop in range(n_loc):
            facet = np.delete(simplex, drop, axis=0)
            key = _facet_key(facet, centroid, scale)
            if key in parent_keys:
                continue
            facet_map.setdefault(key, []).append((si, facet))
    interior = []
    for key, entries in facet_map.items():
        if len(entries) != 2:
            raise MeshError(f"cell {cell_id}: unmatched interior facet")
        (si, fa), (sj, _) = entries
        interior.append((si, sj, fa))
    interior.sort(key=lambda t: (t[0], t[1]))
    return SimplicialDecomposition(cell_id, simplices, np.array(volumes),
                                   sub_faces, interior)


def _facet_key(facet: np.ndarray, origin: np.ndarray, scale: float):
    rows = [tuple(np.round((p - origin) / scale, _ROUND)) for p in facet]
    return tuple(sorted(rows))


def decompose_cell(mesh: PolytopalMesh, cell_id: int) -> SimplicialDecomposition:
    """Centroid-fan decomposition of a cell into triangles/tetrahedra."""
    cell = mesh.cells[cell_id]
    if mesh.dim == 2:
        loop = mesh.vertices[list(cell.vertex_ids)]
        loops = [np.array([loop[i], loop[(i + 1) % len(loop)]])
                 for i in range(len(loop))]
        # align the fan with the cell's face order
        order = []
        for fid, _ in mesh.cell_to_faces[cell_id]:
            ids = set(mesh.faces[fid].vertex_ids)
            for i in range(len(cell.vertex_ids)):
                a = cell.vertex_ids[i]
                b = cell.vertex_ids[(i + 1) % len(cell.vertex_ids)]
                if {a, b} == ids:
                    order.append(i)
                    break
        loops = [loops[i] for i in order]
    else:
        loops = mesh.outward_face_loops(cell_id)
    return _decompose_loops(mesh.dim, loops, cell.centroid, cell.diameter, cell_id)


# ---------------------------------------------------------------------------
# plain-text export / import


def export_mesh(mesh: PolytopalMesh, path: str) -> None:
    lines = [f"{mesh.dim} {len(mesh.vertices)} {mesh.n_cells} {mesh.n_faces}"]
    for v in mesh.vertices:
        lines.append(" ".join(repr(float(c)) for c in v))
    for cell in mesh.cells:
        lines.append(f"{len(cell.face_ids)} " + " ".join(map(str, cell.face_ids)))
    for face in mesh.faces:
        lines.append(f"{len(face.vertex_ids)} "
                     + " ".join(map(str, face.vertex_ids))
                     + f" {1 if face.boundary else 0}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path: str) -> PolytopalMesh:
    with open(path) as fh:
        tokens = fh.read().split("\n")
    dim, nv, nc, nf = map(int, tokens[0].split())
    verts = np.array([[float(c) for c in tokens[1 + i].split()] for i in range(nv)])
    cell_rows = [list(map(int, tokens[1 + nv + i].split())) for i in range(nc)]
    face_rows = [list(map(int, tokens[1 + nv + nc + i].split())) for i in range(nf)]
    face_verts = [tuple(row[1:-1]) for row in face_rows]
    if dim == 2:
        loops = []
        for row in cell_rows:
            fids = row[1:]
            # chain the edge list into a vertex loop
            adj: dict = {}
            for fid in fids:
                a, b = face_verts[fid]
                adj.setdefault(a, []).append(b)
                adj.setdefault(b, []).append(a)
            start = min(adj)
            loop = [start]
            prev = None
            while len(loop) < len(fids):
                nxt = [w for w in adj[loop[-1]] if w != prev]
                prev = loop[-1]
                loop.append(nxt[0])
            loops.append(loop)
        return build_mesh_2d(verts, loops)
    cell_face_loops = []
    for row in cell_rows:
        fids = row[1:]
        pts = np.unique(np.concatenate([face_verts[f] for f in fids]))
        cc = verts[pts].mean(axis=0)
        floops = []
        for fid in fids:
            loop = face_verts[fid]
            coords = verts[list(loop)]
            n = _newell_normal(coords)
            if n @ (coords.mean(axis=0) - cc) < 0:
                loop = loop[::-1]
            floops.append(loop)
        cell_face_loops.append(floops)
    return build_mesh_3d(verts, cell_face_loops)
