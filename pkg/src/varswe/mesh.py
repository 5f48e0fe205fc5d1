"""Icosahedral triangulation of the sphere and its hexagonal/pentagonal dual.

Triangles are the primal cells (depth lives there), vertices are the dual
cells (vorticity lives there) and every undirected primal edge carries one
normal-velocity value.  All lengths are geodesic arcs and all areas are
spherical areas on the sphere of radius ``radius_m``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

MAX_LEVEL = 8
"""Largest refinement level accepted by :func:`build_mesh` by default."""


class MeshResourceError(MemoryError):
    """Requested refinement level exceeds the configured memory bound."""


# --------------------------------------------------------------------------
# spherical geometry helpers (unit vectors, vectorised over leading axes)


def normalize(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def arc_length(a, b):
    """Great-circle angle between unit vectors (robust for small angles)."""
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.einsum("...i,...i->...", a, b))


def spherical_triangle_area(a, b, c):
    """Unit-sphere area of the triangle (a, b, c), Van Oosterom-Strackee."""
    num = np.abs(np.einsum("...i,...i->...", a, np.cross(b, c)))
    den = (1.0 + np.einsum("...i,...i->...", a, b)
           + np.einsum("...i,...i->...", b, c)
           + np.einsum("...i,...i->...", c, a))
    return 2.0 * np.arctan2(num, den)


def lonlat(x):
    """Longitude in [0, 2pi) and latitude of points given in 3-D."""
    x = normalize(x)
    lon = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2.0 * np.pi)
    lat = np.arcsin(np.clip(x[..., 2], -1.0, 1.0))
    return lon, lat


def _icosahedron():
    lat = np.arctan(0.5)
    pts = [(0.0, 0.0, 1.0)]
    for k in range(5):
        lon = 2.0 * np.pi * k / 5
        pts.append((np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)))
    for k in range(5):
        lon = 2.0 * np.pi * k / 5 + np.pi / 5
        pts.append((np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), -np.sin(lat)))
    pts.append((0.0, 0.0, -1.0))
    faces = []
    for k in range(5):
        u0, u1 = 1 + k, 1 + (k + 1) % 5
        l0, l1 = 6 + k, 6 + (k + 1) % 5
        faces += [(0, u0, u1), (u0, l0, u1), (u1, l0, l1), (11, l1, l0)]
    return np.array(pts), _orient(np.array(pts), np.array(faces))


def _orient(x, faces):
    """Reorder faces counterclockwise as seen from outside the sphere."""
    a, b, c = x[faces[:, 0]], x[faces[:, 1]], x[faces[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a) < 0
    faces = faces.copy()
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def _unique_edges(faces):
    """Undirected edges (sorted vertex pairs) and the face-local edge index map.

    Local edge k of a face joins corners k and k+1.
    """
    pairs = np.stack([faces, np.roll(faces, -1, axis=1)], axis=-1).reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)


def _subdivide(x, faces):
    edges, face_edges = _unique_edges(faces)
    mids = normalize(x[edges[:, 0]] + x[edges[:, 1]])
    nv = len(x)
    x = np.vstack([x, mids])
    a, b, c = faces.T
    ab, bc, ca = (nv + face_edges[:, k] for k in range(3))
    new = np.concatenate([
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])
    return x, new


def _freeze(obj):
    for name, value in vars(obj).items():
        if isinstance(value, np.ndarray):
            value.flags.writeable = False


# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable primal/dual geometry and connectivity.

    Index conventions
    -----------------
    * ``cell_vertices[i]`` lists the corners of triangle ``i`` counterclockwise
      seen from outside; local edge ``k`` joins corners ``k`` and ``k + 1``
      and is ``cell_edges[i, k]``, shared with ``cell_neighbors[i, k]``.
    * ``edge_cells[e] = (i, j)`` with ``i < j``; the canonical orientation of
      edge ``e`` is ``i -> j`` and ``edge_normals[e]`` points from ``T_i``
      into ``T_j``.  ``cell_edge_signs[i, k]`` is ``+1`` when the canonical
      orientation of the edge is outward from cell ``i``.
    * ``edge_vertices[e] = (zeta_minus, zeta_plus)``: rotating the normal by
      +90 degrees about the outward radial points towards ``zeta_minus``.
    * Per-vertex arrays are padded to width 6 (pentagons carry one ``-1``
      entry).  ``vertex_cells[v]`` is ordered counterclockwise seen from
      outside, ``vertex_edges[v, k]`` is the primal edge crossed by the dual
      edge from ``vertex_cells[v, k]`` to the next cell, and
      ``vertex_edge_signs`` is ``+1`` where that traversal agrees with the
      canonical orientation.
    * ``wing_*`` arrays (shape ``(n_edges, 4)``) hold, for edge ``(i, j)``,
      the other edges of ``T_i`` and ``T_j`` touching ``zeta_minus``
      (slots 0, 1) and ``zeta_plus`` (slots 2, 3): their ids, outward signs
      relative to their owning cell, the cell across them, and the area of
      the dual-cell/triangle intersection.
    """

    level: int
    radius_m: float
    vertices: np.ndarray
    cell_vertices: np.ndarray
    cell_neighbors: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    cell_centers: np.ndarray
    cell_areas: np.ndarray
    edge_cells: np.ndarray
    edge_vertices: np.ndarray
    edge_lengths: np.ndarray
    dual_lengths: np.ndarray
    edge_normals: np.ndarray
    edge_midpoints: np.ndarray
    vertex_cells: np.ndarray
    vertex_edges: np.ndarray
    vertex_edge_signs: np.ndarray
    vertex_valence: np.ndarray
    kite_areas: np.ndarray
    dual_areas: np.ndarray
    wing_edges: np.ndarray
    wing_signs: np.ndarray
    wing_cells: np.ndarray
    wing_kites: np.ndarray
    optimized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _freeze(self)

    @property
    def n_cells(self):
        return len(self.cell_vertices)

    @property
    def n_edges(self):
        return len(self.edge_cells)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def overlap_ratios_padded(self):
        """``kite_areas / dual_areas`` with zeros in padding slots."""
        return self.kite_areas / self.dual_areas[:, None]

    # Sparse assembly of the linear operators.  Cached; the mesh never mutates.

    @cached_property
    def div_matrix(self):
        """CSR matrix mapping edge normal velocities to cell divergences."""
        rows = np.repeat(np.arange(self.n_cells), 3)
        vals = (self.cell_edge_signs * self.edge_lengths[self.cell_edges]
                / self.cell_areas[:, None]).ravel()
        return sp.csr_matrix((vals, (rows, self.cell_edges.ravel())),
                             shape=(self.n_cells, self.n_edges))

    @cached_property
    def circulation_matrix(self):
        """CSR matrix mapping edge values to dual-cell loop sums of h*V."""
        mask = self.vertex_edges >= 0
        rows = np.broadcast_to(np.arange(self.n_vertices)[:, None], mask.shape)[mask]
        cols = self.vertex_edges[mask]
        vals = self.vertex_edge_signs[mask] * self.dual_lengths[cols]
        return sp.csr_matrix((vals, (rows, cols)),
                             shape=(self.n_vertices, self.n_edges))

    def summary(self):
        f, h, a = self.edge_lengths, self.dual_lengths, self.cell_areas
        return "\n".join([
            f"level            {self.level}",
            f"radius_m         {self.radius_m:.10g}",
            f"optimized        {self.optimized}",
            f"cells            {self.n_cells}",
            f"edges            {self.n_edges}",
            f"vertices         {self.n_vertices}",
            f"pentagons        {int(np.sum(self.vertex_valence == 5))}",
            f"f_min f_max [m]  {f.min():.6e} {f.max():.6e}",
            f"h_min h_max [m]  {h.min():.6e} {h.max():.6e}",
            f"area min max     {a.min():.6e} {a.max():.6e}",
            f"total area       {a.sum():.12e}",
        ])


def overlap_ratios(mesh, vertex):
    """``[(cell, K)]`` for the triangles around ``vertex``, counterclockwise.

    ``K = |zeta_e & T_k| / |zeta_e|`` is the fraction of the dual cell lying
    inside triangle ``k``.
    """
    n = int(mesh.vertex_valence[vertex])
    cells = mesh.vertex_cells[vertex, :n]
    ratios = mesh.kite_areas[vertex, :n] / mesh.dual_areas[vertex]
    return [(int(c), float(k)) for c, k in zip(cells, ratios)]


def circumcenters(x, faces):
    a, b, c = x[faces[:, 0]], x[faces[:, 1]], x[faces[:, 2]]
    return normalize(np.cross(b - a, c - a))


def _edge_cells_of(faces, face_edges, n_edges):
    owner = np.repeat(np.arange(len(faces)), 3)
    return owner[np.argsort(face_edges.ravel(), kind="stable")].reshape(n_edges, 2)


def _normalize_vjp(v, g):
    """Pull ``g`` back through ``v -> v / |v|``."""
    n = np.linalg.norm(v, axis=1, keepdims=True)
    u = v / n
    return (g - u * np.sum(u * g, axis=1, keepdims=True)) / n


def _offset_objective(p, faces, edges, edge_faces, scale, n_fixed):
    """Sum of squared scaled offsets between dual-edge and primal-edge midpoints.

    ``p`` holds unnormalised vertex positions (flattened); returns the value
    and its gradient with respect to ``p``.
    """
    P = p.reshape(-1, 3)
    x = normalize(P)
    p0, p1, p2 = x[faces[:, 0]], x[faces[:, 1]], x[faces[:, 2]]
    w = np.cross(p1 - p0, p2 - p0)
    c = normalize(w)
    s = c[edge_faces[:, 0]] + c[edge_faces[:, 1]]
    ab = x[edges[:, 0]] + x[edges[:, 1]]
    o = (normalize(s) - normalize(ab)) / scale[:, None]
    value = float(np.sum(o * o))

    gd = 2.0 * o / scale[:, None]
    gs = _normalize_vjp(s, gd)
    gc = np.zeros_like(c)
    np.add.at(gc, edge_faces[:, 0], gs)
    np.add.at(gc, edge_faces[:, 1], gs)
    gw = _normalize_vjp(w, gc)
    gx = np.zeros_like(x)
    np.add.at(gx, faces[:, 0], np.cross(p1 - p2, gw))
    np.add.at(gx, faces[:, 1], np.cross(p2 - p0, gw))
    np.add.at(gx, faces[:, 2], np.cross(p0 - p1, gw))
    gm = _normalize_vjp(ab, -gd)
    np.add.at(gx, edges[:, 0], gm)
    np.add.at(gx, edges[:, 1], gm)
    gp = _normalize_vjp(P, gx)
    gp[:n_fixed] = 0.0
    return value, gp.ravel()


def dual_edge_offsets(x, faces):
    """Per-edge distance between the dual-edge midpoint and the primal-edge
    midpoint, relative to the dual edge length."""
    edges, face_edges = _unique_edges(faces)
    ef = _edge_cells_of(faces, face_edges, len(edges))
    c = circumcenters(x, faces)
    d = normalize(c[ef[:, 0]] + c[ef[:, 1]])
    m = normalize(x[edges[:, 0]] + x[edges[:, 1]])
    return arc_length(d, m) / arc_length(c[ef[:, 0]], c[ef[:, 1]])


def optimize_vertices(x, faces, max_iter=1000, n_fixed=12):
    """Move vertices so that primal edges come close to bisecting their dual edges.

    Minimises the squared offsets of :func:`dual_edge_offsets` (scaled by the
    initial dual edge lengths) with L-BFGS.  The first ``n_fixed`` vertices,
    the icosahedron corners, stay put.
    """
    from scipy.optimize import minimize

    edges, face_edges = _unique_edges(faces)
    ef = _edge_cells_of(faces, face_edges, len(edges))
    c = circumcenters(x, faces)
    scale = np.linalg.norm(c[ef[:, 0]] - c[ef[:, 1]], axis=1)
    res = minimize(_offset_objective, x.ravel(), args=(faces, edges, ef, scale, n_fixed),
                   jac=True, method="L-BFGS-B",
                   options=dict(maxiter=max_iter, gtol=1e-12, ftol=1e-15))
    return normalize(res.x.reshape(-1, 3)), {"iterations": int(res.nit)}


def build_mesh(level, radius_m=6.37122e6, optimize=False, max_level=MAX_LEVEL):
    """Build the level-``level`` icosahedral mesh (``20 * 4**(level-1)`` cells)."""
    level = int(level)
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if level > max_level:
        raise MeshResourceError(
            f"level {level} exceeds the configured bound max_level={max_level} "
            f"({20 * 4 ** (level - 1)} cells)")
    x, faces = _icosahedron()
    for _ in range(level - 1):
        x, faces = _subdivide(x, faces)
    meta = {}
    if optimize:
        before = float(np.sqrt(np.mean(dual_edge_offsets(x, faces) ** 2)))
        x, info = optimize_vertices(x, faces)
        info["rms_offset_before"] = before
        info["rms_offset_after"] = float(np.sqrt(np.mean(dual_edge_offsets(x, faces) ** 2)))
        meta.update(info)
    return _assemble(level, float(radius_m), x, faces, optimize, meta)


def _assemble(level, R, x, faces, optimized, meta):
    nc = len(faces)
    nv = len(x)
    edge_verts, face_edges = _unique_edges(faces)
    ne = len(edge_verts)

    edge_cells = np.sort(_edge_cells_of(faces, face_edges, ne), axis=1)

    other = np.where(edge_cells[face_edges, 0] == np.arange(nc)[:, None],
                     edge_cells[face_edges, 1], edge_cells[face_edges, 0])
    cell_edge_signs = np.where(edge_cells[face_edges, 0] == np.arange(nc)[:, None], 1, -1)

    centers = circumcenters(x, faces)
    a, b, c = x[faces[:, 0]], x[faces[:, 1]], x[faces[:, 2]]
    cell_areas = spherical_triangle_area(a, b, c) * R**2

    pa, pb = x[edge_verts[:, 0]], x[edge_verts[:, 1]]
    mids = normalize(pa + pb)
    normals = normalize(np.cross(pa, pb))
    ci, cj = centers[edge_cells[:, 0]], centers[edge_cells[:, 1]]
    flip = np.einsum("ij,ij->i", normals, cj - ci) < 0
    normals[flip] *= -1.0
    edge_lengths = arc_length(pa, pb) * R
    dual_lengths = arc_length(ci, cj) * R

    # zeta_minus lies in the direction of (outward radial) x (normal)
    t = np.cross(mids, normals)
    a_is_minus = np.einsum("ij,ij->i", pa - mids, t) > 0
    edge_vertices = np.where(a_is_minus[:, None], edge_verts, edge_verts[:, ::-1])

    # vertex -> incident cells in counterclockwise order
    corner_v = faces.ravel()
    corner_c = np.repeat(np.arange(nc), 3)
    p = x[corner_v]
    ref = np.where(np.abs(p[:, 2:3]) < 0.9, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    t1 = normalize(np.cross(ref, p))
    t2 = np.cross(p, t1)
    d = centers[corner_c] - p
    ang = np.arctan2(np.einsum("ij,ij->i", d, t2), np.einsum("ij,ij->i", d, t1))
    order = np.lexsort((ang, corner_v))
    sv, sc = corner_v[order], corner_c[order]
    valence = np.bincount(corner_v, minlength=nv)
    start = np.concatenate([[0], np.cumsum(valence)[:-1]])
    slot = np.arange(len(sv)) - start[sv]
    vertex_cells = -np.ones((nv, 6), dtype=np.int64)
    vertex_cells[sv, slot] = sc

    # kites: intersection of dual cell v with triangle c
    local = np.argmax(faces[sc] == sv[:, None], axis=1)
    va = x[sv]
    na = x[faces[sc, (local + 1) % 3]]
    nb = x[faces[sc, (local + 2) % 3]]
    ma, mb = normalize(va + na), normalize(va + nb)
    cc = centers[sc]
    kite = (spherical_triangle_area(va, ma, cc) + spherical_triangle_area(va, cc, mb)) * R**2
    kite_areas = np.zeros((nv, 6))
    kite_areas[sv, slot] = kite
    dual_areas = kite_areas.sum(axis=1)

    # dual boundary: edge between consecutive cells around each vertex
    nxt_slot = (slot + 1) % valence[sv]
    nxt_c = vertex_cells[sv, nxt_slot]
    key_edges = edge_cells[:, 0] * nc + edge_cells[:, 1]
    key_order = np.argsort(key_edges)
    lo, hi = np.minimum(sc, nxt_c), np.maximum(sc, nxt_c)
    eidx = key_order[np.searchsorted(key_edges[key_order], lo * nc + hi)]
    vertex_edges = -np.ones((nv, 6), dtype=np.int64)
    vertex_edges[sv, slot] = eidx
    vertex_edge_signs = np.zeros((nv, 6))
    vertex_edge_signs[sv, slot] = np.where(sc < nxt_c, 1.0, -1.0)

    # wings of each edge for the vorticity flux term
    kite_key = sv * nc + sc
    korder = np.argsort(kite_key)
    kite_sorted_keys, kite_sorted = kite_key[korder], kite[korder]

    def kite_of(v, cell):
        return kite_sorted[np.searchsorted(kite_sorted_keys, v * nc + cell)]

    wing_edges = np.empty((ne, 4), dtype=np.int64)
    wing_signs = np.empty((ne, 4))
    wing_cells = np.empty((ne, 4), dtype=np.int64)
    wing_kites = np.empty((ne, 4))
    eids = np.arange(ne)
    for s, (side, vert) in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
        own = edge_cells[:, side]
        v = edge_vertices[:, vert]
        ce = face_edges[own]                       # (ne, 3)
        touches = (edge_verts[ce, 0] == v[:, None]) | (edge_verts[ce, 1] == v[:, None])
        pick = np.argmax(touches & (ce != eids[:, None]), axis=1)
        wing_edges[:, s] = ce[eids, pick]
        wing_signs[:, s] = cell_edge_signs[own, pick]
        wing_cells[:, s] = other[own, pick]
        wing_kites[:, s] = kite_of(v, own)

    meta = dict(meta)
    return Mesh(
        level=level, radius_m=R, vertices=x, cell_vertices=faces.astype(np.int64),
        cell_neighbors=other.astype(np.int64), cell_edges=face_edges.astype(np.int64),
        cell_edge_signs=cell_edge_signs.astype(float), cell_centers=centers,
        cell_areas=cell_areas, edge_cells=edge_cells.astype(np.int64),
        edge_vertices=edge_vertices.astype(np.int64), edge_lengths=edge_lengths,
        dual_lengths=dual_lengths, edge_normals=normals, edge_midpoints=mids,
        vertex_cells=vertex_cells, vertex_edges=vertex_edges,
        vertex_edge_signs=vertex_edge_signs, vertex_valence=valence,
        kite_areas=kite_areas, dual_areas=dual_areas, wing_edges=wing_edges,
        wing_signs=wing_signs, wing_cells=wing_cells, wing_kites=wing_kites,
        optimized=bool(optimized), meta=meta,
    )
