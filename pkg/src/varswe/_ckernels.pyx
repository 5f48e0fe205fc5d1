# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-step kernels; same contracts as ``varswe._pykernels``."""
import numpy as np

BACKEND = "cython"


cdef void _loop_sums(const long long[:, ::1] vedges, const double[:, ::1] vhs,
                     const double[::1] W, double[::1] out) noexcept nogil:
    cdef Py_ssize_t v, k
    cdef long long e
    cdef double acc
    for v in range(vedges.shape[0]):
        acc = 0.0
        for k in range(6):
            e = vedges[v, k]
            if e >= 0:
                acc = acc + vhs[v, k] * W[e]
        out[v] = acc


def loop_sums(geo, const double[::1] W):
    out = np.empty(geo.vertex_edges.shape[0])
    _loop_sums(geo.vertex_edges, geo.vertex_hsign, W, out)
    return out


cdef void _adv(const long long[:, ::1] ec, const long long[:, ::1] ev,
               const long long[:, ::1] we, const long long[:, ::1] wc,
               const double[:, ::1] co, const double[::1] h,
               const double[::1] q, const double[::1] V, const double[::1] D,
               double[::1] out, double scale) noexcept nogil:
    # out[e] += scale * Adv[e]
    cdef Py_ssize_t e
    cdef long long i, j
    cdef double di, dj, minus, plus
    for e in range(ec.shape[0]):
        i = ec[e, 0]
        j = ec[e, 1]
        di = D[i]
        dj = D[j]
        minus = (co[e, 0] * 0.5 * (dj + D[wc[e, 0]]) * V[we[e, 0]]
                 + co[e, 1] * 0.5 * (di + D[wc[e, 1]]) * V[we[e, 1]])
        plus = (co[e, 2] * 0.5 * (dj + D[wc[e, 2]]) * V[we[e, 2]]
                + co[e, 3] * 0.5 * (di + D[wc[e, 3]]) * V[we[e, 3]])
        out[e] += scale * (q[ev[e, 1]] * plus - q[ev[e, 0]] * minus) / (0.5 * (di + dj) * h[e])


cdef void _kin(const long long[:, ::1] ec, const long long[:, ::1] ce,
               const double[:, ::1] ck, const double[::1] h, const double[::1] V,
               double[::1] kc, double[::1] out, double scale) noexcept nogil:
    # out[e] += scale * K[e]
    cdef Py_ssize_t c, e
    cdef double v0, v1, v2
    for c in range(ce.shape[0]):
        v0 = V[ce[c, 0]]
        v1 = V[ce[c, 1]]
        v2 = V[ce[c, 2]]
        kc[c] = ck[c, 0] * v0 * v0 + ck[c, 1] * v1 * v1 + ck[c, 2] * v2 * v2
    for e in range(ec.shape[0]):
        out[e] -= scale * (kc[ec[e, 1]] - kc[ec[e, 0]]) / (2.0 * h[e])


def _vorticity(geo, const double[::1] V, const double[::1] Rbar):
    cdef Py_ssize_t n = V.shape[0], e
    cdef double[::1] w = np.empty(n)
    for e in range(n):
        w[e] = V[e] + Rbar[e]
    q = np.empty(geo.vertex_edges.shape[0])
    cdef double[::1] qv = q
    cdef const double[::1] area = geo.dual_areas
    _loop_sums(geo.vertex_edges, geo.vertex_hsign, w, qv)
    for e in range(qv.shape[0]):
        qv[e] = qv[e] / area[e]
    return q


def adv_term(geo, const double[::1] V, const double[::1] D, const double[::1] Rbar):
    q = _vorticity(geo, V, Rbar)
    out = np.zeros(V.shape[0])
    _adv(geo.edge_cells, geo.edge_vertices, geo.wing_edges, geo.wing_cells,
         geo.wing_coef, geo.h, q, V, D, out, 1.0)
    return out


def kinetic_term(geo, const double[::1] V):
    out = np.zeros(V.shape[0])
    kc = np.empty(geo.cell_edges.shape[0])
    _kin(geo.edge_cells, geo.cell_edges, geo.cell_kin, geo.h, V, kc, out, 1.0)
    return out


def momentum_tendency(geo, const double[::1] V, const double[::1] D, const double[::1] Rbar):
    """``-Adv(V, D) + K(V)`` in one pass over the edges."""
    q = _vorticity(geo, V, Rbar)
    out = np.zeros(V.shape[0])
    kc = np.empty(geo.cell_edges.shape[0])
    _kin(geo.edge_cells, geo.cell_edges, geo.cell_kin, geo.h, V, kc, out, 1.0)
    _adv(geo.edge_cells, geo.edge_vertices, geo.wing_edges, geo.wing_cells,
         geo.wing_coef, geo.h, q, V, D, out, -1.0)
    return out


def mass_flux_div(geo, const double[::1] V, const double[::1] D):
    cdef const long long[:, ::1] ce = geo.cell_edges
    cdef const long long[:, ::1] cn = geo.cell_neighbors
    cdef const double[:, ::1] cf = geo.cell_flux
    out = np.empty(ce.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t c, k
    cdef double acc, dc
    with nogil:
        for c in range(ce.shape[0]):
            dc = D[c]
            acc = 0.0
            for k in range(3):
                acc = acc + cf[c, k] * V[ce[c, k]] * 0.5 * (dc + D[cn[c, k]])
            o[c] = acc
    return out
