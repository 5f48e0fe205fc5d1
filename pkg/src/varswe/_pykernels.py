"""Vectorised numpy implementation of the per-step kernels.

Reference backend; ``_ckernels`` must reproduce these results to round-off.
Every function takes a :class:`varswe.kernels.KernelGeometry` first.
"""
import numpy as np

BACKEND = "python"


def loop_sums(geo, W):
    """Dual-cell loop sums ``sum(sign * h * W)`` over each vertex boundary."""
    w = np.where(geo.vertex_edges >= 0, W[geo.vertex_edges], 0.0)
    return np.sum(geo.vertex_hsign * w, axis=1)


def adv_term(geo, V, D, Rbar):
    i, j = geo.edge_cells[:, 0], geo.edge_cells[:, 1]
    q = loop_sums(geo, V + Rbar) / geo.dual_areas
    qm = q[geo.edge_vertices[:, 0]]
    qp = q[geo.edge_vertices[:, 1]]
    we, wc, co = geo.wing_edges, geo.wing_cells, geo.wing_coef
    # partner cell for the D-bar of each wing: j for wings of T_i, i for wings of T_j
    partner = np.stack([D[j], D[i], D[j], D[i]], axis=1)
    flux = co * 0.5 * (partner + D[wc]) * V[we]
    minus = flux[:, 0] + flux[:, 1]
    plus = flux[:, 2] + flux[:, 3]
    dbar = 0.5 * (D[i] + D[j])
    return (qp * plus - qm * minus) / (dbar * geo.h)


def kinetic_term(geo, V):
    k = np.sum(geo.cell_kin * V[geo.cell_edges] ** 2, axis=1)
    i, j = geo.edge_cells[:, 0], geo.edge_cells[:, 1]
    return -(k[j] - k[i]) / (2.0 * geo.h)


def momentum_tendency(geo, V, D, Rbar):
    """``-Adv(V, D) + K(V)``."""
    return kinetic_term(geo, V) - adv_term(geo, V, D, Rbar)


def mass_flux_div(geo, V, D):
    dbar = 0.5 * (D[:, None] + D[geo.cell_neighbors])
    return np.sum(geo.cell_flux * V[geo.cell_edges] * dbar, axis=1)
