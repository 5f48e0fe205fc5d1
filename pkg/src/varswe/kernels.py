"""Backend selection for the per-step kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy implementation in ``_pykernels`` is used.  Set ``VARSWE_BACKEND``
to ``python`` to force the fallback (``cython`` makes a missing extension an
import error).
"""
from __future__ import annotations

import os
import weakref
from dataclasses import dataclass

import numpy as np

from . import _pykernels

_requested = os.environ.get("VARSWE_BACKEND", "auto").lower()
if _requested not in ("auto", "python", "cython"):
    raise ImportError(f"VARSWE_BACKEND must be auto, python or cython, not {_requested!r}")

_compiled = None
if _requested != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _requested == "cython":
            raise

impl = _compiled if _compiled is not None else _pykernels
BACKEND = impl.BACKEND


def available_backends():
    return {"python": _pykernels, **({"cython": _compiled} if _compiled else {})}


@dataclass(frozen=True, eq=False)
class KernelGeometry:
    """Contiguous per-mesh arrays consumed by the kernels."""

    edge_cells: np.ndarray
    edge_vertices: np.ndarray
    h: np.ndarray
    vertex_edges: np.ndarray
    vertex_hsign: np.ndarray
    dual_areas: np.ndarray
    wing_edges: np.ndarray
    wing_cells: np.ndarray
    wing_coef: np.ndarray
    cell_edges: np.ndarray
    cell_neighbors: np.ndarray
    cell_kin: np.ndarray
    cell_flux: np.ndarray


_cache = weakref.WeakKeyDictionary()


def geometry(mesh):
    geo = _cache.get(mesh)
    if geo is not None:
        return geo

    def c(a, dtype=float):
        return np.ascontiguousarray(a, dtype=dtype)

    i64 = np.int64
    h, f = mesh.dual_lengths, mesh.edge_lengths
    owner = mesh.edge_cells[:, [0, 1, 0, 1]]
    area = mesh.cell_areas
    vedges = mesh.vertex_edges
    hsign = np.where(vedges >= 0, mesh.vertex_edge_signs * h[np.maximum(vedges, 0)], 0.0)
    geo = KernelGeometry(
        edge_cells=c(mesh.edge_cells, i64),
        edge_vertices=c(mesh.edge_vertices, i64),
        h=c(h),
        vertex_edges=c(vedges, i64),
        vertex_hsign=c(hsign),
        dual_areas=c(mesh.dual_areas),
        wing_edges=c(mesh.wing_edges, i64),
        wing_cells=c(mesh.wing_cells, i64),
        wing_coef=c(mesh.wing_signs * mesh.wing_kites / (2.0 * area[owner]) * f[mesh.wing_edges]),
        cell_edges=c(mesh.cell_edges, i64),
        cell_neighbors=c(mesh.cell_neighbors, i64),
        cell_kin=c(h[mesh.cell_edges] * f[mesh.cell_edges] / (2.0 * area[:, None])),
        cell_flux=c(mesh.cell_edge_signs * f[mesh.cell_edges] / area[:, None]),
    )
    _cache[mesh] = geo
    return geo


def _vec(x):
    return np.ascontiguousarray(x, dtype=float)


def adv_term(mesh, V, D, Rbar, backend=None):
    k = impl if backend is None else available_backends()[backend]
    return k.adv_term(geometry(mesh), _vec(V), _vec(D), _vec(Rbar))


def kinetic_term(mesh, V, backend=None):
    k = impl if backend is None else available_backends()[backend]
    return k.kinetic_term(geometry(mesh), _vec(V))


def momentum_tendency(mesh, V, D, Rbar, backend=None):
    k = impl if backend is None else available_backends()[backend]
    return k.momentum_tendency(geometry(mesh), _vec(V), _vec(D), _vec(Rbar))


def mass_flux_div(mesh, V, D, backend=None):
    k = impl if backend is None else available_backends()[backend]
    return k.mass_flux_div(geometry(mesh), _vec(V), _vec(D))


def loop_sums(mesh, W, backend=None):
    k = impl if backend is None else available_backends()[backend]
    return k.loop_sums(geometry(mesh), _vec(W))
