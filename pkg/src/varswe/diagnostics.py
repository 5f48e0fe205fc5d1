"""Conserved quantities, error norms and the diagnostics time series.

All global sums use ``math.fsum`` so results are independent of summation
order and reproducible bit for bit.

Energy
------
With ``A_flat_ij = -h_ij V_ij`` and ``A_ij = -f_ij V_ij / (2 Omega_i)`` the
kinetic part of the discrete Lagrangian, summed over ordered pairs, is
``sum_i sum_j Omega_i D_i A_ij A_flat_ij / 2``.  Pairing ``(i, j)`` with
``(j, i)`` turns ``D_i`` and ``D_j`` into ``2 Dbar_ij`` on each edge, giving
``sum_edges Dbar h f V^2 / 2``.  The rotation term is linear in ``V`` and
drops out of the Legendre transform, which leaves

    E = sum_edges 1/2 Dbar h f V^2 + sum_cells g/2 (D + B)^2 Omega.

Potential enstrophy
-------------------
Defined on dual cells: ``h_e = sum_k K_ek D_k`` is the area-weighted depth
of dual cell ``e``, ``q_e = (omega_e / |zeta_e|) / h_e`` its potential
vorticity, and ``PE = sum_e |zeta_e| h_e q_e^2 / 2``.

Potential circulation
---------------------
``sum_e omega_e`` telescopes to zero up to round-off, so its drift is
reported relative to ``sum_e |omega_e|`` at the initial time.
"""
from __future__ import annotations

import csv
import math
import weakref
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernels
from .dynamics import StateError

COLUMNS = (
    "step", "time_s", "mass", "energy", "pot_enstrophy", "pot_circulation",
    "mass_rel_err", "energy_rel_err", "pot_enstrophy_rel_err", "pot_circulation_rel_err",
    "D_linf", "D_l2", "V_linf", "V_l2",
)


class UndefinedNormError(ValueError):
    """The reference field has zero norm."""


def _fsum(x):
    return math.fsum(np.asarray(x, dtype=float).ravel())


def kinetic_energy(mesh, V, D):
    V, D = np.asarray(V, dtype=float), np.asarray(D, dtype=float)
    dbar = 0.5 * (D[mesh.edge_cells[:, 0]] + D[mesh.edge_cells[:, 1]])
    return _fsum(0.5 * dbar * mesh.dual_lengths * mesh.edge_lengths * V**2)


def potential_energy(mesh, D, B, g):
    s = np.asarray(D, dtype=float) + np.asarray(B, dtype=float)
    return _fsum(0.5 * g * s**2 * mesh.cell_areas)


def total_energy(mesh, V, D, B, g):
    return kinetic_energy(mesh, V, D) + potential_energy(mesh, D, B, g)


def dual_depth(mesh, D):
    """``h_e = sum_k K_ek D_k`` for every dual cell."""
    D = np.asarray(D, dtype=float)
    cells = np.where(mesh.vertex_cells >= 0, mesh.vertex_cells, 0)
    return np.sum(mesh.overlap_ratios_padded * D[cells], axis=1)


def potential_enstrophy(mesh, V, D, Rbar):
    h = dual_depth(mesh, D)
    bad = np.nonzero(~(h > 0))[0]
    if len(bad):
        raise StateError(f"non-positive dual depth at vertex {bad[0]} (h={h[bad[0]]!r})")
    omega = kernels.loop_sums(mesh, np.asarray(V, dtype=float) + Rbar)
    q = omega / mesh.dual_areas / h
    return _fsum(0.5 * mesh.dual_areas * h * q**2)


def mass(mesh, D):
    return _fsum(mesh.cell_areas * np.asarray(D, dtype=float))


def absolute_vorticity_sums(mesh, V, Rbar):
    return kernels.loop_sums(mesh, np.asarray(V, dtype=float) + Rbar)


def potential_circulation(mesh, V, Rbar):
    return _fsum(absolute_vorticity_sums(mesh, V, Rbar))


def error_norms(mesh, u, u0, weights=None):
    """Relative ``(L_inf, L2)`` errors of ``u`` against ``u0``.

    ``L2 = sqrt(sum (w (u - u0))^2) / sqrt(sum w u0^2)`` with cell areas as
    the default weights ``w``.
    """
    u, u0 = np.asarray(u, dtype=float), np.asarray(u0, dtype=float)
    if u.shape != u0.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {u0.shape}")
    w = mesh.cell_areas if weights is None else np.asarray(weights, dtype=float)
    ref_inf = np.max(np.abs(u0))
    ref_2 = _fsum(w * u0**2)
    if ref_inf == 0 or ref_2 == 0:
        raise UndefinedNormError("reference field is identically zero")
    d = u - u0
    return float(np.max(np.abs(d)) / ref_inf), math.sqrt(_fsum((w * d) ** 2)) / math.sqrt(ref_2)


def absolute_norms(mesh, u, u0, weights=None):
    """Unnormalised ``(max |u - u0|, sqrt(sum (w (u - u0))^2))``, for zero references."""
    d = np.asarray(u, dtype=float) - np.asarray(u0, dtype=float)
    w = mesh.cell_areas if weights is None else np.asarray(weights, dtype=float)
    return float(np.max(np.abs(d))), math.sqrt(_fsum((w * d) ** 2))


# --------------------------------------------------------------------------
# cell velocity reconstruction

_RECON = weakref.WeakKeyDictionary()


def _recon_operator(mesh):
    op = _RECON.get(mesh)
    if op is None:
        c = mesh.cell_centers
        ref = np.where(np.abs(c[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
        e1 = np.cross(ref, c)
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(c, e1)
        basis = np.stack([e1, e2], axis=2)                       # (nc, 3, 2)
        n = mesh.edge_normals[mesh.cell_edges]                   # (nc, 3, 3)
        N = np.einsum("ckd,cdb->ckb", n, basis)                  # (nc, 3, 2)
        s = np.linalg.svd(N, compute_uv=False)
        if np.any(s[:, -1] < 1e-8 * s[:, 0]):
            raise RuntimeError("degenerate edge-normal set in velocity reconstruction")
        op = np.einsum("cdb,cbk->cdk", basis, np.linalg.pinv(N))  # (nc, 3, 3)
        _RECON[mesh] = op
    return op


def reconstruct_cell_velocity(mesh, V):
    """Least-squares tangent vector per cell from its three edge normal components.

    Returns ``(vectors, magnitudes)`` with shapes ``(n_cells, 3)`` and ``(n_cells,)``.
    """
    op = _recon_operator(mesh)
    u = np.einsum("cdk,ck->cd", op, np.asarray(V, dtype=float)[mesh.cell_edges])
    return u, np.linalg.norm(u, axis=1)


# --------------------------------------------------------------------------
# records


@dataclass
class DiagnosticsRecord:
    step: int
    time_s: float
    mass: float
    energy: float
    pot_enstrophy: float
    pot_circulation: float
    mass_rel_err: float = 0.0
    energy_rel_err: float = 0.0
    pot_enstrophy_rel_err: float = 0.0
    pot_circulation_rel_err: float = 0.0
    D_linf: float = math.nan
    D_l2: float = math.nan
    V_linf: float = math.nan
    V_l2: float = math.nan

    def row(self):
        return [repr(v) if isinstance(v, float) else str(v) for v in asdict(self).values()]


@dataclass
class Reference:
    """Initial invariants and (optionally) a reference state for error norms."""

    mass: float
    energy: float
    pot_enstrophy: float
    circulation_scale: float
    D: np.ndarray | None = None
    speed: np.ndarray | None = None


class DiagnosticsSeries:
    """Accumulates :class:`DiagnosticsRecord` rows for one run."""

    def __init__(self, mesh, static, compare_to_initial=False):
        self.mesh = mesh
        self.static = static
        self.compare_to_initial = compare_to_initial
        self.reference = None
        self.records: list[DiagnosticsRecord] = []

    def _invariants(self, state):
        m, s = self.mesh, self.static
        return (mass(m, state.D), total_energy(m, state.V, state.D, s.B, s.g),
                potential_enstrophy(m, state.V, state.D, s.Rbar),
                potential_circulation(m, state.V, s.Rbar))

    def record(self, state):
        mesh, s = self.mesh, self.static
        M, E, PE, C = self._invariants(state)
        if self.reference is None:
            speed = reconstruct_cell_velocity(mesh, state.V)[1]
            self.reference = Reference(
                M, E, PE, _fsum(np.abs(absolute_vorticity_sums(mesh, state.V, s.Rbar))),
                state.D.copy() if self.compare_to_initial else None,
                speed if self.compare_to_initial else None)
        ref = self.reference
        rec = DiagnosticsRecord(
            state.step, float(state.time), M, E, PE, C,
            (M - ref.mass) / ref.mass, (E - ref.energy) / ref.energy,
            (PE - ref.pot_enstrophy) / ref.pot_enstrophy,
            (C - self.records[0].pot_circulation) / ref.circulation_scale if self.records else 0.0)
        if ref.D is not None:
            rec.D_linf, rec.D_l2 = error_norms(mesh, state.D, ref.D)
            speed = reconstruct_cell_velocity(mesh, state.V)[1]
            if np.max(np.abs(ref.speed)) > 0:
                rec.V_linf, rec.V_l2 = error_norms(mesh, speed, ref.speed)
            else:
                rec.V_linf, rec.V_l2 = absolute_norms(mesh, speed, ref.speed)
        if self.records and rec.time_s < self.records[-1].time_s:
            raise ValueError("diagnostics records must be monotone in time")
        self.records.append(rec)
        return rec

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def write_csv(self, path):
        write_diagnostics_csv(path, self.records)


def write_diagnostics_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in records:
            w.writerow(r.row())


def read_diagnostics_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError(f"{path}: unexpected diagnostics header")
    names = [f.name for f in fields(DiagnosticsRecord)]
    out = []
    for r in rows[1:]:
        vals = [int(r[0])] + [float(x) for x in r[1:]]
        out.append(DiagnosticsRecord(**dict(zip(names, vals))))
    return out
