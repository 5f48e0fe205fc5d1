"""Right-hand side of the semi-discrete variational shallow-water scheme.

Momentum:   dV/dt = -Adv(V, D) + K(V) - G(D)
Continuity: dD/dt = -div(V, D)

Velocities ``V`` are edge normal components in the canonical orientation,
depths ``D`` and topography ``B`` are cell values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .operators import grad_num


class StateError(ValueError):
    """The model state left the admissible set (non-positive depth, non-finite values)."""


@dataclass
class ModelState:
    V: np.ndarray
    D: np.ndarray
    time: float = 0.0
    step: int = 0

    def copy(self):
        return ModelState(self.V.copy(), self.D.copy(), self.time, self.step)

    def validate(self):
        if not np.all(np.isfinite(self.V)):
            raise StateError("non-finite velocity")
        if not np.all(np.isfinite(self.D)):
            raise StateError("non-finite depth")
        bad = np.nonzero(self.D <= 0)[0]
        if len(bad):
            raise StateError(f"non-positive depth in cell {bad[0]} (D={self.D[bad[0]]!r})")


@dataclass(frozen=True)
class StaticFields:
    B: np.ndarray
    Rbar: np.ndarray
    g: float = 9.80616

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("gravity must be positive")
        if not np.all(np.isfinite(self.B)):
            raise ValueError("topography must be finite")


def check_edge_depth(mesh, D):
    dbar = 0.5 * (D[mesh.edge_cells[:, 0]] + D[mesh.edge_cells[:, 1]])
    bad = np.nonzero(~(dbar > 0))[0]
    if len(bad):
        raise StateError(f"non-positive edge depth on edge {bad[0]} (Dbar={dbar[bad[0]]!r})")


def adv_term(mesh, V, D, Rbar):
    """Vorticity flux term ``Adv(V, D)``."""
    D = np.asarray(D, dtype=float)
    check_edge_depth(mesh, D)
    return kernels.adv_term(mesh, V, D, Rbar)


def kinetic_term(mesh, V):
    """``K(V)``: minus the edge gradient of the cell kinetic energy."""
    return kernels.kinetic_term(mesh, V)


def grad_pressure_term(mesh, D, B, g):
    """``G(D) = g (D_j + B_j - D_i - B_i) / h_ij``."""
    return g * grad_num(mesh, np.asarray(D) + np.asarray(B))


def mass_flux_div(mesh, V, D):
    """``div(V, D)_i = (1/Omega_i) sum f V Dbar`` over the three edges of cell ``i``."""
    return kernels.mass_flux_div(mesh, V, D)


def momentum_rhs(mesh, V, D, static):
    """Full ``dV/dt``."""
    return (kernels.momentum_tendency(mesh, V, D, static.Rbar)
            - grad_pressure_term(mesh, D, static.B, static.g))


def tendencies(mesh, state, static):
    """``(dV/dt, dD/dt)`` of the semi-discrete system."""
    check_edge_depth(mesh, state.D)
    return momentum_rhs(mesh, state.V, state.D, static), -mass_flux_div(mesh, state.V, state.D)
