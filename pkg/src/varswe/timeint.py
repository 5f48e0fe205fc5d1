"""Time integrators.

``cayley``
    Depth advanced by the Cayley transform of the advection generator built
    from ``V^t``; momentum by a Crank-Nicolson-type fixed-point iteration
    with the pressure gradient taken at the new depth.
``crank_nicolson``
    Both equations advanced by the trapezoidal rule, solved jointly by
    fixed-point iteration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .dynamics import ModelState, StateError, grad_pressure_term

log = logging.getLogger(__name__)

SCHEMES = ("cayley", "crank_nicolson")
LINEAR_SOLVERS = ("bicgstab", "gmres", "direct")


class NumericalError(RuntimeError):
    """A time step could not be completed."""


class FixedPointError(NumericalError):
    pass


class LinearSolverError(NumericalError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "cayley"
    dt: float = 100.0
    fp_tolerance: float = 1e-10
    fp_max_iters: int = 50
    linear_solver: str = "bicgstab"
    linear_tolerance: float = 1e-12
    linear_max_iters: int = 200

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.linear_solver not in LINEAR_SOLVERS:
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.fp_tolerance > 0 or not self.linear_tolerance > 0:
            raise ValueError("tolerances must be positive")
        if self.fp_max_iters < 1 or self.linear_max_iters < 1:
            raise ValueError("iteration caps must be >= 1")


class AdvectionGenerator:
    """Sparse generator ``M`` of the discrete continuity equation, ``dD/dt = M D``.

    Off-diagonal ``M_ij = A_ij = -f_ij V_ij / (2 Omega_ii)`` (``V_ij`` outward
    from ``i``); diagonal ``M_ii = -A_ii = sum_j A_ij = -div(V)_i / 2``.
    """

    def __init__(self, mesh, V):
        V = np.asarray(V, dtype=float)
        n = mesh.n_cells
        A_off = (-0.5 * mesh.cell_edge_signs * mesh.edge_lengths[mesh.cell_edges]
                 * V[mesh.cell_edges] / mesh.cell_areas[:, None])
        rows = np.repeat(np.arange(n), 4)
        cols = np.concatenate([mesh.cell_neighbors, np.arange(n)[:, None]], axis=1).ravel()
        vals = np.concatenate([A_off, A_off.sum(axis=1, keepdims=True)], axis=1).ravel()
        self.mesh = mesh
        self.off_diagonal = A_off
        self.matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def lie_algebra_matrix(self):
        """The row-null matrix ``A`` (off-diagonal ``A_ij``, diagonal ``-sum_j A_ij``)."""
        M = self.matrix
        d = M.diagonal()
        return (M - sp.diags(2.0 * d)).tocsr()

    def __matmul__(self, D):
        return self.matrix @ D


def assemble_generator(mesh, V):
    return AdvectionGenerator(mesh, V)


def _solve(A, b, x0, cfg):
    if cfg.linear_solver == "direct":
        x = spla.spsolve(A.tocsc(), b)
    else:
        diag = A.diagonal()
        precond = spla.LinearOperator(A.shape, matvec=lambda r: r / diag)
        solver = spla.bicgstab if cfg.linear_solver == "bicgstab" else spla.gmres
        x, info = solver(A, b, x0=x0, rtol=cfg.linear_tolerance, atol=0.0,
                         maxiter=cfg.linear_max_iters, M=precond)
        if info < 0:
            raise LinearSolverError(f"{cfg.linear_solver} breakdown (info={info})")
    res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    if not res <= cfg.linear_tolerance:
        raise LinearSolverError(
            f"{cfg.linear_solver} did not reach relative residual {cfg.linear_tolerance:g} "
            f"within {cfg.linear_max_iters} iterations (residual {res:.3e})")
    return x


def cayley_depth_update(M, D, dt, cfg=None):
    """Solve ``(I - dt/2 M) D+ = (I + dt/2 M) D``."""
    cfg = cfg or IntegratorConfig(dt=dt)
    Mm = M.matrix if isinstance(M, AdvectionGenerator) else sp.csr_matrix(M)
    D = np.asarray(D, dtype=float)
    if Mm.nnz == 0 or not np.any(Mm.data):
        return D.copy()
    I = sp.identity(Mm.shape[0], format="csr")
    rhs = D + 0.5 * dt * (Mm @ D)
    return _solve((I - 0.5 * dt * Mm).tocsr(), rhs, D, cfg)


def _diverged(inc, k, state):
    return FixedPointError(f"fixed point diverged (non-finite increment) at iteration {k} "
                           f"of step {state.step + 1}")


@dataclass
class StepInfo:
    iterations: int
    increment: float


def step_cayley(mesh, state, static, cfg):
    dt = cfg.dt
    V, D = state.V, state.D
    Dn = cayley_depth_update(assemble_generator(mesh, V), D, dt, cfg)
    bad = np.nonzero(~(Dn > 0))[0]
    if len(bad):
        raise StateError(f"depth update produced non-positive depth in cell {bad[0]} "
                         f"(D={Dn[bad[0]]!r}) at step {state.step + 1}")
    T = kernels.momentum_tendency
    base = V + dt * (0.5 * T(mesh, V, D, static.Rbar) - grad_pressure_term(mesh, Dn, static.B, static.g))
    Vk = V
    for k in range(1, cfg.fp_max_iters + 1):
        Vn = base + 0.5 * dt * T(mesh, Vk, Dn, static.Rbar)
        inc = float(np.max(np.abs(Vn - Vk)))
        if not np.isfinite(inc):
            raise _diverged(inc, k, state)
        Vk = Vn
        if inc < cfg.fp_tolerance:
            break
    else:
        raise FixedPointError(
            f"momentum fixed point did not converge in {cfg.fp_max_iters} iterations "
            f"(last increment {inc:.3e}) at step {state.step + 1}")
    new = ModelState(Vk, Dn, state.time + dt, state.step + 1)
    new.validate()
    return new, StepInfo(k, inc)


def step_crank_nicolson(mesh, state, static, cfg):
    dt = cfg.dt
    V, D = state.V, state.D
    T = kernels.momentum_tendency
    div = kernels.mass_flux_div
    base_D = D - 0.5 * dt * div(mesh, V, D)
    base_V = V + 0.5 * dt * T(mesh, V, D, static.Rbar)
    Vk, Dk = V, D
    for k in range(1, cfg.fp_max_iters + 1):
        Dn = base_D - 0.5 * dt * div(mesh, Vk, Dk)
        Vn = (base_V + 0.5 * dt * T(mesh, Vk, Dn, static.Rbar)
              - dt * grad_pressure_term(mesh, Dn, static.B, static.g))
        inc = float(np.max(np.abs(Vn - Vk)) + np.max(np.abs(Dn - Dk)))
        if not np.isfinite(inc):
            raise _diverged(inc, k, state)
        Vk, Dk = Vn, Dn
        if inc < cfg.fp_tolerance:
            break
    else:
        raise FixedPointError(
            f"fixed point did not converge in {cfg.fp_max_iters} iterations "
            f"(last increment {inc:.3e}) at step {state.step + 1}")
    new = ModelState(Vk, Dk, state.time + dt, state.step + 1)
    new.validate()
    return new, StepInfo(k, inc)


STEPPERS = {"cayley": step_cayley, "crank_nicolson": step_crank_nicolson}


def step(mesh, state, static, cfg):
    return STEPPERS[cfg.scheme](mesh, state, static, cfg)
