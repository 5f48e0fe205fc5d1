"""Discrete gradient, divergence, curl, flat and vorticity operators.

Discrete operators act on plain arrays (or field containers) and return
numpy arrays indexed like the mesh entity they live on.  The analytic
surface operators used as references are in :class:`AnalyticSurfaceOperators`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels


def _arr(x):
    return np.asarray(x, dtype=float)


def grad_num(mesh, g):
    """``(g_j - g_i) / h_ij`` on every edge, canonical orientation."""
    g = _arr(g)
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    return (g[j] - g[i]) / mesh.dual_lengths


def div_num(mesh, V):
    """Finite-volume divergence, fluxes positive out of the triangle."""
    return mesh.div_matrix @ _arr(V)


def curl_num(mesh, V):
    """Counterclockwise circulation over each dual cell divided by its area."""
    return kernels.loop_sums(mesh, V) / mesh.dual_areas


def flat(mesh, V):
    """Discrete one-form ``A_flat_ij = -h_ij V_ij`` (canonical orientation)."""
    return -mesh.dual_lengths * _arr(V)


def lie_algebra_entries(mesh, V):
    """Off-diagonal ``A_ij = -f_ij V_ij / (2 Omega_ii)`` seen from both cells.

    Returns ``(A_ij, A_ji)`` per edge in canonical orientation.
    """
    V = _arr(V)
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    f = mesh.edge_lengths
    return -f * V / (2 * mesh.cell_areas[i]), f * V / (2 * mesh.cell_areas[j])


def absolute_vorticity(mesh, V, Rbar):
    """Loop sums ``omega_e = sum h (V + Rbar)`` around each dual cell."""
    return kernels.loop_sums(mesh, _arr(V) + _arr(Rbar))


def coriolis_setup(mesh, omega=7.292e-5):
    """Edge samples of the Earth's rotation vector potential.

    ``Rbar_ij = R_vec(midpoint) . n_ij`` with ``R_vec = omega * R * (-y, x, 0)``
    in unit-sphere coordinates; its discrete curl approximates ``2 omega sin(lat)``.
    """
    if omega < 0:
        raise ValueError("rotation rate must be non-negative")
    m = mesh.edge_midpoints
    vec = omega * mesh.radius_m * np.stack([-m[:, 1], m[:, 0], np.zeros(len(m))], axis=1)
    return np.einsum("ij,ij->i", vec, mesh.edge_normals)


def coriolis_parameter(mesh, Rbar):
    """Discrete ``f`` at the vertices: loop sum of ``h Rbar`` over the dual area."""
    return kernels.loop_sums(mesh, Rbar) / mesh.dual_areas


# --------------------------------------------------------------------------
# analytic references


def tangent_projector(x):
    """``P_x = I - N N^T`` for unit normals ``x`` of shape ``(n, 3)``."""
    return np.eye(3) - x[:, :, None] * x[:, None, :]


@dataclass(frozen=True)
class AnalyticSurfaceOperators:
    """Surface operators built from ambient derivatives of extensions.

    ``gradient(x)`` returns the ambient gradient of the scalar extension and
    ``jacobian(x)`` the ambient Jacobian ``J[a, b] = d u_a / d x_b`` of the
    vector extension, both evaluated at unit points ``x``.
    """

    scalar: Callable | None = None
    gradient: Callable | None = None
    vector: Callable | None = None
    jacobian: Callable | None = None

    def grad(self, x):
        return np.einsum("nij,nj->ni", tangent_projector(x), self.gradient(x))

    def div(self, x):
        return np.einsum("nij,nji->n", tangent_projector(x), self.jacobian(x))

    def curl(self, x):
        M = np.einsum("ncl,nlb->ncb", self.jacobian(x), tangent_projector(x))
        w = np.stack([M[:, 2, 1] - M[:, 1, 2],
                      M[:, 0, 2] - M[:, 2, 0],
                      M[:, 1, 0] - M[:, 0, 1]], axis=1)
        return np.einsum("ni,ni->n", w, x)


def _grad_test():
    def g(x):
        return np.sin(x[:, 0]) + np.sin(2 * x[:, 1]) + np.sin(2 * x[:, 2])

    def dg(x):
        return np.stack([np.cos(x[:, 0]), 2 * np.cos(2 * x[:, 1]), 2 * np.cos(2 * x[:, 2])], axis=1)

    return AnalyticSurfaceOperators(scalar=g, gradient=dg)


def _div_test():
    def u(x):
        X, Y, Z = x.T
        return np.stack([X - X**3, -X**2 * Y, -X**2 * Z], axis=1)

    def J(x):
        X, Y, Z = x.T
        o = np.zeros_like(X)
        return np.stack([
            np.stack([1 - 3 * X**2, o, o], axis=1),
            np.stack([-2 * X * Y, -X**2, o], axis=1),
            np.stack([-2 * X * Z, o, -X**2], axis=1),
        ], axis=1)

    return AnalyticSurfaceOperators(vector=u, jacobian=J)


def _curl_test():
    def u(x):
        X, Y, Z = x.T
        return np.stack([Z, np.zeros_like(X), -X], axis=1)

    def J(x):
        J = np.zeros((len(x), 3, 3))
        J[:, 0, 2] = 1.0
        J[:, 2, 0] = -1.0
        return J

    return AnalyticSurfaceOperators(vector=u, jacobian=J)


GRAD_TEST = _grad_test()
DIV_TEST = _div_test()
CURL_TEST = _curl_test()


def operator_errors(mesh, which):
    """Relative L-infinity error of one discrete operator on the unit-sphere test function.

    The mesh radius is ignored: geometry is rescaled to the unit sphere.
    Returns ``(error, pointwise_absolute_error)``.
    """
    s = 1.0 / mesh.radius_m
    if which == "grad":
        op = GRAD_TEST
        g = op.scalar(mesh.cell_centers)
        num = grad_num(mesh, g) / s
        ref = np.einsum("ij,ij->i", op.grad(mesh.edge_midpoints), mesh.edge_normals)
    elif which == "div":
        op = DIV_TEST
        V = np.einsum("ij,ij->i", op.vector(mesh.edge_midpoints), mesh.edge_normals)
        num = div_num(mesh, V) / s
        ref = op.div(mesh.cell_centers)
    elif which == "curl":
        op = CURL_TEST
        V = np.einsum("ij,ij->i", op.vector(mesh.edge_midpoints), mesh.edge_normals)
        num = curl_num(mesh, V) / s
        ref = op.curl(mesh.vertices)
    else:
        raise ValueError(f"unknown operator {which!r}")
    err = np.abs(num - ref)
    return float(err.max() / np.abs(ref).max()), err
