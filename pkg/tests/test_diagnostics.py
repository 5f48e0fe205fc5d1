import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import random_state
from varswe.dynamics import ModelState, StateError, StaticFields
from varswe.mesh import build_mesh, normalize, spherical_triangle_area
from varswe.operators import coriolis_parameter, coriolis_setup
from varswe.diagnostics import (COLUMNS, DiagnosticsSeries, UndefinedNormError, absolute_norms,
                                dual_depth, error_norms, kinetic_energy, mass,
                                potential_circulation, potential_energy, potential_enstrophy,
                                read_diagnostics_csv, reconstruct_cell_velocity, total_energy)

M3 = build_mesh(3)
seeds = st.integers(0, 2**32 - 1)


# -- energy ----------------------------------------------------------------------------


def test_energy_trivial_cases(mesh3):
    Z = np.zeros(mesh3.n_edges)
    D = np.full(mesh3.n_cells, 2.0)
    assert kinetic_energy(mesh3, Z, D) == 0.0
    area = math.fsum(mesh3.cell_areas)
    assert potential_energy(mesh3, D, np.zeros_like(D), 10.0) == pytest.approx(20.0 * area, rel=1e-14)
    # only the surface height matters
    assert potential_energy(mesh3, D - 1, np.ones_like(D), 10.0) == pytest.approx(20.0 * area, rel=1e-14)


@given(seeds, st.floats(0.1, 10.0))
def test_kinetic_energy_homogeneity(seed, a):
    V, D = random_state(M3, seed)
    ke = kinetic_energy(M3, V, D)
    assert ke > 0
    assert kinetic_energy(M3, a * V, D) == pytest.approx(a * a * ke, rel=1e-13)
    assert kinetic_energy(M3, V, a * D) == pytest.approx(a * ke, rel=1e-13)


def test_kinetic_energy_edge_loop(mesh2):
    V, D = random_state(mesh2, 3)
    ref = 0.0
    for e, (i, j) in enumerate(mesh2.edge_cells):
        ref += 0.25 * (D[i] + D[j]) * mesh2.dual_lengths[e] * mesh2.edge_lengths[e] * V[e] ** 2
    assert kinetic_energy(mesh2, V, D) == pytest.approx(ref, rel=1e-13)
    assert total_energy(mesh2, V, D, 0 * D, 9.8) == pytest.approx(
        ref + potential_energy(mesh2, D, 0 * D, 9.8), rel=1e-14)


# -- enstrophy, mass, circulation ----------------------------------------------------------


def test_potential_enstrophy_brute_force(mesh2):
    V, D = random_state(mesh2, 4)
    Rbar = coriolis_setup(mesh2)
    loops = np.zeros(mesh2.n_vertices)
    for e in range(mesh2.n_edges):
        for v in mesh2.edge_vertices[e]:
            p = mesh2.vertices[v]
            sign = np.sign(np.dot(np.cross(p, mesh2.edge_midpoints[e]), mesh2.edge_normals[e]))
            loops[v] += sign * mesh2.dual_lengths[e] * (V[e] + Rbar[e])
    ref = 0.0
    for v in range(mesh2.n_vertices):
        h = 0.0
        p = mesh2.vertices[v]
        for c in range(mesh2.n_cells):
            if v in mesh2.cell_vertices[c]:
                a, b = [mesh2.vertices[u] for u in mesh2.cell_vertices[c] if u != v]
                kite = (spherical_triangle_area(p, normalize(p + a), mesh2.cell_centers[c])
                        + spherical_triangle_area(p, mesh2.cell_centers[c], normalize(p + b)))
                h += kite * mesh2.radius_m**2 / mesh2.dual_areas[v] * D[c]
        q = loops[v] / mesh2.dual_areas[v] / h
        ref += 0.5 * mesh2.dual_areas[v] * h * q * q
    assert potential_enstrophy(mesh2, V, D, Rbar) == pytest.approx(ref, rel=1e-12)


def test_potential_enstrophy_at_rest(mesh3):
    Rbar = coriolis_setup(mesh3)
    D = np.full(mesh3.n_cells, 1000.0)
    f = coriolis_parameter(mesh3, Rbar)
    ref = math.fsum(0.5 * mesh3.dual_areas * f**2 / 1000.0)
    assert potential_enstrophy(mesh3, np.zeros(mesh3.n_edges), D, Rbar) == pytest.approx(ref, rel=1e-12)


def test_dual_depth_constant(mesh3):
    assert np.allclose(dual_depth(mesh3, np.full(mesh3.n_cells, 3.0)), 3.0, rtol=1e-14)


def test_enstrophy_rejects_bad_depth(mesh2):
    V, D = random_state(mesh2, 1)
    with pytest.raises(StateError):
        potential_enstrophy(mesh2, V, -D, coriolis_setup(mesh2))


def test_mass_of_unit_depth(mesh3):
    R = mesh3.radius_m
    assert mass(mesh3, np.ones(mesh3.n_cells)) == pytest.approx(4 * np.pi * R * R, rel=1e-12)


@given(seeds)
def test_circulation_is_rotation_only(seed):
    V, _ = random_state(M3, seed)
    Rbar = coriolis_setup(M3)
    scale = math.fsum(np.abs(M3.circulation_matrix @ (V + Rbar)))
    assert abs(potential_circulation(M3, V, Rbar) - potential_circulation(M3, 0 * V, Rbar)) <= 1e-12 * scale


@given(seeds)
def test_invariants_permutation_invariant(seed):
    # fsum makes the totals independent of summation order
    V, D = random_state(M3, seed)
    w = 0.5 * M3.cell_areas * D**2
    p = np.random.default_rng(seed).permutation(len(w))
    assert math.fsum(w) == math.fsum(w[p])


# -- error norms ----------------------------------------------------------------------------


def test_error_norms_hand_case():
    u0, u, w = np.array([1.0, 0.0]), np.array([1.0, 1.0]), np.array([2.0, 3.0])
    linf, l2 = error_norms(None, u, u0, w)
    assert linf == 1.0
    assert l2 == pytest.approx(3.0 / math.sqrt(2.0), rel=1e-15)
    assert absolute_norms(None, u, u0, w) == (1.0, 3.0)


def test_error_norms_properties(mesh3):
    u0 = np.random.default_rng(0).uniform(1, 2, mesh3.n_cells)
    assert error_norms(mesh3, u0, u0) == (0.0, 0.0)
    assert error_norms(mesh3, 2 * u0, u0)[0] == 1.0
    with pytest.raises(UndefinedNormError):
        error_norms(mesh3, u0, np.zeros_like(u0))
    with pytest.raises(ValueError):
        error_norms(mesh3, u0[:-1], u0)


# -- velocity reconstruction ---------------------------------------------------------------


def test_reconstruction_zero(mesh3):
    u, s = reconstruct_cell_velocity(mesh3, np.zeros(mesh3.n_edges))
    assert not np.any(u) and not np.any(s)


def test_reconstruction_is_linear(mesh3):
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, mesh3.n_edges))
    ua = reconstruct_cell_velocity(mesh3, a)[0]
    ub = reconstruct_cell_velocity(mesh3, b)[0]
    assert np.allclose(reconstruct_cell_velocity(mesh3, 2 * a + b)[0], 2 * ua + ub, atol=1e-12)
    # tangent to the sphere
    assert np.max(np.abs(np.einsum("ij,ij->i", ua, mesh3.cell_centers))) < 1e-12


def test_reconstruction_converges():
    u = lambda x: np.stack([-x[:, 1], x[:, 0], 0 * x[:, 0]], 1)
    errs = []
    for L in (3, 4, 5):
        m = build_mesh(L)
        V = np.einsum("ij,ij->i", u(m.edge_midpoints), m.edge_normals)
        errs.append(np.max(np.abs(reconstruct_cell_velocity(m, V)[0] - u(m.cell_centers))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 0.8), orders


# -- time series ---------------------------------------------------------------------------


def test_series_and_csv_round_trip(tmp_path, mesh3):
    V, D = random_state(mesh3, 5)
    static = StaticFields(np.zeros(mesh3.n_cells), coriolis_setup(mesh3))
    s = DiagnosticsSeries(mesh3, static, compare_to_initial=True)
    r0 = s.record(ModelState(V, D))
    assert r0.mass_rel_err == 0 and r0.D_linf == 0 and r0.V_linf == 0
    r1 = s.record(ModelState(V, D * 1.01, step=1, time=100.0))
    assert r1.mass_rel_err == pytest.approx(0.01, rel=1e-10)
    assert r1.D_linf == pytest.approx(0.01, rel=1e-10)
    with pytest.raises(ValueError):
        s.record(ModelState(V, D, step=0, time=0.0))
    p = tmp_path / "d.csv"
    s.write_csv(p)
    assert tuple(p.read_text().splitlines()[0].split(",")) == COLUMNS
    back = read_diagnostics_csv(p)
    assert back == s.records
    assert np.array_equal(s.column("energy"), [r.energy for r in back])


def test_series_zero_reference_speed(mesh3):
    static = StaticFields(np.zeros(mesh3.n_cells), coriolis_setup(mesh3))
    D = np.full(mesh3.n_cells, 100.0)
    s = DiagnosticsSeries(mesh3, static, compare_to_initial=True)
    s.record(ModelState(np.zeros(mesh3.n_edges), D))
    V = np.zeros(mesh3.n_edges)
    V[0] = 1e-3
    r = s.record(ModelState(V, D, step=1, time=1.0))
    assert 0 < r.V_linf < 1e-2


def test_read_rejects_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_diagnostics_csv(p)
