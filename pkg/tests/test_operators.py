from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varswe.mesh import build_mesh, normalize
from varswe.operators import (CURL_TEST, DIV_TEST, GRAD_TEST, AnalyticSurfaceOperators,
                              absolute_vorticity, coriolis_parameter, coriolis_setup,
                              curl_num, div_num, flat, grad_num, lie_algebra_entries,
                              operator_errors, tangent_projector)

seeds = st.integers(0, 2**32 - 1)
MESHES = {L: build_mesh(L) for L in (2, 3)}


def _rand(seed, n, scale=1.0):
    return scale * np.random.default_rng(seed).normal(size=n)


# -- exact identities ---------------------------------------------------------


@given(seeds, st.sampled_from([2, 3]))
def test_curl_grad_vanishes(seed, L):
    m = MESHES[L]
    g = _rand(seed, m.n_cells, 1e3)
    scale = np.max(np.abs(grad_num(m, g))) * m.dual_lengths.max() / m.dual_areas.min()
    assert np.max(np.abs(curl_num(m, grad_num(m, g)))) <= 1e-12 * scale


@given(seeds, st.sampled_from([2, 3]))
def test_summation_by_parts(seed, L):
    m = MESHES[L]
    rng = np.random.default_rng(seed)
    g, V = rng.normal(size=m.n_cells), rng.normal(size=m.n_edges)
    lhs = np.sum(m.edge_lengths * V * m.dual_lengths * grad_num(m, g))
    rhs = -np.sum(m.cell_areas * g * div_num(m, V))
    scale = np.sum(np.abs(m.edge_lengths * V * m.dual_lengths * grad_num(m, g)))
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(seeds, st.sampled_from([2, 3]))
def test_global_div_and_curl_vanish(seed, L):
    m = MESHES[L]
    V = _rand(seed, m.n_edges)
    d = m.cell_areas * div_num(m, V)
    c = m.dual_areas * curl_num(m, V)
    assert abs(d.sum()) <= 1e-12 * np.abs(d).sum()
    assert abs(c.sum()) <= 1e-12 * np.abs(c).sum()


@given(seeds)
def test_lie_algebra_constraint(seed):
    m = MESHES[3]
    V = _rand(seed, m.n_edges)
    a_ij, a_ji = lie_algebra_entries(m, V)
    i, j = m.edge_cells.T
    lhs = m.cell_areas[i] * a_ij + m.cell_areas[j] * a_ji
    assert np.max(np.abs(lhs)) <= 1e-12 * np.max(np.abs(m.cell_areas[i] * a_ij))


@given(seeds)
def test_flat_forms(seed):
    m = MESHES[2]
    V = _rand(seed, m.n_edges)
    A = flat(m, V)
    a_ij, _ = lie_algebra_entries(m, V)
    i = m.edge_cells[:, 0]
    alt = 2 * m.cell_areas[i] * m.dual_lengths / m.edge_lengths * a_ij
    assert np.allclose(A, alt, rtol=1e-13, atol=0)
    # as an antisymmetric matrix
    n = m.n_cells
    M = np.zeros((n, n))
    M[m.edge_cells[:, 0], m.edge_cells[:, 1]] = A
    M[m.edge_cells[:, 1], m.edge_cells[:, 0]] = -A
    assert np.array_equal(M, -M.T)


def test_flat_hand_case(mesh2):
    V = np.zeros(mesh2.n_edges)
    assert np.all(flat(mesh2, V) == 0)
    V[0] = 2.0
    A = flat(mesh2, V)
    assert A[0] == pytest.approx(-2.0 * mesh2.dual_lengths[0])


def test_grad_hand_case(mesh2):
    two_cells = SimpleNamespace(edge_cells=np.array([[0, 1]]), dual_lengths=np.array([1.5]))
    assert grad_num(two_cells, [0.0, 3.0])[0] == 2.0
    assert np.all(grad_num(mesh2, np.full(mesh2.n_cells, 7.0)) == 0)


def test_vorticity_linearity(mesh3):
    rng = np.random.default_rng(5)
    V1, V2 = rng.normal(size=(2, mesh3.n_edges))
    Rbar = coriolis_setup(mesh3)
    lhs = absolute_vorticity(mesh3, V1 + V2, Rbar) - absolute_vorticity(mesh3, V2, Rbar)
    assert np.allclose(lhs, absolute_vorticity(mesh3, V1, 0 * Rbar), rtol=1e-9, atol=1e-6)


# -- brute-force oracles --------------------------------------------------------


def test_div_brute_force(mesh2):
    m = mesh2
    V = _rand(11, m.n_edges)
    ref = np.zeros(m.n_cells)
    for e, (i, j) in enumerate(m.edge_cells):
        ref[i] += m.edge_lengths[e] * V[e] / m.cell_areas[i]
        ref[j] -= m.edge_lengths[e] * V[e] / m.cell_areas[j]
    assert np.allclose(div_num(m, V), ref, rtol=1e-13, atol=1e-13 * np.abs(ref).max())


def test_curl_brute_force(mesh2):
    # counterclockwise orientation decided geometrically at each vertex
    m = mesh2
    V = _rand(12, m.n_edges)
    ref = np.zeros(m.n_vertices)
    for e in range(m.n_edges):
        for v in m.edge_vertices[e]:
            p = m.vertices[v]
            sign = np.sign(np.dot(np.cross(p, m.edge_midpoints[e]), m.edge_normals[e]))
            ref[v] += sign * m.dual_lengths[e] * V[e]
    ref /= m.dual_areas
    assert np.allclose(curl_num(m, V), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


# -- analytic reference operators ---------------------------------------------------


def _points(n, seed=0):
    return normalize(np.random.default_rng(seed).normal(size=(n, 3)))


def _fd_surface_grad(g, x, eps=1e-6):
    # central differences along two tangent directions
    t1 = normalize(np.cross(x, [[0.3, 0.5, 0.8]]))
    t2 = np.cross(x, t1)
    out = 0
    for t in (t1, t2):
        d = (g(normalize(x + eps * t)) - g(normalize(x - eps * t))) / (2 * eps)
        out = out + d[:, None] * t
    return out


def test_analytic_grad_tangent_and_matches_fd():
    x = _points(50)
    gr = GRAD_TEST.grad(x)
    assert np.max(np.abs(np.einsum("ij,ij->i", gr, x))) < 1e-12
    assert np.allclose(gr, _fd_surface_grad(GRAD_TEST.scalar, x), atol=1e-7)


def test_projector():
    x = _points(10)
    P = tangent_projector(x)
    assert np.allclose(P @ P, P)
    assert np.allclose(np.einsum("nij,nj->ni", P, x), 0)


def _fd_div_curl(u, x, eps=1e-5):
    # flux and circulation around a small geodesic circle
    t1 = normalize(np.cross(x, [[0.3, 0.5, 0.8]]))
    t2 = np.cross(x, t1)
    k = 64
    th = (np.arange(k) + 0.5) * 2 * np.pi / k
    flux, circ = 0, 0
    for a in th:
        r = np.cos(a) * t1 + np.sin(a) * t2
        p = normalize(x + eps * r)
        tang = -np.sin(a) * t1 + np.cos(a) * t2
        val = u(p)
        flux = flux + np.einsum("ij,ij->i", val, r)
        circ = circ + np.einsum("ij,ij->i", val, tang)
    return flux / k * 2 / eps, circ / k * 2 / eps


@pytest.mark.parametrize("op", [DIV_TEST, CURL_TEST])
def test_analytic_div_curl_match_contour_integrals(op):
    x = _points(20, 1)
    fd_div, fd_curl = _fd_div_curl(op.vector, x)
    assert np.allclose(op.div(x), fd_div, atol=1e-4)
    assert np.allclose(op.curl(x), fd_curl, atol=1e-4)


def test_analytic_solid_body():
    u = lambda x: np.stack([-x[:, 1], x[:, 0], 0 * x[:, 0]], 1)

    def J(x):
        J = np.zeros((len(x), 3, 3))
        J[:, 0, 1], J[:, 1, 0] = -1.0, 1.0
        return J

    op = AnalyticSurfaceOperators(vector=u, jacobian=J)
    x = _points(30)
    assert np.allclose(op.div(x), 0, atol=1e-14)
    assert np.allclose(op.curl(x), 2 * x[:, 2])


# -- convergence ----------------------------------------------------------------------


def _orders(which, levels=(3, 4, 5)):
    e = np.array([operator_errors(build_mesh(L), which)[0] for L in levels])
    return e, np.log2(e[:-1] / e[1:])


def test_grad_first_order():
    e, p = _orders("grad")
    assert np.all(p > 0.9)


def test_curl_first_order():
    e, p = _orders("curl")
    assert np.all(p > 0.9)


def test_div_errors_decrease():
    e, _ = _orders("div")
    assert np.all(np.diff(e) < 0)


def test_solid_body_divergence_vanishes_under_refinement():
    errs = []
    for L in (3, 4, 5):
        m = build_mesh(L)
        V = np.einsum("ij,ij->i", np.stack([-m.edge_midpoints[:, 1], m.edge_midpoints[:, 0],
                                             0 * m.edge_midpoints[:, 0]], 1), m.edge_normals)
        errs.append(np.max(np.abs(div_num(m, V))) * m.radius_m)
    assert errs[0] < 0.1 and np.all(np.diff(errs) < 0)


def test_unknown_operator(mesh2):
    with pytest.raises(ValueError):
        operator_errors(mesh2, "laplace")


# -- Coriolis ------------------------------------------------------------------------


def test_coriolis_zero_rotation(mesh3):
    R = coriolis_setup(mesh3, 0.0)
    assert np.all(R == 0)
    assert np.all(coriolis_parameter(mesh3, R) == 0)
    with pytest.raises(ValueError):
        coriolis_setup(mesh3, -1.0)


def test_coriolis_parameter_converges():
    om = 7.292e-5
    errs, pole = [], []
    for L in (3, 4, 5, 6):
        m = build_mesh(L)
        f = coriolis_parameter(m, coriolis_setup(m, om))
        errs.append(np.max(np.abs(f - 2 * om * m.vertices[:, 2])))
        pole.append(f[0])
        eq = np.abs(m.vertices[:, 2]) < 1e-12
        assert np.all(np.abs(f[eq]) <= errs[-1])
    assert np.all(np.diff(errs) < 0)
    assert abs(pole[-1] - 2 * om) < abs(pole[0] - 2 * om) or abs(pole[-1] - 2 * om) < 1e-9 * om
    assert pole[-1] == pytest.approx(1.4584e-4, rel=1e-3)


def test_rest_vorticity_equals_coriolis(mesh3):
    Rbar = coriolis_setup(mesh3)
    w = absolute_vorticity(mesh3, np.zeros(mesh3.n_edges), Rbar) / mesh3.dual_areas
    assert np.array_equal(w, coriolis_parameter(mesh3, Rbar))
