import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from s1lab.chart_calculus import Chart, FormField
from s1lab.char_class import (ConnectionData, adiabatic_connection, cone_curvature_limit, curvature, euler_form,
                              euler_integral, hopf_euler_number, l_polynomial_integral, levi_civita, pfaffian,
                              pfaffian_matrix, s4_l_integral, s5_codim4_connection, s5_euler_integral,
                              s5_l_integral, transgression, transgression_residual)

TWO_PI = 2 * math.pi
seeds = st.integers(0, 2 ** 31)


def flat_chart(m):
    return Chart([f"x{i}" for i in range(m)], [(0, 1)] * m, lambda x: np.eye(m))


def sphere_chart(radius=0.5):
    return Chart(["theta", "phi"], [(0, math.pi), (0, TWO_PI)],
                 lambda y: radius ** 2 * np.diag([1.0, math.sin(y[0]) ** 2]), [False, True])


def random_connection(chart, n, rng):
    m = chart.dim
    upper = {}
    for I in range(n):
        for J in range(I + 1, n):
            A, B = rng.normal(size=(m, m)), rng.normal(size=m)
            upper[(I, J)] = FormField.one_form(chart, lambda x, A=A, B=B: np.sin(A @ x + B))
    return ConnectionData.from_upper(chart, upper)


# -- curvature ---------------------------------------------------------------------

def test_flat_connection_has_no_curvature():
    ch = flat_chart(2)
    conn = levi_civita(ch)
    C = curvature(conn)
    assert np.abs(C.value(0, 1, np.array([0.3, 0.6]))).max() < 1e-10
    assert abs(euler_integral(C, 8).value) < 1e-10


def test_s5_table_satisfies_structure_equations():
    conn = s5_codim4_connection()
    pts = conn.chart.sample(10, np.random.default_rng(2), shrink=0.05)
    assert conn.structure_residual(pts) < 1e-8


def test_s5_theta_phi_curvature_at_quarter_pi():
    conn = s5_codim4_connection()
    C = curvature(conn)
    th, b = 1.0, math.pi / 4
    x = np.array([th, 0.5, 0.5, b])
    e_th_e_ph = 0.25 * math.cos(b) ** 2 * math.sin(th)
    coef = C.value(0, 1, x)[0b0011].real / e_th_e_ph
    assert abs(coef - (3 / math.cos(b) ** 2 + 1)) < 1e-6
    assert abs(coef - 7) < 1e-6


def test_s5_pfaffian_at_third_pi():
    conn = s5_codim4_connection()
    th, b = 1.0, math.pi / 3
    x = np.array([th, 0.5, 0.5, b])
    c, s = math.cos(b), math.sin(b)
    # 3(1 + c^2) s e^theta ^ e^phi ^ dxi ^ dbeta on the radius-1/2 sphere factor
    expected = 3 * (1 + c * c) * s * 0.25 * math.sin(th)
    pf = pfaffian(curvature(conn)).coeffs(x)[0b1111].real
    assert abs(pf - expected) < 1e-6
    # the Levi-Civita connection of the quotient metric gives the same Euler form
    table = euler_form(curvature(conn)).coeffs(x)[0b1111].real
    lc = euler_form(curvature(levi_civita(conn.chart))).coeffs(x)[0b1111].real
    assert abs(lc - table) < 1e-8


def test_levi_civita_structure_equations():
    rng = np.random.default_rng(5)
    B = rng.normal(size=(3, 3))

    def metric(x):
        S = B * np.sin(x.sum()) * 0.2
        return np.eye(3) * (1 + x[0] ** 2) + S @ S.T
    ch = Chart(["a", "b", "c"], [(0, 1)] * 3, metric)
    conn = levi_civita(ch)
    pts = ch.sample(6, rng, shrink=0.1)
    assert conn.structure_residual(pts) < 1e-8
    assert curvature(conn).antisymmetry_residual(pts) < 1e-12


def test_connection_antisymmetry_enforced():
    ch = flat_chart(2)
    F = FormField.one_form(ch, lambda x: [1.0, 0.0])
    with pytest.raises(ValueError):
        ConnectionData(ch, [[None, F], [None, None]])
    with pytest.raises(ValueError):
        ConnectionData(ch, [[F, None], [None, None]])
    with pytest.raises(ValueError):
        ConnectionData.from_upper(ch, {(0, 0): F})


# -- Pfaffian ------------------------------------------------------------------------

def skew(a, b, c, dd, e, f):
    return np.array([[0, a, b, c], [-a, 0, dd, e], [-b, -dd, 0, f], [-c, -e, -f, 0]], dtype=float)


def test_pfaffian_four_by_four_formula():
    a, b, c, dd, e, f = 1.3, -0.2, 0.7, 2.1, -1.1, 0.4
    assert abs(pfaffian_matrix(skew(a, b, c, dd, e, f)) - (a * f - b * e + dd * c)) < 1e-14
    assert abs(pfaffian_matrix(skew(2.0, 0, 0, 0, 0, 3.0)) - 6.0) < 1e-14


def random_skew(n, rng):
    A = rng.normal(size=(n, n))
    return A - A.T


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 4, 6, 8]), seeds)
def test_pfaffian_laws(n, seed):
    rng = np.random.default_rng(seed)
    A = random_skew(n, rng)
    U = rng.normal(size=(n, n))
    pa = pfaffian_matrix(A)
    assert abs(pa ** 2 - np.linalg.det(A)) < 1e-9 * max(1.0, abs(np.linalg.det(A)))
    lhs = pfaffian_matrix(U @ A @ U.T)
    assert abs(lhs - np.linalg.det(U) * pa) < 1e-8 * max(1.0, abs(lhs))


def test_pfaffian_errors():
    with pytest.raises(ValueError):
        pfaffian_matrix(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        pfaffian_matrix(np.ones((2, 2)))
    conn = random_connection(flat_chart(3), 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        pfaffian(curvature(conn))


# -- Euler integrals -------------------------------------------------------------------

def test_round_sphere_gauss_bonnet():
    C = curvature(levi_civita(sphere_chart()))
    res = euler_integral(C, 32, invariant_axes=(1,))
    assert abs(res.value - 2) < 1e-8


def test_torus_euler_number_vanishes():
    ch = Chart(["u", "v"], [(0, TWO_PI), (0, TWO_PI)],
               lambda y: np.diag([1.0, (2 + math.cos(y[0])) ** 2]), [True, True])
    assert abs(euler_integral(curvature(levi_civita(ch)), 32, invariant_axes=(1,)).value) < 1e-8


def test_s5_euler_integral_and_grid_stability():
    coarse, fine = s5_euler_integral(16), s5_euler_integral(32)
    assert abs(fine.value - 2) < 1e-6
    assert abs(fine.value - coarse.value) < 1e-8


def test_hopf_euler_number():
    a, b = hopf_euler_number(16), hopf_euler_number(32)
    assert abs(b.value + 1) < 1e-6 and abs(a.value - b.value) < 1e-8


def test_euler_integral_dimension_check():
    conn = random_connection(flat_chart(4), 2, np.random.default_rng(1))
    with pytest.raises(ValueError):
        euler_integral(curvature(conn), 4)


# -- L-term ------------------------------------------------------------------------

def test_s5_l_integral_vanishes():
    full = s5_l_integral(16)
    assert abs(full.value) < 1e-8 and not full.fast_path
    assert full.max_square < 1e-8
    fast = s5_l_integral(16, fast_path=True)
    assert fast.fast_path and fast.value == 0.0


def test_s4_l_integral_vanishes():
    assert abs(s4_l_integral(12).value) < 1e-8


def test_flat_l_integral_and_dimension_error():
    C = curvature(levi_civita(flat_chart(4)))
    assert abs(l_polynomial_integral(C, 4).value) < 1e-12
    with pytest.raises(ValueError):
        l_polynomial_integral(curvature(levi_civita(flat_chart(2))), 4)


# -- transgression -----------------------------------------------------------------

def test_transgression_rank_two_on_torus():
    ch = Chart(["u", "v"], [(0, TWO_PI), (0, TWO_PI)], lambda y: np.eye(2), [True, True])
    rng = np.random.default_rng(3)
    c0, c1 = random_connection(ch, 2, rng), random_connection(ch, 2, rng)
    pts = ch.sample(5, rng, shrink=0.1)
    assert transgression_residual(c0, c1, pts, "pf") < 1e-6


@pytest.mark.parametrize("P", ["pf", "l"])
def test_transgression_rank_four(P):
    ch = flat_chart(4)
    rng = np.random.default_rng(7)
    c0, c1 = random_connection(ch, 4, rng), random_connection(ch, 4, rng)
    pts = ch.sample(3, rng, shrink=0.2)
    assert transgression_residual(c0, c1, pts, P) < 1e-6


def test_transgression_of_equal_connections_vanishes():
    ch = flat_chart(4)
    c0 = random_connection(ch, 4, np.random.default_rng(4))
    T = transgression(c0, c0, "l")
    assert np.abs(T.coeffs(np.full(4, 0.4))).max() == 0


def test_transgression_errors():
    ch = flat_chart(4)
    rng = np.random.default_rng(0)
    c4, c2 = random_connection(ch, 4, rng), random_connection(ch, 2, rng)
    with pytest.raises(ValueError):
        transgression(c4, c4, "chern")
    with pytest.raises(ValueError):
        transgression(c4, c2)
    c6 = random_connection(ch, 6, rng)
    with pytest.raises(ValueError):
        transgression(c6, c6, "pf")


# -- adiabatic path and cone limit ---------------------------------------------------

def product_chart():
    return Chart(["theta", "phi", "s"], [(0, math.pi), (0, TWO_PI), (0, 1)],
                 lambda y: np.diag([0.25, 0.25 * math.sin(y[0]) ** 2, 1.0]), [False, True, False])


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0])
def test_adiabatic_path_on_sphere_times_interval(t):
    ch = product_chart()
    lc = levi_civita(ch)
    vertical = [[None, lc.omega[0][1]], [lc.omega[1][0], None]]
    conn = adiabatic_connection(ch, vertical, [[None]], lc.coframe[:2], t)
    x = np.array([1.2, 0.3, 0.5])
    e = [f.coeffs(x) for f in lc.coframe]
    # omega^i_r(t) = t e^i
    assert np.abs(conn.value(0, 3, x) - t * e[0]).max() < 1e-14
    assert np.abs(conn.value(1, 3, x) - t * e[1]).max() < 1e-14
    # Omega^theta_phi(t) = (4 - t^2) e^theta ^ e^phi on the sphere of radius 1/2
    C = curvature(conn)
    area = 0.25 * math.sin(x[0])
    assert abs(C.value(0, 1, x)[0b011].real - (4 - t * t) * area) < 1e-7


def test_cone_curvature_limit_matches_model():
    rho = lambda z: 0.5 + 0.1 * math.sin(z)
    base = Chart(["theta", "phi", "z"], [(0, math.pi), (0, TWO_PI), (0, 3)],
                 lambda y: np.diag([rho(y[2]) ** 2, rho(y[2]) ** 2 * math.sin(y[0]) ** 2, 1.0]),
                 [False, True, False])
    diffs = cone_curvature_limit(base, 2, [1.1, 0.4, 0.5])
    assert set(diffs) == {"vertical", "radial-vertical", "mixed", "horizontal", "radial-horizontal"}
    assert max(diffs.values()) < 1e-6
