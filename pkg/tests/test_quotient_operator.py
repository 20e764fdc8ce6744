import math

import numpy as np
import pytest

from s1lab.chart_calculus import Chart
from s1lab.quotient_operator import (QuotientAlgebraFields, anticommutator_checks, conjugated_operator,
                                     conjugation_check, dirac_schrodinger, dirac_square_check,
                                     hodge_dirac_operator, pushdown_blocks, upstairs_check)
from s1lab.s1_geometry import QuotientData, S1Geometry, load_example

TWO_PI = 2 * math.pi


def g0(t):
    return math.sin(2 * t) + 0.3 * math.cos(t)


def dg0(t):
    return 2 * math.cos(2 * t) - 0.3 * math.sin(t)


def g1(t):
    return math.exp(-t) * math.cos(3 * t)


def dg1(t):
    return -math.exp(-t) * (math.cos(3 * t) + 3 * math.sin(3 * t))


def section(y):
    t = y[0]
    return np.array([g0(t), g1(t)], dtype=complex)


@pytest.mark.parametrize("name, pot", [("sphere", lambda t: 0.5 / math.tan(t)), ("plane", lambda t: 0.5 / t)])
def test_golden_first_order_operator(name, pot):
    # [[0, -d - p], [d - p, 0]] on (g0, g1 dt), p = cot/2 or 1/(2r)
    op = dirac_schrodinger(load_example(name).geometry, include_phi0=False)
    Du = op(section)
    for t in (0.4, 0.9, 1.7):
        expected = [-dg1(t) - pot(t) * g1(t), dg0(t) - pot(t) * g0(t)]
        assert np.abs(Du(np.array([t])) - expected).max() < 1e-8


@pytest.mark.parametrize("name", ["plane", "sphere"])
def test_golden_square(name):
    geom = load_example(name).geometry
    op = dirac_schrodinger(geom, include_phi0=False)
    lap = hodge_dirac_operator(geom.quotient.chart)
    square, delta = op(op(section)), lap(lap(section))
    for t in (0.5, 1.1, 1.9):
        y = np.array([t])
        if name == "plane":
            pot = np.array([1 / (2 * t * t) * (0.5 - 1), 1 / (2 * t * t) * (0.5 + 1)])
        else:
            c, csc2 = 1 / math.tan(t), 1 / math.sin(t) ** 2
            pot = 0.5 * np.array([0.5 * c * c - csc2, 0.5 * c * c + csc2])
        assert np.abs(square(y) - (delta(y) + pot * section(y))).max() < 1e-8


def test_sphere_conjugated_blocks():
    geom = load_example("sphere").geometry
    T = conjugated_operator(geom)
    f = QuotientAlgebraFields(geom)
    for t in (0.3, 1.2, 2.5):
        y = np.array([t])
        alg = f.algebra(y)
        ch = alg.clifford_hat(alg.one_form([1.0])).matrix
        Z = T.zero_order_at(y)
        cot = 1 / math.tan(t)
        assert np.abs(Z[:2, :2] + 0.5 * cot * ch).max() < 1e-10
        assert np.abs(Z[2:, 2:] - 0.5 * cot * ch).max() < 1e-10
        assert np.abs(Z[:2, 2:]).max() < 1e-12 and np.abs(Z[2:, :2]).max() < 1e-12


def test_torus_pushdown_on_one_forms():
    R, r = 2.0, 1.0
    geom = load_example("torus").geometry
    op = pushdown_blocks(geom)
    pair = lambda y: np.array([0, math.cos(y[0]), 0, 0], dtype=complex)
    out = op(pair)
    for u in (0.3, 1.4, 4.0):
        expected = math.sin(u) * math.cos(u) / (r * (R + r * math.cos(u))) + math.sin(u) / r ** 2
        assert abs(out(np.array([u]))[0] - expected) < 1e-8


def flat_geometry():
    chart = Chart(["u", "v"], [(0, TWO_PI), (0, TWO_PI)], lambda x: np.eye(2), [True, True])
    qchart = Chart(["u"], [(0, TWO_PI)], lambda y: np.eye(1), [True])
    q = QuotientData(qchart, np.array([[1.0, 0.0]]), np.zeros(1), np.array([[1.0], [0.0]]), np.zeros(2))
    return S1Geometry(chart, [0.0, 1.0], q, name="flat")


def test_trivial_geometry_gives_plain_operator():
    geom = flat_geometry()
    for op in (pushdown_blocks(geom), conjugated_operator(geom), dirac_schrodinger(geom, True)):
        for u in (0.2, 3.0):
            assert np.abs(op.zero_order_at(np.array([u]))).max() < 1e-12
    assert anticommutator_checks(geom, [[0.5], [2.0]]).passed


@pytest.mark.parametrize("name", ["s5_codim4", "s5_codim2", "hopf", "sphere"])
def test_anticommutators(name):
    geom = load_example(name).geometry
    pts = geom.quotient.chart.sample(20, np.random.default_rng(0))
    rep = anticommutator_checks(geom, pts, tol=1e-12)
    assert rep.passed, rep.residuals


def test_symbol_squares_to_minus_norm():
    geom = load_example("s5_codim4").geometry
    op = dirac_schrodinger(geom, include_phi0=True)
    rng = np.random.default_rng(3)
    for y in geom.quotient.chart.sample(10, rng):
        xi = rng.normal(size=4)
        s = op.symbol(y, xi)
        norm2 = xi @ np.linalg.solve(geom.quotient.chart.metric(y), xi)
        # sigma = -i c(xi) and c(xi)^2 = -|xi|^2, so sigma^2 = |xi|^2
        assert np.abs(s @ s - norm2 * np.eye(len(s))).max() < 1e-10


def test_hopf_induced_operator_is_plain():
    geom = load_example("hopf").geometry
    op = dirac_schrodinger(geom, include_phi0=True)
    for y in geom.quotient.chart.sample(8, np.random.default_rng(1)):
        assert np.abs(op.zero_order_at(y)).max() < 1e-10


def test_square_law_and_conjugation():
    geom = load_example("sphere").geometry
    pts = [[0.6], [1.3], [2.2]]
    u = lambda y: np.array([math.cos(y[0]) ** 2, math.sin(3 * y[0])], dtype=complex)
    assert dirac_square_check(geom, u, pts).passed
    pair = lambda y: np.array([math.sin(y[0]), 0.2, math.cos(y[0]), math.sin(2 * y[0])], dtype=complex)
    assert conjugation_check(geom, pair, pts).passed


def test_pushdown_matches_total_space_operator():
    geom = load_example("torus").geometry
    pair = lambda y: np.array([math.sin(y[0]), math.cos(2 * y[0]), 0.5, math.sin(y[0])], dtype=complex)
    assert upstairs_check(geom, pair, [[0.4], [2.0], [5.1]]).passed


def test_weighted_symmetry_on_sphere():
    # <g, S(D) f> = <S(D) g, f> in L^2(h dtheta); sin^2 factors kill the boundary terms
    geom = load_example("sphere").geometry
    T = pushdown_blocks(geom)
    h = geom.orbit_volume()
    f = lambda y: math.sin(y[0]) ** 2 * np.array([1 + math.cos(y[0]), math.sin(2 * y[0]), 0.5,
                                                 math.cos(3 * y[0])], dtype=complex)
    g = lambda y: math.sin(y[0]) ** 2 * np.array([math.cos(y[0]), 1j, math.sin(y[0]) - 0.2,
                                                 math.exp(math.cos(y[0]))], dtype=complex)
    Tf, Tg = T(f), T(g)
    x, w = np.polynomial.legendre.leggauss(60)
    t, w = 0.5 * math.pi * (x + 1), 0.5 * math.pi * w
    lhs = sum(wi * np.vdot(g([ti]), Tf([ti])) * h(np.array([ti]))[0] for ti, wi in zip(t, w))
    rhs = sum(wi * np.vdot(Tg([ti]), f([ti])) * h(np.array([ti]))[0] for ti, wi in zip(t, w))
    assert abs(lhs - rhs) < 1e-6 * max(1.0, abs(lhs))
