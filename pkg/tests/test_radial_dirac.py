import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg, special

from s1lab.radial_dirac import (RadialSection, RegularSingularModel, SubspacePair, asymptotic_coefficients,
                                bessel_i_quadrature, bessel_k_quadrature, bessel_solution, classify_extensions,
                                cutoff_psi, cutoff_sequence, deficiency_indices, deficiency_scan,
                                geometric_grid, hardy_check, kato_additivity, kato_example, kato_index,
                                kernel_dimension, plane_model, scalar_vanishing_terms, scaled_i, scaled_k,
                                second_order_exponents, smooth_bump, vanishing_estimate, zeta_relations)

seeds = st.integers(0, 2 ** 31)


def random_unitary(d, rng):
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, _ = np.linalg.qr(Z)
    return Q


# -- extensions ---------------------------------------------------------------

def test_classification_examples():
    assert classify_extensions(plane_model()).essentially_self_adjoint
    free = classify_extensions(np.zeros((1, 1)))
    assert not free.essentially_self_adjoint and free.w_dimension == 1
    c = classify_extensions(np.diag([0.3, -0.7, 0.9]))
    assert c.w_dimension == 1 and np.allclose(c.small_eigenvalues, [0.3])
    assert c.relative_index(c.basis()) == 1
    assert c.relative_index(np.zeros((3, 0))) == 0
    with pytest.raises(ValueError):
        c.relative_index(np.array([[0.0], [1.0], [0.0]]))
    # the endpoints +-1/2 are not in the open interval
    assert classify_extensions(np.diag([0.5, -0.5])).essentially_self_adjoint


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_classification_is_unitarily_invariant(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 6))
    S0 = np.diag(rng.uniform(-1.5, 1.5, size=d))
    U = random_unitary(d, rng)
    a, b = classify_extensions(S0), classify_extensions(U @ S0 @ U.conj().T)
    assert np.allclose(np.sort(a.small_eigenvalues), np.sort(b.small_eigenvalues))
    assert a.w_dimension == b.w_dimension
    assert a.essentially_self_adjoint == b.essentially_self_adjoint


def test_model_validation():
    with pytest.raises(ValueError):
        RegularSingularModel(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        RegularSingularModel(np.eye(2), beta=-0.6)
    a1, a2 = np.diag([1.0, -1.0]), np.array([[0, 1], [1, 0]])
    RegularSingularModel(np.zeros((2, 2)), alpha1=a1, alpha2=a2)
    with pytest.raises(ValueError):
        RegularSingularModel(np.eye(2), alpha1=a1, alpha2=a2)  # alpha2 must anticommute with S0


# -- asymptotics ----------------------------------------------------------------

def model_with(eigs):
    return RegularSingularModel(np.diag(eigs))


def test_asymptotics_exact_basis_function():
    grid = geometric_grid(1e-4, 1e-1, 60)
    sigma = RadialSection.sample(lambda r: np.array([r ** 0.4, 0.0]), grid)
    fit = asymptotic_coefficients(model_with([-0.4, 0.8]), sigma)
    assert abs(fit.coefficients[-0.4] - 1) < 1e-10


def test_asymptotics_above_threshold():
    grid = geometric_grid(1e-4, 1e-1, 60)
    sigma = RadialSection.sample(lambda r: np.array([r ** 0.7, 0.0]), grid)
    fit = asymptotic_coefficients(model_with([-0.4, 0.8]), sigma)
    assert fit.coefficients[-0.4] == pytest.approx(0, abs=1e-8)
    assert abs(fit.remainder_exponent - 0.7) < 1e-3


def test_asymptotics_mixture():
    grid = geometric_grid(1e-4, 1e-1, 80)
    sigma = RadialSection.sample(lambda r: np.array([0.0, 1.3 * r ** -0.2 + 0.4 * r ** 0.6]), grid)
    fit = asymptotic_coefficients(model_with([0.9, 0.2]), sigma)
    assert abs(fit.coefficients[0.2] - 1.3) < 1e-6
    assert abs(fit.remainder_exponent - 0.6) < 1e-3


# -- Bessel kernel ----------------------------------------------------------------

@pytest.mark.parametrize("nu", [0.0, 0.3, 0.5, 1.5, 2.5, 7.0])
@pytest.mark.parametrize("z", [0.1, 1.0, 5.0, 30.0])
def test_scipy_bessel_against_independent_oracles(nu, z):
    exact_k = float(mpmath.besselk(nu, z) * mpmath.exp(z))
    exact_i = float(mpmath.besseli(nu, z) * mpmath.exp(-z))
    assert abs(scaled_k(nu, z) / exact_k - 1) < 1e-12
    assert abs(scaled_i(nu, z) / exact_i - 1) < 1e-12
    assert abs(bessel_k_quadrature(nu, z) / exact_k - 1) < 1e-10
    # the oscillatory integral for I cancels badly once I is tiny
    if exact_i > 1e-6:
        assert abs(bessel_i_quadrature(nu, z) / exact_i - 1) < 1e-10


@pytest.mark.parametrize("nu", [-0.5, -0.3, -1.5])
def test_negative_order(nu):
    for z in (0.2, 2.0):
        assert abs(scaled_i(nu, z) - bessel_i_quadrature(nu, z)) < 1e-10 * max(1, abs(bessel_i_quadrature(nu, z)))
        assert abs(scaled_i(nu, z) - special.iv(nu, z) * math.exp(-z)) < 1e-12


def bump_source(weights=(1.0, 0.5)):
    b = smooth_bump(0.5, 1.0)
    return lambda r: np.array([[weights[0] * b(r)], [weights[1] * b(r)]])


@pytest.mark.parametrize("a", [1.0, 0.2, -0.3, 2.5, -1.0])
def test_bessel_solution_residual(a):
    sol = bessel_solution(np.array([[a]]), 1.0, bump_source(), support=(0.5, 1.0))
    radii = np.linspace(0.3, 1.6, 14)
    assert sol.residual(radii) < 1e-6


def test_bessel_solution_is_linear():
    s1 = bessel_solution(np.array([[1.0]]), 1.0, bump_source((1.0, 0.0)), support=(0.5, 1.0))
    s2 = bessel_solution(np.array([[1.0]]), 1.0, bump_source((0.0, 1.0)), support=(0.5, 1.0))
    s12 = bessel_solution(np.array([[1.0]]), 1.0, bump_source((1.0, 1.0)), support=(0.5, 1.0))
    for r in (0.2, 0.7, 2.0):
        assert np.abs(s12(r) - s1(r) - s2(r)).max() < 1e-12


def test_bessel_small_r_decay():
    sol = bessel_solution(np.array([[1.0]]), 1.0, bump_source(), support=(0.5, 1.0))
    assert sol.small_r_exponent() >= 0.5


def test_bessel_solution_matches_homogeneous_pieces():
    sol = bessel_solution(np.array([[0.8]]), 2.0, bump_source(), support=(0.5, 1.0))
    for radii, which in (([0.1, 0.2, 0.4], 0), ([1.5, 2.5, 4.0], 1)):
        ratios = []
        for r in radii:
            h = sol.homogeneous(r)[which]
            s = sol(r)[:, 0]
            ratios.append(s / h)
        ratios = np.array(ratios)
        assert np.abs(ratios - ratios[0]).max() < 1e-8 * np.abs(ratios).max()


def test_bessel_input_errors():
    with pytest.raises(ValueError):
        bessel_solution(np.array([[1.0, 0.1], [0.1, 1.0]]), 1.0, bump_source(), support=(0.5, 1.0))
    with pytest.raises(ValueError):
        bessel_solution(np.array([[1.0]]), 1.0, bump_source())
    with pytest.raises(ValueError):
        bessel_solution(np.array([[1.0]]), -1.0, bump_source(), support=(0.5, 1.0))


# -- deficiency and kernels ------------------------------------------------------

def test_second_order_indicial_roots():
    assert second_order_exponents(0.75) == (1.5, -0.5)
    assert second_order_exponents(-0.25) == (0.5, 0.5)


def test_plane_deficiency():
    rep = deficiency_scan(plane_model(), 1j)
    assert sorted(rep.frobenius_exponents) == [-0.5, 0.5]
    assert rep.deficiency == 0
    assert deficiency_indices(plane_model()) == (0, 0)


def test_gapped_diagonal_model_has_no_deficiency():
    model = RegularSingularModel(np.diag([0.7, 1.5, -0.7, -1.5]))
    assert deficiency_indices(model) == (0, 0)


def test_small_eigenvalue_gives_deficiency():
    # r^(-0.3) is square integrable at 0, so one recessive solution survives
    model = RegularSingularModel(np.diag([0.3, 1.5, -0.3, -1.5]))
    assert deficiency_indices(model) == (1, 1)


def test_free_model_has_deficiency():
    n_plus, n_minus = deficiency_indices(plane_model(with_potential=False))
    assert n_plus >= 1 and n_minus >= 1


def test_kernel_dimension():
    assert kernel_dimension(plane_model()) == 0
    assert kernel_dimension(plane_model(), adjoint=True) == 0
    # sigma = exp(-r) solves sigma' + (0 + r) sigma / r = 0
    decaying = RegularSingularModel(np.zeros((1, 1)), s1=lambda r: np.eye(1), beta=0.0)
    assert kernel_dimension(decaying) == 1
    assert kernel_dimension(decaying, adjoint=True) == 0
    # r^(-0.7) exp(-r) fails at the origin
    singular = RegularSingularModel(np.array([[0.7]]), s1=lambda r: np.eye(1), beta=0.0)
    assert kernel_dimension(singular) == 0


# -- Kato indices ---------------------------------------------------------------

def test_kato_example():
    assert kato_example() == {"ind(H<, H>=)": 0, "ind(H<=, H>=)": 1, "ind(H<, H>)": -1}
    for n in (1, 3, 5):
        assert kato_index(SubspacePair(np.eye(n), np.eye(n))) == n


def brute_kato(X, Y):
    """dim(X cap Y) from principal angles, codim(X + Y) from the ambient dimension."""
    Qx, Qy = linalg.orth(X), linalg.orth(Y)
    d = X.shape[0]
    if Qx.shape[1] == 0 or Qy.shape[1] == 0:
        inter = 0
    else:
        cosines = np.linalg.svd(Qx.conj().T @ Qy, compute_uv=False)
        inter = int(np.sum(cosines > 1 - 1e-9))
    total = Qx.shape[1] + Qy.shape[1] - inter
    return inter - (d - total)


def random_projection(d, k, rng):
    U = random_unitary(d, rng)[:, :k]
    return U @ U.conj().T


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_kato_additivity_random(seed):
    rng = np.random.default_rng(seed)
    d = 6
    E = random_unitary(d, rng)[:, :int(rng.integers(0, d + 1))]
    P = random_projection(d, int(rng.integers(0, d + 1)), rng)
    Q = random_projection(d, int(rng.integers(0, d + 1)), rng)
    res = kato_additivity(E, P, Q)
    assert res["ind(E, ran P)"] == res["sum"] == res["ind((I-P): E -> ker P)"]
    ranP = linalg.orth(P) if np.linalg.matrix_rank(P) else np.zeros((d, 0))
    assert res["ind(E, ran P)"] == brute_kato(E, ranP)


def test_kato_with_shared_directions():
    e = np.eye(4)
    pair = SubspacePair(e[:, :2], e[:, 1:3])
    assert kato_index(pair) == 1 - 1 == brute_kato(e[:, :2], e[:, 1:3])
    with pytest.raises(ValueError):
        SubspacePair(np.array([[1.0, 2.0], [0.0, 0.0]]), e[:2, :1])


# -- zeta relations ----------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(seeds)
def test_zeta_relations(seed):
    rng = np.random.default_rng(seed)
    h, y = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    B = rng.normal(size=(y, y)) + 1j * rng.normal(size=(y, y))
    res = zeta_relations(h, B + B.conj().T, float(rng.uniform(0.1, 3)), rng.normal(size=h))
    assert max(res.values()) < 1e-12


# -- Hardy ---------------------------------------------------------------------

def test_hardy_closed_forms():
    assert hardy_check(lambda x: 0.0) == 0.0
    one = lambda x: 1.0
    # F = 1 on [0, 1] and 1/x beyond
    assert abs(hardy_check(one) - math.sqrt(2)) < 1e-12
    assert abs(hardy_check(one, p=3) - 1.5 ** (1 / 3)) < 1e-12
    with pytest.raises(ValueError):
        hardy_check(one, p=1)


def test_hardy_bound_examples():
    assert hardy_check(smooth_bump(0.0, 1.0)) < 2
    assert hardy_check(lambda x: math.exp(-x), support=(0.0, 40.0)) < 2


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(1.3, 4.0))
def test_hardy_inequality_random(seed, p):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=5)
    f = lambda x: float(np.polynomial.chebyshev.chebval(2 * x - 1, c))
    assert hardy_check(f, p=p) <= p / (p - 1) + 1e-9


# -- vanishing estimate ------------------------------------------------------------

def test_vanishing_estimate_scan():
    rep = vanishing_estimate(np.zeros((2, 2)), np.diag([1.0, -2.0]), [0.05, 0.1, 0.2, 0.4], samples=16)
    assert rep.threshold > 0 and rep.holds_up_to(rep.threshold)
    assert np.all(rep.min_ratio >= 1)


def test_vanishing_estimate_adjoint():
    rep = vanishing_estimate(np.zeros((2, 2)), np.diag([1.0, -2.0]), [0.05, 0.2], samples=16, adjoint=True)
    assert np.all(rep.min_ratio >= 1)


def test_vanishing_estimate_rejects_spectrum():
    with pytest.raises(ValueError):
        vanishing_estimate(0.0, np.diag([-0.5, 1.0]), [0.1])
    with pytest.raises(ValueError):
        vanishing_estimate(0.0, np.diag([0.5, 1.0]), [0.1], adjoint=True)


def test_scalar_reduction():
    t = 0.7
    f = lambda r: r * r * (1 - r / 2)
    df = lambda r: 2 * r - 1.5 * r * r
    terms = scalar_vanishing_terms(f, df, 1.0, t)
    assert abs(terms["norm_squared"] - terms["by_parts"]) < 1e-12
    assert terms["hardy_gap"] >= 0
    assert terms["norm_squared"] >= terms["bound"]


# -- cut-off sequence ----------------------------------------------------------------

def test_cutoff_sequence_properties():
    rep = cutoff_sequence()
    assert all(rep.vanishes_near_zero)
    for n, sup in zip(rep.n_values, rep.sup_bounds):
        assert sup <= 2 ** (1 / math.sqrt(math.log(n))) + 1e-12 and sup < 2
    assert rep.decreasing
    assert rep.pointwise_gap == sorted(rep.pointwise_gap, reverse=True)


def test_cutoff_support():
    for n in (4, 50):
        r = np.linspace(0, 1 / n, 100)
        assert np.all(cutoff_psi(n, r)[0] == 0)
    with pytest.raises(ValueError):
        cutoff_psi(1, 0.5)
