"""Operators pushed down to the orbit space, represented semi-discretely.

A section on the quotient is a function y -> vector of length copies * 2**n
(copies = 2 for pairs (w0, w1) standing for w0 + w1 ^ chi upstairs).  The first
order part of every operator here is the quotient Hodge-de Rham operator acting
copy-wise; the zero-order part is an endomorphism field.
"""

from __future__ import annotations
import math

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chart_calculus import Chart, FormField, d, hodge_dirac, partial_derivative
from .exterior_clifford import ExteriorAlgebra, _structure
from .s1_geometry import S1Geometry, pullback_matrix

Section = Callable[[np.ndarray], np.ndarray]


class FirstOrderOperator:
    """copies x (Hodge-de Rham operator) + zero_order(y) on a quotient chart."""

    def __init__(self, chart: Chart, copies: int, zero_order: Callable[[np.ndarray], np.ndarray],
                 label: str = "", step=None):
        self.chart = chart
        self.copies = copies
        self.zero_order = zero_order
        self.label = label
        self.step = step

    @property
    def rank(self) -> int:
        return self.copies * self.chart.size

    def zero_order_at(self, y) -> np.ndarray:
        return np.asarray(self.zero_order(np.asarray(y, dtype=float)), dtype=complex)

    def symbol(self, y, xi) -> np.ndarray:
        """Principal symbol -i c(xi), repeated on each copy."""
        alg = self.chart.algebra(y)
        c = alg.clifford(alg.one_form(xi)).matrix
        return np.kron(np.eye(self.copies), -1j * c)

    def derivative_part(self, u: Section) -> Section:
        size = self.chart.size
        parts = []
        for k in range(self.copies):
            field = FormField(self.chart, (lambda k: lambda y: u(y)[k * size:(k + 1) * size])(k),
                              memoize=True)
            parts.append(hodge_dirac(field, self.step))
        return lambda y: np.concatenate([p(y) for p in parts])

    def apply(self, u: Section) -> Section:
        """The section P u, memoized so that nested application stays cheap."""
        first = self.derivative_part(u)
        memo = {}

        def out(y):
            y = np.asarray(y, dtype=float)
            key = y.tobytes()
            if key not in memo:
                memo[key] = first(y) + self.zero_order_at(y) @ u(y)
            return memo[key]
        return out

    __call__ = apply


@dataclass
class QuotientAlgebraFields:
    """Pointwise endomorphisms on the quotient built from kappa-bar and phi0-bar."""

    geometry: S1Geometry

    def __post_init__(self):
        self.chart = self.geometry.quotient.chart
        self.kappa_bar = self.geometry.kappa_bar()
        self.phi0_bar = self.geometry.phi0_bar()

    def algebra(self, y) -> ExteriorAlgebra:
        return self.chart.algebra(y)

    def kappa_form(self, y):
        return self.algebra(y).form(self.kappa_bar(y))

    def phi0_form(self, y):
        return self.algebra(y).form(self.phi0_bar(y))

    def grading(self, y) -> np.ndarray:
        return self.algebra(y).grading_matrix

    def star(self, y) -> np.ndarray:
        """Basic chirality, identified with the chirality of the quotient metric."""
        return self.algebra(y).chirality_matrix

    def c_kappa(self, y) -> np.ndarray:
        alg = self.algebra(y)
        return alg.clifford(alg.form(self.kappa_bar(y))).matrix

    def chat_kappa(self, y) -> np.ndarray:
        alg = self.algebra(y)
        return alg.clifford_hat(alg.form(self.kappa_bar(y))).matrix

    def contraction_h(self, y) -> np.ndarray:
        alg = self.algebra(y)
        return alg.contraction_matrix(alg.sharp(alg.form(self.kappa_bar(y))))

    def wedge_kappa(self, y) -> np.ndarray:
        alg = self.algebra(y)
        return alg.wedge_matrix(alg.form(self.kappa_bar(y)))

    def wedge_phi0(self, y) -> np.ndarray:
        alg = self.algebra(y)
        return alg.wedge_matrix(alg.form(self.phi0_bar(y)))

    def wedge_phi0_adjoint(self, y) -> np.ndarray:
        alg = self.algebra(y)
        return alg.adjoint_matrix(self.wedge_phi0(y))

    def chat_phi0(self, y) -> np.ndarray:
        w = self.wedge_phi0(y)
        return w + self.algebra(y).adjoint_matrix(w)


def basic_chirality(geom: S1Geometry) -> Callable[[np.ndarray], np.ndarray]:
    return QuotientAlgebraFields(geom).star


def invariant_star_blocks(n: int, star_bar: np.ndarray, grading: np.ndarray) -> np.ndarray:
    """The chirality of the total space on pairs (w0, w1), in terms of the basic one."""
    phase = (1j if n % 2 == 0 else 1.0) * (-1) ** n
    eps_star = grading @ star_bar
    zero = np.zeros_like(star_bar)
    return phase * np.block([[zero, -eps_star], [eps_star, zero]])


def pushdown_blocks(geom: S1Geometry) -> FirstOrderOperator:
    """Restriction of the Hodge-de Rham operator to invariant forms, as a 2x2 block operator."""
    f = QuotientAlgebraFields(geom)

    def zero_order(y):
        eps = f.grading(y)
        star = f.star(y)
        wphi = f.wedge_phi0(y)
        return np.block([[f.contraction_h(y), eps @ wphi],
                         [-eps @ star @ wphi @ star, -f.wedge_kappa(y)]])
    return FirstOrderOperator(f.chart, 2, zero_order, "S(D)")


def conjugated_operator(geom: S1Geometry) -> FirstOrderOperator:
    """The push-down conjugated by the square root of the orbit volume."""
    f = QuotientAlgebraFields(geom)

    def zero_order(y):
        eps = f.grading(y)
        chat = f.chat_kappa(y)
        return np.block([[0.5 * chat, eps @ f.wedge_phi0(y)],
                         [eps @ f.wedge_phi0_adjoint(y), -0.5 * chat]])
    return FirstOrderOperator(f.chart, 2, zero_order, "T-hat")


def dirac_schrodinger(geom: S1Geometry, include_phi0: bool = True) -> FirstOrderOperator:
    """D + c(kappa)eps/2, plus -chat(phi0)(1 - eps)/2 when include_phi0."""
    f = QuotientAlgebraFields(geom)

    def zero_order(y):
        eps = f.grading(y)
        out = 0.5 * f.c_kappa(y) @ eps
        if include_phi0:
            out = out - 0.5 * f.chat_phi0(y) @ (np.eye(len(eps)) - eps)
        return out
    return FirstOrderOperator(f.chart, 1, zero_order, "D'" if include_phi0 else "D")


def positive_signature_pushdown(geom: S1Geometry) -> FirstOrderOperator:
    """Push-down of the positive signature operator: D + chat(kappa)/2 + i phi0 ^ star."""
    f = QuotientAlgebraFields(geom)
    return FirstOrderOperator(
        f.chart, 1, lambda y: 0.5 * f.chat_kappa(y) + 1j * f.wedge_phi0(y) @ f.star(y), "T-hat(D+)")


def hodge_dirac_operator(chart: Chart) -> FirstOrderOperator:
    size = chart.size
    return FirstOrderOperator(chart, 1, lambda y: np.zeros((size, size)), "D")


# -- checks ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    residuals: dict
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.residuals.values())


def anticommutator_checks(geom: S1Geometry, points, tol: float = 1e-12,
                          rng: np.random.Generator | None = None) -> CheckReport:
    """Chirality and grading laws of the zero-order terms and of the symbol."""
    rng = rng or np.random.default_rng(0)
    f = QuotientAlgebraFields(geom)
    n = f.chart.dim
    op_full = dirac_schrodinger(geom, True)
    op_plain = dirac_schrodinger(geom, False)
    res = {"star^2 = 1": 0.0, "eps star = (-1)^n star eps": 0.0, "{Z_D, eps} = 0": 0.0,
           "phi0-wedge adjoint = -star phi0-wedge star": 0.0, "symbol^2 = |xi|^2": 0.0}
    if n % 2 == 0:
        res.update({"{Z_D', star} = 0": 0.0, "{symbol, star} = 0": 0.0,
                    "[chat(phi0), eps] = 0": 0.0, "{chat(phi0), star} = 0": 0.0})
    for y in np.atleast_2d(points):
        star, eps, wphi = f.star(y), f.grading(y), f.wedge_phi0(y)
        eye = np.eye(len(eps))
        zp, z = op_full.zero_order_at(y), op_plain.zero_order_at(y)
        xi = rng.normal(size=n)
        sym = op_full.symbol(y, xi)
        norm2 = float(xi @ np.linalg.solve(f.chart.metric(y), xi))
        upd = {
            "star^2 = 1": np.abs(star @ star - eye).max(),
            "eps star = (-1)^n star eps": np.abs(eps @ star - (-1) ** n * star @ eps).max(),
            "{Z_D, eps} = 0": np.abs(z @ eps + eps @ z).max(),
            "phi0-wedge adjoint = -star phi0-wedge star":
                np.abs(f.wedge_phi0_adjoint(y) + star @ wphi @ star).max() / max(1.0, np.abs(star).max() ** 2 * np.abs(wphi).max()),
            "symbol^2 = |xi|^2": np.abs(sym @ sym - norm2 * eye).max() / max(1.0, norm2),
        }
        if n % 2 == 0:
            ch = f.chat_phi0(y)
            upd.update({
                "{Z_D', star} = 0": np.abs(zp @ star + star @ zp).max(),
                "{symbol, star} = 0": np.abs(sym @ star + star @ sym).max() / max(1.0, math.sqrt(norm2)),
                "[chat(phi0), eps] = 0": np.abs(ch @ eps - eps @ ch).max(),
                "{chat(phi0), star} = 0": np.abs(ch @ star + star @ ch).max(),
            })
        for k, v in upd.items():
            res[k] = max(res[k], float(v))
    return CheckReport("anticommutators", res, tol)


def covariant_derivative_matrices(chart: Chart, y) -> list:
    """Connection matrices Gamma_i on forms, so that nabla_i = d/dy^i + Gamma_i."""
    y = np.asarray(y, dtype=float)
    n = chart.dim
    steps = chart.default_steps(y)
    dg = np.array([partial_derivative(chart.metric, y, i, steps[i], chart) for i in range(n)])
    ginv = np.linalg.inv(chart.metric(y))
    christoffel = _christoffel(dg, ginv)
    alg = chart.algebra(y)
    mats = []
    for i in range(n):
        # on covectors: (nabla_i alpha)_k = d_i alpha_k - Gamma^j_{ik} alpha_j
        mats.append(alg.derivation_matrix(-christoffel[:, i, :].T))
    return mats


def _christoffel(dg: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """Gamma[j, i, k] = Gamma^j_{ik} from dg[l, a, b] = d_l g_ab."""
    n = ginv.shape[0]
    lowered = np.empty((n, n, n))
    for l in range(n):
        for i in range(n):
            for k in range(n):
                lowered[l, i, k] = 0.5 * (dg[i, l, k] + dg[k, l, i] - dg[l, i, k])
    return np.einsum("jl,lik->jik", ginv, lowered)


def dirac_square_check(geom: S1Geometry, test_section: Section, points, tol: float = 1e-8) -> CheckReport:
    """Compare D^2 u with Laplacian - nabla_H eps - c(kappa) D eps + d*(kappa) eps/2 + |kappa|^2/4."""
    f = QuotientAlgebraFields(geom)
    chart = f.chart
    op = dirac_schrodinger(geom, include_phi0=False)
    hd = hodge_dirac_operator(chart)
    square = op(op(test_section))
    laplace = hd(hd(test_section))
    eps_u = lambda y: f.grading(y) @ test_section(y)
    d_eps_u = hd(eps_u)
    codiff_kappa = FormField(chart, lambda y: hd(lambda z: f.kappa_bar(z))(y), memoize=True)
    res = 0.0
    for y in np.atleast_2d(points):
        y = np.asarray(y, dtype=float)
        alg = chart.algebra(y)
        kappa = alg.form(f.kappa_bar(y))
        H = alg.sharp(kappa)
        steps = chart.default_steps(y)
        gammas = covariant_derivative_matrices(chart, y)
        nabla_h = np.zeros(chart.size, dtype=complex)
        for i in range(chart.dim):
            di = partial_derivative(eps_u, y, i, steps[i], chart)
            nabla_h += H[i] * (di + gammas[i] @ eps_u(y))
        codiff = codiff_kappa(y)[0]  # scalar part of D kappa is the codifferential
        rhs = (laplace(y) - nabla_h - f.c_kappa(y) @ d_eps_u(y)
               + 0.5 * codiff * eps_u(y) + 0.25 * kappa.norm() ** 2 * test_section(y))
        scale = max(1.0, np.abs(square(y)).max())
        res = max(res, float(np.abs(square(y) - rhs).max() / scale))
    return CheckReport("Dirac square", {"square law": res}, tol)


def conjugation_check(geom: S1Geometry, test_section: Section, points, tol: float = 1e-8) -> CheckReport:
    """h^(1/2) S(D) h^(-1/2) = T-hat on pair sections."""
    h = geom.orbit_volume()
    T = pushdown_blocks(geom)
    That = conjugated_operator(geom)
    inner = lambda y: test_section(y) / np.sqrt(np.real(h(y)[0]))
    lhs = T(inner)
    rhs = That(test_section)
    res = 0.0
    for y in np.atleast_2d(points):
        res = max(res, float(np.abs(np.sqrt(np.real(h(y)[0])) * lhs(y) - rhs(y)).max()))
    return CheckReport("conjugation", {"h-conjugation": res}, tol)


def hodge_dirac_via_star(chart: Chart, u: Section, y, step=None) -> np.ndarray:
    """d + (-1)^(n+1) star d star on a form section; agrees with d + d-dagger."""
    n = chart.dim
    F = FormField(chart, u, memoize=True)
    starred = FormField(chart, lambda z: chart.algebra(z).chirality_matrix @ F(z), memoize=True)
    dstar = d(starred, step)
    return d(F, step)(y) + (-1) ** (n + 1) * chart.algebra(y).chirality_matrix @ dstar(y)


def upstairs_check(geom: S1Geometry, pair: Section, points, tol: float = 1e-7) -> CheckReport:
    """Compare S(D) with the total-space Hodge-de Rham operator on the lifted invariant form.

    The pair (w0, w1) is lifted to pi^* w0 + pi^* w1 ^ chi, the total-space operator is applied
    numerically, and the result is split back into basic components at the section points.
    """
    q = geom.quotient
    chart = geom.chart
    n = q.chart.dim
    qsize = q.chart.size
    up = pullback_matrix(q.projection)           # quotient forms -> total-space forms
    down = pullback_matrix(q.section)            # total-space forms -> quotient forms
    grading = np.diag((-1.0) ** _structure(chart.dim)[0])
    # w ^ chi = chi ^ (eps w)
    right_chi = lambda x: chart.algebra(x).wedge_matrix(chart.algebra(x).form(geom.chi(x))) @ grading
    inner = _structure(chart.dim)[3]

    def lifted(x):
        p = pair(q.project(x))
        w0, w1 = up @ p[:qsize], up @ p[qsize:]
        return w0 + right_chi(x) @ w1

    Dup = hodge_dirac(FormField(chart, lifted, memoize=True))
    T = pushdown_blocks(geom)(pair)
    res = 0.0
    for y in np.atleast_2d(points):
        x = q.lift(y)
        eta = Dup(x)
        contraction = np.tensordot(geom.unit_vector(x), inner, axes=1)
        eta1 = grading @ contraction @ eta
        eta0 = eta - right_chi(x) @ eta1
        split = np.concatenate([down @ eta0, down @ eta1])
        res = max(res, float(np.abs(split - T(y)).max()))
    return CheckReport("upstairs", {"S(D) vs total-space D": res}, tol)
