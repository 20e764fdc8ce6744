"""Circle-action geometry: the orbit quantities of a Killing field and their identities.

Every built-in example uses a chart in which the generator V has constant
coordinate components, the orbits are x + tV with period 2*pi, and the quotient
map and a section of it are affine in coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Callable

import numpy as np

from .chart_calculus import Chart, FormField, d, integrate_function, partial_derivative
from .exterior_clifford import _structure, mask_of

FIXED_POINT_GUARD = 1e-6


class FixedPointError(ValueError):
    """Raised when a quantity is evaluated where the orbit degenerates."""


def pullback_matrix(jacobian: np.ndarray) -> np.ndarray:
    """Coefficient map Lambda(R^m)* -> Lambda(R^n)* for a map with dx = J dy (J is m x n)."""
    J = np.asarray(jacobian, dtype=float)
    m, n = J.shape
    out = np.zeros((1 << n, 1 << m))
    out[0, 0] = 1.0
    for r in range(1, min(m, n) + 1):
        for rows in combinations(range(m), r):
            for cols in combinations(range(n), r):
                out[mask_of(cols), mask_of(rows)] = np.linalg.det(J[np.ix_(rows, cols)])
    return out


@dataclass
class QuotientData:
    """Quotient chart with affine projection y = P x + p0 and section x = S y + s0."""

    chart: Chart
    projection: np.ndarray
    projection_offset: np.ndarray
    section: np.ndarray
    section_offset: np.ndarray

    def project(self, x) -> np.ndarray:
        return self.projection @ np.asarray(x, dtype=float) + self.projection_offset

    def lift(self, y) -> np.ndarray:
        return self.section @ np.asarray(y, dtype=float) + self.section_offset


class S1Geometry:
    """The orbit geometry of a circle action generated by a constant coordinate field V."""

    def __init__(self, chart: Chart, generator, quotient: QuotientData | None = None,
                 period: float = 2 * math.pi, guard: float = FIXED_POINT_GUARD, name: str = ""):
        self.chart = chart
        self.generator = np.asarray(generator, dtype=float)
        if self.generator.shape != (chart.dim,):
            raise ValueError("generator has the wrong number of components")
        self.quotient = quotient
        self.period = period
        self.guard = guard
        self.name = name or chart.name
        self._size = chart.size
        self._degrees = _structure(chart.dim)[0]

    # -- pointwise quantities ----------------------------------------------------
    def norm_v(self, x) -> float:
        x = np.asarray(x, dtype=float)
        g = self.chart.metric(x)
        value = math.sqrt(float(self.generator @ g @ self.generator))
        if value <= self.guard:
            raise FixedPointError(f"|V| = {value:.3g} is inside the fixed-point guard at {x}")
        return value

    def unit_vector(self, x) -> np.ndarray:
        return self.generator / self.norm_v(x)

    def _one_form(self, comps: Callable, label: str = "") -> FormField:
        chart = self.chart
        slots = [1 << i for i in range(chart.dim)]

        def func(x):
            out = np.zeros(chart.size, dtype=complex)
            out[slots] = comps(x)
            return out
        return FormField(chart, func, label=label, memoize=True)

    def _flat_generator(self, x, power: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        vflat = self.chart.metric(x) @ self.generator
        norm = math.sqrt(float(self.generator @ vflat))
        if norm <= self.guard:
            raise FixedPointError(f"|V| = {norm:.3g} is inside the fixed-point guard at {x}")
        return vflat / norm ** power

    @cached_property
    def chi(self) -> FormField:
        """Characteristic form: the metric dual of X = V/|V|."""
        return self._one_form(lambda x: self._flat_generator(x, 1), "chi")

    @cached_property
    def alpha(self) -> FormField:
        """V-flat over |V|^2, normalized so that alpha(V) = 1."""
        return self._one_form(lambda x: self._flat_generator(x, 2), "alpha")

    @cached_property
    def log_norm(self) -> FormField:
        f = FormField.scalar(self.chart, lambda x: math.log(self.norm_v(x)), label="log|V|")
        return f.memoized()

    @cached_property
    def _kappa(self) -> FormField:
        k = FormField(self.chart, lambda x: -d(self.log_norm)(x), label="kappa", memoize=True)
        return k

    def mean_curvature(self) -> FormField:
        """kappa = -d log|V|."""
        return self._kappa

    def mean_curvature_from_chi(self) -> FormField:
        """kappa as the contraction of X with d chi (independent route)."""
        dchi = d(self.chi)
        inner = _structure(self.chart.dim)[3]
        return FormField(self.chart,
                         lambda x: np.tensordot(self.unit_vector(x), inner, axes=1) @ dchi(x))

    def mean_curvature_vector(self, x) -> np.ndarray:
        """H = kappa-sharp in coordinate components."""
        k = self.mean_curvature()(x)
        comps = np.array([k[1 << i] for i in range(self.chart.dim)])
        return np.linalg.solve(self.chart.metric(np.asarray(x, dtype=float)), comps)

    @cached_property
    def _phi0(self) -> FormField:
        total = d(self.chi) + self.mean_curvature().wedge(self.chi)
        return FormField(self.chart, total.func, label="phi0", memoize=True)

    def phi0(self) -> FormField:
        """phi0 = d chi + kappa ^ chi."""
        return self._phi0

    def contraction_with_x(self, F: FormField) -> FormField:
        inner = _structure(self.chart.dim)[3]
        return FormField(self.chart,
                         lambda x: np.tensordot(self.unit_vector(x), inner, axes=1) @ F(x))

    def lie_derivative_v(self, F: FormField) -> FormField:
        """L_V F for constant V reduces to the directional derivative along V."""
        def func(x):
            steps = self.chart.default_steps(x)
            h = float(np.min(steps))
            return partial_derivative(lambda t: F(x + t[0] * self.generator), np.zeros(1), 0, h)
        return FormField(self.chart, func)

    # -- orbit volume --------------------------------------------------------------
    def orbit_volume_at(self, x, nodes: int = 64) -> float:
        """Integral of chi over the orbit through x (trapezoid on the periodic orbit)."""
        x = np.asarray(x, dtype=float)
        t = self.period * np.arange(nodes) / nodes
        values = [self.norm_v(x + s * self.generator) for s in t]
        return float(self.period * np.mean(values))

    def orbit_volume(self, nodes: int = 64) -> FormField:
        """h as a scalar field on the quotient chart."""
        q = self._need_quotient()
        return FormField.scalar(q.chart, lambda y: self.orbit_volume_at(q.lift(y), nodes), label="h")

    def orbit_integral(self, F: FormField, x, nodes: int = 64) -> float:
        """Integral of a 1-form over the orbit through x."""
        x = np.asarray(x, dtype=float)
        t = self.period * np.arange(nodes) / nodes
        vals = []
        for s in t:
            c = F(x + s * self.generator)
            vals.append(sum(c[1 << i] * self.generator[i] for i in range(self.chart.dim)))
        return float(np.real(self.period * np.mean(vals)))

    # -- quotient-side fields -------------------------------------------------------
    def _need_quotient(self) -> QuotientData:
        if self.quotient is None:
            raise ValueError("no quotient chart declared for this geometry")
        return self.quotient

    def push_down(self, F: FormField) -> FormField:
        """The basic form on the quotient whose pullback is F (via the section)."""
        q = self._need_quotient()
        pull = pullback_matrix(q.section)
        return FormField(q.chart, lambda y: pull @ F(q.lift(y)), label=f"bar {F.label}")

    def kappa_bar(self) -> FormField:
        return self.push_down(self.mean_curvature())

    def phi0_bar(self) -> FormField:
        return self.push_down(self.phi0())

    def quotient_orientation(self, x=None) -> int:
        """Orientation of the quotient coordinates induced by vol_M = vol_Q ^ chi."""
        q = self._need_quotient()
        if x is None:
            x = q.lift(q.chart.sample(1, np.random.default_rng(0))[0])
        x = np.asarray(x, dtype=float)
        n = q.chart.dim
        pull = pullback_matrix(q.projection)  # y-forms -> x-forms along dy = P dx
        top_q = np.zeros(1 << n)
        top_q[-1] = 1.0
        lifted = FormField.constant(self.chart, pull @ top_q).wedge(self.chi)(x)
        coefficient = np.real(lifted[-1])
        if abs(coefficient) < 1e-12:
            raise ValueError("projection is degenerate along the orbit")
        return int(np.sign(coefficient)) * self.chart.orientation

    # -- identity report --------------------------------------------------------------
    def verify_identities(self, points, tol: float = 1e-8, quotient_points=None) -> "IdentityReport":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        chi, kappa, phi0 = self.chi, self.mean_curvature(), self.phi0()
        kappa_alt = self.mean_curvature_from_chi()
        dkappa = d(kappa)
        iphi = self.contraction_with_x(phi0)
        ikappa = self.contraction_with_x(kappa)
        bianchi = d(phi0) + kappa.wedge(phi0)
        lie_phi = self.lie_derivative_v(phi0)
        checks = {
            "chi(X) = 1": lambda x: abs(self.contraction_with_x(chi)(x)[0] - 1),
            "|chi| = 1": lambda x: abs(chi.at(x).norm() - 1),
            "d kappa = 0": lambda x: np.max(np.abs(dkappa(x))),
            "i_X kappa = 0": lambda x: np.max(np.abs(ikappa(x))),
            "kappa = i_X d chi": lambda x: np.max(np.abs(kappa(x) - kappa_alt(x))),
            "i_X phi0 = 0": lambda x: np.max(np.abs(iphi(x))),
            "L_V phi0 = 0": lambda x: np.max(np.abs(lie_phi(x))),
            "d phi0 + kappa ^ phi0 = 0": lambda x: np.max(np.abs(bianchi(x))),
        }
        residuals = {k: float(max(f(x) for x in points)) for k, f in checks.items()}
        if self.quotient is not None:
            q = self.quotient
            ys = (np.array([q.project(x) for x in points]) if quotient_points is None
                  else np.atleast_2d(quotient_points))
            h = self.orbit_volume()
            kbar = self.kappa_bar()
            dh = d(h)
            residuals["d h + h kappa = 0"] = float(max(
                np.max(np.abs(dh(y) + h(y)[0] * kbar(y))) for y in ys))
        return IdentityReport(self.name, residuals, tol, len(points))


@dataclass
class IdentityReport:
    example: str
    residuals: dict
    tolerance: float
    samples: int

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.residuals.values())

    def failures(self) -> list:
        return [k for k, v in self.residuals.items() if not v < self.tolerance]


# -- example registry ----------------------------------------------------------------

@dataclass
class Example:
    name: str
    geometry: S1Geometry
    sample_box: list          # per-axis (lo, hi) for identity sampling on M
    notes: dict = field(default_factory=dict)

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return np.column_stack([rng.uniform(lo, hi, size=count) for lo, hi in self.sample_box])


TWO_PI = 2 * math.pi


def _orient_quotient(geom: S1Geometry) -> None:
    geom.quotient.chart.orientation = geom.quotient_orientation()


def torus(big_radius: float = 2.0, small_radius: float = 1.0) -> Example:
    R, r = big_radius, small_radius
    chart = Chart(["u", "v"], [(0, TWO_PI), (0, TWO_PI)],
                  lambda x: np.diag([r ** 2, (R + r * math.cos(x[0])) ** 2]),
                  [True, True], name="torus")
    qchart = Chart(["u"], [(0, TWO_PI)], lambda y: np.array([[r ** 2]]), [True], name="torus/S1")
    quotient = QuotientData(qchart, np.array([[1.0, 0.0]]), np.zeros(1),
                            np.array([[1.0], [0.0]]), np.zeros(2))
    geom = S1Geometry(chart, [0.0, 1.0], quotient, name="torus")
    _orient_quotient(geom)
    return Example("torus", geom, [(0, TWO_PI), (0, TWO_PI)], {"R": R, "r": r})


def plane() -> Example:
    chart = Chart(["r", "theta"], [(0, math.inf), (0, TWO_PI)],
                  lambda x: np.diag([1.0, x[0] ** 2]), [False, True], name="plane")
    qchart = Chart(["r"], [(0, math.inf)], lambda y: np.eye(1), [False], name="plane/S1")
    quotient = QuotientData(qchart, np.array([[1.0, 0.0]]), np.zeros(1),
                            np.array([[1.0], [0.0]]), np.zeros(2))
    geom = S1Geometry(chart, [0.0, 1.0], quotient, name="plane")
    _orient_quotient(geom)
    return Example("plane", geom, [(0.2, 5.0), (0, TWO_PI)])


def sphere() -> Example:
    chart = Chart(["theta", "phi"], [(0, math.pi), (0, TWO_PI)],
                  lambda x: np.diag([1.0, math.sin(x[0]) ** 2]), [False, True], name="sphere")
    qchart = Chart(["theta"], [(0, math.pi)], lambda y: np.eye(1), [False], name="sphere/S1")
    quotient = QuotientData(qchart, np.array([[1.0, 0.0]]), np.zeros(1),
                            np.array([[1.0], [0.0]]), np.zeros(2))
    geom = S1Geometry(chart, [0.0, 1.0], quotient, name="sphere")
    _orient_quotient(geom)
    return Example("sphere", geom, [(0.2, math.pi - 0.2), (0, TWO_PI)])


def _s3_metric(x):
    c, s = math.cos(x[2]), math.sin(x[2])
    return np.diag([c * c, s * s, 1.0])


def hopf() -> Example:
    # coordinates (xi1, xi2, eta); outward-normal orientation is opposite to the coordinate order
    chart = Chart(["xi1", "xi2", "eta"], [(0, TWO_PI), (0, TWO_PI), (0, math.pi / 2)],
                  _s3_metric, [True, True, False], orientation=-1, name="hopf")
    qchart = Chart(["theta", "phi"], [(0, math.pi), (0, TWO_PI)],
                   lambda y: np.diag([0.25, 0.25 * math.sin(y[0]) ** 2]), [False, True],
                   name="S2(1/2)")
    quotient = QuotientData(qchart,
                            np.array([[0.0, 0.0, 2.0], [1.0, -1.0, 0.0]]), np.zeros(2),
                            np.array([[0.0, 1.0], [0.0, 0.0], [0.5, 0.0]]), np.zeros(3))
    geom = S1Geometry(chart, [1.0, 1.0, 0.0], quotient, name="hopf")
    _orient_quotient(geom)
    return Example("hopf", geom, [(0, TWO_PI), (0, TWO_PI), (0.15, math.pi / 2 - 0.15)])


def _s5_metric(x):
    # coordinates (xi1, xi2, xi3, eta, beta)
    ce, se = math.cos(x[3]), math.sin(x[3])
    cb, sb = math.cos(x[4]), math.sin(x[4])
    g = np.zeros((5, 5))
    g.flat[::6] = (cb * cb * ce * ce, cb * cb * se * se, sb * sb, cb * cb, 1.0)
    return g


def _s5_chart() -> Chart:
    return Chart(["xi1", "xi2", "xi3", "eta", "beta"],
                 [(0, TWO_PI), (0, TWO_PI), (0, TWO_PI), (0, math.pi / 2), (0, math.pi / 2)],
                 _s5_metric, [True, True, True, False, False], name="S5")


def s5_codim4() -> Example:
    """Action rotating the first two complex coordinates; fixed circle at beta = pi/2."""
    def qmetric(y):
        cb, sb = math.cos(y[3]), math.sin(y[3])
        return np.diag([0.25 * cb * cb, 0.25 * cb * cb * math.sin(y[0]) ** 2, sb * sb, 1.0])
    qchart = Chart(["theta", "phi", "xi", "beta"],
                   [(0, math.pi), (0, TWO_PI), (0, TWO_PI), (0, math.pi / 2)],
                   qmetric, [False, True, True, False], name="S5/S1 (codim 4)")
    P = np.zeros((4, 5))
    P[0, 3] = 2.0
    P[1, 0], P[1, 1] = 1.0, -1.0
    P[2, 2] = 1.0
    P[3, 4] = 1.0
    S = np.zeros((5, 4))
    S[3, 0] = 0.5
    S[0, 1] = 1.0
    S[2, 2] = 1.0
    S[4, 3] = 1.0
    quotient = QuotientData(qchart, P, np.zeros(4), S, np.zeros(5))
    geom = S1Geometry(_s5_chart(), [1.0, 1.0, 0.0, 0.0, 0.0], quotient, name="s5_codim4")
    _orient_quotient(geom)
    box = [(0, TWO_PI)] * 3 + [(0.15, math.pi / 2 - 0.15), (0.15, math.pi / 2 - 0.15)]
    return Example("s5_codim4", geom, box)


def s5_codim2() -> Example:
    """Action rotating the last complex coordinate; fixed 3-sphere at beta = 0."""
    def qmetric(y):
        ce, se = math.cos(y[2]), math.sin(y[2])
        cb = math.cos(y[3])
        return np.diag([cb * cb * ce * ce, cb * cb * se * se, cb * cb, 1.0])
    qchart = Chart(["xi1", "xi2", "eta", "beta"],
                   [(0, TWO_PI), (0, TWO_PI), (0, math.pi / 2), (0, math.pi / 2)],
                   qmetric, [True, True, False, False], name="S4+")
    P = np.zeros((4, 5))
    P[0, 0] = P[1, 1] = P[2, 3] = P[3, 4] = 1.0
    quotient = QuotientData(qchart, P, np.zeros(4), P.T.copy(), np.zeros(5))
    geom = S1Geometry(_s5_chart(), [0.0, 0.0, 1.0, 0.0, 0.0], quotient, name="s5_codim2")
    _orient_quotient(geom)
    box = [(0, TWO_PI)] * 3 + [(0.15, math.pi / 2 - 0.15), (0.15, math.pi / 2 - 0.15)]
    return Example("s5_codim2", geom, box)


REGISTRY = {
    "torus": torus,
    "plane": plane,
    "sphere": sphere,
    "hopf": hopf,
    "s5_codim4": s5_codim4,
    "s5_codim2": s5_codim2,
}


def load_example(name: str, **params) -> Example:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(REGISTRY)}") from None
    return factory(**params)


def mean_curvature(geom: S1Geometry) -> FormField:
    return geom.mean_curvature()


def phi0(geom: S1Geometry) -> FormField:
    return geom.phi0()


def orbit_volume(geom: S1Geometry) -> FormField:
    return geom.orbit_volume()


def verify_identities(geom: S1Geometry, points, tol: float = 1e-8) -> IdentityReport:
    return geom.verify_identities(points, tol)
