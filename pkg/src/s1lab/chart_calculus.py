"""Coordinate charts, form-valued fields, numerical exterior calculus and quadrature."""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exterior_clifford import ExteriorAlgebra, Form, _structure, indices_of, mask_of

# relative to the coordinate range; 1e-4 loses ~1e-8 to roundoff once derivatives nest
DEFAULT_STEP = 1e-3
MEMO_LIMIT = 200_000


@dataclass
class Chart:
    """A coordinate box with a metric; coordinate order gives the orientation."""

    names: Sequence[str]
    intervals: Sequence[tuple]
    metric: Callable[[np.ndarray], np.ndarray]
    periodic: Sequence[bool] = ()
    orientation: int = 1
    name: str = ""

    def __post_init__(self):
        self.names = tuple(self.names)
        self.intervals = tuple((float(a), float(b)) for a, b in self.intervals)
        if not self.periodic:
            self.periodic = (False,) * len(self.names)
        self.periodic = tuple(bool(p) for p in self.periodic)
        if not (len(self.names) == len(self.intervals) == len(self.periodic)):
            raise ValueError("names, intervals and periodic flags must have equal length")
        for lo, hi in self.intervals:
            if not hi > lo:
                raise ValueError("degenerate coordinate interval")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def size(self) -> int:
        return 1 << self.dim

    def index(self, name: str) -> int:
        return self.names.index(name)

    def algebra(self, x) -> ExteriorAlgebra:
        x = np.asarray(x, dtype=float)
        cache = self.__dict__.setdefault("_algebras", {})
        key = (x.tobytes(), self.orientation)
        alg = cache.get(key)
        if alg is None:
            if len(cache) > 20_000:
                cache.clear()
            alg = cache[key] = ExteriorAlgebra(self.dim, self.metric(x), self.orientation)
        return alg

    def default_steps(self, x) -> np.ndarray:
        steps = []
        for (lo, hi), xi in zip(self.intervals, x):
            span = hi - lo
            steps.append(DEFAULT_STEP * (span if math.isfinite(span) else max(1.0, abs(xi))))
        return np.array(steps)

    def contains(self, x, margin=None) -> bool:
        margin = np.zeros(self.dim) if margin is None else margin
        for i, ((lo, hi), p) in enumerate(zip(self.intervals, self.periodic)):
            if not p and not (lo + margin[i] <= x[i] <= hi - margin[i]):
                return False
        return True

    def sample(self, count: int, rng: np.random.Generator, shrink: float = 0.05) -> np.ndarray:
        """Random interior points, keeping a relative margin from non-periodic ends."""
        pts = np.empty((count, self.dim))
        for i, ((lo, hi), p) in enumerate(zip(self.intervals, self.periodic)):
            if not math.isfinite(hi):
                hi = lo + 10.0
            pad = 0.0 if p else shrink * (hi - lo)
            pts[:, i] = rng.uniform(lo + pad, hi - pad, size=count)
        return pts


class FormField:
    """A form-valued function on a chart, in the coordinate coframe dx^I."""

    def __init__(self, chart: Chart, func: Callable[[np.ndarray], np.ndarray],
                 derivative: Callable[[np.ndarray], np.ndarray] | None = None, label: str = "",
                 memoize: bool = False):
        self.chart = chart
        self.func = func
        self.derivative = derivative
        self.label = label
        self._memo = {} if memoize else None

    def coeffs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._memo is not None:
            key = x.tobytes()
            hit = self._memo.get(key)
            if hit is not None:
                return hit
        out = np.asarray(self.func(x), dtype=complex)
        if out.shape != (self.chart.size,):
            raise ValueError("field returned a coefficient vector of the wrong length")
        if np.isnan(out.sum()):
            raise ValueError(f"field {self.label!r} is NaN at {x}")
        if self._memo is not None:
            if len(self._memo) > MEMO_LIMIT:
                self._memo.clear()
            out.setflags(write=False)
            self._memo[key] = out
        return out

    def memoized(self) -> "FormField":
        """A copy that caches values by point; fields are pure so this is safe."""
        return FormField(self.chart, self.func, self.derivative, self.label, memoize=True)

    def at(self, x) -> Form:
        return Form(self.chart.algebra(x), self.coeffs(x))

    __call__ = coeffs

    # -- builders --------------------------------------------------------------
    @classmethod
    def scalar(cls, chart: Chart, f, gradient=None, label: str = "") -> "FormField":
        def func(x):
            out = np.zeros(chart.size, dtype=complex)
            out[0] = f(x)
            return out
        deriv = None
        if gradient is not None:
            def deriv(x):
                out = np.zeros(chart.size, dtype=complex)
                g = gradient(x)
                for i in range(chart.dim):
                    out[1 << i] = g[i]
                return out
        return cls(chart, func, deriv, label)

    @classmethod
    def one_form(cls, chart: Chart, components, label: str = "") -> "FormField":
        def func(x):
            out = np.zeros(chart.size, dtype=complex)
            c = components(x)
            for i in range(chart.dim):
                out[1 << i] = c[i]
            return out
        return cls(chart, func, None, label)

    @classmethod
    def from_terms(cls, chart: Chart, terms: dict, label: str = "") -> "FormField":
        """terms maps coordinate-index tuples to scalar functions of the point."""
        masks = []
        for idx, f in terms.items():
            mask = mask_of(idx)
            sign = 1
            idx = list(idx)
            for a in range(len(idx)):
                for b in range(a + 1, len(idx)):
                    if idx[a] > idx[b]:
                        sign = -sign
            masks.append((mask, sign, f))

        def func(x):
            out = np.zeros(chart.size, dtype=complex)
            for mask, sign, f in masks:
                out[mask] += sign * f(x)
            return out
        return cls(chart, func, None, label)

    @classmethod
    def constant(cls, chart: Chart, coeffs, label: str = "") -> "FormField":
        coeffs = np.asarray(coeffs, dtype=complex)
        return cls(chart, lambda x: coeffs, lambda x: np.zeros(chart.size, dtype=complex), label)

    # -- pointwise algebra -----------------------------------------------------
    def __add__(self, other: "FormField") -> "FormField":
        return FormField(self.chart, lambda x: self.coeffs(x) + other.coeffs(x))

    def __sub__(self, other: "FormField") -> "FormField":
        return FormField(self.chart, lambda x: self.coeffs(x) - other.coeffs(x))

    def __neg__(self) -> "FormField":
        return FormField(self.chart, lambda x: -self.coeffs(x))

    def scale(self, f: Callable | float) -> "FormField":
        if callable(f):
            return FormField(self.chart, lambda x: f(x) * self.coeffs(x))
        return FormField(self.chart, lambda x: f * self.coeffs(x))

    def apply(self, endo_field: Callable[[np.ndarray], np.ndarray]) -> "FormField":
        """Apply a pointwise endomorphism, given as x -> matrix on the form space."""
        return FormField(self.chart, lambda x: endo_field(x) @ self.coeffs(x))

    def wedge(self, other: "FormField") -> "FormField":
        left, right, target, sign = _structure(self.chart.dim)[1]

        def func(x):
            a, b = self.coeffs(x), other.coeffs(x)
            out = np.zeros(self.chart.size, dtype=complex)
            np.add.at(out, target, sign * a[left] * b[right])
            return out
        return FormField(self.chart, func)

    def part(self, r: int) -> "FormField":
        degrees = _structure(self.chart.dim)[0]
        return FormField(self.chart, lambda x: np.where(degrees == r, self.coeffs(x), 0))

    def component(self, indices) -> Callable[[np.ndarray], complex]:
        mask = mask_of(indices)
        return lambda x: self.coeffs(x)[mask]


# -- numerical differentiation ------------------------------------------------

def _central(f, x, i, h):
    e = np.zeros_like(x)
    e[i] = h
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)


def partial_derivative(f, x, i: int, h: float, chart: Chart | None = None):
    """Fourth-order central difference with one Richardson level (sixth order)."""
    x = np.asarray(x, dtype=float)
    if h <= 1e-13 * max(1.0, abs(x[i])):
        raise ValueError("difference step underflow")
    if chart is not None and not chart.periodic[i]:
        lo, hi = chart.intervals[i]
        room = min(x[i] - lo, hi - x[i])
        if room <= 0:
            raise ValueError(f"point outside the chart along {chart.names[i]!r} at {x[i]}")
        if 2 * h >= room:
            # quadrature nodes can sit closer to the boundary than the default stencil
            h = room / 2.5
            if h <= 1e-13 * max(1.0, abs(x[i])):
                raise ValueError("difference step underflow")
    coarse = _central(f, x, i, h)
    fine = _central(f, x, i, h / 2)
    return (16 * fine - coarse) / 15


def exterior_derivative(F: FormField, x, step=None, use_analytic: bool = True) -> Form:
    """dF at x: analytic derivative when supplied, otherwise sum_i dx^i ^ d_i F."""
    x = np.asarray(x, dtype=float)
    return Form(F.chart.algebra(x), exterior_derivative_coeffs(F, x, step, use_analytic))


def exterior_derivative_coeffs(F: FormField, x, step=None, use_analytic: bool = True) -> np.ndarray:
    chart = F.chart
    if use_analytic and F.derivative is not None:
        return np.asarray(F.derivative(x), dtype=complex)
    steps = chart.default_steps(x) if step is None else np.broadcast_to(step, (chart.dim,))
    wedge_basis = _structure(chart.dim)[2]
    out = np.zeros(chart.size, dtype=complex)
    for i in range(chart.dim):
        out += wedge_basis[i] @ partial_derivative(F.coeffs, x, i, steps[i], chart)
    return out


def d(F: FormField, step=None, use_analytic: bool = True) -> FormField:
    """The exterior derivative as a (lazily evaluated) field."""
    return FormField(F.chart, lambda x: exterior_derivative_coeffs(F, x, step, use_analytic),
                     label=f"d({F.label})")


def hodge(F: FormField) -> FormField:
    return F.apply(lambda x: F.chart.algebra(x).hodge_matrix)


def codifferential(F: FormField, step=None) -> FormField:
    """d-dagger = (-1)^{m(r+1)+1} * d * on r-forms."""
    chart = F.chart
    m = chart.dim
    degrees = _structure(m)[0]
    outer = hodge(d(hodge(F), step))
    # the sign depends on the input degree r, i.e. on r-1 = degree of the output slot
    out_signs = np.array([(-1.0) ** (m * (s + 2) + 1) for s in degrees])
    return FormField(chart, lambda x: out_signs * outer.coeffs(x), label=f"d*({F.label})")


def hodge_dirac(F: FormField, step=None) -> FormField:
    """The Hodge-de Rham operator D = d + d-dagger applied to a field."""
    return d(F, step) + codifferential(F, step)


# -- musical isomorphisms -------------------------------------------------------

def flat(chart: Chart, x, vector) -> np.ndarray:
    return chart.metric(np.asarray(x, dtype=float)) @ np.asarray(vector)


def sharp(chart: Chart, x, covector) -> np.ndarray:
    return np.linalg.solve(chart.metric(np.asarray(x, dtype=float)), np.asarray(covector))


def musical(chart: Chart, x, value, kind: str):
    """kind='flat' maps a vector to its covector, kind='sharp' the reverse."""
    if kind == "flat":
        return flat(chart, x, value)
    if kind == "sharp":
        return sharp(chart, x, value)
    raise ValueError("kind must be 'flat' or 'sharp'")


# -- quadrature -----------------------------------------------------------------

@dataclass
class Integral:
    value: float
    error: float
    grid: tuple


def _axis_rule(lo, hi, n, periodic):
    if periodic:
        nodes = lo + (hi - lo) * np.arange(n) / n
        weights = np.full(n, (hi - lo) / n)
    else:
        t, w = np.polynomial.legendre.leggauss(n)
        nodes = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
        weights = 0.5 * (hi - lo) * w
    return nodes, weights


def integrate_function(f, intervals, periodic, grid, vectorized: bool = False,
                       invariant_axes: Sequence[int] = ()) -> float:
    """Tensor-product quadrature of a scalar function over a coordinate box.

    Along invariant_axes the integrand is taken to be constant: one node at the
    midpoint carries the whole interval length, which is what any of the rules
    gives for a constant.
    """
    rules = []
    for k, ((lo, hi), n, p) in enumerate(zip(intervals, grid, periodic)):
        if k in invariant_axes:
            rules.append((np.array([0.5 * (lo + hi)]), np.array([hi - lo])))
        else:
            rules.append(_axis_rule(lo, hi, n, p))
    mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=1), axis=1)
    if vectorized:
        values = np.asarray(f(points))
    else:
        values = np.array([f(p) for p in points])
    if np.any(np.isnan(values)):
        raise ValueError("NaN sample in quadrature")
    return float(np.real(np.sum(weights * values)))


def check_invariance(density, box, axes: Sequence[int], count: int = 6, seed: int = 0,
                     rtol: float = 1e-7) -> float:
    """Largest relative change of the density when only the given coordinates move."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        x = np.array([lo + (hi - lo) * rng.uniform(0.1, 0.9) for lo, hi in box])
        y = x.copy()
        for k in axes:
            lo, hi = box[k]
            y[k] = lo + (hi - lo) * rng.uniform(0.1, 0.9)
        a, b = density(x), density(y)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    if worst > rtol:
        raise ValueError(f"integrand is not invariant along axes {tuple(axes)} (change {worst:.2e})")
    return worst


def integrate(F: FormField | Callable, grid, chart: Chart | None = None, domain=None,
              vectorized: bool = False, invariant_axes: Sequence[int] = ()) -> Integral:
    """Integrate a top-degree form over the chart (or a shrunken box `domain`).

    F may be a FormField or a function returning the dx^1...dx^m coefficient,
    optionally vectorized over an (N, m) array of points.  The error estimate is
    the change when every axis count is halved.  invariant_axes are coordinates
    the integrand does not depend on (isometry directions); this is spot-checked
    at random points before the reduced rule is used.
    """
    if isinstance(F, FormField):
        chart = F.chart
        top = chart.size - 1
        if not vectorized:
            density = lambda x: F.coeffs(x)[top]
        else:
            raise ValueError("vectorized evaluation needs a plain density function")
        degree_check = F.coeffs(np.array([0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0
                                          for lo, hi in chart.intervals]))
        if np.any(np.abs(degree_check[:top]) > 1e-12 * max(1.0, abs(degree_check[top]))):
            raise ValueError("integrand is not of top degree")
    else:
        if chart is None:
            raise ValueError("a chart is needed for a bare density")
        density = F
    box = domain if domain is not None else chart.intervals
    grid = tuple(int(n) for n in np.broadcast_to(grid, (chart.dim,)))
    invariant_axes = tuple(invariant_axes)
    if invariant_axes:
        scalar = density if not vectorized else (lambda x: density(np.asarray(x)[None, :])[0])
        check_invariance(scalar, box, invariant_axes)
    value = integrate_function(density, box, chart.periodic, grid, vectorized, invariant_axes)
    coarse_grid = tuple(max(2, n // 2) for n in grid)
    coarse = integrate_function(density, box, chart.periodic, coarse_grid, vectorized, invariant_axes)
    sign = chart.orientation
    return Integral(sign * value, abs(value - coarse), grid)


# -- declarative chart text format ------------------------------------------------

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "sec": lambda t: 1 / np.cos(t), "csc": lambda t: 1 / np.sin(t),
    "cot": lambda t: 1 / np.tan(t), "sinh": np.sinh, "cosh": np.cosh, "abs": np.abs,
}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def compile_expression(text: str, variables: Sequence[str], constants: dict | None = None):
    """Compile an arithmetic/trig expression into a function of the variables."""
    constants = {"pi": math.pi, **(constants or {})}
    tree = ast.parse(text.replace("^", "**"), mode="eval")

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda env: v
        if isinstance(node, ast.Name):
            if node.id in constants:
                v = float(constants[node.id])
                return lambda env: v
            if node.id in variables:
                k = variables.index(node.id)
                return lambda env: env[k]
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, a, b = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda env: op(a(env), b(env))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            op, a = _UNOPS[type(node.op)], build(node.operand)
            return lambda env: op(a(env))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            fn, a = _FUNCS[node.func.id], build(node.args[0])
            return lambda env: fn(a(env))
        raise ValueError(f"unsupported syntax in {text!r}")

    return build(tree)


def parse_chart(text: str, constants: dict | None = None) -> Chart:
    """Read a chart from the line-oriented text format.

    name: torus
    coords: u v
    range u: 0 2*pi periodic
    range v: 0 2*pi periodic
    metric u u: r^2
    metric v v: (R + r*cos(u))^2
    orientation: 1

    Unlisted metric entries are zero; off-diagonal entries are symmetrized.
    `const NAME: value` lines define parameters.
    """
    constants = dict(constants or {})
    name, coords, ranges, entries, orientation = "", None, {}, [], 1
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition(":")
        words = key.split()
        value = value.strip()
        if words[0] == "name":
            name = value
        elif words[0] == "const":
            constants[words[1]] = compile_expression(value, [], constants)(())
        elif words[0] == "coords":
            coords = value.split()
        elif words[0] == "range":
            parts = value.split()
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "periodic"):
                raise ValueError(f"bad range line: {raw!r}")
            lo = compile_expression(parts[0], [], constants)(())
            hi = compile_expression(parts[1], [], constants)(())
            ranges[words[1]] = (lo, hi, len(parts) == 3)
        elif words[0] == "metric":
            entries.append((words[1], words[2], value))
        elif words[0] == "orientation":
            orientation = int(value)
        else:
            raise ValueError(f"unknown directive {words[0]!r}")
    if coords is None:
        raise ValueError("chart text has no coords line")
    missing = [c for c in coords if c not in ranges]
    if missing:
        raise ValueError(f"missing ranges for {missing}")
    compiled = [(coords.index(a), coords.index(b), compile_expression(e, coords, constants))
                for a, b, e in entries]
    m = len(coords)

    def metric(x):
        g = np.zeros((m, m))
        for i, j, f in compiled:
            v = f(x)
            g[i, j] = v
            g[j, i] = v
        return g

    return Chart(coords, [ranges[c][:2] for c in coords], metric,
                 [ranges[c][2] for c in coords], orientation, name)


def top_coefficient(form_coeffs: np.ndarray) -> complex:
    return form_coeffs[-1]


def basis_label(mask: int, names: Sequence[str]) -> str:
    return "^".join("d" + names[i] for i in indices_of(mask)) or "1"
