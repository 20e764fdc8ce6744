"""Connection and curvature forms in an orthonormal coframe, Pfaffians, the degree-4
L-form, transgression forms and characteristic integrals.

Connection components are FormFields with omega[I][J] = -omega[J][I]; curvature is
Omega = d omega + omega ^ omega with d taken numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .chart_calculus import (Chart, FormField, Integral, d, exterior_derivative_coeffs, integrate,
                             partial_derivative)
from .exterior_clifford import _structure

Matrix = list  # n x n nested list of FormField or None (zero)


def _wedge_coeffs(m: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    left, right, target, sign = _structure(m)[1]
    out = np.zeros(1 << m, dtype=complex)
    np.add.at(out, target, sign * a[left] * b[right])
    return out


def _zero_field(chart: Chart) -> FormField:
    return FormField.constant(chart, np.zeros(chart.size), label="0")


def _negate(F: FormField | None) -> FormField | None:
    return None if F is None else FormField(F.chart, lambda x: -F.coeffs(x), label=f"-{F.label}")


def _antisymmetric(n: int, upper: dict) -> Matrix:
    M = [[None] * n for _ in range(n)]
    for (I, J), F in upper.items():
        if I == J:
            raise ValueError("diagonal connection components vanish")
        if I > J:
            I, J, F = J, I, _negate(F)
        M[I][J] = F
        M[J][I] = _negate(F)
    return M


def orthonormal_coframe(chart: Chart) -> list:
    """e^I = sum_j (L^T)_{Ij} dx^j with g = L L^T (Cholesky), as FormFields."""
    def row(I):
        def comps(x):
            L = np.linalg.cholesky(chart.metric(x))
            return L.T[I]
        return FormField.one_form(chart, comps, label=f"e{I}")
    return [row(I) for I in range(chart.dim)]


@dataclass
class ConnectionData:
    """Components omega^I_J in a coframe e^I; the coframe may be absent for abstract bundles."""

    chart: Chart
    omega: Matrix
    coframe: list | None = None
    labels: Sequence[str] = ()
    frame_sign: int | None = None

    def __post_init__(self):
        n = len(self.omega)
        if any(len(row) != n for row in self.omega):
            raise ValueError("connection matrix must be square")
        for I in range(n):
            if self.omega[I][I] is not None:
                raise ValueError("diagonal connection components must vanish")
            for J in range(I + 1, n):
                a, b = self.omega[I][J], self.omega[J][I]
                if (a is None) != (b is None):
                    raise ValueError(f"omega[{I}][{J}] and omega[{J}][{I}] are not antisymmetric")
                for F in (a, b):
                    if F is not None and F.chart is not self.chart:
                        raise ValueError("chart mismatch")
        if not self.labels:
            self.labels = tuple(str(k) for k in range(n))
        if self.coframe is not None and len(self.coframe) != n:
            raise ValueError("one coframe form per index")

    @classmethod
    def from_upper(cls, chart: Chart, upper: dict, coframe=None, labels=(), frame_sign=None) -> "ConnectionData":
        n = len(coframe) if coframe is not None else 1 + max(max(k) for k in upper)
        return cls(chart, _antisymmetric(n, upper), coframe, tuple(labels), frame_sign)

    @property
    def rank(self) -> int:
        return len(self.omega)

    def value(self, I: int, J: int, x) -> np.ndarray:
        F = self.omega[I][J]
        return np.zeros(self.chart.size, dtype=complex) if F is None else F.coeffs(x)

    def structure_residual(self, points) -> float:
        """max over points of |de^I + omega^I_J ^ e^J|."""
        if self.coframe is None:
            raise ValueError("no coframe attached")
        m = self.chart.dim
        worst = 0.0
        for x in np.atleast_2d(points):
            es = [e.coeffs(x) for e in self.coframe]
            for I in range(self.rank):
                total = exterior_derivative_coeffs(self.coframe[I], x)
                for J in range(self.rank):
                    if self.omega[I][J] is not None:
                        total = total + _wedge_coeffs(m, self.omega[I][J].coeffs(x), es[J])
                worst = max(worst, float(np.max(np.abs(total))))
        return worst

    def orientation_sign(self, x) -> int:
        """Sign of the coframe relative to the chart orientation."""
        if self.frame_sign is not None:
            return self.frame_sign
        if self.coframe is None:
            return 1
        E = np.array([[e.coeffs(x)[1 << j].real for j in range(self.chart.dim)] for e in self.coframe])
        return int(np.sign(np.linalg.det(E))) * self.chart.orientation


def levi_civita(chart: Chart, coframe: list | None = None) -> ConnectionData:
    """Levi-Civita connection in an orthonormal coframe, solved from the structure equations.

    With de^I = (1/2) c^I_{JK} e^J ^ e^K, the components omega^I_J = omega_{IJK} e^K are
    omega_{IJK} = (c_{IJK} - c_{JIK} - c_{KIJ}) / 2.
    """
    default = coframe is None
    coframe = coframe or orthonormal_coframe(chart)
    n = chart.dim
    if len(coframe) != n:
        raise ValueError("the coframe must have one form per coordinate")
    degrees = _structure(n)[0]
    two = [mask for mask in range(1 << n) if degrees[mask] == 2]
    cache = {}

    def table(x):
        key = np.asarray(x, dtype=float).tobytes()
        hit = cache.get(key)
        if hit is not None:
            return hit
        x = np.asarray(x, dtype=float)
        if default:
            # one derivative of the Cholesky factor per direction serves every e^I
            E = np.linalg.cholesky(chart.metric(x)).T
            steps = chart.default_steps(x)
            factor = lambda y: np.linalg.cholesky(chart.metric(y)).T
            dE = np.array([partial_derivative(factor, x, j, steps[j], chart)
                           for j in range(n)])  # dE[j, I, k] = d_j E_{Ik}
            D = np.transpose(dE, (1, 0, 2)) - np.transpose(dE, (1, 2, 0))  # de^I = D[I, j, k] dx^j ^ dx^k / 2
        else:
            E = np.array([[e.coeffs(x)[1 << j].real for j in range(n)] for e in coframe])
            D = np.zeros((n, n, n))
            for I, e in enumerate(coframe):
                de = exterior_derivative_coeffs(e, x).real
                for mask in two:
                    j, k = [q for q in range(n) if mask >> q & 1]
                    D[I, j, k], D[I, k, j] = de[mask], -de[mask]
        Einv = np.linalg.inv(E)  # dx^j = Einv[j, K] e^K
        c = np.einsum("jJ,Ijk,kK->IJK", Einv, D, Einv)
        w = 0.5 * (c - np.transpose(c, (1, 0, 2)) - np.transpose(c, (1, 2, 0)))
        # omega^I_J as coordinate 1-form: sum_K w[I,J,K] e^K
        out = np.einsum("ijk,kl->ijl", w, E)
        if len(cache) > 50_000:
            cache.clear()
        cache[key] = out
        return out

    def component(I, J):
        def comps(x):
            return table(x)[I, J]
        return FormField.one_form(chart, comps, label=f"omega{I}{J}")

    upper = {(I, J): component(I, J) for I in range(n) for J in range(I + 1, n)}
    return ConnectionData.from_upper(chart, upper, coframe)


@dataclass
class CurvatureData:
    chart: Chart
    omega: Matrix
    labels: Sequence[str] = ()
    frame_sign: Callable[[np.ndarray], int] | int = 1

    @property
    def rank(self) -> int:
        return len(self.omega)

    def value(self, I: int, J: int, x) -> np.ndarray:
        F = self.omega[I][J]
        return np.zeros(self.chart.size, dtype=complex) if F is None else F.coeffs(x)

    def matrix_at(self, x) -> list:
        return [[self.value(I, J, x) for J in range(self.rank)] for I in range(self.rank)]

    def sign_at(self, x) -> int:
        return self.frame_sign(x) if callable(self.frame_sign) else self.frame_sign

    def antisymmetry_residual(self, points) -> float:
        worst = 0.0
        for x in np.atleast_2d(points):
            M = self.matrix_at(x)
            for I in range(self.rank):
                for J in range(self.rank):
                    worst = max(worst, float(np.max(np.abs(M[I][J] + M[J][I]))))
        return worst

    @classmethod
    def from_upper(cls, chart: Chart, upper: dict, rank: int, labels=(), frame_sign=1) -> "CurvatureData":
        M = [[None] * rank for _ in range(rank)]
        for (I, J), F in upper.items():
            M[I][J], M[J][I] = F, _negate(F)
        return cls(chart, M, tuple(labels), frame_sign)


def curvature(conn: ConnectionData, step=None) -> CurvatureData:
    """Omega^I_J = d omega^I_J + omega^I_K ^ omega^K_J, memoized per point."""
    chart, n, m = conn.chart, conn.rank, conn.chart.dim

    def component(I, J):
        def func(x):
            F = conn.omega[I][J]
            total = np.zeros(chart.size, dtype=complex) if F is None else exterior_derivative_coeffs(F, x, step)
            for K in range(n):
                a, b = conn.omega[I][K], conn.omega[K][J]
                if a is not None and b is not None:
                    total = total + _wedge_coeffs(m, a.coeffs(x), b.coeffs(x))
            return total
        return FormField(chart, func, label=f"Omega{I}{J}", memoize=True)

    upper = {(I, J): component(I, J) for I in range(n) for J in range(I + 1, n)}
    return CurvatureData.from_upper(chart, upper, n, conn.labels, frame_sign=conn.orientation_sign)


# ---------------------------------------------------------------- Pfaffian

def pfaffian_entries(n: int, entry: Callable[[int, int], object], mul, add, zero, one):
    """Pfaffian of an n x n skew matrix over a commutative ring given by mul/add.

    Sizes 2 and 4 are written out; larger sizes expand along the first row,
    i.e. a sum over perfect matchings.
    """
    if n % 2:
        raise ValueError("Pfaffian needs an even size")
    if n == 0:
        return one
    if n == 2:
        return entry(0, 1)
    if n == 4:
        a, b, c = entry(0, 1), entry(0, 2), entry(0, 3)
        dd, e, f = entry(1, 2), entry(1, 3), entry(2, 3)
        return add(add(mul(a, f), mul(mul(b, e), -1)), mul(dd, c))

    def rec(idx):
        if not idx:
            return one
        first, rest = idx[0], idx[1:]
        total = zero
        for k, j in enumerate(rest):
            sub = rest[:k] + rest[k + 1:]
            term = mul(entry(first, j), rec(sub))
            total = add(total, term if k % 2 == 0 else mul(term, -1))
        return total
    return rec(tuple(range(n)))


def pfaffian_matrix(A) -> float:
    """Pfaffian of a numeric skew-symmetric matrix."""
    A = np.asarray(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("square matrix required")
    if np.max(np.abs(A + A.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(A), initial=0.0)):
        raise ValueError("matrix is not skew-symmetric")
    return pfaffian_entries(n, lambda i, j: A[i, j], lambda x, y: x * y, lambda x, y: x + y, 0.0, 1.0)


def _form_ring(m: int):
    def mul(a, b):
        if isinstance(b, (int, float)):
            return a * b
        if isinstance(a, (int, float)):
            return b * a
        return _wedge_coeffs(m, a, b)
    one = np.zeros(1 << m, dtype=complex)
    one[0] = 1.0
    return mul, (lambda a, b: a + b), np.zeros(1 << m, dtype=complex), one


def pfaffian(C: CurvatureData) -> FormField:
    """Pf(Omega) as a form field; entries are 2-forms so they commute."""
    if C.rank % 2:
        raise ValueError("Pfaffian needs an even number of indices")
    m = C.chart.dim
    mul, add, zero, one = _form_ring(m)

    def func(x):
        M = C.matrix_at(x)
        return pfaffian_entries(C.rank, lambda i, j: M[i][j], mul, add, zero, one)
    return FormField(C.chart, func, label="Pf")


def euler_form(C: CurvatureData) -> FormField:
    """Pf(Omega) / (2 pi)^(rank/2) in an oriented frame."""
    P = pfaffian(C)
    k = C.rank // 2
    return FormField(C.chart, lambda x: C.sign_at(x) * P.coeffs(x) / (2 * math.pi) ** k, label="e")


def euler_integral(C: CurvatureData, grid=64, domain=None, invariant_axes: Sequence[int] = ()) -> Integral:
    if C.rank != C.chart.dim:
        raise ValueError("Euler form degree does not match the chart dimension")
    return integrate(euler_form(C), grid, domain=domain, invariant_axes=invariant_axes)


# ---------------------------------------------------------------- L-polynomial

L_CONSTANT = -1.0 / (24 * math.pi ** 2)


def trace_square(C: CurvatureData) -> FormField:
    """tr(Omega ^ Omega) = sum_{I,J} Omega^I_J ^ Omega^J_I."""
    m = C.chart.dim

    def func(x):
        M = C.matrix_at(x)
        out = np.zeros(1 << m, dtype=complex)
        for I in range(C.rank):
            for J in range(C.rank):
                if I != J:
                    out += _wedge_coeffs(m, M[I][J], M[J][I])
        return out
    return FormField(C.chart, func, label="tr(Omega^2)")


def curvature_square(C: CurvatureData) -> Callable:
    """x -> max over (I, J) of |(Omega ^ Omega)^I_J| at x."""
    m = C.chart.dim

    def f(x):
        M = C.matrix_at(x)
        worst = 0.0
        for I in range(C.rank):
            for J in range(C.rank):
                s = np.zeros(1 << m, dtype=complex)
                for K in range(C.rank):
                    s += _wedge_coeffs(m, M[I][K], M[K][J])
                worst = max(worst, float(np.max(np.abs(s))))
        return worst
    return f


def l_form(C: CurvatureData) -> FormField:
    """The degree-4 term -(1/24 pi^2) tr(Omega ^ Omega)."""
    T = trace_square(C)
    return FormField(C.chart, lambda x: L_CONSTANT * T.coeffs(x), label="L4")


@dataclass
class LIntegral:
    value: float
    error: float
    fast_path: bool
    max_square: float


def l_polynomial_integral(C: CurvatureData, grid=64, domain=None, invariant_axes: Sequence[int] = (),
                          fast_path: bool = False, samples: int = 32, seed: int = 0,
                          tol: float = 1e-10) -> LIntegral:
    """Integral of the degree-4 L-term over a 4-dimensional chart.

    With fast_path, Omega ^ Omega is first sampled componentwise; if it vanishes
    at every sample the integral is reported as 0 without quadrature.
    """
    if C.chart.dim != 4:
        raise ValueError("the degree-4 L-term is integrated over 4-dimensional charts only")
    rng = np.random.default_rng(seed)
    square = curvature_square(C)
    pts = C.chart.sample(samples, rng, shrink=0.05)
    worst = max(square(x) for x in pts)
    if fast_path and worst < tol:
        return LIntegral(0.0, 0.0, True, worst)
    res = integrate(l_form(C), grid, domain=domain, invariant_axes=invariant_axes)
    return LIntegral(res.value, res.error, False, worst)


# ---------------------------------------------------------------- transgression

def _pf_polarized(n: int, A, B, m: int):
    """Symmetric bilinear form p with p(X, X) = Pf(X) for 4 x 4 (normalised by 1/2!)."""
    w = lambda a, b: _wedge_coeffs(m, a, b)
    pairs = [((0, 1), (2, 3), 1), ((0, 2), (1, 3), -1), ((0, 3), (1, 2), 1)]
    out = np.zeros(1 << m, dtype=complex)
    for (i, j), (k, l), s in pairs:
        out += s * 0.5 * (w(A[i][j], B[k][l]) + w(B[i][j], A[k][l]))
    return out


def transgression(conn0: ConnectionData, conn1: ConnectionData, P: str = "pf", nodes: int = 6,
                  step=None) -> FormField:
    """T P = l int_0^1 p(omega1 - omega0, Omega_t, ..., Omega_t) dt along omega_t = omega0 + t theta.

    p is the symmetric multilinear form with p(X, ..., X) = P(X) (1/l! normalisation).
    P is 'pf' (rank 2 or 4) or 'l' (degree-4 L-term).
    """
    if conn0.chart is not conn1.chart:
        raise ValueError("both connections must live on one chart")
    if conn0.rank != conn1.rank:
        raise ValueError("connections of different rank")
    chart, n, m = conn0.chart, conn0.rank, conn0.chart.dim
    P = P.lower()
    if P == "pf" and n not in (2, 4):
        raise ValueError("Pfaffian transgression is implemented for rank 2 and 4")
    if P not in ("pf", "l"):
        raise ValueError(f"unsupported invariant polynomial {P!r}")
    tn, tw = np.polynomial.legendre.leggauss(nodes)
    tn, tw = 0.5 * (tn + 1), 0.5 * tw
    zero = np.zeros(chart.size, dtype=complex)

    def func(x):
        w0 = [[conn0.value(I, J, x) for J in range(n)] for I in range(n)]
        th = [[conn1.value(I, J, x) - w0[I][J] for J in range(n)] for I in range(n)]
        dw0 = [[zero if conn0.omega[I][J] is None else exterior_derivative_coeffs(conn0.omega[I][J], x, step)
                for J in range(n)] for I in range(n)]
        dw1 = [[zero if conn1.omega[I][J] is None else exterior_derivative_coeffs(conn1.omega[I][J], x, step)
                for J in range(n)] for I in range(n)]
        out = np.zeros(chart.size, dtype=complex)
        for t, wt in zip(tn, tw):
            wt_ = [[w0[I][J] + t * th[I][J] for J in range(n)] for I in range(n)]
            Om = [[(1 - t) * dw0[I][J] + t * dw1[I][J] for J in range(n)] for I in range(n)]
            for I in range(n):
                for J in range(n):
                    for K in range(n):
                        Om[I][J] = Om[I][J] + _wedge_coeffs(m, wt_[I][K], wt_[K][J])
            if P == "pf" and n == 2:
                val = th[0][1]
            elif P == "pf":
                val = 2 * _pf_polarized(n, th, Om, m)
            else:
                tr = np.zeros(chart.size, dtype=complex)
                for I in range(n):
                    for J in range(n):
                        tr += _wedge_coeffs(m, th[I][J], Om[J][I])
                val = 2 * L_CONSTANT * tr
            out += wt * val
        return out
    return FormField(chart, func, label=f"T{P}")


def invariant_form(C: CurvatureData, P: str) -> FormField:
    if P == "pf":
        return pfaffian(C)
    if P == "l":
        return l_form(C)
    raise ValueError(f"unsupported invariant polynomial {P!r}")


def transgression_residual(conn0: ConnectionData, conn1: ConnectionData, points, P: str = "pf") -> float:
    """max |d(T P) - (P(Omega_1) - P(Omega_0))| at the points."""
    T = transgression(conn0, conn1, P)
    dT = d(T)
    P1, P0 = invariant_form(curvature(conn1), P), invariant_form(curvature(conn0), P)
    worst = 0.0
    for x in np.atleast_2d(points):
        worst = max(worst, float(np.max(np.abs(dT.coeffs(x) - (P1.coeffs(x) - P0.coeffs(x))))))
    return worst


def adiabatic_connection(chart: Chart, vertical: Matrix, horizontal: Matrix, coframe_vertical: list,
                         t: float) -> ConnectionData:
    """Path from a product connection (t = 0) to the cone boundary connection (t = 1).

    Index order: vertical i, horizontal alpha, then r.  Components are
    omega^i_j(t) = omega^i_j, omega^i_r(t) = t e^i, omega^alpha_beta(t) = horizontal part.
    """
    v, h = len(vertical), len(horizontal)
    n = v + h + 1
    upper = {}
    for i in range(v):
        for j in range(i + 1, v):
            if vertical[i][j] is not None:
                upper[(i, j)] = vertical[i][j]
        e = coframe_vertical[i]
        upper[(i, n - 1)] = FormField(chart, lambda x, e=e: t * e.coeffs(x), label=f"{t} e{i}")
    for a in range(h):
        for b in range(a + 1, h):
            if horizontal[a][b] is not None:
                upper[(v + a, v + b)] = horizontal[a][b]
    M = _antisymmetric(n, upper)
    return ConnectionData(chart, M, None)


# ---------------------------------------------------------------- cone limit

def _embed(mask_map: np.ndarray, coeffs: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size, dtype=complex)
    out[mask_map] = coeffs
    return out


def cone_chart(base: Chart, fiber_dim: int, r_max: float = 1.0) -> Chart:
    """dr^2 + g_Y + r^2 g_V over coordinates (r, fiber..., base...) for a chart of a
    fibration whose first fiber_dim coordinates are vertical and metric is block diagonal."""
    v = fiber_dim

    def metric(x):
        g = np.asarray(base.metric(x[1:]), dtype=float).copy()
        g[:v, :v] *= x[0] ** 2
        out = np.zeros((base.dim + 1, base.dim + 1))
        out[0, 0] = 1.0
        out[1:, 1:] = g
        return out
    return Chart(("r",) + tuple(base.names), [(0.0, r_max)] + list(base.intervals), metric,
                 [False] + list(base.periodic), name=f"cone over {base.name}")


def _neville_zero(xs, ys):
    """Polynomial through (xs, ys) evaluated at 0."""
    xs = list(xs)
    P = [np.asarray(y, dtype=complex) for y in ys]
    k = len(xs)
    for level in range(1, k):
        for i in range(k - level):
            P[i] = (xs[i + level] * P[i] - xs[i] * P[i + 1]) / (xs[i + level] - xs[i])
    return P[0]


def cone_curvature_limit(base: Chart, fiber_dim: int, point, deltas=(0.08, 0.04, 0.02, 0.01)) -> dict:
    """Extrapolate the cone curvature to r -> 0 and compare with the limit model.

    The model, built from the Levi-Civita connection of the base fibration chart,
    is Omega^i_j -> R^Y - e^i ^ e^j, Omega^i_r -> -omega^i_alpha ^ f^alpha,
    Omega^i_alpha -> dr ^ omega^i_alpha, Omega^alpha_beta -> R^F, Omega^alpha_r -> 0,
    with R^Y = d omega^i_j + omega^i_k ^ omega^k_j and R^F the analogue on horizontal
    indices.  Returns the largest coefficient mismatch per block.
    """
    v = fiber_dim
    point = np.asarray(point, dtype=float)
    cone = cone_chart(base, v)
    n, m = cone.dim, cone.dim
    # coordinate masks of the base chart inside the cone chart (shift by the r slot)
    mask_map = np.array([mk << 1 for mk in range(base.size)])
    conn_c = levi_civita(cone)
    curv_c = curvature(conn_c)
    samples = [np.array([[curv_c.value(I, J, np.concatenate([[dl], point])) for J in range(n)] for I in range(n)])
               for dl in deltas]
    limit = _neville_zero(deltas, samples)

    conn_b = levi_civita(base)
    mb = base.dim
    es = [e.coeffs(point) for e in conn_b.coframe]
    wb = [[conn_b.value(I, J, point) for J in range(mb)] for I in range(mb)]
    dwb = [[np.zeros(base.size, dtype=complex) if conn_b.omega[I][J] is None
            else exterior_derivative_coeffs(conn_b.omega[I][J], point) for J in range(mb)] for I in range(mb)]
    dr = np.zeros(cone.size, dtype=complex)
    dr[1] = 1.0
    model = np.zeros((n, n, cone.size), dtype=complex)
    V, H = range(v), range(v, mb)
    for i in range(mb):
        for j in range(mb):
            if i == j:
                continue
            same = (i in V and j in V) or (i in H and j in H)
            if same:
                block = V if i in V else H
                R = dwb[i][j] + sum(_wedge_coeffs(mb, wb[i][k], wb[k][j]) for k in block)
                if i in V:
                    R = R - _wedge_coeffs(mb, es[i], es[j])
                model[1 + i, 1 + j] = _embed(mask_map, R, cone.size)
            elif i in V:
                model[1 + i, 1 + j] = _wedge_coeffs(m, dr, _embed(mask_map, wb[i][j], cone.size))
            else:
                model[1 + i, 1 + j] = -_wedge_coeffs(m, dr, _embed(mask_map, wb[j][i], cone.size))
    for i in V:
        s = np.zeros(base.size, dtype=complex)
        for a in H:
            s += _wedge_coeffs(mb, wb[i][a], es[a])
        model[1 + i, 0] = -_embed(mask_map, s, cone.size)
        model[0, 1 + i] = -model[1 + i, 0]
    blocks = {"vertical": [], "radial-vertical": [], "mixed": [], "horizontal": [], "radial-horizontal": []}
    for I in range(n):
        for J in range(n):
            if I == J:
                continue
            diff = float(np.max(np.abs(limit[I, J] - model[I, J])))
            i, j = I - 1, J - 1
            if I == 0 or J == 0:
                other = j if I == 0 else i
                key = "radial-vertical" if other in V else "radial-horizontal"
            elif i in V and j in V:
                key = "vertical"
            elif i in H and j in H:
                key = "horizontal"
            else:
                key = "mixed"
            blocks[key].append(diff)
    return {k: max(v_) if v_ else 0.0 for k, v_ in blocks.items()}


# ---------------------------------------------------------------- worked examples

def s5_codim4_connection() -> ConnectionData:
    """The tabulated connection of the codim-4 quotient of S^5 in the coframe
    (1/2 cos b dtheta, 1/2 cos b sin theta dphi, sin b dxi, db)."""
    from .s1_geometry import load_example
    chart = load_example("s5_codim4").geometry.quotient.chart
    sec = lambda b: 1 / math.cos(b)
    e_th = FormField.from_terms(chart, {(0,): lambda x: 0.5 * math.cos(x[3])}, "e_theta")
    e_ph = FormField.from_terms(chart, {(1,): lambda x: 0.5 * math.cos(x[3]) * math.sin(x[0])}, "e_phi")
    e_xi = FormField.from_terms(chart, {(2,): lambda x: math.sin(x[3])}, "e_xi")
    e_be = FormField.from_terms(chart, {(3,): lambda x: 1.0}, "e_beta")
    upper = {
        (0, 1): e_ph.scale(lambda x: -2 * sec(x[3]) / math.tan(x[0])),
        (0, 3): e_th.scale(lambda x: -math.tan(x[3])),
        (1, 3): e_ph.scale(lambda x: -math.tan(x[3])),
        (2, 3): e_xi.scale(lambda x: 1 / math.tan(x[3])),
    }
    return ConnectionData.from_upper(chart, upper, [e_th, e_ph, e_xi, e_be], ("theta", "phi", "xi", "beta"))


def circle_bundle_curvature(geometry) -> CurvatureData:
    """Rank-2 model of the orbit fibration: Omega^1_2 = -phi0_bar, so Pf/(2 pi) = -phi0_bar/(2 pi)."""
    chart = geometry.quotient.chart
    phib = geometry.phi0_bar()
    return CurvatureData.from_upper(chart, {(0, 1): _negate(phib)}, 2, ("1", "2"), frame_sign=1)


def s5_euler_integral(grid=64) -> Integral:
    C = curvature(s5_codim4_connection())
    return euler_integral(C, grid, invariant_axes=(1, 2))


def hopf_euler_number(grid=64) -> Integral:
    from .s1_geometry import load_example
    geom = load_example("hopf").geometry
    return euler_integral(circle_bundle_curvature(geom), grid, invariant_axes=(1,))


def s5_l_integral(grid=64, fast_path: bool = False) -> LIntegral:
    C = curvature(s5_codim4_connection())
    return l_polynomial_integral(C, grid, invariant_axes=(1, 2), fast_path=fast_path)


def s4_l_integral(grid=16, fast_path: bool = False) -> LIntegral:
    """L-term of the hemisphere quotient of the codim-2 action, Levi-Civita connection from the metric."""
    from .s1_geometry import load_example
    chart = load_example("s5_codim2").geometry.quotient.chart
    C = curvature(levi_civita(chart))
    return l_polynomial_integral(C, grid, invariant_axes=(0, 1), fast_path=fast_path)
