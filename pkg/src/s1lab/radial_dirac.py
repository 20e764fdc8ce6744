"""First order regular singular operators d/dr + S(r)/r on the half-line, finite rank.

Contents: classification of closed extensions by the small eigenvalues of S0,
asymptotic coefficients at r = 0, the Bessel solution operator of
d/dr + A/r + mu*alpha2, deficiency scans for gamma(d/dr + S0/r), Kato indices
of subspace pairs, the Hardy ratio, the vanishing estimate for
d/dr + A_H + A_V/r with a spectral boundary condition, and the cut-off
sequence used to approximate sections near the singular end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, linalg, optimize, special

GAP = 0.5


def _hermitian(M, name: str, tol: float = 1e-12) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got {M.shape}")
    if np.max(np.abs(M - M.conj().T), initial=0.0) > tol * max(1.0, np.max(np.abs(M), initial=0.0)):
        raise ValueError(f"{name} is not Hermitian")
    return M


def report_dict(operation: str, parameters: dict, residuals: dict, verdicts: dict, thresholds: dict) -> dict:
    return {"operation": operation, "parameters": parameters, "residuals": residuals,
            "verdicts": verdicts, "thresholds": thresholds}


@dataclass
class RegularSingularModel:
    """S(r) = S0 + r^(beta+1) S1(r).  alpha1, alpha2, mu describe d/dr + A/r + mu alpha2."""

    s0: np.ndarray
    s1: Callable[[float], np.ndarray] | None = None
    beta: float = 0.0
    alpha1: np.ndarray | None = None
    alpha2: np.ndarray | None = None
    mu: float | None = None
    gamma: np.ndarray | None = None

    def __post_init__(self):
        self.s0 = _hermitian(self.s0, "S0")
        d = self.s0.shape[0]
        if self.beta <= -0.5:
            raise ValueError("beta must exceed -1/2")
        for name in ("alpha1", "alpha2", "gamma"):
            M = getattr(self, name)
            if M is not None:
                M = np.atleast_2d(np.asarray(M, dtype=complex))
                if M.shape != (d, d):
                    raise ValueError(f"{name} has shape {M.shape}, expected {(d, d)}")
                setattr(self, name, M)
        if (self.alpha1 is None) != (self.alpha2 is None):
            raise ValueError("alpha1 and alpha2 come together")
        if self.alpha1 is not None:
            residuals = self.alpha_residuals()
            bad = {k: v for k, v in residuals.items() if v > 1e-10}
            if bad:
                raise ValueError(f"alpha relations fail: {bad}")

    @property
    def dim(self) -> int:
        return self.s0.shape[0]

    def alpha_residuals(self) -> dict:
        a1, a2, S = self.alpha1, self.alpha2, self.s0
        eye = np.eye(self.dim)
        nrm = lambda M: float(np.max(np.abs(M), initial=0.0))
        return {
            "alpha1^2 = 1": nrm(a1 @ a1 - eye),
            "alpha2^2 = 1": nrm(a2 @ a2 - eye),
            "alpha1 alpha2 + alpha2 alpha1 = 0": nrm(a1 @ a2 + a2 @ a1),
            "[alpha1, S0] = 0": nrm(a1 @ S - S @ a1),
            "{alpha2, S0} = 0": nrm(a2 @ S + S @ a2),
        }

    def s(self, r: float) -> np.ndarray:
        if self.s1 is None:
            return self.s0
        return self.s0 + r ** (self.beta + 1) * np.asarray(self.s1(r), dtype=complex)

    def plane_gamma(self) -> np.ndarray:
        if self.gamma is not None:
            return self.gamma
        if self.dim % 2:
            raise ValueError("the default gamma needs an even number of components")
        k = self.dim // 2
        I = np.eye(k)
        Z = np.zeros((k, k))
        return np.block([[Z, -I], [I, Z]]).astype(complex)


def plane_model(with_potential: bool = True) -> RegularSingularModel:
    """The Dirac-Schroedinger operator of the plane in polar form: gamma(d/dr - diag(1,-1)/2r)."""
    s0 = np.diag([-0.5, 0.5]) if with_potential else np.zeros((2, 2))
    return RegularSingularModel(s0=s0)


# ---------------------------------------------------------------- extensions

@dataclass
class ExtensionClassification:
    small_eigenvalues: np.ndarray
    eigenspaces: list
    essentially_self_adjoint: bool

    @property
    def w_dimension(self) -> int:
        return sum(E.shape[1] for E in self.eigenspaces)

    def basis(self) -> np.ndarray:
        if not self.eigenspaces:
            return np.zeros((0, 0))
        return np.hstack(self.eigenspaces)

    def relative_index(self, W) -> int:
        """ind(T_W) - ind(T_min) = dim W for W inside the sum of small eigenspaces."""
        W = np.atleast_2d(np.asarray(W, dtype=complex))
        if W.size == 0:
            return 0
        B = self.basis()
        if B.size == 0:
            raise ValueError("no small eigenvalues, only W = 0 is admissible")
        outside = W - B @ (B.conj().T @ W)
        if np.max(np.abs(outside)) > 1e-9 * max(1.0, np.max(np.abs(W))):
            raise ValueError("W is not contained in the small eigenspaces of S0")
        return int(np.linalg.matrix_rank(W, tol=1e-9))

    def to_report(self) -> dict:
        return report_dict("classify_extensions",
                           {"small_eigenvalues": [float(x) for x in self.small_eigenvalues]},
                           {}, {"essentially_self_adjoint": self.essentially_self_adjoint,
                                "w_dimension": self.w_dimension},
                           {"open_interval": [-GAP, GAP]})


def classify_extensions(model: RegularSingularModel | np.ndarray, tol: float = 1e-12) -> ExtensionClassification:
    S0 = model.s0 if isinstance(model, RegularSingularModel) else _hermitian(model, "S0")
    w, U = np.linalg.eigh(S0)
    small = [k for k, x in enumerate(w) if -GAP + tol < x < GAP - tol]
    values = np.array([w[k] for k in small])
    spaces = []
    for x in np.unique(np.round(values, 12)):
        cols = [k for k in small if abs(w[k] - x) <= 1e-10]
        spaces.append(U[:, cols])
    return ExtensionClassification(values, spaces, not small)


# ---------------------------------------------------------------- radial sections

def geometric_grid(r_min: float, r_max: float, count: int) -> np.ndarray:
    return np.geomspace(r_min, r_max, count)


@dataclass
class RadialSection:
    """Values of a section on a grid in (0, t]; values[k] is the vector at grid[k]."""

    grid: np.ndarray
    values: np.ndarray
    tag: str = ""

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values)
        if self.grid.ndim != 1 or self.grid.size < 2:
            raise ValueError("grid must be one-dimensional with at least two nodes")
        if self.grid[0] <= 0 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be positive and strictly increasing")
        if self.values.shape[0] != self.grid.size:
            raise ValueError("one value per grid node")

    @classmethod
    def sample(cls, f: Callable[[float], np.ndarray], grid, tag: str = "") -> "RadialSection":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.array([np.asarray(f(r)) for r in grid]), tag)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values.reshape(self.grid.size, -1), axis=1)

    def interpolant(self) -> Callable[[float], np.ndarray]:
        """Cubic spline on the grid, zero outside."""
        from scipy.interpolate import CubicSpline
        flat = self.values.reshape(self.grid.size, -1)
        spline = CubicSpline(self.grid, flat, axis=0)
        shape = self.values.shape[1:]
        lo, hi = self.grid[0], self.grid[-1]

        def f(r):
            if r < lo or r > hi:
                return np.zeros(shape, dtype=flat.dtype)
            return spline(r).reshape(shape)
        return f


def decay_exponent(radii, norms) -> float:
    """Least-squares slope of log|sigma| against log r."""
    radii, norms = np.asarray(radii, float), np.asarray(norms, float)
    keep = norms > 0
    if keep.sum() < 2:
        return math.inf
    slope, _ = np.polyfit(np.log(radii[keep]), np.log(norms[keep]), 1)
    return float(slope)


# ---------------------------------------------------------------- asymptotics at 0

@dataclass
class AsymptoticFit:
    coefficients: dict
    remainder_exponent: float
    residual: float

    def to_report(self) -> dict:
        return report_dict("asymptotic_coefficients", {},
                           {"fit": self.residual},
                           {"remainder_exponent": self.remainder_exponent},
                           {"remainder_exponent_min": GAP})


def _fit_power_pair(r, p, lead, rho_bounds=(GAP, 4.0), cond_limit=1e12):
    """p(r) ~ c r^lead + d r^rho, rho fitted by a scan then bounded minimisation."""
    logr = np.log(r)
    scale = np.max(np.abs(p)) or 1.0

    def solve(rho):
        cols = [np.exp(rho * logr)] if lead is None else [np.exp(lead * logr), np.exp(rho * logr)]
        M = np.stack(cols, axis=1)
        norms = np.linalg.norm(M, axis=0)
        coef, *_ = np.linalg.lstsq(M / norms, p, rcond=None)
        coef = coef / norms
        res = np.linalg.norm(M @ coef - p) / scale
        return coef, res, np.linalg.cond(M / norms)

    rhos = np.linspace(rho_bounds[0], rho_bounds[1], 141)
    if lead is not None:
        rhos = rhos[np.abs(rhos - lead) > 0.02]
    errs = [solve(x)[1] for x in rhos]
    k = int(np.argmin(errs))
    lo, hi = rhos[max(k - 1, 0)], rhos[min(k + 1, len(rhos) - 1)]
    best = optimize.minimize_scalar(lambda x: solve(x)[1], bounds=(lo, hi), method="bounded",
                                    options={"xatol": 1e-10})
    rho = float(best.x) if best.fun <= errs[k] else float(rhos[k])
    coef, res, cond = solve(rho)
    if cond > cond_limit:
        raise ValueError(f"ill-conditioned asymptotic fit (condition number {cond:.2e})")
    return coef, rho, res


def asymptotic_coefficients(model: RegularSingularModel, sigma: RadialSection, zero_tol: float = 1e-10) -> AsymptoticFit:
    """Fit sigma(r) ~ sum_{|lambda|<1/2} c_lambda r^(-lambda) e_lambda + O(r^rho) near r = 0.

    The remainder is modelled as a single power in each eigendirection; only the
    exponent rho is reported, no logarithmic factor is fitted.
    """
    r = sigma.grid
    values = sigma.values.reshape(r.size, -1)
    if values.shape[1] != model.dim:
        raise ValueError("section dimension does not match S0")
    w, U = np.linalg.eigh(model.s0)
    proj = values @ U.conj()
    coefficients, exponents, residual = {}, [], 0.0
    for k, lam in enumerate(w):
        p = proj[:, k]
        if np.max(np.abs(p)) <= zero_tol:
            if abs(lam) < GAP:
                coefficients[float(lam)] = 0.0
            continue
        if abs(lam) < GAP:
            coef, rho, res = _fit_power_pair(r, p, -lam)
            c, dcoef = complex(coef[0]), complex(coef[1])
            coefficients[float(lam)] = c.real if abs(c.imag) < 1e-14 else c
        else:
            coef, rho, res = _fit_power_pair(r, p, None)
            dcoef = complex(coef[0])
        residual = max(residual, res)
        if abs(dcoef) * r[-1] ** rho > 1e-8 * np.max(np.abs(p)):
            exponents.append(rho)
    for k, c in list(coefficients.items()):
        if abs(c) < 1e-12:
            coefficients[k] = 0.0
    return AsymptoticFit(coefficients, min(exponents) if exponents else math.inf, residual)


# ---------------------------------------------------------------- Bessel kernels

def scaled_i(nu: float, z):
    """I_nu(z) e^(-z) for real nu; negative order through I_{-v} = I_v + (2/pi) sin(v pi) K_v."""
    z = np.asarray(z, dtype=float)
    if nu >= 0:
        return special.ive(nu, z)
    v = -nu
    extra = 0.0 if float(v).is_integer() else (2 / np.pi) * np.sin(v * np.pi) * special.kve(v, z) * np.exp(-2 * z)
    return special.ive(v, z) + extra


def scaled_k(nu: float, z):
    """K_nu(z) e^z; K_{-nu} = K_nu."""
    return special.kve(abs(nu), np.asarray(z, dtype=float))


def bessel_k_quadrature(nu: float, z: float) -> float:
    """K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt, returned scaled by e^z."""
    f = lambda t: math.exp(-z * (math.cosh(t) - 1) + abs(nu) * t) * 0.5 * (1 + math.exp(-2 * abs(nu) * t))
    upper = 1.0
    while z * (math.cosh(upper) - 1) - abs(nu) * upper < 60:
        upper *= 1.5
    val, _ = integrate.quad(f, 0, upper, epsabs=0, epsrel=1e-13, limit=200)
    return val


def bessel_i_quadrature(nu: float, z: float) -> float:
    """I_nu(z) = (1/pi) int_0^pi e^(z cos s) cos(nu s) ds - (sin nu pi / pi) int_0^inf e^(-z cosh t - nu t) dt,
    returned scaled by e^(-z)."""
    first, _ = integrate.quad(lambda s: math.exp(z * (math.cos(s) - 1)) * math.cos(nu * s), 0, math.pi,
                              epsabs=0, epsrel=1e-13, limit=200)
    first /= math.pi
    s = math.sin(nu * math.pi)
    if abs(s) < 1e-15:
        return first
    upper = 1.0
    while z * math.cosh(upper) + nu * upper < 60 + 2 * z:
        upper *= 1.5
    second, _ = integrate.quad(lambda t: math.exp(-z * (math.cosh(t) + 1) - nu * t), 0, upper,
                               epsabs=0, epsrel=1e-13, limit=200)
    return first - s / math.pi * second


def _gauss_panels(lo: float, hi: float, panels: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass
class BesselSolution:
    """sigma = G_0 tau + G_inf tau for d/dr + A/r + mu [[0,1],[1,0]] with A = diag(a)."""

    a: np.ndarray
    mu: float
    tau: Callable[[float], np.ndarray]
    support: tuple
    panels: int = 16
    order: int = 32

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        lo, hi = self.support
        if not 0 <= lo < hi:
            raise ValueError("support must be an interval [lo, hi] with 0 <= lo < hi")

    def _tau_nodes(self, nodes):
        vals = np.array([np.asarray(self.tau(s), dtype=float).reshape(2, -1) for s in nodes])
        if vals.shape[2] != self.a.size:
            raise ValueError("tau must have shape (2, len(a))")
        return vals

    def _component(self, a: float, r: float, nodes0, w0, tau0, nodes1, w1, tau1):
        """(sigma_+, sigma_-) at r for one eigenvalue a > -1/2 of A; tau columns (tau_+, tau_-)."""
        mu = self.mu
        out = np.zeros(2)
        if nodes0.size:
            z, x = mu * r, mu * nodes0
            damp = np.exp(-(z - x))
            g = mu * np.sqrt(r * nodes0) * damp
            inner = np.sum(w0 * g * (scaled_i(a - 0.5, x) * tau0[:, 0] + scaled_i(a + 0.5, x) * tau0[:, 1]))
            out += inner * np.array([scaled_k(a + 0.5, z), scaled_k(a - 0.5, z)])
        if nodes1.size:
            z, x = mu * r, mu * nodes1
            damp = np.exp(-(x - z))
            g = mu * np.sqrt(r * nodes1) * damp
            inner = np.sum(w1 * g * (scaled_k(a - 0.5, x) * tau1[:, 0] - scaled_k(a + 0.5, x) * tau1[:, 1]))
            out -= inner * np.array([scaled_i(a + 0.5, z), -scaled_i(a - 0.5, z)])
        return out

    def __call__(self, r: float) -> np.ndarray:
        if r <= 0:
            raise ValueError("r must be positive")
        lo, hi = self.support
        nodes0 = w0 = nodes1 = w1 = np.zeros(0)
        if r > lo:
            nodes0, w0 = _gauss_panels(lo, min(r, hi), self.panels, self.order)
        if r < hi:
            nodes1, w1 = _gauss_panels(max(r, lo), hi, self.panels, self.order)
        tau0 = self._tau_nodes(nodes0) if nodes0.size else np.zeros((0, 2, self.a.size))
        tau1 = self._tau_nodes(nodes1) if nodes1.size else np.zeros((0, 2, self.a.size))
        sigma = np.zeros((2, self.a.size))
        for k, a in enumerate(self.a):
            if a <= -0.5:
                # mirror: swapping (+,-) turns A into -A
                pair = self._component(-a, r, nodes0, w0, tau0[:, ::-1, k], nodes1, w1, tau1[:, ::-1, k])[::-1]
            else:
                pair = self._component(a, r, nodes0, w0, tau0[:, :, k], nodes1, w1, tau1[:, :, k])
            sigma[:, k] = pair
        return sigma

    def operator(self, r: float, h: float | None = None) -> np.ndarray:
        """(d/dr + A/r + mu alpha2) sigma at r, derivative by Richardson-extrapolated central differences."""
        h = h or 2e-3 * max(r, 1e-3)
        if r - 2 * h <= 0:
            raise ValueError("stencil leaves (0, inf)")

        def central(step):
            return (-self(r + 2 * step) + 8 * self(r + step) - 8 * self(r - step) + self(r - 2 * step)) / (12 * step)
        deriv = (16 * central(h / 2) - central(h)) / 15
        s = self(r)
        out = deriv + s * (self.a / r)[None, :] * np.array([[1.0], [-1.0]])
        out += self.mu * s[::-1]
        return out

    def residual(self, radii) -> float:
        """max |L sigma - tau| / max |tau| over the given radii."""
        err, ref = 0.0, 0.0
        for r in radii:
            t = np.asarray(self.tau(r), dtype=float).reshape(2, -1)
            err = max(err, float(np.max(np.abs(self.operator(r) - t))))
            ref = max(ref, float(np.max(np.abs(t))))
        return err / ref if ref else err

    def small_r_exponent(self, r_min: float = 1e-4, r_max: float = 1e-2, count: int = 12) -> float:
        radii = geometric_grid(r_min, min(r_max, 0.5 * self.support[0]) if self.support[0] > 0 else r_max, count)
        return decay_exponent(radii, [np.linalg.norm(self(r)) for r in radii])

    def homogeneous(self, r: float, k: int = 0) -> tuple:
        """The solutions regular at 0 and at infinity for the k-th eigenvalue (before the mirror)."""
        a, z = self.a[k], self.mu * r
        if a <= -0.5:
            a = -a
            inner = np.sqrt(r) * np.exp(z) * np.array([scaled_i(a + 0.5, z), -scaled_i(a - 0.5, z)])[::-1]
            outer = np.sqrt(r) * np.exp(-z) * np.array([scaled_k(a + 0.5, z), scaled_k(a - 0.5, z)])[::-1]
            return inner, outer
        inner = np.sqrt(r) * np.exp(z) * np.array([scaled_i(a + 0.5, z), -scaled_i(a - 0.5, z)])
        outer = np.sqrt(r) * np.exp(-z) * np.array([scaled_k(a + 0.5, z), scaled_k(a - 0.5, z)])
        return inner, outer


def smooth_bump(lo: float, hi: float) -> Callable[[float], float]:
    """exp(1 - 1/(1 - x^2)) on the interval, x the affine coordinate in (-1, 1)."""
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def f(r):
        x = (r - mid) / half
        if abs(x) >= 1:
            return 0.0
        return math.exp(1 - 1 / (1 - x * x))
    return f


def bessel_solution(model: RegularSingularModel | np.ndarray, mu: float, tau, support=None, **kw) -> BesselSolution:
    """Solution operator of (d/dr + A/r + mu alpha2) sigma = tau, A real diagonal.

    tau is a callable r -> (2, len(A)) array or a RadialSection with values of
    that shape; rows are the (+, -) components in the splitting by alpha1.
    """
    A = model.s0 if isinstance(model, RegularSingularModel) else np.atleast_2d(np.asarray(model, dtype=float))
    if np.max(np.abs(A - np.diag(np.diag(A)))) > 0 or np.max(np.abs(np.imag(A))) > 0:
        raise ValueError("A must be real diagonal")
    if isinstance(tau, RadialSection):
        support = support or (float(tau.grid[0]), float(tau.grid[-1]))
        tau = tau.interpolant()
    if support is None:
        raise ValueError("support of tau required")
    return BesselSolution(np.real(np.diag(A)), float(mu), tau, tuple(support), **kw)


# ---------------------------------------------------------------- deficiency

def second_order_exponents(c: float) -> tuple:
    """Roots of rho(rho - 1) = c, the indicial equation of f'' - (c/r^2) f = 0."""
    disc = math.sqrt(0.25 + c)
    return (0.5 + disc, 0.5 - disc)


@dataclass
class DeficiencyReport:
    lam: complex
    frobenius_exponents: list
    recessive_count: int
    recessive_exponents: list
    deficiency: int

    def to_report(self) -> dict:
        return report_dict("deficiency_scan", {"lambda": str(self.lam)}, {},
                           {"deficiency": self.deficiency, "frobenius_exponents": self.frobenius_exponents,
                            "recessive_exponents": self.recessive_exponents},
                           {"l2_exponent": -GAP})


def deficiency_scan(model: RegularSingularModel, lam: complex = 1j, r_inf: float = 20.0,
                    r_zero: float = 1e-6, rank_tol: float = 1e-6) -> DeficiencyReport:
    """L^2 solutions of gamma(d/dr + S(r)/r) sigma = lam sigma, at the level of the first order system.

    The solutions decaying at infinity are integrated inward in t = log r; near 0
    the k-th eigendirection of S0 behaves like r^(-s_k), square integrable iff
    s_k < 1/2.  The deficiency is the dimension of the recessive combinations whose
    non-L^2 Frobenius coefficients all vanish.
    """
    gamma = model.plane_gamma()
    d = model.dim
    w, U = np.linalg.eigh(model.s0)
    evals, evecs = np.linalg.eig(-lam * gamma)
    rec = evecs[:, evals.real < 0]

    def rhs(t, y):
        r = math.exp(t)
        return (-model.s(r) @ y - lam * r * (gamma @ y))

    t0, t1 = math.log(r_inf), math.log(r_zero)
    probe = math.log(10 * r_zero)
    coeffs, exps = [], []
    for k in range(rec.shape[1]):
        sol = integrate.solve_ivp(rhs, (t0, t1), rec[:, k].astype(complex), method="DOP853",
                                  rtol=1e-11, atol=1e-14, t_eval=[0.0, probe, t1])
        if not sol.success:
            raise RuntimeError(sol.message)
        unit, end, near = sol.y[:, 0], sol.y[:, 1], sol.y[:, 2]
        exps.append((math.log(np.linalg.norm(near)) - math.log(np.linalg.norm(end))) / (t1 - probe))
        # the L^2 directions can carry forced growth, so measure against the size at r = 1
        c = (U.conj().T @ near) * r_zero ** w
        coeffs.append(c / np.linalg.norm(unit))
    bad = [k for k, s in enumerate(w) if s >= GAP]
    C = np.array(coeffs)[:, bad] if bad else np.zeros((len(coeffs), 0))
    rank = int(np.linalg.matrix_rank(C, tol=rank_tol)) if C.size else 0
    return DeficiencyReport(lam, [float(-s) for s in w], rec.shape[1], exps, rec.shape[1] - rank)


def deficiency_indices(model: RegularSingularModel, **kw) -> tuple:
    return deficiency_scan(model, 1j, **kw).deficiency, deficiency_scan(model, -1j, **kw).deficiency


def kernel_dimension(model: RegularSingularModel, adjoint: bool = False, decades: int = 6,
                     rel_tol: float = 1e-3) -> int:
    """Dimension of the L^2 kernel of d/dr + S(r)/r (or of -d/dr + S(r)/r) on the half-line.

    Each basis solution of sigma' = -+S(r) sigma / r is integrated from r = 1 out to
    10^(+-decades) in t = log r; it counts as square integrable when the last two
    decades add less than rel_tol of the accumulated norm at both ends.  Integration
    stops early once |sigma| has blown up (not L^2) or decayed below 1e-150 relative
    to its start (the rest of the tail is negligible).
    """
    d = model.dim
    sign = 1.0 if adjoint else -1.0

    def rhs(t, y):
        v = y[:d]
        r = math.exp(t)
        dv = sign * (model.s(r) @ v)
        return np.concatenate([dv, [r * float(np.vdot(v, v).real)]]).astype(complex)

    def log_norm(t, y):
        return math.log(max(float(np.vdot(y[:d], y[:d]).real), 1e-320))

    def blow_up(t, y):
        return log_norm(t, y) - 300.0
    blow_up.terminal = True

    def died(t, y):
        return log_norm(t, y) + 690.0
    died.terminal = True

    # relative control on sigma so that decaying solutions keep decaying
    atol = np.array([1e-300] * d + [1e-14])
    count = 0
    for k in range(d):
        y0 = np.concatenate([np.eye(d)[k], [0.0]]).astype(complex)
        ok = True
        for end in (-1, 1):
            T = end * decades * math.log(10)
            mark = end * (decades - 2) * math.log(10)
            sol = integrate.solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=1e-10, atol=atol,
                                      events=(blow_up, died), dense_output=True)
            if sol.status == -1:
                raise RuntimeError(sol.message)
            if sol.t_events[0].size:
                ok = False
                continue
            if sol.t_events[1].size:
                continue
            before, total = abs(sol.sol(mark)[d].real), abs(sol.y[d, -1].real)
            if not math.isfinite(total) or total - before > rel_tol * max(total, 1e-300):
                ok = False
        count += ok
    return count


# ---------------------------------------------------------------- Kato index

def _orth(X, name: str, tol: float = 1e-10) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    if X.size == 0 or X.shape[1] == 0:
        return np.zeros((X.shape[0], 0), dtype=complex)
    Q = linalg.orth(X, rcond=tol)
    if Q.shape[1] != X.shape[1]:
        raise ValueError(f"spanning set of {name} is rank deficient ({Q.shape[1]} < {X.shape[1]})")
    return Q


@dataclass
class SubspacePair:
    """Subspaces X, Y of C^d, each given by spanning column vectors of full rank."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = _orth(self.x, "X")
        self.y = _orth(self.y, "Y")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("X and Y live in different spaces")

    @property
    def ambient(self) -> int:
        return self.x.shape[0]


def kato_index(pair: SubspacePair, tol: float = 1e-9) -> int:
    """dim(X cap Y) - codim(X + Y)."""
    joint = np.hstack([pair.x, pair.y])
    s = np.linalg.svd(joint, compute_uv=False) if joint.size else np.zeros(0)
    if s.size and np.any((s > tol) & (s < 1e3 * tol)):
        raise ValueError("rank decision within tolerance band")
    rank = int(np.sum(s > tol))
    intersection = pair.x.shape[1] + pair.y.shape[1] - rank
    return intersection - (pair.ambient - rank)


def spectral_subspace(A, predicate: Callable[[float], bool]) -> np.ndarray:
    w, U = np.linalg.eigh(np.asarray(A, dtype=complex))
    return U[:, [k for k, x in enumerate(w) if predicate(x)]]


def range_of(P, tol: float = 1e-10) -> np.ndarray:
    return linalg.orth(np.asarray(P, dtype=complex), rcond=tol)


def kernel_of(P, tol: float = 1e-10) -> np.ndarray:
    return linalg.null_space(np.asarray(P, dtype=complex), rcond=tol)


def fredholm_index(M, tol: float = 1e-9) -> int:
    """dim ker - dim coker of a matrix between spaces of its row and column counts."""
    M = np.atleast_2d(M)
    rows, cols = M.shape
    rank = int(np.linalg.matrix_rank(M, tol=tol)) if M.size else 0
    return (cols - rank) - (rows - rank)


def kato_additivity(E, P, Q) -> dict:
    """Both sides of ind(E, ran P) = ind(E, ran Q) + ind(ker Q, ran P) and of
    ind(E, ran P) = ind((I - P): E -> ker P)."""
    P, Q = np.asarray(P, dtype=complex), np.asarray(Q, dtype=complex)
    E = _orth(E, "E")
    lhs = kato_index(SubspacePair(E, range_of(P)))
    rhs = kato_index(SubspacePair(E, range_of(Q))) + kato_index(SubspacePair(kernel_of(Q), range_of(P)))
    kerP = kernel_of(P)
    restricted = kerP.conj().T @ (np.eye(P.shape[0]) - P) @ E
    return {"ind(E, ran P)": lhs, "sum": rhs,
            "ind((I-P): E -> ker P)": fredholm_index(restricted)}


def kato_example(A=(-1.0, 0.0, 2.0)) -> dict:
    """The three indices for the spectral subspaces of a diagonal matrix."""
    A = np.diag(A)
    H = {name: spectral_subspace(A, p) for name, p in
         (("<", lambda x: x < 0), ("<=", lambda x: x <= 0), (">=", lambda x: x >= 0), (">", lambda x: x > 0))}
    return {"ind(H<, H>=)": kato_index(SubspacePair(H["<"], H[">="])),
            "ind(H<=, H>=)": kato_index(SubspacePair(H["<="], H[">="])),
            "ind(H<, H>)": kato_index(SubspacePair(H["<"], H[">"]))}


# ---------------------------------------------------------------- zeta relations

def zeta_relations(h: int, A, mu: float, beta) -> dict:
    """Residuals of zeta^dagger = zeta, zeta^2 = (mu^2 + |beta|^2), {zeta, A~} = 0.

    The space is Lambda(R^h) (x) C^2 (x) C^y, with c(beta) = beta^ - iota_beta
    on the first factor, gamma~ = i eps_H (x) [[0,-1],[1,0]] and A~ = 1 (x) diag(1,-1) (x) A.
    The induced involutions alpha1 = 1 (x) diag(1,-1) (x) 1 and alpha2 = zeta / |zeta|
    are checked against A~ as well.
    """
    from .exterior_clifford import ExteriorAlgebra
    A = _hermitian(A, "A")
    beta = np.asarray(beta, dtype=float)
    alg = ExteriorAlgebra(h)
    c = alg.clifford(alg.one_form(beta)).matrix
    eps = alg.grading_matrix
    J = np.array([[0, -1], [1, 0]], dtype=complex)
    Iy = np.eye(A.shape[0])
    gt = 1j * np.kron(np.kron(eps, J), Iy)
    C = np.kron(np.kron(c, np.eye(2)), Iy)
    At = np.kron(np.kron(np.eye(2 ** h), np.diag([1.0, -1.0])), A)
    zeta = mu * gt - gt @ C
    n = zeta.shape[0]
    mt = mu ** 2 + float(beta @ beta)
    alpha1 = np.kron(np.kron(np.eye(2 ** h), np.diag([1.0, -1.0])), Iy)
    alpha2 = zeta / math.sqrt(mt)
    nrm = lambda M: float(np.max(np.abs(M)))
    return {"zeta hermitian": nrm(zeta - zeta.conj().T),
            "zeta^2 scalar": nrm(zeta @ zeta - mt * np.eye(n)),
            "{zeta, A~} = 0": nrm(zeta @ At + At @ zeta),
            "alpha1 alpha2 + alpha2 alpha1 = 0": nrm(alpha1 @ alpha2 + alpha2 @ alpha1),
            "[alpha1, A~] = 0": nrm(alpha1 @ At - At @ alpha1),
            "{alpha2, A~} = 0": nrm(alpha2 @ At + At @ alpha2)}


# ---------------------------------------------------------------- Hardy

def hardy_check(f: Callable, p: float = 2.0, support: tuple = (0.0, 1.0), panels: int = 32,
                order: int = 24) -> float:
    """||F||_p / ||f||_p with F(x) = (1/x) int_0^x f, f supported in the given interval.

    Beyond the support F = c/x, whose L^p tail is integrated in closed form.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    lo, hi = support
    nodes, weights = _gauss_panels(lo, hi, panels, order)
    fv = np.array([f(x) for x in nodes], dtype=float)
    norm_f = (np.sum(weights * np.abs(fv) ** p)) ** (1 / p)
    if norm_f == 0:
        return 0.0
    x_ref, w_ref = np.polynomial.legendre.leggauss(order)
    # cumulative integral from lo to each node, panel by panel
    edges = np.linspace(lo, hi, panels + 1)
    cum = np.zeros(nodes.size)
    before = 0.0
    for j in range(panels):
        a, b = edges[j], edges[j + 1]
        sl = slice(j * order, (j + 1) * order)
        for i, x in enumerate(nodes[sl]):
            half = 0.5 * (x - a)
            s = a + half * (x_ref + 1)
            cum[j * order + i] = before + half * np.sum(w_ref * np.array([f(t) for t in s]))
        half = 0.5 * (b - a)
        before += half * np.sum(w_ref * fv[sl])
    F = cum / nodes
    inside = np.sum(weights * np.abs(F) ** p)
    if lo > 0:
        pass  # F vanishes on (0, lo)
    tail = abs(before) ** p * hi ** (1 - p) / (p - 1)
    return float((inside + tail) ** (1 / p) / norm_f)


# ---------------------------------------------------------------- vanishing estimate

@dataclass
class VanishingReport:
    adjoint: bool
    radii: np.ndarray
    min_ratio: np.ndarray
    threshold: float

    def holds_up_to(self, t: float) -> bool:
        return bool(np.all(self.min_ratio[self.radii <= t] >= 1.0))

    def to_report(self) -> dict:
        return report_dict("vanishing_estimate", {"adjoint": self.adjoint, "radii": self.radii.tolist()},
                           {"min_ratio": self.min_ratio.tolist()}, {"t_star": self.threshold},
                           {"ratio_min": 1.0})


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, with derivative."""
    x = np.asarray(x, dtype=float)
    def g(y):
        out = np.zeros_like(y)
        m = y > 0
        out[m] = np.exp(-1 / y[m])
        return out
    def dg(y):
        out = np.zeros_like(y)
        m = y > 0
        out[m] = np.exp(-1 / y[m]) / y[m] ** 2
        return out
    a, b = g(x), g(1 - x)
    da, db = dg(x), -dg(1 - x)
    s = a / (a + b)
    ds = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return s, ds


def core_sections(dim: int, t: float, count: int, rng, modes: int = 4, boundary=None):
    """Random band-limited vectors times a bump vanishing near 0, corrected at r = t.

    Returns callables sigma(r), sigma'(r) (vectorised over r, shape (len(r), dim)).
    boundary is the orthogonal projection whose range must not contain sigma(t).
    """
    out = []
    for _ in range(count):
        coef = (rng.normal(size=(modes, dim)) + 1j * rng.normal(size=(modes, dim))) / np.arange(1, modes + 1)[:, None]
        start = rng.uniform(0.05, 0.5) * t
        width = rng.uniform(0.1, 0.5) * t

        def base(r, coef=coef, start=start, width=width):
            r = np.atleast_1d(r)
            s, ds = _smooth_step((r - start) / width)
            k = np.arange(modes)
            phase = np.pi * np.outer(r / t, k)
            v = np.cos(phase) @ coef
            dv = -(np.sin(phase) * (np.pi * k / t)) @ coef
            return s[:, None] * v, (ds / width)[:, None] * v + s[:, None] * dv

        if boundary is None:
            out.append(base)
            continue
        bad = boundary @ base(t)[0][0]
        cut = 0.5 * t

        def fixed(r, base=base, bad=bad, cut=cut):
            v, dv = base(r)
            s, ds = _smooth_step((np.atleast_1d(r) - cut) / (t - cut))
            return v - s[:, None] * bad[None, :], dv - (ds / (t - cut))[:, None] * bad[None, :]
        out.append(fixed)
    return out


def _spectral_projection(M, predicate) -> np.ndarray:
    w, U = np.linalg.eigh(M)
    V = U[:, [k for k, x in enumerate(w) if predicate(x)]]
    return V @ V.conj().T


def vanishing_ratio(sigma, t: float, a_h: Callable[[float], np.ndarray], a_v: np.ndarray,
                    adjoint: bool = False, panels: int = 16, order: int = 24) -> float:
    """||D sigma|| 2t / ||(A_V +- 1/2) sigma|| on (0, t], D = +-d/dr + A_H(r) + A_V/r."""
    nodes, weights = _gauss_panels(0.0, t, panels, order)
    v, dv = sigma(nodes)
    AH = np.array([a_h(r) for r in nodes])
    sign = -1.0 if adjoint else 1.0
    Dv = sign * dv + np.einsum("nij,nj->ni", AH, v) + (v @ a_v.T) / nodes[:, None]
    shift = -0.5 if adjoint else 0.5
    Bv = v @ (a_v + shift * np.eye(a_v.shape[0])).T
    num = math.sqrt(float(np.sum(weights * np.sum(np.abs(Dv) ** 2, axis=1))))
    den = math.sqrt(float(np.sum(weights * np.sum(np.abs(Bv) ** 2, axis=1))))
    return 2 * t * num / den if den else math.inf


def vanishing_estimate(a_h, a_v, radii, samples: int = 64, seed: int = 0, adjoint: bool = False) -> VanishingReport:
    """Minimum of ||D sigma|| 2t / ||(A_V + 1/2) sigma|| over core sections, for each t.

    D = d/dr + A_H(r) + A_V/r with Q_<(A(t)) sigma(t) = 0, or the adjoint
    -d/dr + A(r) with Q_>=(A(t)) sigma(t) = 0 and A_V - 1/2 in the bound.
    a_h is a constant Hermitian matrix or a callable r -> matrix.  The threshold
    is the largest scanned t such that the ratio is at least 1 at every scanned
    radius up to t (0 if it already fails at the smallest).
    """
    a_v = np.atleast_2d(np.asarray(a_v, dtype=complex))
    if np.max(np.abs(a_v - np.diag(np.diag(a_v)))) > 0:
        raise ValueError("A_V must be diagonal")
    shift = 0.5 if adjoint else -0.5
    if np.any(np.abs(np.diag(a_v).real - shift) < 1e-12):
        raise ValueError(f"{shift} is an eigenvalue of A_V")
    if not callable(a_h):
        const = np.atleast_2d(np.asarray(a_h, dtype=complex))
        if const.shape == (1, 1) and a_v.shape[0] > 1:
            const = const[0, 0] * np.eye(a_v.shape[0])
        a_h = lambda r, const=const: const
    rng = np.random.default_rng(seed)
    radii = np.sort(np.asarray(radii, dtype=float))
    mins = []
    for t in radii:
        A_t = a_h(t) + a_v / t
        if adjoint:
            Q = _spectral_projection(A_t, lambda x: x >= 0)
        else:
            Q = _spectral_projection(A_t, lambda x: x < 0)
        sections = core_sections(a_v.shape[0], t, samples, rng, boundary=Q)
        mins.append(min(vanishing_ratio(s, t, a_h, a_v, adjoint) for s in sections))
    mins = np.array(mins)
    ok = mins >= 1.0
    threshold = 0.0
    for t, good in zip(radii, ok):
        if not good:
            break
        threshold = float(t)
    return VanishingReport(adjoint, radii, mins, threshold)


def scalar_vanishing_terms(f: Callable, df: Callable, a_v: float, t: float, order: int = 64) -> dict:
    """One-dimensional reduction for sigma = f(r) e with A_H = 0, A_V e = a_v e, f(0) = 0:

    ||f' + a f / r||^2 = int f'^2 + a^2 int f^2/r^2 + a (f(t)^2/t + int f^2/r^2)
    and the bound (1/2t)^2 (a + 1/2)^2 int f^2.
    """
    nodes, weights = _gauss_panels(0.0, t, 8, order)
    fv = np.array([f(r) for r in nodes])
    dfv = np.array([df(r) for r in nodes])
    direct = float(np.sum(weights * (dfv + a_v * fv / nodes) ** 2))
    grad = float(np.sum(weights * dfv ** 2))
    hardy = float(np.sum(weights * (fv / nodes) ** 2))
    split = grad + a_v ** 2 * hardy + a_v * (f(t) ** 2 / t + hardy)
    bound = (a_v + 0.5) ** 2 * float(np.sum(weights * fv ** 2)) / (4 * t * t)
    return {"norm_squared": direct, "by_parts": split, "hardy_gap": grad - hardy / 4, "bound": bound}


# ---------------------------------------------------------------- cut-off sequence

def cutoff_phi(r):
    """1 on |r| <= 1, 0 on |r| >= 2, smooth in between; returns (value, derivative)."""
    r = np.asarray(r, dtype=float)
    s, ds = _smooth_step(np.abs(r) - 1)
    return 1 - s, -ds * np.sign(r)


def cutoff_chi(r):
    """0 for r < 0, r on [0, 1], 1 for r >= 2, 0 < chi <= r on (1, 2); returns (value, derivative)."""
    r = np.asarray(r, dtype=float)
    s, ds = _smooth_step(r - 1)
    val = np.where(r < 0, 0.0, (1 - s) * r + s)
    der = np.where(r < 0, 0.0, (1 - s) - ds * r + ds)
    return val, der


def cutoff_theta(n: int) -> float:
    if n < 2:
        raise ValueError("n must be at least 2")
    return 1 / math.sqrt(math.log(n))


def cutoff_psi(n: int, r):
    """psi_n = chi^theta_n (1 - phi(n r)) and its derivative."""
    th = cutoff_theta(n)
    r = np.asarray(r, dtype=float)
    c, dc = cutoff_chi(r)
    p, dp = cutoff_phi(n * r)
    pos = c > 0
    cth = np.where(pos, np.abs(c) ** th, 0.0)
    dcth = np.where(pos, th * np.abs(np.where(pos, c, 1.0)) ** (th - 1) * dc, 0.0)
    return cth * (1 - p), dcth * (1 - p) - n * cth * dp


def cutoff_energy(n: int, m: int, weight: Callable = lambda r: r, order: int = 48) -> float:
    """int_0^2 (psi_n - psi_m)'(r)^2 weight(r) dr, weight standing for |sigma(r)|^2."""
    low = 1 / max(n, m)
    breaks = sorted({low, 1 / min(n, m), 2 / max(n, m), 2 / min(n, m), 1.0, 2.0})
    breaks = [b for b in breaks if b <= 2.0]
    x, w = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        # panels graded towards the left end where the derivative is largest
        edges = a + (b - a) * np.linspace(0, 1, 9) ** 2
        for lo, hi in zip(edges[:-1], edges[1:]):
            nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            dn = cutoff_psi(n, nodes)[1] - cutoff_psi(m, nodes)[1]
            total += 0.5 * (hi - lo) * float(np.sum(w * dn ** 2 * weight(nodes)))
    return total


@dataclass
class CutoffReport:
    n_values: list
    energies: list
    sup_bounds: list
    vanishes_near_zero: list
    pointwise_gap: list

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.energies, self.energies[1:]))

    def to_report(self) -> dict:
        return report_dict("cutoff_sequence", {"n": self.n_values}, {"energy": self.energies},
                           {"decreasing": self.decreasing, "sup_bounds": self.sup_bounds},
                           {"sup": 2.0})


def cutoff_sequence(n_values=(4, 16, 64, 256), grid: int = 4001) -> CutoffReport:
    """Energy of psi_{n,2n} against |sigma|^2 = r, sup |psi_n|, support and pointwise checks."""
    energies, sups, zero, gaps = [], [], [], []
    r = np.linspace(0.0, 3.0, grid)
    probe = np.array([0.05, 0.3, 0.9, 1.5])
    for n in n_values:
        energies.append(cutoff_energy(n, 2 * n))
        psi = cutoff_psi(n, r)[0]
        sups.append(float(np.max(np.abs(psi))))
        inner = np.concatenate([np.linspace(0, 1 / n, 200), -np.linspace(0, 1, 50)])
        zero.append(bool(np.all(cutoff_psi(n, inner)[0] == 0.0)))
        gaps.append(float(np.max(np.abs(1 - cutoff_psi(n, probe)[0]))))
    return CutoffReport(list(n_values), energies, sups, zero, gaps)
