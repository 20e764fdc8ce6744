"""Eigenvalue tables of the cone coefficients A_V and A_V - eps/2 from fiber spectral data.

Values are exact surds p + c*sqrt(r) (p, c rational, r square-free) whenever the
inputs are rational, so membership in (-1/2, 1/2) is decided exactly.

Multiplicity convention: the horizontal factor is modelled as a 2-dimensional
space on which the horizontal grading takes the values +1 and -1 once each.
Then the four A_V values of a (j, lambda) block each carry 2m, the eight values
of A_V - eps/2 each carry m, and both operators have 8m per block.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

import numpy as np
from scipy import special

HALF = Fraction(1, 2)


def _square_split(n: int) -> tuple:
    """n = k^2 * r with r square-free."""
    k, r, p = 1, 1, 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            k *= p
        if n % p == 0:
            n //= p
            r *= p
        p += 1
    return k, r * n


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10 ** 12) if x == x else _bad(x)
    return Fraction(x)


def _bad(x):
    raise ValueError(f"not a finite number: {x}")


@dataclass(frozen=True)
class Surd:
    """rational + coefficient * sqrt(radicand), radicand a square-free positive integer."""

    rational: Fraction
    coefficient: Fraction = Fraction(0)
    radicand: int = 1

    @classmethod
    def make(cls, rational, coefficient, square) -> "Surd":
        """rational + coefficient * sqrt(square) for a non-negative rational `square`."""
        rational, coefficient, square = map(as_fraction, (rational, coefficient, square))
        if square < 0:
            raise ValueError("negative radicand")
        num = square.numerator * square.denominator
        k, r = _square_split(num)
        coefficient = coefficient * k / square.denominator
        if coefficient == 0 or num == 0:
            return cls(rational)
        if r == 1:
            return cls(rational + coefficient)
        return cls(rational, coefficient, r)

    @property
    def is_rational(self) -> bool:
        return self.coefficient == 0

    def __float__(self) -> float:
        return float(self.rational) + float(self.coefficient) * math.sqrt(self.radicand)

    def sign_minus(self, t) -> int:
        """Exact sign of self - t for rational t."""
        a = self.rational - as_fraction(t)
        b = self.coefficient
        if b == 0:
            return (a > 0) - (a < 0)
        sb = 1 if b > 0 else -1
        if a == 0 or (a > 0) == (b > 0):
            return sb if a == 0 else (1 if a > 0 else -1)
        # opposite signs: compare a^2 with b^2 r
        lhs, rhs = a * a, b * b * self.radicand
        if lhs == rhs:
            return 0
        return (1 if a > 0 else -1) if lhs > rhs else sb

    def __lt__(self, t) -> bool:
        return self.sign_minus(t) < 0

    def __le__(self, t) -> bool:
        return self.sign_minus(t) <= 0

    def __gt__(self, t) -> bool:
        return self.sign_minus(t) > 0

    def __ge__(self, t) -> bool:
        return self.sign_minus(t) >= 0

    def in_open_interval(self, lo, hi) -> bool:
        return self.sign_minus(lo) > 0 and self.sign_minus(hi) < 0

    def abs_at_least(self, t) -> bool:
        return self.sign_minus(t) >= 0 or self.sign_minus(-as_fraction(t)) <= 0

    def shifted_square(self, shift) -> Fraction | None:
        """(self - shift)^2 when that is rational, which holds for every table entry."""
        a = self.rational - as_fraction(shift)
        if self.coefficient == 0:
            return a * a
        if a != 0:
            return None
        return self.coefficient ** 2 * self.radicand

    def __str__(self) -> str:
        if self.coefficient == 0:
            return str(self.rational)
        c = self.coefficient
        root = f"sqrt({self.radicand})"
        mag = abs(c)
        term = root if mag == 1 else (f"{mag.numerator}*{root}" if mag.denominator == 1
                                      else (f"{root}/{mag.denominator}" if mag.numerator == 1
                                            else f"{mag.numerator}*{root}/{mag.denominator}"))
        if self.rational == 0:
            return term if c > 0 else "-" + term
        return f"{self.rational} {'+' if c > 0 else '-'} {term}"


@dataclass
class FiberSpectralData:
    """Spectral input for a fiber of real dimension v: Betti numbers and closed-form eigenvalues.

    closed: (degree j, lambda > 0, multiplicity m = dim of the closed j-form eigenspace).
    The eigenvalues are divided by scale**2.
    """

    v: int
    betti: list
    closed: list = field(default_factory=list)
    scale: Fraction | float = Fraction(1)
    name: str = ""

    def __post_init__(self):
        if self.v < 0 or len(self.betti) != self.v + 1:
            raise ValueError("betti numbers must be given for degrees 0..v")
        if any(b < 0 for b in self.betti):
            raise ValueError("negative Betti number")
        for j, lam, m in self.closed:
            if not 0 <= j <= self.v + 1:
                raise ValueError(f"degree {j} out of range")
            if not lam > 0:
                raise ValueError("closed-branch eigenvalues must be positive")
            if not (isinstance(m, int) and m > 0):
                raise ValueError("multiplicities must be positive integers")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def exact(self) -> bool:
        vals = [lam for _, lam, _ in self.closed] + [self.scale]
        return all(isinstance(x, (int, Fraction)) for x in vals)

    def scaled_lambda(self, lam):
        if self.exact:
            return Fraction(lam) / Fraction(self.scale) ** 2
        return float(lam) / float(self.scale) ** 2

    def with_scale(self, scale) -> "FiberSpectralData":
        return replace(self, scale=scale)

    def with_scale_squared(self, s) -> "FiberSpectralData":
        """Rescale by a further a^2 = s; exact inputs stay exact by folding a into lambda."""
        if self.exact and isinstance(s, (int, Fraction)):
            closed = [(j, self.scaled_lambda(lam) / Fraction(s), m) for j, lam, m in self.closed]
            return replace(self, closed=closed, scale=Fraction(1))
        return replace(self, scale=math.sqrt(float(s)) * float(self.scale))

    @property
    def witt(self) -> bool:
        """Middle-degree cohomology of the fiber vanishes."""
        return self.v % 2 == 1 or self.betti[self.v // 2] == 0


def cp1_fs_spectrum(k_max: int, a=1) -> list:
    """Positive Laplace eigenvalues 4k(k+1)/a^2 on the Fubini-Study CP^1 (radius 1/2)."""
    if not a > 0:
        raise ValueError("scale must be positive")
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    exact = isinstance(a, (int, Fraction))
    return [Fraction(4 * k * (k + 1)) / Fraction(a) ** 2 if exact else 4 * k * (k + 1) / a ** 2
            for k in range(1, k_max + 1)]


def cpn_betti(N: int) -> list:
    return [1 if j % 2 == 0 else 0 for j in range(2 * N + 1)]


def cpn_fiber_data(N: int, k_max: int, scale=1, degrees: Iterable[int] | None = None) -> FiberSpectralData:
    """CP^N fiber with CP^1 Laplace eigenvalues 4k(k+1), multiplicity 2k+1, at each listed degree.

    For N = 1 the default degrees {1, 2} are exactly where closed eigenforms of positive
    eigenvalue live.  For N > 1 the same list is a stand-in input, not a computed spectrum.
    """
    degrees = list(range(1, 2 * N + 1)) if degrees is None else list(degrees)
    closed = [(j, Fraction(4 * k * (k + 1)), 2 * k + 1) for j in degrees for k in range(1, k_max + 1)]
    return FiberSpectralData(2 * N, cpn_betti(N), closed, Fraction(scale) if isinstance(scale, int) else scale,
                             name=f"CP^{N}")


@dataclass
class Eigenvalue:
    value: Surd | float
    multiplicity: int
    branch: str
    degree: int
    lam: Fraction | float | None

    def as_row(self) -> dict:
        return {"value": str(self.value), "numeric": float(self.value), "mult": self.multiplicity,
                "branch": self.branch, "j": self.degree, "lambda": "" if self.lam is None else str(self.lam)}


@dataclass
class ConeEigenReport:
    operator: str
    entries: list

    def values(self) -> list:
        return [e.value for e in self.entries]

    def total_multiplicity(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    def block_multiplicity(self, degree: int, lam) -> int:
        return sum(e.multiplicity for e in self.entries if e.degree == degree and e.lam == lam)

    def in_gap(self, lo=-HALF, hi=HALF) -> list:
        return [e for e in self.entries if _in_open(e.value, lo, hi)]

    def min_abs(self) -> float:
        return min(abs(float(e.value)) for e in self.entries) if self.entries else math.inf

    def contains_zero(self) -> bool:
        return any(_is_zero(e.value) for e in self.entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["value", "numeric", "mult", "branch", "j", "lambda"])
        writer.writeheader()
        for e in self.entries:
            writer.writerow(e.as_row())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"operator": self.operator, "entries": [e.as_row() for e in self.entries]},
                          indent=2)


def _in_open(value, lo, hi) -> bool:
    if isinstance(value, Surd):
        return value.in_open_interval(lo, hi)
    return float(lo) < value < float(hi)


def _is_zero(value) -> bool:
    if isinstance(value, Surd):
        return value.sign_minus(0) == 0
    return value == 0


def _branch_value(offset, sign: int, lam, shift, exact: bool):
    """offset + sign * sqrt(lam + shift^2)."""
    if exact:
        return Surd.make(offset, sign, Fraction(lam) + Fraction(shift) ** 2)
    return float(offset) + sign * math.sqrt(float(lam) + float(shift) ** 2)


def spectrum_AV(data: FiberSpectralData, odd_fiber_branch: bool = False) -> ConeEigenReport:
    """Harmonic values j - v/2; closed/coclosed branches +-1/2 +- sqrt(lambda + (j - (v+1)/2)^2)."""
    v, exact = data.v, data.exact
    entries = []
    for j, b in enumerate(data.betti):
        if b:
            value = Surd(Fraction(j) - Fraction(v, 2)) if exact else j - v / 2
            entries.append(Eigenvalue(value, 2 * b, "harm", j, None))
    for j, lam, m in data.closed:
        lam_s = data.scaled_lambda(lam)
        shift = Fraction(j) - Fraction(v + 1, 2)
        if odd_fiber_branch and v % 2 == 1 and 2 * j == v + 1:
            # two further eigenspaces +-sqrt(lambda) exist only for odd fiber dimension
            for sign, tag in ((1, "odd+"), (-1, "odd-")):
                entries.append(Eigenvalue(_branch_value(0, sign, lam_s, 0, exact), m, tag, j, lam_s))
        for offset, name in ((HALF, "cl"), (-HALF, "ccl")):
            for sign, tag in ((1, "+"), (-1, "-")):
                entries.append(Eigenvalue(_branch_value(offset, sign, lam_s, shift, exact),
                                          2 * m, name + tag, j, lam_s))
    return ConeEigenReport("A_V", entries)


def spectrum_scriptAV(data: FiberSpectralData) -> ConeEigenReport:
    """Harmonic values j - N +- 1/2; branches +-1/2 +- sqrt(lambda + (j - N - (1 +- 1)/2)^2)."""
    if data.v % 2:
        raise ValueError("the shifted cone coefficient is tabulated for even fiber dimension only")
    N, exact = data.v // 2, data.exact
    entries = []
    for j, b in enumerate(data.betti):
        if b:
            for sign, tag in ((1, "harm+"), (-1, "harm-")):
                value = Fraction(j - N) + sign * HALF
                entries.append(Eigenvalue(Surd(value) if exact else float(value), b, tag, j, None))
    for j, lam, m in data.closed:
        lam_s = data.scaled_lambda(lam)
        for offset, name in ((HALF, "cl"), (-HALF, "ccl")):
            for inner, itag in ((1, "+"), (-1, "-")):
                shift = Fraction(j - N) - Fraction(1 + inner, 2)
                for sign, tag in ((1, "+"), (-1, "-")):
                    entries.append(Eigenvalue(_branch_value(offset, sign, lam_s, shift, exact),
                                              m, f"{name}{tag}{itag}", j, lam_s))
    return ConeEigenReport("A_V - eps/2", entries)


# -- Witt condition and rescaling -----------------------------------------------------

@dataclass
class WittReport:
    witt: bool
    scale: float | None
    scale_squared: Fraction | float | None
    certificate: str
    av_min_abs: float
    script_gap_clear: bool
    standard_scale_squared: Fraction | float


def _av_gap_ok(data: FiberSpectralData, s) -> bool:
    """|A_V| >= 1/2 at vertical scale a with a^2 = s (harmonic part needs Witt)."""
    if not data.witt:
        return False
    v = data.v
    for j, lam, _ in data.closed:
        shift = Fraction(j) - Fraction(v + 1, 2)
        lam_s = data.scaled_lambda(lam)
        if (lam_s / s if isinstance(lam_s, Fraction) and isinstance(s, Fraction)
                else float(lam_s) / float(s)) + shift ** 2 < 1:
            return False
    return True


def max_gap_scale_squared(data: FiberSpectralData):
    """Largest a^2 with every branch value outside (-1/2, 1/2): min over lambda / (1 - shift^2)."""
    bound = None
    v = data.v
    for j, lam, _ in data.closed:
        shift = Fraction(j) - Fraction(v + 1, 2)
        if shift ** 2 < 1:
            lam_s = data.scaled_lambda(lam)
            s = lam_s / (1 - shift ** 2) if data.exact else lam_s / float(1 - shift ** 2)
            bound = s if bound is None else min(bound, s)
    return bound


def bisect_gap_scale_squared(data: FiberSpectralData, upper, iterations: int = 60) -> Fraction:
    """Bisection on a^2 over (0, upper] using the exact gap predicate."""
    lo, hi = Fraction(0), Fraction(upper)
    if _av_gap_ok(data, hi):
        return hi
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if _av_gap_ok(data, mid):
            lo = mid
        else:
            hi = mid
    return lo


def standard_scale_squared(data: FiberSpectralData):
    """a = 1 if every positive eigenvalue exceeds 1, otherwise a^2 = lambda_min / 2."""
    lams = [data.scaled_lambda(lam) for _, lam, _ in data.closed]
    if not lams or min(lams) > 1:
        return Fraction(1)
    lam_min = min(lams)
    return Fraction(lam_min) / 2 if data.exact else lam_min / 2


def witt_and_rescale(data: FiberSpectralData, a_max=1) -> WittReport:
    s_max = Fraction(a_max) ** 2 if isinstance(a_max, (int, Fraction)) else a_max ** 2
    std = standard_scale_squared(data)
    script = spectrum_scriptAV(data.with_scale_squared(std)) if data.v % 2 == 0 else None
    script_clear = script is None or not script.in_gap()
    if data.witt:
        bound = max_gap_scale_squared(data)
        s = s_max if bound is None else min(s_max, bound)
        report_av = spectrum_AV(data.with_scale_squared(s))
        return WittReport(True, math.sqrt(float(s)), s, "all |A_V| >= 1/2 at this scale",
                          report_av.min_abs(), script_clear, std)
    av = spectrum_AV(data)
    return WittReport(False, None, None,
                      f"eigenvalue 0 on harmonic forms of degree {data.v // 2}, for every scale",
                      av.min_abs(), script_clear, std)


def circle_odd_signature_spectrum(modes: int, radius: float = 1.0) -> np.ndarray:
    """Eigenvalues of the odd signature operator on a round circle, Fourier modes |k| <= modes.

    On (f, g dtheta) it acts as (f, g) -> (-i g', -i f') / radius in the arclength
    normalisation, a Hermitian 2x2 block per mode.
    """
    out = []
    for k in range(-modes, modes + 1):
        block = np.array([[0.0, k / radius], [k / radius, 0.0]])
        out.extend(np.linalg.eigvalsh(block))
    return np.sort(np.array(out))


def eta_invariant(spectrum, t: float = 1e-2) -> float:
    """Heat-regularised spectral asymmetry sum sign(l) erfc(sqrt(t) |l|)."""
    lam = np.asarray(spectrum, dtype=float)
    nz = lam[np.abs(lam) > 1e-12]
    return float(np.sum(np.sign(nz) * special.erfc(math.sqrt(t) * np.abs(nz))))
