"""Fiberwise exterior algebra with Hodge star, chirality and Clifford actions.

Forms live on an oriented inner-product space of dimension m with a
coordinate coframe e^0, ..., e^{m-1}.  A basis monomial e^I is encoded by
the bitmask of I, so a form is a complex vector of length 2**m.  The metric
is the Gram matrix of the coordinate vectors; covectors use its inverse.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

MAX_DIMENSION = 8


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_of(indices) -> int:
    mask = 0
    for i in indices:
        if mask >> i & 1:
            return -1
        mask |= 1 << i
    return mask


def indices_of(mask: int) -> tuple:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def _reorder_sign(left: int, right: int) -> int:
    """Sign of e^left ^ e^right relative to e^(left|right), masks disjoint."""
    count = 0
    for a in indices_of(left):
        count += popcount(right & ((1 << a) - 1))
    return -1 if count % 2 else 1


@lru_cache(maxsize=None)
def _structure(m: int):
    """Degree vector, disjoint-pair table and elementary operator matrices."""
    size = 1 << m
    degrees = np.array([popcount(i) for i in range(size)])
    left, right, target, sign = [], [], [], []
    for a in range(size):
        for b in range(size):
            if a & b == 0:
                left.append(a)
                right.append(b)
                target.append(a | b)
                sign.append(_reorder_sign(a, b))
    pairs = tuple(np.array(x) for x in (left, right, target, sign))
    wedge_basis = np.zeros((m, size, size))
    inner_basis = np.zeros((m, size, size))
    for i in range(m):
        bit = 1 << i
        for j in range(size):
            s = -1.0 if popcount(j & (bit - 1)) % 2 else 1.0
            if j & bit:
                inner_basis[i, j ^ bit, j] = s
            else:
                wedge_basis[i, j | bit, j] = s
    by_degree = [np.array([i for i in range(size) if degrees[i] == r]) for r in range(m + 1)]
    return degrees, pairs, wedge_basis, inner_basis, by_degree


def exterior_power(matrix: np.ndarray) -> np.ndarray:
    """Induced map on the full exterior algebra: entry (I, J) = det(matrix[I, J])."""
    m = matrix.shape[0]
    size = 1 << m
    out = np.zeros((size, size), dtype=np.result_type(matrix, float))
    out[0, 0] = 1.0
    for r in range(1, m + 1):
        subsets = list(combinations(range(m), r))
        for rows in subsets:
            I = mask_of(rows)
            for cols in subsets:
                out[I, mask_of(cols)] = np.linalg.det(matrix[np.ix_(rows, cols)])
    return out


class ExteriorAlgebra:
    """The exterior algebra of an m-dimensional oriented inner-product space."""

    def __init__(self, dimension: int, metric=None, orientation: int = 1):
        if not 1 <= dimension <= MAX_DIMENSION:
            raise ValueError(f"dimension must be in 1..{MAX_DIMENSION}")
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        g = np.eye(dimension) if metric is None else np.asarray(metric, dtype=float)
        if g.shape != (dimension, dimension):
            raise ValueError("metric shape does not match dimension")
        if not np.allclose(g, g.T, atol=1e-12 * max(1.0, np.abs(g).max())):
            raise ValueError("metric is not symmetric")
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise ValueError("metric is not positive definite") from None
        self.dim = dimension
        self.size = 1 << dimension
        self.metric = g
        self.cometric = np.linalg.inv(g)
        self.orientation = orientation
        (self.degrees, self._pairs, self._wedge_basis,
         self._inner_basis, self._by_degree) = _structure(dimension)
        self._cache = {}

    # -- construction helpers -------------------------------------------------
    def form(self, coeffs) -> "Form":
        return Form(self, coeffs)

    def zero(self) -> "Form":
        return Form(self, np.zeros(self.size, dtype=complex))

    def one(self) -> "Form":
        return self.basis(())

    def basis(self, indices) -> "Form":
        mask = mask_of(indices)
        out = np.zeros(self.size, dtype=complex)
        if mask >= 0:
            ordered = tuple(sorted(indices))
            # permutation sign of the given ordering
            sign = 1
            idx = list(indices)
            for a in range(len(idx)):
                for b in range(a + 1, len(idx)):
                    if idx[a] > idx[b]:
                        sign = -sign
            out[mask_of(ordered)] = sign
        return Form(self, out)

    def one_form(self, components) -> "Form":
        components = np.asarray(components)
        if components.shape != (self.dim,):
            raise ValueError("expected one component per coordinate")
        out = np.zeros(self.size, dtype=complex)
        for i in range(self.dim):
            out[1 << i] = components[i]
        return Form(self, out)

    def volume(self) -> "Form":
        out = np.zeros(self.size, dtype=complex)
        out[self.size - 1] = self.orientation * np.sqrt(np.linalg.det(self.metric))
        return Form(self, out)

    def same_space(self, other: "ExteriorAlgebra") -> bool:
        return (other is self or (other.dim == self.dim and other.orientation == self.orientation
                                  and np.array_equal(other.metric, self.metric)))

    # -- musical isomorphisms --------------------------------------------------
    def flat(self, vector) -> "Form":
        return self.one_form(self.metric @ np.asarray(vector))

    def sharp(self, alpha: "Form") -> np.ndarray:
        return self.cometric @ alpha.one_form_components()

    # -- structural matrices ---------------------------------------------------
    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def gram(self) -> np.ndarray:
        """Induced inner product on forms (Gram extension of the cometric)."""
        def build():
            G = np.zeros((self.size, self.size))
            G[0, 0] = 1.0
            for r in range(1, self.dim + 1):
                masks = self._by_degree[r]
                for I in masks:
                    rows = indices_of(int(I))
                    for J in masks:
                        G[I, J] = np.linalg.det(self.cometric[np.ix_(rows, indices_of(int(J)))])
            return G
        return self._cached("gram", build)

    @property
    def _orthonormal_change(self):
        """(to_e, from_e): coefficient maps between an orthonormal coframe and e^I."""
        def build():
            lower = np.linalg.cholesky(self.cometric)
            to_e = exterior_power(np.linalg.inv(lower)).T
            from_e = exterior_power(lower).T
            return to_e, from_e
        return self._cached("onb", build)

    def wedge_matrix(self, a: "Form") -> np.ndarray:
        left, right, target, sign = self._pairs
        M = np.zeros((self.size, self.size), dtype=complex)
        np.add.at(M, (target, right), sign * a.coeffs[left])
        return M

    def contraction_matrix(self, vector) -> np.ndarray:
        vector = np.asarray(vector)
        return np.tensordot(vector, self._inner_basis, axes=1).astype(complex)

    def derivation_matrix(self, endo_on_covectors: np.ndarray) -> np.ndarray:
        """Derivation extension of A acting on covectors by e^k -> sum_j A[j, k] e^j."""
        A = np.asarray(endo_on_covectors)
        M = np.zeros((self.size, self.size), dtype=complex)
        for j in range(self.dim):
            for k in range(self.dim):
                if A[j, k] != 0:
                    M += A[j, k] * (self._wedge_basis[j] @ self._inner_basis[k])
        return M

    @property
    def hodge_matrix(self) -> np.ndarray:
        def build():
            full = self.size - 1
            S = np.zeros((self.size, self.size))
            for I in range(self.size):
                S[full ^ I, I] = self.orientation * _reorder_sign(I, full ^ I)
            to_e, from_e = self._orthonormal_change
            return to_e @ S @ from_e
        return self._cached("hodge", build)

    def chirality_phase(self, r: int) -> complex:
        m = self.dim
        return 1j ** (((m + 1) // 2 + 2 * m * r + r * (r - 1)) % 4)

    @property
    def chirality_matrix(self) -> np.ndarray:
        def build():
            phases = np.array([self.chirality_phase(int(r)) for r in self.degrees])
            return self.hodge_matrix * phases[np.newaxis, :]
        return self._cached("chirality", build)

    @property
    def grading_matrix(self) -> np.ndarray:
        return np.diag((-1.0) ** self.degrees).astype(complex)

    def degree_projector(self, r: int) -> np.ndarray:
        return np.diag((self.degrees == r).astype(float)).astype(complex)

    # -- endomorphisms ---------------------------------------------------------
    def endo(self, matrix) -> "Endo":
        return Endo(self, np.asarray(matrix, dtype=complex))

    def identity(self) -> "Endo":
        return self.endo(np.eye(self.size))

    def wedge_op(self, a: "Form") -> "Endo":
        return self.endo(self.wedge_matrix(a))

    def contraction_op(self, vector) -> "Endo":
        return self.endo(self.contraction_matrix(vector))

    def hodge(self) -> "Endo":
        return self.endo(self.hodge_matrix)

    def chirality(self) -> "Endo":
        return self.endo(self.chirality_matrix)

    def grading(self) -> "Endo":
        return self.endo(self.grading_matrix)

    def clifford(self, alpha: "Form") -> "Endo":
        """c(alpha) = alpha ^ - contraction with alpha-sharp."""
        _require_one_form(alpha)
        return self.endo(self.wedge_matrix(alpha) - self.contraction_matrix(self.sharp(alpha)))

    def clifford_hat(self, alpha: "Form") -> "Endo":
        """The second Clifford action alpha ^ + contraction with alpha-sharp."""
        _require_one_form(alpha)
        return self.endo(self.wedge_matrix(alpha) + self.contraction_matrix(self.sharp(alpha)))

    def adjoint_matrix(self, M: np.ndarray) -> np.ndarray:
        G = self.gram
        return np.linalg.solve(G, M.conj().T @ G)

    def inner(self, a: "Form", b: "Form") -> complex:
        """Hermitian inner product, conjugate-linear in the first slot."""
        return complex(a.coeffs.conj() @ self.gram @ b.coeffs)


def _require_one_form(alpha: "Form") -> None:
    nonzero = np.abs(alpha.coeffs) > 0
    if np.any(nonzero & (alpha.algebra.degrees != 1)):
        raise ValueError("Clifford multiplication needs a homogeneous 1-form")


class Form:
    """A complex form on an ExteriorAlgebra, stored as 2**m coefficients."""

    __slots__ = ("algebra", "coeffs")

    def __init__(self, algebra: ExteriorAlgebra, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (algebra.size,):
            raise ValueError("coefficient vector has the wrong length")
        self.algebra = algebra
        self.coeffs = coeffs

    @property
    def dim(self) -> int:
        return self.algebra.dim

    def _check(self, other: "Form") -> None:
        if not self.algebra.same_space(other.algebra):
            raise ValueError("forms live on different spaces")

    def __add__(self, other: "Form") -> "Form":
        self._check(other)
        return Form(self.algebra, self.coeffs + other.coeffs)

    def __sub__(self, other: "Form") -> "Form":
        self._check(other)
        return Form(self.algebra, self.coeffs - other.coeffs)

    def __neg__(self) -> "Form":
        return Form(self.algebra, -self.coeffs)

    def __mul__(self, scalar) -> "Form":
        return Form(self.algebra, self.coeffs * scalar)

    __rmul__ = __mul__

    def __xor__(self, other: "Form") -> "Form":
        return wedge(self, other)

    def __getitem__(self, indices) -> complex:
        return self.coeffs[mask_of(indices)]

    def part(self, r: int) -> "Form":
        return Form(self.algebra, np.where(self.algebra.degrees == r, self.coeffs, 0))

    def degrees_present(self, atol: float = 0.0) -> set:
        return {int(d) for d in self.algebra.degrees[np.abs(self.coeffs) > atol]}

    def one_form_components(self) -> np.ndarray:
        return np.array([self.coeffs[1 << i] for i in range(self.dim)])

    def norm(self) -> float:
        return float(np.sqrt(max(self.algebra.inner(self, self).real, 0.0)))

    def allclose(self, other: "Form", atol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.coeffs - other.coeffs), initial=0.0) <= atol)

    def __repr__(self) -> str:
        terms = []
        for mask in np.flatnonzero(np.abs(self.coeffs) > 1e-15):
            label = "^".join(f"e{i + 1}" for i in indices_of(int(mask))) or "1"
            terms.append(f"{self.coeffs[mask]:.6g}*{label}")
        return "Form(" + (" + ".join(terms) or "0") + ")"


class Endo:
    """A linear map on the 2**m-dimensional form space."""

    __slots__ = ("algebra", "matrix")

    def __init__(self, algebra: ExteriorAlgebra, matrix):
        self.algebra = algebra
        self.matrix = np.asarray(matrix, dtype=complex)

    def __call__(self, form: Form) -> Form:
        return Form(self.algebra, self.matrix @ form.coeffs)

    def __matmul__(self, other):
        if isinstance(other, Endo):
            return Endo(self.algebra, self.matrix @ other.matrix)
        if isinstance(other, Form):
            return self(other)
        return NotImplemented

    def __add__(self, other: "Endo") -> "Endo":
        return Endo(self.algebra, self.matrix + _as_matrix(other, self.algebra))

    __radd__ = __add__

    def __sub__(self, other: "Endo") -> "Endo":
        return Endo(self.algebra, self.matrix - _as_matrix(other, self.algebra))

    def __rsub__(self, other) -> "Endo":
        return Endo(self.algebra, _as_matrix(other, self.algebra) - self.matrix)

    def __neg__(self) -> "Endo":
        return Endo(self.algebra, -self.matrix)

    def __mul__(self, scalar) -> "Endo":
        return Endo(self.algebra, self.matrix * scalar)

    __rmul__ = __mul__

    def adjoint(self) -> "Endo":
        return Endo(self.algebra, self.algebra.adjoint_matrix(self.matrix))

    def distance(self, other) -> float:
        return float(np.max(np.abs(self.matrix - _as_matrix(other, self.algebra)), initial=0.0))


def _as_matrix(other, algebra: ExteriorAlgebra) -> np.ndarray:
    if isinstance(other, Endo):
        return other.matrix
    if np.isscalar(other):
        return other * np.eye(algebra.size)
    return np.asarray(other)


def anticommutator(a: Endo, b: Endo) -> Endo:
    return a @ b + b @ a


# -- form-level operations ----------------------------------------------------

def wedge(a: Form, b: Form) -> Form:
    a._check(b)
    left, right, target, sign = a.algebra._pairs
    out = np.zeros(a.algebra.size, dtype=complex)
    np.add.at(out, target, sign * a.coeffs[left] * b.coeffs[right])
    return Form(a.algebra, out)


def contract(vector, omega: Form) -> Form:
    vector = np.asarray(vector)
    if vector.shape != (omega.dim,):
        raise ValueError("vector dimension does not match the form")
    return Form(omega.algebra, omega.algebra.contraction_matrix(vector) @ omega.coeffs)


def hodge_star(omega: Form) -> Form:
    return Form(omega.algebra, omega.algebra.hodge_matrix @ omega.coeffs)


def chirality(omega: Form) -> Form:
    return Form(omega.algebra, omega.algebra.chirality_matrix @ omega.coeffs)


def clifford_left(alpha: Form, omega: Form) -> Form:
    alpha._check(omega)
    return omega.algebra.clifford(alpha)(omega)


def clifford_right(alpha: Form, omega: Form) -> Form:
    alpha._check(omega)
    return omega.algebra.clifford_hat(alpha)(omega)


def gauss_bonnet(omega: Form) -> Form:
    return Form(omega.algebra, (-1.0) ** omega.algebra.degrees * omega.coeffs)
