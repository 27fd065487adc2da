"""Scalar, 2x2 matrix and truncated power series arithmetic.

Two arithmetic modes coexist:

* exact: entries are :class:`ExactComplex` (a pair of rationals), stored in
  numpy ``object`` arrays.  Ring operations never round, so identities that
  hold algebraically come out as exact zeros.
* float: entries are ``complex128``.

A :class:`MatrixSeries` carries its truncation order explicitly and refuses to
combine with a series of a different order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, UsageError

FLOAT_EPS = float(np.finfo(float).eps)


class ExactComplex:
    """Complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("ExactComplex is immutable")

    def __reduce__(self):
        return ExactComplex, (self.re, self.im)

    @staticmethod
    def _coerce(other):
        if isinstance(other, ExactComplex):
            return other
        if isinstance(other, (int, Rational)):
            return ExactComplex(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return complex(self) + other
        return ExactComplex(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return complex(self) - other
        return ExactComplex(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return other - complex(self)
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return complex(self) * other
        return ExactComplex(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return complex(self) / other
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("exact division by zero")
        return ExactComplex(
            (self.re * o.re + self.im * o.im) / den, (self.im * o.re - self.re * o.im) / den
        )

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return other / complex(self)
        return o / self

    def __neg__(self):
        return ExactComplex(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, int):
            return complex(self) ** n
        if n < 0:
            return ExactComplex(1) / self ** (-n)
        result, base = ExactComplex(1), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __abs__(self):
        return abs(complex(self))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            try:
                return complex(self) == complex(other)
            except TypeError:
                return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def conjugate(self):
        return ExactComplex(self.re, -self.im)

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def __repr__(self):
        return f"ExactComplex({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"


def _parse_real(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse {text!r} as a rational number") from exc


def parse_scalar(value, exact: bool = False):
    """Convert user input to a scalar in the requested mode.

    Strings may be ``"re"`` or ``"re,im"``; each part is a decimal or a
    fraction such as ``1/3``.  Floats become exact through their decimal
    representation, so ``0.1`` maps to ``1/10``.
    """
    if isinstance(value, str):
        parts = value.split(",")
        if len(parts) == 1:
            re, im = _parse_real(parts[0]), Fraction(0)
        elif len(parts) == 2:
            re, im = _parse_real(parts[0]), _parse_real(parts[1])
        else:
            raise UsageError(f"expected 're' or 're,im', got {value!r}")
        z = ExactComplex(re, im)
        return z if exact else complex(z)
    if isinstance(value, ExactComplex):
        return value if exact else complex(value)
    if isinstance(value, (int, Rational)):
        return ExactComplex(value) if exact else complex(value)
    if isinstance(value, (float, complex, np.number)):
        z = complex(value)
        if not exact:
            return z
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise UsageError(f"non-finite value {value!r}")
        return ExactComplex(Fraction(repr(z.real)), Fraction(repr(z.imag)))
    raise UsageError(f"unsupported scalar {value!r}")


def is_exact(value) -> bool:
    return isinstance(value, ExactComplex)


def exact_sqrt(z: ExactComplex) -> ExactComplex | None:
    """Principal square root of ``z`` if it lies in Q(i), else ``None``."""

    def qsqrt(q: Fraction) -> Fraction | None:
        if q < 0:
            return None
        n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
        if n * n == q.numerator and d * d == q.denominator:
            return Fraction(n, d)
        return None

    p, q = z.re, z.im
    modulus = qsqrt(p * p + q * q)
    if modulus is None:
        return None
    u = qsqrt((modulus + p) / 2)
    v = qsqrt((modulus - p) / 2)
    if u is None or v is None:
        return None
    if q < 0:
        v = -v
    # principal branch: Re >= 0, and Im >= 0 on the negative real axis
    return ExactComplex(u, v)


# ---------------------------------------------------------------------------
# 2x2 matrices (plain numpy arrays, dtype complex or object)
# ---------------------------------------------------------------------------


def identity2(exact: bool = False) -> np.ndarray:
    if exact:
        one, zero = ExactComplex(1), ExactComplex(0)
        return np.array([[one, zero], [zero, one]], dtype=object)
    return np.eye(2, dtype=complex)


def zeros2(exact: bool = False) -> np.ndarray:
    if exact:
        zero = ExactComplex(0)
        return np.array([[zero, zero], [zero, zero]], dtype=object)
    return np.zeros((2, 2), dtype=complex)


def mat2(rows, exact: bool = False) -> np.ndarray:
    """Build a 2x2 matrix from nested rows of scalars."""
    if exact:
        return np.array([[parse_scalar(v, True) for v in row] for row in rows], dtype=object)
    return np.array([[complex(v) for v in row] for row in rows], dtype=complex)


def det2(m: np.ndarray):
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def trace2(m: np.ndarray):
    return m[0, 0] + m[1, 1]


def inv2(m: np.ndarray) -> np.ndarray:
    d = det2(m)
    if d == 0:
        raise DomainError("matrix is singular", module="algebra")
    out = np.empty((2, 2), dtype=m.dtype)
    out[0, 0], out[0, 1] = m[1, 1] / d, -m[0, 1] / d
    out[1, 0], out[1, 1] = -m[1, 0] / d, m[0, 0] / d
    return out


def to_complex(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr).astype(complex)


def max_abs(arr) -> float:
    arr = np.asarray(arr)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr.astype(complex))))


# ---------------------------------------------------------------------------
# Truncated matrix power series
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MatrixSeries:
    """``sum_{n=0}^{order} coeffs[n] x^n`` with 2x2 coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coeffs)
        if arr.ndim != 3 or arr.shape[1:] != (2, 2) or arr.shape[0] < 1:
            raise UsageError(f"coefficient array must have shape (N+1, 2, 2), got {arr.shape}")
        if arr.dtype != object:
            arr = arr.astype(complex)
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_list(cls, mats: Iterable, order: int | None = None, exact: bool | None = None):
        mats = [np.asarray(m) for m in mats]
        if exact is None:
            exact = any(m.dtype == object for m in mats)
        n = len(mats) - 1 if order is None else order
        out = _zeros(n, exact)
        for i, m in enumerate(mats[: n + 1]):
            out[i] = mat2(m, exact) if exact else m.astype(complex)
        return cls(out)

    @classmethod
    def identity(cls, order: int, exact: bool = False):
        out = _zeros(order, exact)
        out[0] = identity2(exact)
        return cls(out)

    @classmethod
    def zero(cls, order: int, exact: bool = False):
        return cls(_zeros(order, exact))

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def exact(self) -> bool:
        return self.coeffs.dtype == object

    def __getitem__(self, n):
        return self.coeffs[n]

    def __len__(self):
        return self.coeffs.shape[0]

    def _check(self, other: MatrixSeries):
        if not isinstance(other, MatrixSeries):
            raise UsageError("expected a MatrixSeries")
        if other.order != self.order:
            raise UsageError(
                f"truncation orders differ ({self.order} vs {other.order})", module="algebra"
            )

    def __add__(self, other):
        self._check(other)
        return MatrixSeries(_promote(self.coeffs, other) + _promote(other.coeffs, self))

    def __sub__(self, other):
        self._check(other)
        return MatrixSeries(_promote(self.coeffs, other) - _promote(other.coeffs, self))

    def __neg__(self):
        return MatrixSeries(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, MatrixSeries):
            return series_multiply(self, other)
        return MatrixSeries(self.coeffs * other)

    __rmul__ = __mul__

    def transpose(self) -> MatrixSeries:
        return MatrixSeries(np.transpose(self.coeffs, (0, 2, 1)))

    def truncate(self, order: int) -> MatrixSeries:
        if order > self.order:
            raise UsageError("cannot extend a truncated series", module="algebra")
        return MatrixSeries(self.coeffs[: order + 1])

    def shift(self, k: int) -> MatrixSeries:
        """Multiply by ``x**k`` keeping the order; the top ``k`` terms are dropped."""
        out = _zeros(self.order, self.exact)
        if k <= self.order:
            out[k:] = self.coeffs[: self.order + 1 - k]
        return MatrixSeries(out)

    def to_float(self) -> MatrixSeries:
        return MatrixSeries(to_complex(self.coeffs))

    def is_zero(self) -> bool:
        return not any(bool(v) for v in self.coeffs.flat)

    def max_norm(self) -> float:
        return max_abs(self.coeffs)

    def evaluate(self, x) -> np.ndarray:
        """Horner evaluation in floating point."""
        c = to_complex(self.coeffs)
        out = np.zeros((2, 2), dtype=complex)
        for n in range(self.order, -1, -1):
            out = out * x + c[n]
        return out

    def __repr__(self):
        return f"MatrixSeries(order={self.order}, exact={self.exact})"


def _zeros(order: int, exact: bool) -> np.ndarray:
    if order < 0:
        raise UsageError("truncation order must be non-negative", module="algebra")
    if exact:
        out = np.empty((order + 1, 2, 2), dtype=object)
        out.fill(ExactComplex(0))
        return out
    return np.zeros((order + 1, 2, 2), dtype=complex)


def _promote(arr: np.ndarray, other: MatrixSeries) -> np.ndarray:
    # exact combined with float degrades to float
    if arr.dtype == object and not other.exact:
        return arr.astype(complex)
    return arr


def series_multiply(p: MatrixSeries, q: MatrixSeries) -> MatrixSeries:
    """Cauchy product truncated at the common order."""
    p._check(q)
    a, b = _promote(p.coeffs, q), _promote(q.coeffs, p)
    n = p.order
    if a.dtype == object:
        out = _zeros(n, True)
        for k in range(n + 1):
            acc = a[0] @ b[k]
            for i in range(1, k + 1):
                acc = acc + a[i] @ b[k - i]
            out[k] = acc
        return MatrixSeries(out)
    out = np.zeros_like(a)
    for k in range(n + 1):
        out[k] = np.einsum("iab,ibc->ac", a[: k + 1], b[k::-1])
    return MatrixSeries(out)


def series_invert(p: MatrixSeries) -> MatrixSeries:
    """Two-sided inverse through order N; requires an invertible constant term."""
    try:
        c0inv = inv2(p.coeffs[0])
    except DomainError:
        raise DomainError("constant term is singular", module="algebra") from None
    n = p.order
    out = _zeros(n, p.exact)
    out[0] = c0inv
    for k in range(1, n + 1):
        acc = p.coeffs[1] @ out[k - 1]
        for i in range(2, k + 1):
            acc = acc + p.coeffs[i] @ out[k - i]
        out[k] = -(c0inv @ acc)
    return MatrixSeries(out)


def series_differentiate(p: MatrixSeries) -> MatrixSeries:
    """Term-wise derivative; the result has order ``N - 1`` (order 0 stays 0)."""
    n = p.order
    if n == 0:
        return MatrixSeries.zero(0, p.exact)
    out = _zeros(n - 1, p.exact)
    for k in range(n):
        out[k] = p.coeffs[k + 1] * (k + 1)
    return MatrixSeries(out)


def x2_derivative(p: MatrixSeries) -> MatrixSeries:
    """``x**2 p'(x)`` at the same order as ``p``."""
    out = _zeros(p.order, p.exact)
    for n in range(2, p.order + 1):
        out[n] = p.coeffs[n - 1] * (n - 1)
    return MatrixSeries(out)


# ---------------------------------------------------------------------------
# Polynomials in (x, y1, y2)
# ---------------------------------------------------------------------------

Monomial = tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class TriPolynomial:
    """Sparse polynomial in ``x^j y1^k y2^l`` with bounds ``j <= j_max``, ``k + l <= d_max``.

    Terms are kept in sorted monomial order; zero coefficients are dropped.
    """

    terms: Mapping[Monomial, object] = field(default_factory=dict)
    j_max: int = 0
    d_max: int = 0

    def __post_init__(self):
        clean = {}
        for (j, k, l), v in sorted(self.terms.items()):
            if min(j, k, l) < 0:
                raise UsageError(f"negative exponent in {(j, k, l)}", module="algebra")
            if j > self.j_max or k + l > self.d_max:
                raise UsageError(
                    f"monomial {(j, k, l)} exceeds bounds ({self.j_max}, {self.d_max})",
                    module="algebra",
                )
            if v:
                clean[(j, k, l)] = v
        object.__setattr__(self, "terms", clean)

    @classmethod
    def constant(cls, value, j_max=0, d_max=0):
        return cls({(0, 0, 0): value}, j_max, d_max)

    @classmethod
    def monomial(cls, mono: Monomial, value=1, j_max=None, d_max=None):
        j, k, l = mono
        return cls({mono: value}, j if j_max is None else j_max, k + l if d_max is None else d_max)

    def __getitem__(self, mono):
        return self.terms.get(mono, 0)

    def __iter__(self):
        return iter(self.terms.items())

    def __len__(self):
        return len(self.terms)

    def with_bounds(self, j_max: int, d_max: int) -> TriPolynomial:
        """Drop monomials outside the new bounds (or widen the bounds)."""
        kept = {m: v for m, v in self.terms.items() if m[0] <= j_max and m[1] + m[2] <= d_max}
        return TriPolynomial(kept, j_max, d_max)

    def __add__(self, other: TriPolynomial) -> TriPolynomial:
        out = dict(self.terms)
        for m, v in other.terms.items():
            out[m] = out.get(m, 0) + v
        return TriPolynomial(out, max(self.j_max, other.j_max), max(self.d_max, other.d_max))

    def __neg__(self):
        return TriPolynomial({m: -v for m, v in self.terms.items()}, self.j_max, self.d_max)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> TriPolynomial:
        return TriPolynomial({m: v * s for m, v in self.terms.items()}, self.j_max, self.d_max)

    def __mul__(self, other):
        if not isinstance(other, TriPolynomial):
            return self.scale(other)
        out: dict = {}
        for (j1, k1, l1), v1 in self.terms.items():
            for (j2, k2, l2), v2 in other.terms.items():
                m = (j1 + j2, k1 + k2, l1 + l2)
                out[m] = out.get(m, 0) + v1 * v2
        return TriPolynomial(out, self.j_max + other.j_max, self.d_max + other.d_max)

    __rmul__ = scale

    def equals(self, other: TriPolynomial, tol: float = 0.0) -> bool:
        diff = self - other
        if tol == 0:
            return len(diff) == 0
        return all(abs(complex(v)) <= tol for _, v in diff)

    def max_abs(self) -> float:
        return max((abs(complex(v)) for _, v in self), default=0.0)

    def evaluate(self, x, y1, y2) -> complex:
        return sum(complex(v) * x**j * y1**k * y2**l for (j, k, l), v in self)

    def __repr__(self):
        return f"TriPolynomial({dict(self.terms)!r}, j_max={self.j_max}, d_max={self.d_max})"


def apply_vector_field(F: TriPolynomial, params) -> TriPolynomial:
    """Apply ``x^2 d/dx + ((1+ax)y1 + bxy2) d/dy1 + (cxy1 - (1+ax)y2) d/dy2`` to ``F``.

    The x-degree bound of the result is one more than that of ``F``; the
    y-degree is preserved because the y-part is linear.
    """
    a, b, c = params.a, params.b, params.c
    out: dict = {}

    def add(m, v):
        out[m] = out.get(m, 0) + v

    for (j, k, l), v in F:
        if j:
            add((j + 1, k, l), v * j)
        if k != l:
            add((j, k, l), v * (k - l))
            add((j + 1, k, l), v * a * (k - l))
        if k:
            add((j + 1, k - 1, l + 1), v * b * k)
        if l:
            add((j + 1, k + 1, l - 1), v * c * l)
    return TriPolynomial(out, F.j_max + 1, F.d_max)


# ---------------------------------------------------------------------------
# Linear algebra over exact scalars
# ---------------------------------------------------------------------------


def exact_rref(matrix: list[list], ncols: int) -> tuple[list[list], list[int]]:
    """Reduced row echelon form over exact scalars; returns ``(rows, pivot_columns)``."""
    rows = [list(r) for r in matrix if any(bool(v) for v in r)]
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        if r == len(rows):
            break
        piv = next((i for i in range(r, len(rows)) if rows[i][col]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = ExactComplex(1) / rows[r][col]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col]:
                f = rows[i][col]
                rows[i] = [vi - f * vr for vi, vr in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    return rows[:r], pivots


def exact_nullspace(matrix: list[list], ncols: int) -> list[list]:
    """Basis of the right nullspace.

    Each basis vector has a 1 in one free column and zeros in the other free
    columns, so monomial-aligned kernels come back as unit vectors.
    """
    rows, pivots = exact_rref(matrix, ncols)
    basis = []
    for fc in (c for c in range(ncols) if c not in pivots):
        vec = [ExactComplex(0)] * ncols
        vec[fc] = ExactComplex(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -rows[i][fc]
        basis.append(vec)
    return basis


def exact_solve(matrix: list[list], rhs: list) -> list | None:
    """Solve ``matrix @ z = rhs`` exactly; ``None`` if inconsistent.

    Free variables are set to zero, giving a particular solution.
    """
    ncols = len(matrix[0]) if matrix else 0
    aug = [list(r) + [v] for r, v in zip(matrix, rhs)]
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(aug)) if aug[i][col]), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        inv = ExactComplex(1) / aug[r][col]
        aug[r] = [v * inv for v in aug[r]]
        for i in range(len(aug)):
            if i != r and aug[i][col]:
                f = aug[i][col]
                aug[i] = [vi - f * vr for vi, vr in zip(aug[i], aug[r])]
        pivots.append(col)
        r += 1
    if any(row[-1] for row in aug[r:]):
        return None
    z = [ExactComplex(0)] * ncols
    for i, pc in enumerate(pivots):
        z[pc] = aug[i][-1]
    return z
