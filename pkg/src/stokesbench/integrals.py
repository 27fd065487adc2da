"""Formal first integrals of the vector field family and their obstruction.

The diagonal model ``X_a`` has the first integral ``h(u) = u1 u2``.  Pulling
it back through ``y = T(x) u`` gives ``f(x, y) = y^T Q(x) y`` with
``Q = T^{-T} E T^{-1}`` and ``E = [[0, 1/2], [1/2, 0]]``.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import (
    ExactComplex,
    MatrixSeries,
    Monomial,
    TriPolynomial,
    apply_vector_field,
    exact_rref,
    exact_solve,
    mat2,
    series_invert,
    series_multiply,
    x2_derivative,
)
from .errors import UsageError
from .normalform import NormalFormResult, coefficient_matrix, formal_diagonalize
from .params import Params

logger = logging.getLogger(__name__)

KERNEL_RCOND = 1e-10
FIT_TOL = 1e-8


def _half_e(exact: bool) -> np.ndarray:
    half = ExactComplex(1, 0) / 2 if exact else 0.5
    return mat2([[0, half], [half, 0]], exact)


@dataclass(frozen=True, eq=False)
class QuadraticFormSeries:
    """``f(x, y) = y^T Q(x) y`` with symmetric coefficients ``Q_n``."""

    q: MatrixSeries

    def __post_init__(self):
        c = self.q.coeffs
        for n in range(len(c)):
            if c[n][0, 1] != c[n][1, 0]:
                raise UsageError(f"Q_{n} is not symmetric", module="integrals")

    @property
    def order(self) -> int:
        return self.q.order

    @property
    def qcoeffs(self) -> np.ndarray:
        return self.q.coeffs

    def to_polynomial(self, d_max: int = 2) -> TriPolynomial:
        terms: dict[Monomial, object] = {}
        for j, qj in enumerate(self.q.coeffs):
            terms[(j, 2, 0)] = qj[0, 0]
            terms[(j, 1, 1)] = qj[0, 1] * 2
            terms[(j, 0, 2)] = qj[1, 1]
        return TriPolynomial(terms, self.order, max(d_max, 2))

    def evaluate(self, x, y) -> complex:
        y = np.asarray(y, dtype=complex)
        return complex(y @ self.q.evaluate(x) @ y)


def _symmetrize(m: MatrixSeries) -> MatrixSeries:
    c = m.coeffs
    return MatrixSeries((c + np.transpose(c, (0, 2, 1))) / 2)


def formal_first_integral(params: Params, order: int, nf: NormalFormResult | None = None) -> QuadraticFormSeries:
    """Truncated ``f`` with ``f(x, T(x) u) = u1 u2``."""
    if order < 1:
        raise UsageError("order must be at least 1", module="integrals")
    if nf is None:
        nf = formal_diagonalize(params, order)
    tinv = series_invert(nf.that)
    e = MatrixSeries.zero(order, params.exact).coeffs.copy()
    e[0] = _half_e(params.exact)
    q = series_multiply(series_multiply(tinv.transpose(), MatrixSeries(e)), tinv)
    return QuadraticFormSeries(_symmetrize(q))


def first_integral_residual(Q: QuadraticFormSeries, params: Params) -> MatrixSeries:
    """``x^2 Q' + A^T Q + Q A``: the matrix form of ``X f = 0``."""
    amat = coefficient_matrix(params, Q.order)
    return x2_derivative(Q.q) + series_multiply(amat.transpose(), Q.q) + series_multiply(Q.q, amat)


def pull_back(Q: QuadraticFormSeries, nf: NormalFormResult) -> QuadraticFormSeries:
    """``f(x, T(x) u)`` as a quadratic form in ``u``: coefficients of ``T^T Q T``."""
    t = nf.that
    return QuadraticFormSeries(_symmetrize(series_multiply(series_multiply(t.transpose(), Q.q), t)))


def scale_u(F: TriPolynomial, t) -> TriPolynomial:
    """Substitute ``(u1, u2) -> (t u1, u2 / t)``."""
    return TriPolynomial({m: v * t ** (m[1] - m[2]) for m, v in F}, F.j_max, F.d_max)


# ---------------------------------------------------------------------------
# Truncated kernel of F -> X F
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """Basis of ``{F : X F = 0 mod x^{J+1}}`` over the given degree bounds.

    ``artifacts[i]`` marks elements whose obstruction sits at ``x^{J+1}``,
    i.e. outside the truncation; ``artifact_degrees`` collects their x-degrees.
    """

    elements: tuple[TriPolynomial, ...]
    bounds: tuple[int, int]
    artifacts: tuple[bool, ...]
    artifact_degrees: frozenset[int] = field(default_factory=frozenset)

    @property
    def dimension(self) -> int:
        return len(self.elements)

    @property
    def genuine(self) -> tuple[TriPolynomial, ...]:
        return tuple(e for e, art in zip(self.elements, self.artifacts) if not art)

    @property
    def spurious(self) -> tuple[TriPolynomial, ...]:
        return tuple(e for e, art in zip(self.elements, self.artifacts) if art)


def _degree_monomials(j_max: int, d: int) -> list[Monomial]:
    return [(j, k, d - k) for j in range(j_max + 1) for k in range(d, -1, -1)]


def _images(params: Params, monos: list[Monomial], j_max: int, d_max: int) -> list[TriPolynomial]:
    return [apply_vector_field(TriPolynomial.monomial(m, 1, j_max, d_max), params) for m in monos]


def _exact_kernel_block(params, monos, images, j_max):
    rows_idx = {m: i for i, m in enumerate(monos)}
    nrows = len(monos)
    zero = ExactComplex(0)
    mat = [[zero] * len(monos) for _ in range(nrows)]
    obstruction_rows = sorted({m for img in images for m, _ in img if m[0] == j_max + 1 and m[1] == m[2]})
    obs_idx = {m: i for i, m in enumerate(obstruction_rows)}
    obs = [[zero] * len(monos) for _ in obstruction_rows]
    for col, img in enumerate(images):
        for m, v in img:
            if m[0] <= j_max:
                mat[rows_idx[m]][col] = v
            elif m in obs_idx:
                obs[obs_idx[m]][col] = v
    rows, pivots = exact_rref(mat, len(monos))
    kernel = []
    for fc in (c for c in range(len(monos)) if c not in pivots):
        vec = [zero] * len(monos)
        vec[fc] = ExactComplex(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -rows[i][fc]
        kernel.append(vec)
    if not kernel:
        return [], []
    # obstruction restricted to the kernel, in kernel coordinates
    ok = [[sum((r[i] * v[i] for i in range(len(monos))), zero) for v in kernel] for r in obs]
    orows, opivots = exact_rref(ok, len(kernel)) if ok else ([], [])
    genuine = []
    for fc in (c for c in range(len(kernel)) if c not in opivots):
        coeffs = [zero] * len(kernel)
        coeffs[fc] = ExactComplex(1)
        for i, pc in enumerate(opivots):
            coeffs[pc] = -orows[i][fc]
        genuine.append([sum((cf * kv[i] for cf, kv in zip(coeffs, kernel)), zero) for i in range(len(monos))])
    spurious = [kernel[pc] for pc in opivots]
    return genuine, spurious


def _float_kernel_block(params, monos, images, j_max):
    rows_idx = {m: i for i, m in enumerate(monos)}
    obstruction_rows = sorted({m for img in images for m, _ in img if m[0] == j_max + 1 and m[1] == m[2]})
    obs_idx = {m: i for i, m in enumerate(obstruction_rows)}
    mat = np.zeros((len(monos), len(monos)), dtype=complex)
    obs = np.zeros((len(obstruction_rows), len(monos)), dtype=complex)
    for col, img in enumerate(images):
        for m, v in img:
            if m[0] <= j_max:
                mat[rows_idx[m], col] = complex(v)
            elif m in obs_idx:
                obs[obs_idx[m], col] = complex(v)
    kernel = scipy.linalg.null_space(mat, rcond=KERNEL_RCOND)
    if kernel.shape[1] == 0:
        return [], []
    if obs.shape[0] == 0:
        return list(kernel.T), []
    ok = obs @ kernel
    _, sv, vh = np.linalg.svd(ok)
    scale = sv[0] if sv.size and sv[0] > 0 else 1.0
    rank = int(np.sum(sv > KERNEL_RCOND * max(scale, 1.0)))
    genuine = kernel @ vh[rank:].conj().T
    spurious = kernel @ vh[:rank].conj().T
    return list(genuine.T), list(spurious.T)


def truncated_kernel(params: Params, j_max: int, d_max: int) -> KernelBasis:
    """Solve ``X F = 0 mod x^{j_max+1}`` over ``deg_x F <= j_max``, ``deg_y F <= d_max``.

    ``X`` preserves the y-degree, so the solve splits into homogeneous blocks.
    An element is a truncation artifact when the ``x^{j_max+1}`` part of ``X F``
    has a component on ``(y1 y2)^k`` monomials, which no higher-order term
    could cancel.
    """
    if j_max < 0 or d_max < 0:
        raise UsageError("degree bounds must be non-negative", module="integrals")
    elements, flags = [], []
    degrees: set[int] = set()
    for d in range(d_max + 1):
        monos = _degree_monomials(j_max, d)
        images = _images(params, monos, j_max, d_max)
        solve = _exact_kernel_block if params.exact else _float_kernel_block
        genuine, spurious = solve(params, monos, images, j_max)
        for vec, art in [(v, False) for v in genuine] + [(v, True) for v in spurious]:
            poly = TriPolynomial(dict(zip(monos, vec)), j_max, d_max)
            if not params.exact:
                poly = _clean(poly)
            elements.append(poly)
            flags.append(art)
            if art:
                degrees.add(max(m[0] for m, _ in poly))
    return KernelBasis(tuple(elements), (j_max, d_max), tuple(flags), frozenset(degrees))


def _clean(poly: TriPolynomial, rel: float = 1e-13) -> TriPolynomial:
    scale = poly.max_abs() or 1.0
    kept = {m: complex(v) for m, v in poly if abs(complex(v)) > rel * scale}
    return TriPolynomial(kept, poly.j_max, poly.d_max)


# ---------------------------------------------------------------------------
# Primitivity: every genuine element is G(f) for a polynomial G
# ---------------------------------------------------------------------------


@dataclass
class ElementFit:
    index: int
    g_coeffs: list
    residual: float
    passed: bool


@dataclass
class PrimitivityReport:
    passed: bool
    fits: list[ElementFit]
    failures: list[int]
    method: str

    def summary(self) -> str:
        status = "pass" if self.passed else f"FAIL (elements {self.failures})"
        worst = max((f.residual for f in self.fits), default=0.0)
        return f"primitivity {status}: {len(self.fits)} elements, method={self.method}, max residual {worst:.3g}"


def _powers(f: TriPolynomial, pmax: int, j_max: int, d_max: int, exact: bool) -> list[TriPolynomial]:
    one = ExactComplex(1) if exact else 1 + 0j
    out = [TriPolynomial.constant(one, j_max, d_max)]
    for _ in range(pmax):
        out.append((out[-1] * f).with_bounds(j_max, d_max))
    return out


def primitivity_check(basis: KernelBasis, params: Params, tol: float = FIT_TOL) -> PrimitivityReport:
    """Check that each non-artifact element factors through the first integral.

    Diagonal parameters: the element must be supported on ``(u1 u2)^k``.
    General parameters: fit ``G(f) = sum g_p f^p`` against the element in
    coefficient space (exact solve, or least squares with threshold ``tol``
    relative to the element's size).
    """
    j_max, d_max = basis.bounds
    if params.diagonal:
        fits = []
        for i, el in enumerate(basis.elements):
            if basis.artifacts[i]:
                continue
            bad = [m for m, _ in el if not (m[0] == 0 and m[1] == m[2])]
            g = [el[(0, p, p)] for p in range(d_max // 2 + 1)]
            fits.append(ElementFit(i, g, 0.0 if not bad else max(abs(complex(el[m])) for m in bad), not bad))
        failures = [f.index for f in fits if not f.passed]
        return PrimitivityReport(not failures, fits, failures, "support")

    f_hat = formal_first_integral(params, max(j_max, 1)).to_polynomial(d_max).with_bounds(j_max, d_max)
    powers = _powers(f_hat, d_max // 2, j_max, d_max, params.exact)
    monos = sorted({m for p in powers for m, _ in p} | {m for el in basis.elements for m, _ in el})
    fits = []
    for i, el in enumerate(basis.elements):
        if basis.artifacts[i]:
            continue
        if params.exact:
            mat = [[p[m] if p[m] else ExactComplex(0) for p in powers] for m in monos]
            rhs = [el[m] if el[m] else ExactComplex(0) for m in monos]
            g = exact_solve(mat, rhs)
            fits.append(ElementFit(i, g if g is not None else [], 0.0 if g is not None else float("inf"), g is not None))
        else:
            mat = np.array([[complex(p[m]) for p in powers] for m in monos])
            rhs = np.array([complex(el[m]) for m in monos])
            g, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
            resid = float(np.max(np.abs(mat @ g - rhs))) / max(float(np.max(np.abs(rhs))), 1e-300)
            fits.append(ElementFit(i, list(g), resid, resid <= tol))
    failures = [f.index for f in fits if not f.passed]
    for f in fits:
        if not f.passed:
            logger.warning("element %d does not factor through f (residual %.3g)", f.index, f.residual)
    return PrimitivityReport(not failures, fits, failures, "exact-solve" if params.exact else "least-squares")


# ---------------------------------------------------------------------------
# Stokes operators acting on h(u) = u1 u2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StokesTerm:
    """``coefficient * x^{x_power} * exp(exp_power / x) * u1^k u2^l``."""

    coefficient: complex
    x_power: complex
    exp_power: int
    monomial: tuple[int, int]

    @property
    def is_zero(self) -> bool:
        return self.coefficient == 0

    def evaluate(self, log_x: complex, u) -> complex:
        """Value at ``x = exp(log_x)``; ``log_x`` fixes the branch of ``x^{x_power}``."""
        if self.is_zero:
            return 0j
        k, l = self.monomial
        x = cmath.exp(log_x)
        return complex(self.coefficient) * cmath.exp(self.x_power * log_x + self.exp_power / x) * u[0] ** k * u[1] ** l


def stokes_action_on_integral(s, beta: float, a) -> StokesTerm:
    """``h(U S_beta U^{-1} u) - h(u)`` for the unipotent Stokes matrix with constant ``s``.

    For ``beta = 0``, ``U S_0 U^{-1} = [[1, s x^{2a} e^{-2/x}], [0, 1]]``; for
    ``beta = pi`` the transpose pattern with ``x^{-2a} e^{2/x}``.  The
    difference vanishes iff ``s = 0``.
    """
    a = complex(a)
    if beta == 0:
        return StokesTerm(s, 2 * a, -2, (0, 2))
    if beta in (np.pi, cmath.pi):
        return StokesTerm(s, -2 * a, 2, (2, 0))
    raise UsageError("beta must be 0 or pi", module="integrals")
