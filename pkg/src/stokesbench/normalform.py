"""Formal diagonalization of ``x^2 y' = (A0 + A1 x) y`` and its invariants.

``A0 = diag(1, -1)`` and ``A1 = [[a, b], [c, -a]]``.  The normalizing series
``T(x) = sum T_n x^n`` with ``T_0 = I`` solves ``x^2 T' = A T - T D`` where
``D = diag(1 + a x, -1 - a x)``.  Comparing coefficients of ``x^n`` gives

* off-diagonal part of ``T_n`` from ``T_{n-1}``::

    (T_n)_12 = ((n - 1 - 2a) (T_{n-1})_12 - b (T_{n-1})_22) / 2
    (T_n)_21 = -((n - 1 + 2a) (T_{n-1})_21 - c (T_{n-1})_11) / 2

* diagonal part of ``T_n`` from the coefficient of ``x^{n+1}``::

    (T_n)_11 = b (T_n)_21 / n,    (T_n)_22 = c (T_n)_12 / n

The diagonal of each ``T_n`` is thereby fixed; no free constants remain.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np

from .algebra import (
    ExactComplex,
    MatrixSeries,
    identity2,
    max_abs,
    series_multiply,
    to_complex,
    x2_derivative,
    zeros2,
)
from .errors import UsageError
from .params import Params

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 40

__all__ = [
    "DEFAULT_ORDER",
    "GevreyEstimate",
    "NormalFormResult",
    "Params",
    "coefficient_matrix",
    "conjugacy_residual",
    "formal_diagonalize",
    "formal_invariants",
    "formal_monodromy",
    "gevrey_type_estimate",
    "truncation_boundary_term",
]


def _one(params: Params):
    return ExactComplex(1) if params.exact else 1 + 0j


def coefficient_matrix(params: Params, order: int = 1) -> MatrixSeries:
    """``A(x) = A0 + A1 x`` as a series of the given order (``order >= 0``)."""
    one = _one(params)
    a, b, c = params.a, params.b, params.c
    a0 = zeros2(params.exact)
    a0[0, 0], a0[1, 1] = one, -one
    a1 = zeros2(params.exact)
    a1[0, 0], a1[0, 1], a1[1, 0], a1[1, 1] = a, b, c, -a
    series = MatrixSeries.zero(order, params.exact).coeffs.copy()
    series[0] = a0
    if order >= 1:
        series[1] = a1
    return MatrixSeries(series)


def diagonal_series(params: Params, order: int) -> MatrixSeries:
    """``D(x) = diag(1 + a x, -1 - a x)``."""
    d = coefficient_matrix(params, order).coeffs.copy()
    if order >= 1:
        d[1, 0, 1] = d[1, 0, 1] * 0
        d[1, 1, 0] = d[1, 1, 0] * 0
    return MatrixSeries(d)


@dataclass(frozen=True, eq=False)
class NormalFormResult:
    that: MatrixSeries
    dseries: MatrixSeries
    params: Params

    @property
    def order(self) -> int:
        return self.that.order

    def coefficient(self, n: int) -> np.ndarray:
        return self.that.coeffs[n]


def formal_diagonalize(params: Params, order: int = DEFAULT_ORDER) -> NormalFormResult:
    """Normalizing series ``T`` through ``x**order`` in the arithmetic of ``params``."""
    if order < 1:
        raise UsageError("order must be at least 1", module="normalform", params=str(params))
    a, b, c = params.a, params.b, params.c
    coeffs = MatrixSeries.zero(order, params.exact).coeffs.copy()
    coeffs[0] = identity2(params.exact)
    for n in range(1, order + 1):
        prev = coeffs[n - 1]
        cur = coeffs[n]
        cur[0, 1] = ((n - 1 - 2 * a) * prev[0, 1] - b * prev[1, 1]) / 2
        cur[1, 0] = -((n - 1 + 2 * a) * prev[1, 0] - c * prev[0, 0]) / 2
        cur[0, 0] = b * cur[1, 0] / n
        cur[1, 1] = c * cur[0, 1] / n
    return NormalFormResult(MatrixSeries(coeffs), diagonal_series(params, order), params)


def conjugacy_residual(nf: NormalFormResult, params: Params) -> MatrixSeries:
    """``x^2 T' - A T + T D`` through the truncation order of ``nf``."""
    n = nf.order
    t = nf.that
    amat = coefficient_matrix(params, n)
    return x2_derivative(t) - series_multiply(amat, t) + series_multiply(t, nf.dseries)


def truncation_boundary_term(nf: NormalFormResult, params: Params) -> np.ndarray:
    """Coefficient of ``x^{N+1}`` in the residual when ``T`` is cut at ``x^N``.

    It equals ``N T_N - A1 T_N + T_N D1``: the diagonal part vanishes by the
    choice of diagonal, the off-diagonal part is what ``T_{N+1}`` would cancel.
    """
    n = nf.order
    tn = nf.that.coeffs[n]
    a1 = coefficient_matrix(params, 1).coeffs[1]
    d1 = nf.dseries.coeffs[1]
    return tn * n - a1 @ tn + tn @ d1


def formal_invariants(params: Params) -> tuple[tuple, tuple]:
    """1-jets ``(c0, c1)`` of the two eigenvalue functions: ``+-(1 + a x)``."""
    one = _one(params)
    return (one, params.a), (-one, -params.a)


def formal_monodromy(params: Params) -> np.ndarray:
    """``N = diag(exp(2 pi i a), exp(-2 pi i a))``."""
    a = complex(params.a)
    e = cmath.exp(2j * math.pi * a)
    return np.array([[e, 0], [0, 1 / e]], dtype=complex)


@dataclass(frozen=True)
class GevreyEstimate:
    """Ratio diagnostics ``r_n = |T_{n+1}| / (n |T_n|)``.

    ``status`` is ``"divergent"`` with a fitted limit, or
    ``"convergent/terminating"`` when the tail coefficients all vanish.
    """

    status: str
    indices: tuple[int, ...] = ()
    ratios: tuple[float, ...] = ()
    fitted_limit: float | None = None
    fitted_slope: float | None = None

    @property
    def divergent(self) -> bool:
        return self.status == "divergent"


def gevrey_type_estimate(nf: NormalFormResult, min_order: int = 20) -> GevreyEstimate:
    """Fit ``r_n ~ L + K/n`` over the upper half of the coefficient range.

    For a Gevrey-1 series whose Borel transform has its nearest singularity
    at distance ``R``, ``L`` estimates ``1/R``.  Norm: max absolute entry.
    """
    n_max = nf.order
    if n_max < min_order:
        raise UsageError(f"need order >= {min_order}, got {n_max}", module="normalform")
    c = to_complex(nf.that.coeffs)
    norms = np.array([max_abs(c[n]) for n in range(n_max + 1)])
    tail = norms[n_max // 2 :]
    if not np.any(tail > 0):
        return GevreyEstimate(status="convergent/terminating")
    idx, ratios = [], []
    for n in range(1, n_max):
        if norms[n] > 0 and norms[n + 1] > 0:
            idx.append(n)
            ratios.append(norms[n + 1] / (n * norms[n]))
    sel = [i for i, n in enumerate(idx) if n >= n_max // 2]
    if len(sel) < 2:
        return GevreyEstimate(status="convergent/terminating", indices=tuple(idx), ratios=tuple(ratios))
    ns = np.array([idx[i] for i in sel], dtype=float)
    rs = np.array([ratios[i] for i in sel])
    design = np.column_stack([np.ones_like(ns), 1.0 / ns])
    (limit, slope), *_ = np.linalg.lstsq(design, rs, rcond=None)
    logger.debug("gevrey fit over n=%d..%d: L=%.6g K=%.6g", ns[0], ns[-1], limit, slope)
    return GevreyEstimate(
        status="divergent",
        indices=tuple(idx),
        ratios=tuple(float(r) for r in ratios),
        fitted_limit=float(limit),
        fitted_slope=float(slope),
    )
