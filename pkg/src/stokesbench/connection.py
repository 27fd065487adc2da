"""Analytic continuation of ``x^2 y' = A(x) y`` and the quantities built on it.

Points live on the universal cover of the punctured plane (:class:`BranchPoint`
keeps the angle unreduced), so ``x**a`` and ``log x`` are single valued.

Conventions
-----------
Fundamental solutions act on the right: continuing ``Y`` once around the
origin counterclockwise gives ``Y(e^{2 pi i} x) = Y(x) M``.

For a singular direction ``beta`` in ``{0, pi}``, ``Y_{beta+}`` is glued from
the sectorial solutions with direction ``alpha`` in ``(beta, beta + pi)`` and
``Y_{beta-}`` from ``alpha`` in ``(beta - pi, beta)``; both are continued to
the ray of angle ``beta`` and ``S_beta = Y_{beta+}^{-1} Y_{beta-}``.  With this
choice ``M = S_0 N S_pi`` in the frame of ``Y_{0+}``.
"""

from __future__ import annotations

import cmath
import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .algebra import det2, exact_sqrt, inv2, is_exact, trace2
from .errors import ConventionError, IntegrationError, PrecisionError, UsageError
from .normalform import formal_diagonalize, formal_monodromy
from .params import Params

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_SEED_MODULUS = 0.05
DEFAULT_COMPARE_MODULUS = 0.2
DEFAULT_CLASSIFY_TOL = 1e-8
# arcs at small modulus are stiff; bound the angle swept per step there
_SMALL_MODULUS = 0.1
_MAX_ARC_STEP = math.radians(5.0)


@dataclass(frozen=True)
class BranchPoint:
    modulus: float
    angle: float

    def __post_init__(self):
        if not self.modulus > 0:
            raise UsageError(f"modulus must be positive, got {self.modulus}", module="connection")

    @property
    def log(self) -> complex:
        return complex(math.log(self.modulus), self.angle)

    @property
    def x(self) -> complex:
        return cmath.rect(self.modulus, self.angle)

    def power(self, s: complex) -> complex:
        """``x**s`` on this sheet."""
        return cmath.exp(s * self.log)


@dataclass(frozen=True)
class Segment:
    start: BranchPoint
    end: BranchPoint
    kind: str

    def __post_init__(self):
        if self.kind == "radial" and not math.isclose(self.start.angle, self.end.angle, abs_tol=1e-15):
            raise UsageError("radial segment must keep the angle fixed", module="connection")
        if self.kind == "arc" and not math.isclose(self.start.modulus, self.end.modulus):
            raise UsageError("arc segment must keep the modulus fixed", module="connection")
        if self.kind not in ("radial", "arc"):
            raise UsageError(f"unknown segment kind {self.kind!r}", module="connection")

    def reversed(self) -> Segment:
        return Segment(self.end, self.start, self.kind)


@dataclass(frozen=True)
class PathSpec:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for s1, s2 in zip(self.segments, self.segments[1:]):
            if s1.end != s2.start:
                raise UsageError("path segments are not contiguous", module="connection")

    @classmethod
    def radial(cls, angle: float, r0: float, r1: float) -> PathSpec:
        return cls((Segment(BranchPoint(r0, angle), BranchPoint(r1, angle), "radial"),))

    @classmethod
    def arc(cls, modulus: float, theta0: float, theta1: float) -> PathSpec:
        return cls((Segment(BranchPoint(modulus, theta0), BranchPoint(modulus, theta1), "arc"),))

    @classmethod
    def radial_then_arc(cls, start: BranchPoint, end: BranchPoint) -> PathSpec:
        mid = BranchPoint(end.modulus, start.angle)
        segs = []
        if start.modulus != end.modulus:
            segs.append(Segment(start, mid, "radial"))
        if start.angle != end.angle:
            segs.append(Segment(mid, end, "arc"))
        return cls(tuple(segs))

    def reversed(self) -> PathSpec:
        return PathSpec(tuple(s.reversed() for s in reversed(self.segments)))

    @property
    def start(self) -> BranchPoint:
        return self.segments[0].start

    @property
    def end(self) -> BranchPoint:
        return self.segments[-1].end


def _integrate_segment(a0, a1, seg: Segment, y0: np.ndarray, tol: float, index: int) -> np.ndarray:
    # Straight line in log x: x(t) = exp(L0 + t dL), t in [0, 1], so
    # dY/dt = dL * A(x) Y / x.
    l0 = seg.start.log
    dl = seg.end.log - l0
    if dl == 0:
        return y0

    def rhs(t, y):
        x = cmath.exp(l0 + t * dl)
        m = (a0 / x + a1) * dl
        return (m @ y.reshape(2, 2)).ravel()

    max_step = np.inf
    if seg.kind == "arc" and seg.start.modulus <= _SMALL_MODULUS:
        max_step = _MAX_ARC_STEP / abs(dl.imag)
    scale = max(float(np.max(np.abs(y0))), 1.0)
    sol = solve_ivp(
        rhs,
        (0.0, 1.0),
        y0.astype(complex).ravel(),
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-6 * scale,
        max_step=max_step,
    )
    if not sol.success:
        raise IntegrationError(
            f"integration failed on segment {index} ({seg.kind} from {seg.start} to {seg.end}): "
            f"{sol.message}",
            module="connection",
        )
    return sol.y[:, -1].reshape(2, 2)


def integrate_along_path(
    params: Params, path: PathSpec, initial: np.ndarray, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Transport the matrix solution ``initial`` along ``path``.

    Uses an adaptive 8(5,3) Runge-Kutta scheme with relative tolerance ``tol``.
    """
    if not tol > 0:
        raise UsageError("tol must be positive", module="connection")
    a, b, c = params.as_complex()
    a0 = np.array([[1, 0], [0, -1]], dtype=complex)
    a1 = np.array([[a, b], [c, -a]], dtype=complex)
    y = np.asarray(initial, dtype=complex)
    for i, seg in enumerate(path.segments):
        try:
            y = _integrate_segment(a0, a1, seg, y, tol, i)
        except IntegrationError as exc:
            exc.params = str(params)
            raise
    return y


def monodromy_matrix(
    params: Params, basepoint: BranchPoint = BranchPoint(1.0, 0.0), tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Counterclockwise monodromy in the frame equal to the identity at ``basepoint``."""
    if not 0.5 <= basepoint.modulus <= 2.0:
        raise UsageError("basepoint modulus must lie in [0.5, 2]", module="connection")
    path = PathSpec.arc(basepoint.modulus, basepoint.angle, basepoint.angle + 2 * math.pi)
    return integrate_along_path(params, path, np.eye(2, dtype=complex), tol)


@dataclass(frozen=True)
class ResidueSpectrum:
    """Eigenvalues ``+-lam`` of ``[[a, b], [c, -a]]`` (principal square root)."""

    lam: complex
    resonant: bool
    exact_lam: object = None

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        return self.lam, -self.lam


def residue_spectrum(params: Params, tol: float = 1e-12) -> ResidueSpectrum:
    """``lam = sqrt(a^2 + bc)`` and whether ``2 lam`` is an integer."""
    if params.exact:
        disc = params.a * params.a + params.b * params.c
        root = exact_sqrt(disc)
        if root is not None:
            two = 2 * root
            resonant = two.im == 0 and two.re.denominator == 1
            return ResidueSpectrum(complex(root), resonant, root)
        lam = cmath.sqrt(complex(disc))
        # an irrational square root is never half an integer
        return ResidueSpectrum(lam, False)
    a, b, c = params.as_complex()
    lam = cmath.sqrt(a * a + b * c)
    two = 2 * lam
    resonant = abs(two.imag) <= tol and abs(two.real - round(two.real)) <= tol
    return ResidueSpectrum(lam, resonant)


def diagonal_solution(params: Params, at: BranchPoint) -> np.ndarray:
    """``U(x) = diag(x^a e^{-1/x}, x^{-a} e^{1/x})`` on the sheet of ``at``."""
    a = complex(params.a)
    inv_x = cmath.exp(-at.log)
    u1 = cmath.exp(a * at.log - inv_x)
    u2 = cmath.exp(-a * at.log + inv_x)
    return np.array([[u1, 0], [0, u2]], dtype=complex)


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    at: BranchPoint
    matrix: np.ndarray
    meaning: tuple = ("transported",)
    seeding_error: float = 0.0


def _component(alpha: float) -> int:
    k = math.floor(alpha / math.pi)
    if math.isclose(alpha, k * math.pi, abs_tol=1e-12) or math.isclose(
        alpha, (k + 1) * math.pi, abs_tol=1e-12
    ):
        raise UsageError(f"direction {alpha} is singular (multiple of pi)", module="connection")
    return k


def seeding_error_bound(params: Params, seed: BranchPoint, order: int, nf=None) -> float:
    """Estimated error of ``T_N(x_s) U(x_s)`` relative to the sectorial solution.

    The optimal-truncation remainder ``|T_N| |x_s|^N`` is amplified by
    ``|e^{+-2/x_s}|`` when it mixes the two columns.  The power ``x^{+-2a}``
    of the mixing ratio is left out: the remainder carries the reciprocal
    power and the two cancel.
    """
    if nf is None:
        nf = formal_diagonalize(params.to_float(), order)
    tail = float(np.max(np.abs(np.asarray(nf.that.coeffs[order], dtype=complex)))) * seed.modulus**order
    growth = math.exp(2 * abs(math.cos(seed.angle)) / seed.modulus)
    return tail * growth


def sectorial_fundamental_solution(
    params: Params,
    alpha: float,
    target: BranchPoint,
    order: int | None = None,
    seed_modulus: float = DEFAULT_SEED_MODULUS,
    tol: float = DEFAULT_TOL,
    seed_tol: float | None = None,
) -> FundamentalSolution:
    """Sectorial solution ``Y_alpha = T_alpha U`` continued to ``target``.

    Seeds with the optimally truncated normalizing series at
    ``seed_modulus * e^{i alpha}`` (``order`` defaults to ``ceil(2/seed_modulus)``),
    then moves radially to ``|target|`` and along an arc to ``arg target``.
    The radial leg runs where both exponentials have comparable size, which
    keeps the column mixing of the integration error small.

    ``target`` must lie in the glued sector of ``alpha``: for
    ``alpha`` in ``(k pi, (k+1) pi)`` the angle must lie in
    ``(k pi - pi/2, (k+1) pi + pi/2)``.
    """
    k = _component(alpha)
    lo, hi = k * math.pi - math.pi / 2, (k + 1) * math.pi + math.pi / 2
    if not lo < target.angle < hi:
        raise UsageError(
            f"target angle {target.angle:.6g} outside the sector ({lo:.6g}, {hi:.6g}) of alpha",
            module="connection",
        )
    if order is None:
        order = math.ceil(2 / seed_modulus)
    fparams = params.to_float()
    nf = formal_diagonalize(fparams, order)
    seed = BranchPoint(seed_modulus, alpha)
    bound = seeding_error_bound(fparams, seed, order, nf)
    limit = 1e3 * tol if seed_tol is None else seed_tol
    if bound > limit:
        raise PrecisionError(
            f"seeding error estimate {bound:.3g} exceeds {limit:.3g}; "
            f"reduce seed_modulus (currently {seed_modulus})",
            module="connection",
            params=str(params),
        )
    y0 = nf.that.evaluate(seed.x) @ diagonal_solution(fparams, seed)
    path = PathSpec.radial_then_arc(seed, target)
    y = integrate_along_path(fparams, path, y0, tol) if path.segments else y0
    return FundamentalSolution(target, y, ("sectorial", alpha), bound)


class StokesMatrix:
    """Computed Stokes matrix with its self-check residuals."""

    def __init__(self, beta: float, matrix: np.ndarray, residuals: dict[str, float]):
        self.beta = beta
        self.matrix = matrix
        self.residuals = residuals

    @property
    def constant(self) -> complex:
        """``s_0`` (upper-right entry) or ``s_pi`` (lower-left entry)."""
        return complex(self.matrix[0, 1] if self.beta == 0 else self.matrix[1, 0])

    def __repr__(self):
        return f"StokesMatrix(beta={self.beta}, s={self.constant:.12g})"


def stokes_matrix(
    params: Params,
    beta: float,
    tol: float = DEFAULT_TOL,
    seed_modulus: float = DEFAULT_SEED_MODULUS,
    compare_modulus: float = DEFAULT_COMPARE_MODULUS,
    order: int | None = None,
    check: bool = True,
) -> StokesMatrix:
    """``S_beta = Y_{beta+}^{-1} Y_{beta-}`` on the ray of angle ``beta``.

    Residuals are the off-convention entry and the deviations of the diagonal
    from 1; they are reported, not forced.  With ``check`` a residual above
    ``1e3 * tol`` raises :class:`ConventionError`.
    """
    if beta not in (0, math.pi):
        raise UsageError("beta must be 0 or pi", module="connection")
    target = BranchPoint(compare_modulus, beta)
    kw = dict(order=order, seed_modulus=seed_modulus, tol=tol)
    plus = sectorial_fundamental_solution(params, beta + math.pi / 2, target, **kw)
    minus = sectorial_fundamental_solution(params, beta - math.pi / 2, target, **kw)
    s = inv2(plus.matrix) @ minus.matrix
    off = s[1, 0] if beta == 0 else s[0, 1]
    residuals = {
        "off_convention": float(abs(off)),
        "diag_11": float(abs(s[0, 0] - 1)),
        "diag_22": float(abs(s[1, 1] - 1)),
    }
    result = StokesMatrix(beta, s, residuals)
    worst = max(residuals.values())
    if check and worst > 1e3 * tol:
        raise ConventionError(
            f"Stokes matrix at beta={beta:g} is not unipotent triangular (residual {worst:.3g})",
            module="connection",
            params=str(params),
        )
    return result


@dataclass
class StokesData:
    s0: complex
    spi: complex
    S0: np.ndarray
    Spi: np.ndarray
    M: np.ndarray
    lam: complex
    resonant: bool
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def product(self) -> complex:
        return self.s0 * self.spi


def compute_stokes_data(
    params: Params,
    tol: float = DEFAULT_TOL,
    seed_modulus: float = DEFAULT_SEED_MODULUS,
    compare_modulus: float = DEFAULT_COMPARE_MODULUS,
    basepoint: BranchPoint = BranchPoint(1.0, 0.0),
    check: bool = True,
) -> StokesData:
    """Stokes matrices, monodromy and all cross-check residuals for ``params``."""
    kw = dict(tol=tol, seed_modulus=seed_modulus, compare_modulus=compare_modulus, check=check)
    st0 = stokes_matrix(params, 0, **kw)
    stpi = stokes_matrix(params, math.pi, **kw)
    m = monodromy_matrix(params, basepoint, tol)
    spec = residue_spectrum(params)
    data = StokesData(
        s0=st0.constant,
        spi=stpi.constant,
        S0=st0.matrix,
        Spi=stpi.matrix,
        M=m,
        lam=spec.lam,
        resonant=spec.resonant,
    )
    data.residuals = {
        **trace_identity_residuals(params, data),
        "S0_off_convention": st0.residuals["off_convention"],
        "S0_diagonal": max(st0.residuals["diag_11"], st0.residuals["diag_22"]),
        "Spi_off_convention": stpi.residuals["off_convention"],
        "Spi_diagonal": max(stpi.residuals["diag_11"], stpi.residuals["diag_22"]),
    }
    return data


def trace_identity_residuals(params: Params, stokes: StokesData) -> dict[str, float]:
    """Residuals of the trace identities linking ``M``, ``lam`` and ``s0 spi``."""
    a = complex(params.a)
    m = stokes.M
    tr = trace2(m)
    n = formal_monodromy(params)
    residuals = {
        "trace_vs_residue": tr - 2 * cmath.cos(2 * math.pi * stokes.lam),
        "trace_vs_stokes": tr
        - (2 * cmath.cos(2 * math.pi * a) + cmath.exp(-2j * math.pi * a) * stokes.s0 * stokes.spi),
        "det_minus_one": det2(m) - 1,
        "stokes_product_trace": trace2(stokes.S0 @ n @ stokes.Spi) - tr,
    }
    return {k: float(abs(v)) for k, v in residuals.items()}


class Verdict(str, enum.Enum):
    NO_HOLOMORPHIC_FIRST_INTEGRAL = "NoHolomorphicFirstIntegral"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    gap: float
    tol: float
    exact: bool = False
    borderline: bool = False


def _exact_cosines_equal(params: Params) -> bool:
    # cos(2 pi a) = cos(2 pi lam)  iff  lam - a or lam + a is an integer
    root = exact_sqrt(params.a * params.a + params.b * params.c)
    if root is None:
        return False
    for d in (root - params.a, root + params.a):
        if d.im == 0 and d.re.denominator == 1:
            return True
    return False


def classify_obstruction(params: Params, tol: float = DEFAULT_CLASSIFY_TOL) -> Classification:
    """Apply the criterion ``cos(2 pi a) != cos(2 pi sqrt(a^2 + bc))``.

    In exact mode equality is decided algebraically.  Otherwise the gap is
    compared with ``tol``; a gap in ``(tol, 10 tol)`` is flagged borderline.
    Equality means the criterion is silent, hence ``Inconclusive``.
    """
    a = complex(params.a)
    lam = residue_spectrum(params).lam
    gap = abs(cmath.cos(2 * math.pi * a) - cmath.cos(2 * math.pi * lam))
    borderline = tol < gap < 10 * tol
    if borderline:
        warnings.warn(
            f"obstruction gap {gap:.3g} for {params} is within a factor 10 of tol={tol:g}",
            stacklevel=2,
        )
    if params.exact and all(is_exact(v) for v in (params.a, params.b, params.c)):
        equal = _exact_cosines_equal(params)
        verdict = Verdict.INCONCLUSIVE if equal else Verdict.NO_HOLOMORPHIC_FIRST_INTEGRAL
        return Classification(verdict, 0.0 if equal else gap, tol, exact=True, borderline=borderline)
    verdict = Verdict.NO_HOLOMORPHIC_FIRST_INTEGRAL if gap > tol else Verdict.INCONCLUSIVE
    return Classification(verdict, gap, tol, borderline=borderline)
