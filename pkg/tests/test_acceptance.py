"""Acceptance criteria; each test prints one PASS/FAIL line."""

import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from stokesbench.algebra import MatrixSeries
from stokesbench.connection import (
    BranchPoint,
    Verdict,
    classify_obstruction,
    compute_stokes_data,
    sectorial_fundamental_solution,
)
from stokesbench.integrals import (
    first_integral_residual,
    formal_first_integral,
    primitivity_check,
    pull_back,
    scale_u,
    truncated_kernel,
)
from stokesbench.normalform import conjugacy_residual, formal_diagonalize, gevrey_type_estimate
from stokesbench.params import Params

from test_normalform import sympy_normal_form

pytestmark = pytest.mark.acceptance

RATIONAL_TRIPLES = [
    (1, 1, 1),
    (0, 1, 1),
    (1, 1, 0),
    (1, 0, 0),
    (Fraction(1, 2), 0, 0),
    (Fraction(1, 3), 2, -1),
    (Fraction(-3, 4), Fraction(1, 2), Fraction(5, 3)),
    (2, -1, 3),
    (Fraction(1, 5), Fraction(-7, 2), Fraction(2, 9)),
    (Fraction(5, 2), 4, Fraction(-1, 6)),
]

GRID = [
    (1, 1, 1), (0, 1, 1), (1, 1, 0), (1, 0, 0), (0.5, 0, 0), (0.25, 1, -1), (0, 1, -0.25), (0.5, 0.5, 0.5),
    (-0.5, 1, 2), (0.3, -0.7, 0.4), (0.1, 2, 0.5), (-1, 1, 1), (0.75, 0.25, -0.5), (0.2 + 0.3j, 1, 1),
    (0.5, 1j, 1), (0, 1, 0.75), (0.4, -1, -1), (1.2, 0.3, 0.8), (-0.3, 0, 1), (0.6, 1.5, -0.2),
    (0.5, 1, -0.25), (0, 0.5 + 0.5j, 1),
]  # fmt: skip


@pytest.fixture(scope="module")
def grid_data():
    return [(g, compute_stokes_data(Params.of(*g, exact=False))) for g in GRID]


def test_criterion_1_exact_conjugacy(criterion):
    failures = []
    for triple in RATIONAL_TRIPLES:
        p = Params.of(*triple)
        nf = formal_diagonalize(p, 40)
        if not conjugacy_residual(nf, p).is_zero():
            failures.append(f"{triple}: residual")
        t1 = nf.coefficient(1)
        b, c = p.b, p.c
        if [[t1[0, 0], t1[0, 1]], [t1[1, 0], t1[1, 1]]] != [[b * c / 2, -b / 2], [c / 2, -b * c / 2]]:
            failures.append(f"{triple}: T1 closed form")
        oracle = sympy_normal_form(*(sp.Rational(str(v)) for v in triple), 2)
        for n in (1, 2):
            ours = sp.Matrix(2, 2, [sp.Rational(str(v.re)) for v in nf.coefficient(n).ravel()])
            if ours != oracle[n - 1]:
                failures.append(f"{triple}: T{n} vs substitution oracle")
    ok = criterion(1, "exact conjugacy through order 40 on 10 rational triples", not failures, "; ".join(failures))
    assert ok, failures


def test_criterion_2_trace_identity(criterion, grid_data):
    lams = [d.lam for _, d in grid_data]
    assert len(grid_data) >= 20
    assert any(d.resonant for _, d in grid_data) and any(abs(l.imag) > 0.1 for l in lams)
    assert {(0, 1, 1), (1, 1, 0)} <= {g for g, _ in grid_data}
    tr = max(d.residuals["trace_vs_residue"] for _, d in grid_data)
    det = max(d.residuals["det_minus_one"] for _, d in grid_data)
    ok = criterion(2, f"trace identity on {len(grid_data)} triples", tr <= 1e-8 and det <= 1e-9,
                   f"max |trM-2cos2pi lam|={tr:.2e}, max |detM-1|={det:.2e}")  # fmt: skip
    assert ok


def test_criterion_3_stokes_consistency(criterion, grid_data):
    lower = max(abs(d.S0[1, 0]) for _, d in grid_data)
    diag = max(max(abs(d.S0[0, 0] - 1), abs(d.S0[1, 1] - 1)) for _, d in grid_data)
    route = max(d.residuals["trace_vs_stokes"] for _, d in grid_data)
    ok = criterion(3, "Stokes shape and two-route trace agreement", max(lower, diag, route) <= 1e-6,
                   f"lower-left {lower:.2e}, diagonal {diag:.2e}, routes {route:.2e}")  # fmt: skip
    assert ok


def test_criterion_4_flagship(criterion):
    p = Params.of(1, 1, 1)
    product = compute_stokes_data(p).product
    closed_form = 2 * math.cos(2 * math.pi * math.sqrt(2)) - 2
    verdict = classify_obstruction(p).verdict
    ok = abs(product - closed_form) <= 1e-5 and abs(closed_form + 3.716431) <= 1e-5
    ok = ok and verdict is Verdict.NO_HOLOMORPHIC_FIRST_INTEGRAL
    criterion(4, "flagship s0*spi and verdict for (1,1,1)", ok,
              f"s0spi={product.real:.9f}{product.imag:+.1e}i, closed form {closed_form:.9f}, {verdict}")  # fmt: skip
    assert ok


def _equivalence_grid():
    rng = np.random.default_rng(7)
    grid = [tuple(float(v) for v in (rng.uniform(-1, 1), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)))
            for _ in range(14)]  # fmt: skip
    # equality cases: b c = n^2 + 2 a n gives lam = a + n; b c = 0 gives lam = +-a
    for a, n in [(0.25, 1), (-0.5, 1), (0.125, -1), (0.75, -1), (0.0, 1)]:
        grid.append((a, 1.0, n * n + 2 * a * n))
    grid += [(0.3, 0.0, 1.2), (-0.7, 0.9, 0.0)]
    return grid


def test_criterion_5_product_vanishes_iff_cosines_agree(criterion):
    grid = _equivalence_grid()
    mismatches, zeros = [], 0
    for g in grid:
        p = Params.of(*g, exact=False)
        d = compute_stokes_data(p)
        vanishes = abs(d.product) <= 1e-6
        equal = abs(math.cos(2 * math.pi * g[0]) - np.cos(2 * np.pi * d.lam)) <= 1e-6
        zeros += vanishes
        if vanishes != equal:
            mismatches.append(g)
    ok = criterion(5, f"s0*spi = 0 iff cos 2pi a = cos 2pi lam on {len(grid)} triples", not mismatches,
                   f"{zeros} vanishing, mismatches {mismatches}")  # fmt: skip
    assert zeros >= 7 and zeros < len(grid)
    assert ok


def test_criterion_6_gevrey_divergence(criterion):
    limits = {}
    for triple in [(1, 1, 1), (0, 1, 1)]:
        g = gevrey_type_estimate(formal_diagonalize(Params.of(*triple), 60))
        limits[triple] = g.fitted_limit if g.divergent else g.status
    ok = all(isinstance(v, float) and abs(v - 0.5) <= 0.025 for v in limits.values())
    criterion(6, "coefficient ratio fit tends to 1/2 at N=60", ok, ", ".join(f"{k}: {v}" for k, v in limits.items()))
    assert ok, limits


def test_criterion_7_first_integral(criterion):
    failures = []
    for triple in RATIONAL_TRIPLES[:6]:
        p = Params.of(*triple)
        nf = formal_diagonalize(p, 40)
        q = formal_first_integral(p, 40, nf)
        if not first_integral_residual(q, p).is_zero():
            failures.append(f"{triple}: residual")
        q1 = q.qcoeffs[1]
        if [[q1[0, 0], q1[0, 1]], [q1[1, 0], q1[1, 1]]] != [[-p.c / 2, 0], [0, p.b / 2]]:
            failures.append(f"{triple}: Q1")
        # f(x, T u) - u1 u2 has no terms through x^40
        e = MatrixSeries.from_list([[[0, Fraction(1, 2)], [Fraction(1, 2), 0]]], order=40, exact=True)
        if not (pull_back(q, nf).q - e).is_zero():
            failures.append(f"{triple}: pull-back")
    ok = criterion(7, "formal first integral exact through order 40", not failures, "; ".join(failures))
    assert ok, failures


def test_criterion_8_truncated_kernel(criterion):
    failures = []
    diag = Params.of(1, 0, 0)
    for bounds in [(0, 4), (3, 4), (4, 6)]:
        kb = truncated_kernel(diag, *bounds)
        if len(kb.genuine) != bounds[1] // 2 + 1:
            failures.append(f"{bounds}: {len(kb.genuine)} non-artifact elements")
        t = Fraction(5, 3)
        if not all(scale_u(el, t).equals(el) for el in kb.genuine):
            failures.append(f"{bounds}: scaling invariance")
    p = Params.of(1, 1, 1, exact=False)
    rep = primitivity_check(truncated_kernel(p, 4, 4), p)
    worst = max(f.residual for f in rep.fits)
    if not (rep.passed and worst <= 1e-8):
        failures.append(f"primitivity residual {worst:.2e}")
    exact_rep = primitivity_check(truncated_kernel(Params.of(1, 1, 1), 4, 4), Params.of(1, 1, 1))
    if not exact_rep.passed:
        failures.append("exact primitivity")
    ok = criterion(8, "truncated kernel dimensions, invariance and primitivity", not failures,
                   "; ".join(failures) or f"fit residual {worst:.1e}")  # fmt: skip
    assert ok, failures


def test_criterion_9_sectorial_gluing(criterion):
    p = Params.of(1, 1, 1)
    target = BranchPoint(0.3, math.pi / 2)
    kw = dict(tol=1e-13, seed_tol=1e-9)
    y1 = sectorial_fundamental_solution(p, math.pi / 2, target, **kw).matrix
    y2 = sectorial_fundamental_solution(p, 2 * math.pi / 5, target, **kw).matrix
    y3 = sectorial_fundamental_solution(p, math.pi / 2, target, seed_modulus=0.04, **kw).matrix
    scale = np.max(np.abs(y1))
    glue = float(np.max(np.abs(y1 - y2)) / scale)
    seeds = float(np.max(np.abs(y1 - y3)) / scale)
    ok = criterion(9, "sectorial gluing and two-seed consistency", max(glue, seeds) <= 1e-8,
                   f"directions {glue:.2e}, seeds {seeds:.2e}")  # fmt: skip
    assert ok
