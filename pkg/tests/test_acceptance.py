"""The ten acceptance criteria, each at its stated tolerance and runtime budget.

Every test records a one-line PASS/FAIL verdict, echoed to stdout and
repeated in the terminal summary.
"""
import itertools
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from dynasep.duality import (
    DualityObservable,
    half_closed_form,
    step_closed_form,
    sweep_cluster_telescoping,
    sweep_duality,
)
from dynasep.initdata import (
    detailed_balance_check,
    eigencheck_hermite,
    half_expectation_Z,
    keyit_check,
    marginal_propagation_residuals,
    orthogonality_check,
    printed_zeta_moment,
    stationarity_test,
    stationary_measure,
    step_heights,
    zeta_moment_from_measure,
)
from dynasep.lattice import ParticleConfig
from dynasep.moments import (
    ContourSpec,
    check_boundary_condition,
    check_free_evolution,
    contour_E_step,
    evolution_residual,
    mc_duality_estimate,
)
from dynasep.qspecial import ModelParams, sumid_lhs

EXACT_GRID = [ModelParams.exact("1/2", "1/3"), ModelParams.exact("2/3", "2"), ModelParams.exact("1/4", "5")]
FLOAT_GRID = [ModelParams(q, a) for q in (0.3, 0.5, 0.7) for a in (0.5, 1.0, 3.0)]


@pytest.fixture
def verdict():
    def record(k, ok, detail):
        line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)
        assert ok, line
    return record


def test_criterion_01_duality_identity(verdict):
    start = time.perf_counter()
    cases = nonzero = 0
    for p in EXACT_GRID:
        for n in (1, 2, 3):
            for length in range(3, 10):
                for _, _, res in sweep_duality(n, length, p):
                    cases += 1
                    nonzero += res != 0
    elapsed = time.perf_counter() - start
    verdict(1, nonzero == 0 and elapsed < 60,
            f"duality residual exactly 0 in {cases} exact cases ({nonzero} nonzero), {elapsed:.1f}s")


def test_criterion_02_cluster_telescoping(verdict):
    start = time.perf_counter()
    exact_bad = checked = 0
    for p in EXACT_GRID:
        for _, res in sweep_cluster_telescoping(p, max_width=4):
            if res is not None:
                checked += 1
                exact_bad += res.residual != 0
    worst = 0.0
    for p in (ModelParams(0.5, 1 / 3), ModelParams(0.3, 3.0), ModelParams(0.7, 0.5)):
        for _, res in sweep_cluster_telescoping(p, max_width=4):
            if res is not None:
                worst = max(worst, abs(res.residual), abs(res.discrepancy))
    elapsed = time.perf_counter() - start
    verdict(2, exact_bad == 0 and worst < 1e-12,
            f"{checked} exact patterns with 0 nonzero ({exact_bad}), float max {worst:.1e} < 1e-12, {elapsed:.1f}s")


def test_criterion_03_step_evaluation(verdict):
    bad = cases = 0
    for p in EXACT_GRID:
        for n in range(1, 5):
            obs = DualityObservable(n, p, "step-normalized")
            for xs in itertools.combinations(range(3, -7, -1), n):
                w = step_heights(min(min(xs), 0) - 1, max(max(xs), 0) + 1)
                cases += 1
                bad += obs(ParticleConfig(xs), w) != step_closed_form(xs, p.q)
    verdict(3, bad == 0, f"step data: Z/(-1/alpha;q)_n equals the product exactly in {cases} cases ({bad} mismatches)")


def test_criterion_04_half_stationary(verdict):
    worst = spread = 0.0
    for q in (0.3, 0.5, 0.7):
        for n in (1, 2, 3):
            for xs in itertools.combinations(range(3, -7, -1), n):
                x = ParticleConfig(xs)
                vals = [a ** n / q ** (n * (n - 1) / 2) * half_expectation_Z(x, ModelParams(q, a))
                        for a in (0.3, 1.0, 3.0)]
                worst = max(worst, *(abs(v - half_closed_form(xs, q)) for v in vals))
                spread = max(spread, max(vals) - min(vals))
    verdict(4, worst < 1e-10 and spread < 1e-10,
            f"half-stationary closed form max error {worst:.1e}, alpha spread {spread:.1e} (< 1e-10)")


def test_criterion_05_eigenrelation(verdict):
    eig = max(eigencheck_hermite(n, range(-20, 21), p) for p in FLOAT_GRID for n in range(9))
    key = max(keyit_check(ell, lag, range(-6, 7), p) for p in FLOAT_GRID for ell in range(6) for lag in range(7))
    verdict(5, eig < 1e-9 and key < 1e-9, f"eigenrelation {eig:.1e}, iteration identity {key:.1e} (< 1e-9)")


def test_criterion_06_summation_identity(verdict):
    worst = max(abs(sumid_lhs(n, p) - 1) for p in FLOAT_GRID for n in range(13))
    from fractions import Fraction
    roots = ModelParams.from_roots(Fraction(1, 2), Fraction(2, 3))
    exact_ok = all(sumid_lhs(n, roots) == 1 for n in range(7))
    verdict(6, worst < 1e-9 and exact_ok,
            f"summation identity max |LHS-1| {worst:.1e} (< 1e-9), exact = 1 for n <= 6: {exact_ok}")


def test_criterion_07_stationary_measure(verdict):
    total = marg = ortho = zeta = 0.0
    ratios = []
    for p in FLOAT_GRID:
        q = p.q
        total = max(total, abs(stationary_measure(p).total - 1))
        marg = max(marg, *marginal_propagation_residuals(p))
        ortho = max(ortho, *(abs(orthogonality_check(a, b, p)) for a in range(6) for b in range(6)))
        target = (1.0, 0.0, 1 / q - 1)
        zeta = max(zeta, *(abs(zeta_moment_from_measure(k, p) - target[k]) for k in range(3)))
        ratios.append(printed_zeta_moment(2, q) / zeta_moment_from_measure(2, p) / (1 / q - 1))
    balance_ok = all(detailed_balance_check(s, p) == 0 for p in EXACT_GRID for s in range(-6, 7))
    ok = total < 1e-10 and marg < 1e-12 and ortho < 1e-8 and zeta < 1e-8 and balance_ok
    verdict(7, ok, f"sum {total:.1e}, marginals {marg:.1e}, detailed balance exact {balance_ok}, "
                   f"orthogonality {ortho:.1e}, zeta {zeta:.1e}; printed/recursion ratio at k=2 is "
                   f"(1/q-1) x {np.mean(ratios):.12f}")


def test_criterion_08_dynamic_stationarity(verdict):
    start = time.perf_counter()
    worst = 0.0
    for alpha in (1.0, 0.7):
        rep = stationarity_test(ModelParams(0.5, alpha), 5.0, 100_000, 0, length=21)
        worst = max(worst, rep.max_abs_z)
    elapsed = time.perf_counter() - start
    verdict(8, worst <= 3 and elapsed < 120,
            f"centre height after t=5 within {worst:.2f} sigma of m_n (<= 3), 1e5 trials per alpha, {elapsed:.1f}s")


def test_criterion_09_contour_formulas(verdict):
    start = time.perf_counter()
    q = 0.5
    spec = ContourSpec.default(q)
    initial = max(abs(contour_E_step(xs, 0.0, q) - step_closed_form(xs, q))
                  for n in (1, 2, 3) for xs in itertools.combinations(range(2, -6, -1), n))
    stability = 0.0
    for xs, t in itertools.product([(-2,), (0, -3), (1, -1, -2)], (0.0, 0.5, 1.0)):
        base = contour_E_step(xs, t, q, spec)
        stability = max(stability,
                        abs(base - contour_E_step(xs, t, q, ContourSpec(spec.radius, 2 * spec.nodes_per_contour))),
                        abs(base - contour_E_step(xs, t, q, ContourSpec(spec.radius / 2))))
    nodes = spec.nodes()[0][::17]
    free = max(check_free_evolution(x, t, q, y) for x in range(-4, 4) for t in (0.0, 0.7, 1.5) for y in nodes)
    bc = max(check_boundary_condition(xs, t, q, spec, i=i)
             for xs, i in [((0, -1), 0), ((3, 2), 0), ((2, 1, -1), 0), ((2, 0, -1), 1)] for t in (0.0, 1.0))
    ode = max(evolution_residual(xs, 1.0, q, spec, dt=1e-3) for xs in [(-2,), (0, -1), (1, -3)])
    elapsed = time.perf_counter() - start
    ok = initial < 1e-8 and stability < 1e-10 and free < 1e-10 and bc < 1e-9 and ode < 1e-5 and elapsed < 60
    verdict(9, ok, f"t=0 {initial:.1e}, doubling/halving {stability:.1e}, free {free:.1e}, "
                   f"boundary {bc:.1e}, ODE {ode:.1e}, {elapsed:.1f}s")


def test_criterion_10_duality_in_time(verdict):
    start = time.perf_counter()
    q = 0.5
    details = []
    ok = True
    for x, t in [((-2,), 1.0), ((-1, -3), 0.5)]:
        target = contour_E_step(x, t, q)
        reps = {a: mc_duality_estimate(x, t, ModelParams(q, a), "step", 100_000, seed)
                for seed, a in enumerate((1.0, 0.5, 2.0))}
        z = abs(reps[1.0].estimate - target) / reps[1.0].stderr
        lo, hi = reps[0.5], reps[2.0]
        z_alpha = abs(lo.estimate - hi.estimate) / np.hypot(lo.stderr, hi.stderr)
        ok &= z <= 3 and z_alpha <= 3
        details.append(f"x={x}: {z:.2f} stderr from contour, alpha 0.5 vs 2 at {z_alpha:.2f} sigma")
    elapsed = time.perf_counter() - start
    verdict(10, ok and elapsed < 300, "; ".join(details) + f", {elapsed:.1f}s")
