"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line (shown in the terminal summary)
before asserting, so a red criterion still reports its measured numbers.
"""
import math
import time

import numpy as np
import pytest

from fraceig.analysis import (
    Shape,
    average_threshold,
    classify_curve,
    critical_d,
    monotone_regime_bounds,
)
from fraceig.basis import BoxDomain, enumerate_modes
from fraceig.cli import preset_weight
from fraceig.design import BangBangParams, optimize_weight
from fraceig.dynamics import SimConfig, Verdict, simulate, steady_state_residual
from fraceig.environment import Ball, Box, GalerkinSystem, Weight, analyze_weight, assemble_weight_matrix
from fraceig.pencil import lambda1_limit_s0, solve

from conftest import ACCEPTANCE_LINES, SQUARE, preset_sweep, preset_system
from oracles import hand_pencil, principal_pair

pytestmark = pytest.mark.slow


def record(n, ok, text, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}  [{elapsed:.1f} s / {budget:g} s]"
    ACCEPTANCE_LINES[n] = line
    print(line)
    return ok


def random_weight(rng, domain):
    shapes = []
    for _ in range(rng.integers(1, 4)):
        c = rng.uniform(0, 1, domain.dim) * np.asarray(domain.lengths)
        r = rng.uniform(0.05, 0.3) * min(domain.lengths)
        value = rng.uniform(0.5, 8.0)
        if rng.random() < 0.5:
            shapes.append((Ball(tuple(c), r), value))
        else:
            lo = np.maximum(c - r, 0)
            hi = np.minimum(c + r, domain.lengths)
            shapes.append((Box(tuple(lo), tuple(hi)), value))
    return Weight(-rng.uniform(0.5, 2.0), tuple(shapes))


def test_criterion_01_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    cases = [(BoxDomain((1.0,)), 63), (SQUARE, 7)]
    worst, checked = 0.0, 0
    while checked < 20:
        domain, cutoff = cases[checked % 2]
        w = random_weight(rng, domain)
        if not analyze_weight(w, domain).in_class_M:
            continue
        sys = assemble_weight_matrix(w, enumerate_modes(domain, cutoff))
        assert sys.size <= 64
        d, s = rng.uniform(0.1, 10.0), rng.uniform(0.05, 1.0)
        sl = solve(sys, d, s, vectors=False)
        lam1, lam_m1, _ = principal_pair(sys.weight_matrix, sys.mu, d, s)
        worst = max(worst, abs(sl.lambda1 / lam1 - 1), abs(sl.lambda_minus1 / lam_m1 - 1))
        checked += 1
    ok = record(1, worst < 1e-10, f"20 random weights, max relative gap {worst:.2e} (< 1e-10)",
                time.perf_counter() - t0, 10)
    assert ok


def test_criterion_02_scaling_law():
    t0 = time.perf_counter()
    sys = preset_system("m1", 16)
    worst = 0.0
    for s in np.linspace(0.1, 1.0, 10):
        base = solve(sys, 1.0, s, vectors=False).lambda1
        for d in (0.1, 1.0, 10.0):
            worst = max(worst, abs(solve(sys, d, s, vectors=False).lambda1 / (d**s * base) - 1))
    ok = record(2, worst < 1e-12, f"lambda1(d,s) = d^s lambda1(1,s), max relative gap {worst:.2e} (< 1e-12)",
                time.perf_counter() - t0, 5)
    assert ok


def test_criterion_03_bounds():
    t0 = time.perf_counter()
    violations = []
    for name in ("m1", "m2"):
        sys = preset_system(name, 32)
        rep = sys.report
        sw = preset_sweep(name, 32)
        for d in (0.2, 1.0, 5.0):
            lam = sw.at_motility(d).lambda1
            upper = (d * sys.mu1) ** (sw.s_grid - 1) * lam[-1]
            lower = (d * sys.mu1) ** sw.s_grid * abs(rep.integral) / (rep.sup_m * abs(rep.integral) + rep.l2_norm_sq)
            bad = np.sum(lam > upper * (1 + 1e-12)) + np.sum(lam < lower)
            if bad:
                violations.append(f"{name} d={d}: {bad}")
    ok = record(3, not violations, f"upper and lower bounds at 100 s x 3 d x 2 weights, violations: {violations or 'none'}",
                time.perf_counter() - t0, 120)
    assert ok


def test_criterion_04_monotone_regimes():
    t0 = time.perf_counter()
    c1 = preset_sweep("m1", 32).classification
    c2 = preset_sweep("m2", 32).classification
    mr = monotone_regime_bounds(preset_system("m1", 32), a=0.2)
    ok = c1 is Shape.INCREASING and c2 is Shape.INCREASING and mr.resolved and mr.d_lower > 0
    ok = record(4, ok, f"d=1: m1 {c1.value}, m2 {c2.value}; m1 Decreasing on [0.2,1] for d <= {mr.d_lower:.6g}",
                time.perf_counter() - t0, 120)
    assert ok


def test_criterion_05_figure1():
    t0 = time.perf_counter()
    a1 = preset_sweep("m1", 32).abstract_condition()
    a2 = preset_sweep("m2", 32).abstract_condition()
    ok = record(5, a1.all() and not a2.all(),
                f"-lambda_-1 > lambda_1: m1 at {a1.sum()}/100 s, m2 at {a2.sum()}/100 s",
                time.perf_counter() - t0, 180)
    assert ok


def test_criterion_06_figure2():
    sw1, sw2 = preset_sweep("m1", 32), preset_sweep("m2", 32)
    t0 = time.perf_counter()
    allowed = {Shape.INCREASING, Shape.DECREASING, Shape.SINGLE_INTERIOR_MAX}
    m1 = {d: sw1.at_motility(d).classification for d in (0.2, 0.4, 0.6, 0.8)}
    m2 = {d: sw2.at_motility(d).classification for d in (0.16, 0.18, 0.20, 0.22, 0.24)}
    ok1 = all(c in allowed for c in m1.values())
    ok2 = any(c is Shape.HAS_INTERIOR_MIN for c in m2.values())
    fmt = lambda m: ", ".join(f"{d:g}:{c.value}" for d, c in m.items())
    ok = record(6, ok1 and ok2, f"m1 [{fmt(m1)}] ({'ok' if ok1 else 'bad'}); "
                f"m2 [{fmt(m2)}] (HasInteriorMin {'found' if ok2 else 'not found'})",
                time.perf_counter() - t0, 180)
    assert ok


def test_criterion_07_truncation_convergence():
    t0 = time.perf_counter()
    lam16 = solve(preset_system("m1", 16), 1.0, 0.5, vectors=False).lambda1
    lam32 = solve(preset_system("m1", 32), 1.0, 0.5, vectors=False).lambda1
    rel = abs(lam32 / lam16 - 1)
    ok = record(7, rel < 1e-4, f"lambda1(m1,1,0.5): {lam16:.10g} (K=16) -> {lam32:.10g} (K=32), "
                f"relative change {rel:.2e} (< 1e-4)", time.perf_counter() - t0, 60)
    assert ok


def test_criterion_08_bang_bang_optimizer():
    t0 = time.perf_counter()
    basis = enumerate_modes(SQUARE, 16)
    m0 = preset_system("m1", 16).report.average
    params = BangBangParams.for_domain(SQUARE, 8.0, 1.0, m0)
    trace = optimize_weight(SQUARE, params, basis)
    ref = solve(preset_system("m1", 16), 1.0, 1.0, vectors=False).lambda1
    final = trace.lambdas[-1]
    two_valued = set(np.unique(trace.final_weight.samples.values)) == {8.0, -1.0}
    mass_rel = abs(trace.final_D_mass / (math.pi / 4) - 1)
    parts = {
        "nonincreasing": trace.nonincreasing(1e-10),
        "two-valued": two_valued,
        "D mass": mass_rel < 1e-3,
        "final <= m1": final <= ref,
    }
    ok = record(8, all(parts.values()),
                f"{len(trace.iterates)} iterates, converged={trace.converged}; D mass rel err {mass_rel:.1e}; "
                f"final lambda1 {final:.10g} vs lambda1(m1,1,1) {ref:.10g}; "
                + ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in parts.items()),
                time.perf_counter() - t0, 300)
    assert ok


def test_criterion_09_survival_dichotomy():
    t0 = time.perf_counter()
    sys = preset_system("m1", 16)
    notes, ok = [], True
    for d, s in ((1.0, 1.0), (5.0, 1.0), (10.0, 0.5)):
        lam = solve(sys, d, s, vectors=False).lambda1
        tr = simulate(sys, SimConfig(d, s, 0.05, 200.0, sample_every=10))
        res = steady_state_residual(tr.final_state, sys, d, s, relative=True)
        ok &= lam < 0.9 and tr.verdict is Verdict.SURVIVED and res < 1e-4
        notes.append(f"(d={d:g},s={s:g}) lambda1={lam:.3f} {tr.verdict.value} residual {res:.1e}")
    # halve the favorable value until the solver puts lambda1 above 1.1
    m_bar = 8.0
    while True:
        m_bar /= 2
        weak = Weight(-1.0, ((Ball((0.0, 0.0), 1.0), m_bar),))
        wsys = assemble_weight_matrix(weak, enumerate_modes(SQUARE, 16))
        lam = solve(wsys, 1.0, 1.0, vectors=False).lambda1
        if lam > 1.1:
            break
    tr = simulate(wsys, SimConfig(1.0, 1.0, 0.05, 100.0, sample_every=10))
    ok &= tr.verdict is Verdict.EXTINCT
    notes.append(f"m_bar={m_bar:g} lambda1={lam:.3f} {tr.verdict.value}")
    ok = record(9, ok, "; ".join(notes), time.perf_counter() - t0, 300)
    assert ok


def test_criterion_10_constants():
    t0 = time.perf_counter()
    A = average_threshold(1.0, 1.0, 1.0, 2, 1.0)
    hand = GalerkinSystem.from_matrices(*hand_pencil())
    cm = critical_d(hand)
    lhs = solve(hand, cm.d_star, 1.0, vectors=False, require_minus1=False).lambda1
    rhs = lambda1_limit_s0(hand)
    gap = abs(lhs / rhs - 1)
    ok = record(10, abs(A - 0.3081) < 1e-3 and gap < 1e-10,
                f"A(1,1,1,N=2) = {A:.6f}; hand pencil d* = {cm.d_star:.6g}, "
                f"lambda1(d*,1) = {lhs:.12g} vs lambda1(d*,0+) = {rhs:.12g} (gap {gap:.1e})",
                time.perf_counter() - t0, 1)
    assert ok
