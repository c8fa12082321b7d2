"""Acceptance checks, one test per criterion.

Each test prints a single ``[acceptance N] PASS|FAIL`` line (visible even
under output capture) and then asserts. Run on its own with
``pytest tests/test_acceptance.py -v``.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from mtms.dynamics import (
    GateScenario,
    effective_heating_factor,
    fidelity_detuning,
    fidelity_heating,
    infidelity_detuning,
    loop_closure_ratio,
)
from mtms.figures import fast_single_tone, fig4_analytic, peak_drive
from mtms.lindblad import SimConfig, evolve, sweep, target_state
from mtms.presets import PAPER
from mtms.tomography import (
    SpamMap,
    apply_spam,
    bell_fidelity_estimate,
    bell_fidelity_stderr,
    mle_parity_fit,
    mle_populations,
    sample_counts,
    simulate_parity_dataset,
)
from mtms.tones import optimize_tones

DELTA = PAPER.delta
PI2 = math.pi**2


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def test_1_coefficients(report):
    start = time.perf_counter()
    ts = optimize_tones(2, DELTA)
    b = -1 / (12 * math.sqrt(3))
    exact = np.array([b / (1 - 2 / 3), 2 * b / (1 - 4 / 3)])
    err = float(np.max(np.abs(np.array(ts.coeffs) - exact)))
    shown = [math.trunc(c * 1000) / 1000 for c in ts.coeffs]
    elapsed = time.perf_counter() - start
    ok = shown == [-0.144, 0.288] and err <= 1e-9 and elapsed < 1
    report(1, ok, f"c = {ts.coeffs}, three-decimal display {shown}, |c - exact| = {err:.1e}, {elapsed:.3f} s")


def test_2_heating_factors(report):
    start = time.perf_counter()
    f = [effective_heating_factor(optimize_tones(n, DELTA)) for n in (1, 2, 3)]
    elapsed = time.perf_counter() - start
    rel3 = abs(1 / f[2] - 5.19) / 5.19
    ok = f[0] == 1.0 and abs(f[1] - 1 / 3) <= 1e-12 and rel3 <= 0.02 and elapsed < 1
    report(2, ok, f"factors 1, 1/{1 / f[1]:.12f}, 1/{1 / f[2]:.4f} (quoted 1/5.19, off by {rel3:.2%}), {elapsed:.3f} s")


def _fit_quadratic(ts, nbar):
    xs = np.logspace(-4, -2, 25)
    inf = np.array([infidelity_detuning(GateScenario(ts, x * DELTA, 0.0, nbar)) for x in xs])
    # infidelity = a x^2 + b x^3 + O(x^4); the cubic term is physical
    design = np.column_stack([xs**2, xs**3])
    coef, *_ = np.linalg.lstsq(design / xs[:, None] ** 2, inf / xs**2, rcond=None)
    return coef[0]


def test_3_detuning_coefficients(report):
    start = time.perf_counter()
    cases = [
        ("N=1 nbar=0", optimize_tones(1, DELTA), 0.0, 0.75 * PI2),
        ("N=1 nbar=2", optimize_tones(1, DELTA), 2.0, 2.75 * PI2),
        ("N=2", optimize_tones(2, DELTA), 0.0, PI2 / 36),
        ("N=3", optimize_tones(3, DELTA), 0.0, (39 - 12 * math.sqrt(3)) / 1936 * PI2),
    ]
    rels = {}
    for label, ts, nbar, expected in cases:
        rels[label] = abs(_fit_quadratic(ts, nbar) / expected - 1)
    elapsed = time.perf_counter() - start
    ok = max(rels.values()) <= 0.01 and elapsed < 10
    detail = ", ".join(f"{k} rel err {v:.1e}" for k, v in rels.items())
    report(3, ok, f"{detail}, {elapsed:.2f} s")


def test_4_loop_closure_ratios(report):
    start = time.perf_counter()
    t1, t2, t3 = (optimize_tones(n, DELTA) for n in (1, 2, 3))
    r2 = loop_closure_ratio(t1, t2, 0.05)
    r3 = loop_closure_ratio(t1, t3, 0.05)
    elapsed = time.perf_counter() - start
    ok2 = abs(r2 / 70 - 1) <= 0.1
    ok3 = abs(r3 / 360 - 1) <= 0.1
    report(4, ok2 and ok3 and elapsed < 1,
           f"N1/N2 = {r2:.2f} (target 70: {'ok' if ok2 else 'miss'}), "
           f"N1/N3 = {r3:.2f} (target 360: {'ok' if ok3 else 'miss'}), {elapsed:.3f} s")


@pytest.mark.slow
def test_5_lindblad_vs_closed_form(report):
    start = time.perf_counter()
    m = 40
    worst_h = worst_d = 0.0
    for n in (1, 2):
        ts = optimize_tones(n, DELTA)
        for x in (0.1, 0.3, 1.0):
            rate = x / (effective_heating_factor(ts) * ts.gate_time)
            _, rep = evolve(SimConfig(GateScenario(ts, 0.0, rate, 0.0), fock_truncation=m))
            worst_h = max(worst_h, abs(rep.fidelity - fidelity_heating(ts, rate)))
        for frac in (0.02, 0.05, 0.1):
            for nbar in (0.0, 2.0):
                sc = GateScenario(ts, frac * DELTA, 0.0, nbar)
                _, rep = evolve(SimConfig(sc, fock_truncation=m))
                worst_d = max(worst_d, abs(rep.fidelity - fidelity_detuning(sc)))
    elapsed = time.perf_counter() - start
    ok = worst_h <= 1e-3 and worst_d <= 1e-3 and elapsed < 300
    report(5, ok, f"max |evolve - heating formula| = {worst_h:.1e}, "
                  f"max |evolve - detuning formula| = {worst_d:.1e}, M = {m}, {elapsed:.1f} s")


def _monotone_down(values, tol=1e-9):
    return all(b <= a + tol for a, b in zip(values, values[1:]))


@pytest.mark.slow
def test_6_figure_shapes(report):
    start = time.perf_counter()
    t1, t2 = optimize_tones(1, DELTA), optimize_tones(2, DELTA)
    rates = np.linspace(0, 300, 7)
    heat = {n: [r.fidelity for r in sweep([SimConfig(GateScenario(ts, 0.0, r, PAPER.nbar_cold))
                                           for r in rates])]
            for n, ts in ((1, t1), (2, t2))}
    fracs = np.linspace(0, 0.2, 5)
    det = {}
    for n, ts in ((1, t1), (2, t2)):
        det[n] = {
            sign: [r.fidelity for r in sweep([SimConfig(GateScenario(ts, sign * x * DELTA, 0.0, PAPER.nbar_cold))
                                              for x in fracs])]
            for sign in (1, -1)
        }
    checks = {
        "heating monotone": _monotone_down(heat[1]) and _monotone_down(heat[2]),
        "heating two >= one": all(b >= a for a, b in zip(heat[1], heat[2])),
        "detuning monotone": all(_monotone_down(det[n][s]) for n in (1, 2) for s in (1, -1)),
        "detuning two >= one": all(b >= a for s in (1, -1) for a, b in zip(det[1][s], det[2][s])),
    }
    # dashed line: one tone at the two-tone peak Rabi frequency
    fast = fast_single_tone(t2)
    speedup = fast.delta / DELTA
    dashed = [(fidelity_heating(fast, r), fidelity_heating(t2, r)) for r in rates[1:]]
    checks["two-tone beats fast single tone"] = all(two > one for one, two in dashed)
    # hot ions with a detuning error
    _, hot = fig4_analytic(0.03, nbar=PAPER.nbar_doppler)
    checks["nbar=53 ordering"] = hot["two"]["fidelity"] > hot["single"]["fidelity"]
    elapsed = time.perf_counter() - start
    failed = [k for k, v in checks.items() if not v]
    report(6, not failed,
           f"{len(checks) - len(failed)}/{len(checks)} shape checks hold"
           f"{' (failed: ' + ', '.join(failed) + ')' if failed else ''}; fast single tone runs at "
           f"{speedup:.4f} delta (peak |f| {peak_drive(t2):.4f}); nbar=53, Delta/delta=0.03: "
           f"F1 = {hot['single']['fidelity']:.3f}, F2 = {hot['two']['fidelity']:.4f}; {elapsed:.1f} s")


def test_7_nbar_independence(report):
    t1, t2 = optimize_tones(1, DELTA), optimize_tones(2, DELTA)
    x = 0.005
    a = infidelity_detuning(GateScenario(t2, x * DELTA, 0.0, 0.0))
    b = infidelity_detuning(GateScenario(t2, x * DELTA, 0.0, 53.0))
    rel2 = abs(b - a) / a
    worst1 = 0.0
    base = infidelity_detuning(GateScenario(t1, x * DELTA, 0.0, 0.0)) / 0.75
    for nbar in (1.0, 10.0, 53.0):
        inf = infidelity_detuning(GateScenario(t1, x * DELTA, 0.0, nbar))
        worst1 = max(worst1, abs(inf / ((0.75 + nbar) * base) - 1))
    ok = rel2 <= 0.05 and worst1 <= 0.02
    report(7, ok, f"N=2 relative change 0 -> 53: {rel2:.2e}; N=1 worst deviation from (3/4 + nbar) scaling {worst1:.2e}")


def test_8_tomography_coverage(report):
    start = time.perf_counter()
    spam = SpamMap.from_combined_fidelity(0.87)
    ts = optimize_tones(2, DELTA)
    psi = target_state(SimConfig(GateScenario(ts), fock_truncation=2))
    rho = np.outer(psi, psi.conj())
    p_true = np.clip(np.real([rho[0, 0], rho[1, 1] + rho[2, 2], rho[3, 3]]), 0, None)
    p_true /= p_true.sum()
    bell_phase = float(np.angle(psi[3] / psi[0]))
    phis = np.linspace(0, math.pi, 12)
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        ds = simulate_parity_dataset(rho, phis, 500, spam, rng)
        pops = mle_populations(sample_counts(apply_spam(p_true, spam), 10**4, rng), spam)
        fit = mle_parity_fit(ds)
        # the scan of exp(i b)|11> coherence has offset b
        dphi = fit.phase - bell_phase
        est = bell_fidelity_estimate(min(max(pops.pop_even, 0.0), 1.0), fit.amplitude, dphi)
        err = bell_fidelity_stderr(pops.pop_even_stderr, fit.amplitude_stderr, dphi)
        hits += abs(est - 1.0) <= 3 * err
    elapsed = time.perf_counter() - start
    report(8, hits >= 95 and elapsed < 120, f"3 sigma coverage {hits}/100, {elapsed:.1f} s")


@pytest.mark.slow
def test_9_property_suites(report):
    here = Path(__file__).parent
    suites = [str(here / f"test_{m}.py") for m in ("tones", "dynamics", "lindblad", "tomography", "cli")]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *suites],
                          capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    report(9, proc.returncode == 0, f"module suites: {summary}")
