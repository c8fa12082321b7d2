"""Data behind the trajectory, heating, detuning and hot-ion parity plots.

Each function returns plain rows (lists of dicts) so callers can write CSV
or plot directly. Nothing here renders images.
"""

from __future__ import annotations

import math

import numpy as np

from .dynamics import (
    GateScenario,
    drive_f,
    fidelity_detuning,
    fidelity_heating,
    loop_closure_ratio,
    spin_state_detuning,
    trajectory,
)
from .lindblad import SimConfig, sweep, target_state
from .presets import PAPER
from .tomography import parity_scan_probabilities
from .tones import ToneSet, optimize_tones, single_tone

FIGURES = ("fig1b", "fig1c", "fig2", "fig3", "fig4-analytic")


def peak_drive(ts: ToneSet, n_grid: int = 4001) -> float:
    """Peak of ``|f(t)|`` over one gate (relative Rabi frequency)."""
    t = np.linspace(0.0, ts.gate_time, n_grid)
    return float(np.max(np.abs(drive_f(ts, 0.0, t))))


def fast_single_tone(ts: ToneSet) -> ToneSet:
    """Single-tone gate run at the same peak Rabi frequency as ``ts``.

    For one tone ``delta = 2 eta Omega``, so raising the Rabi frequency by
    ``peak/0.25`` raises delta (and shortens the gate) by the same factor.
    """
    return single_tone(ts.delta * peak_drive(ts) / 0.25)


def trajectory_rows(n_tones, frac_detuning=0.0, n_samples=401, delta=PAPER.delta):
    ts = optimize_tones(n_tones, delta)
    tr = trajectory(GateScenario(ts, frac_detuning * delta), n_samples)
    return tr


def fig1(frac_detuning=0.0, tones=(1, 2, 3), n_samples=401, delta=PAPER.delta):
    """Trajectories per tone count plus endpoint closure ratios against one tone."""
    trajs = {n: trajectory_rows(n, frac_detuning, n_samples, delta) for n in tones}
    base = optimize_tones(1, delta)
    summary = {
        "frac_detuning": frac_detuning,
        "endpoint_abs_F": {str(n): float(abs(trajs[n].big_f[-1])) for n in tones},
    }
    if frac_detuning != 0.0:
        summary["closure_ratio_vs_single"] = {
            str(n): loop_closure_ratio(base, optimize_tones(n, delta), frac_detuning)
            for n in tones
            if n != 1
        }
    return trajs, summary


def _lindblad_curve(ts, scenarios, fock_truncation, workers, progress):
    cfgs = [SimConfig(sc, fock_truncation=fock_truncation) for sc in scenarios]
    return sweep(cfgs, workers=workers, progress=progress)


def fig2(heating_rates=None, nbar=PAPER.nbar_cold, delta=PAPER.delta, fock_truncation=None,
         workers=1, progress=None):
    """Fidelity against heating rate for one and two tones (master equation)
    plus the closed-form curve of a faster single-tone gate at the two-tone
    peak Rabi frequency."""
    if heating_rates is None:
        heating_rates = np.linspace(0.0, 300.0, 7)
    out = {}
    for label, n in (("single", 1), ("two", 2)):
        ts = optimize_tones(n, delta)
        scen = [GateScenario(ts, 0.0, float(r), nbar) for r in heating_rates]
        rows = _lindblad_curve(ts, scen, fock_truncation, workers, progress)
        out[label] = [
            {
                "heating_rate": float(r),
                "fidelity": row.fidelity,
                "fidelity_closed_form": fidelity_heating(ts, float(r)),
                "truncation_converged": row.truncation_converged,
                "error": row.error,
            }
            for r, row in zip(heating_rates, rows)
        ]
    fast = fast_single_tone(optimize_tones(2, delta))
    out["fast_single"] = [
        {"heating_rate": float(r), "fidelity_closed_form": fidelity_heating(fast, float(r)),
         "delta_rad_per_s": fast.delta}
        for r in heating_rates
    ]
    return out


def fig3(frac_detunings=None, nbar=PAPER.nbar_cold, delta=PAPER.delta, fock_truncation=None,
         workers=1, progress=None):
    """Fidelity against symmetric detuning error for one and two tones."""
    if frac_detunings is None:
        frac_detunings = np.linspace(-0.2, 0.2, 9)
    out = {}
    for label, n in (("single", 1), ("two", 2)):
        ts = optimize_tones(n, delta)
        scen = [GateScenario(ts, float(x) * delta, 0.0, nbar) for x in frac_detunings]
        rows = _lindblad_curve(ts, scen, fock_truncation, workers, progress)
        out[label] = [
            {
                "frac_detuning": float(x),
                "fidelity": row.fidelity,
                "fidelity_closed_form": fidelity_detuning(sc),
                "truncation_converged": row.truncation_converged,
                "error": row.error,
            }
            for x, sc, row in zip(frac_detunings, scen, rows)
        ]
    return out


def fig4_analytic(frac_detuning=0.03, nbar=PAPER.nbar_doppler, delta=PAPER.delta, n_phases=73):
    """Closed-form parity curves for hot ions (no heating during the gate)."""
    phis = np.linspace(0.0, math.pi, n_phases)
    curves, summary = {}, {"frac_detuning": frac_detuning, "nbar": nbar}
    for label, n in (("single", 1), ("two", 2)):
        ts = optimize_tones(n, delta)
        sc = GateScenario(ts, frac_detuning * delta, 0.0, nbar)
        rho = spin_state_detuning(sc)
        probs = parity_scan_probabilities(rho, phis)
        parity = probs[:, 0] + probs[:, 2] - probs[:, 1]
        curves[label] = [{"phi_rad": float(p), "parity": float(v)} for p, v in zip(phis, parity)]
        psi = target_state(SimConfig(sc, fock_truncation=2))
        summary[label] = {
            "fidelity": fidelity_detuning(sc),
            "fidelity_from_state": float(np.real(psi.conj() @ rho @ psi)),
            "parity_contrast": float((parity.max() - parity.min()) / 2),
        }
    return curves, summary
