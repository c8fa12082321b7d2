"""Phase-space displacement, geometric phase and closed-form gate fidelities.

All quantities are dimensionless with ``delta`` absorbed:

* ``f(t) = sum_j c_j exp(i (j delta + Delta) t)`` -- the detuned drive
* ``F(t) = delta * int_0^t f`` -- spin-dependent displacement
* ``G(t) = delta * int_0^t Im(f conj(F))`` -- accumulated geometric phase

``G`` is written with the sign for which the unitary generated by
``H/hbar = delta S (f a^dag + conj(f) a)`` is
``exp(-i S (F a^dag + conj(F) a)) exp(+i G S^2)``; with that sign an
entangling tone set reaches ``G(tau) = pi/8``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .tones import NumericError, ToneSet, constraint_residuals, displacement_weight

__all__ = [
    "ErrorBudget",
    "GateScenario",
    "IDEAL_PHASE",
    "Trajectory",
    "displacement_f_big",
    "displacement_f_big_quad",
    "drive_f",
    "effective_heating_factor",
    "fidelity_detuning",
    "fidelity_heating",
    "infidelity_detuning",
    "leading_order_budget",
    "loop_closure_ratio",
    "phase_g",
    "phase_g_closed",
    "spin_state_detuning",
    "trajectory",
]

IDEAL_PHASE = math.pi / 8

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-13, limit=400)


@dataclass(frozen=True)
class GateScenario:
    """Tone set plus error parameters for one gate.

    ``detuning_error`` is the symmetric shift Delta (rad/s) applied to every
    tone, ``heating_rate`` is in quanta/s and ``nbar`` is the initial
    thermal occupation.
    """

    tones: ToneSet
    detuning_error: float = 0.0
    heating_rate: float = 0.0
    nbar: float = 0.0

    def __post_init__(self):
        if not isinstance(self.tones, ToneSet):
            raise TypeError("tones must be a ToneSet")
        if not math.isfinite(self.detuning_error):
            raise ValueError("detuning_error must be finite")
        if not (math.isfinite(self.heating_rate) and self.heating_rate >= 0):
            raise ValueError(f"heating_rate must be >= 0, got {self.heating_rate!r}")
        if not (math.isfinite(self.nbar) and self.nbar >= 0):
            raise ValueError(f"nbar must be >= 0, got {self.nbar!r}")

    @property
    def delta(self) -> float:
        return self.tones.delta

    @property
    def gate_time(self) -> float:
        return self.tones.gate_time

    @property
    def fractional_detuning(self) -> float:
        return self.detuning_error / self.tones.delta


def _freqs(ts, delta_err):
    return ts.harmonics * ts.delta + delta_err


def drive_f(ts: ToneSet, delta_err: float, t):
    """Detuned drive ``sum_j c_j exp(i (j delta + Delta) t)``; vectorized in ``t``."""
    t = np.asarray(t, dtype=float)
    w = _freqs(ts, delta_err)
    out = np.exp(1j * np.multiply.outer(t, w)) @ ts.as_array()
    return complex(out) if out.ndim == 0 else out


def displacement_f_big(ts: ToneSet, delta_err: float, t):
    """Displacement ``F(t)`` from the per-tone antiderivative.

    A tone exactly on resonance (``j delta + Delta == 0``) contributes its
    removable limit ``c_j delta t``.
    """
    t = np.asarray(t, dtype=float)
    w = _freqs(ts, delta_err)
    resonant = np.abs(w) <= 1e-15 * ts.delta
    safe_w = np.where(resonant, 1.0, w)
    wt = np.multiply.outer(t, safe_w)
    terms = np.expm1(1j * wt) / (1j * safe_w)
    if resonant.any():
        terms[..., resonant] = t[..., None]
    out = ts.delta * (terms @ ts.as_array())
    return complex(out) if out.ndim == 0 else out


def _quad(fn, a, b, what):
    val, err, *rest = integrate.quad(fn, a, b, full_output=True, **_QUAD_OPTS)
    if len(rest) > 1:
        raise NumericError(f"quadrature of {what} on [{a}, {b}] did not converge (err={err:.3g}): {rest[1]}")
    return val


def displacement_f_big_quad(ts: ToneSet, delta_err: float, t: float) -> complex:
    """Quadrature of ``delta * int_0^t f``; independent check on the closed form."""
    if t == 0:
        return 0j
    re = _quad(lambda s: drive_f(ts, delta_err, s).real, 0.0, float(t), "Re F")
    im = _quad(lambda s: drive_f(ts, delta_err, s).imag, 0.0, float(t), "Im F")
    return ts.delta * complex(re, im)


def _g_integrand(ts, delta_err, s):
    f = drive_f(ts, delta_err, s)
    big_f = displacement_f_big(ts, delta_err, s)
    return (f * np.conj(big_f)).imag


def phase_g(ts: ToneSet, delta_err: float, t: float) -> float:
    """Accumulated phase ``G(t)`` by adaptive quadrature of its defining integral."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0.0
    return ts.delta * _quad(lambda s: _g_integrand(ts, delta_err, s), 0.0, float(t), "G")


def _sinc_int(w, t):
    # int_0^t cos(w s) ds
    return np.where(np.abs(w) * max(t, 1e-300) < 1e-12, t, np.sin(w * t) / np.where(w == 0, 1.0, w))


def phase_g_closed(ts: ToneSet, delta_err: float, t: float) -> float:
    """Closed form of ``G(t)``.

    ``G(t) = delta^2 sum_{jk} c_j c_k / w_k [S(w_j - w_k, t) - S(w_j, t)]``
    with ``w_j = j delta + Delta`` and ``S(w, t) = sin(w t)/w``.
    Not valid when a tone is exactly on resonance.
    """
    w = _freqs(ts, delta_err)
    if np.any(np.abs(w) <= 1e-12 * ts.delta):
        raise ValueError("closed form undefined for a resonant tone; use phase_g")
    c = ts.as_array()
    diff = _sinc_int(w[:, None] - w[None, :], t)
    single = _sinc_int(w, t)[:, None]
    mat = (c[:, None] * c[None, :] / w[None, :]) * (diff - single)
    return float(ts.delta**2 * mat.sum())


@dataclass
class Trajectory:
    """Sampled ``(t, F, G)`` over one gate."""

    t: np.ndarray
    big_f: np.ndarray
    g: np.ndarray
    scenario: GateScenario = field(repr=False)

    @property
    def samples(self):
        return list(zip(self.t.tolist(), self.big_f.tolist(), self.g.tolist()))

    def to_csv(self, path_or_file):
        """Write columns ``t_s, re_F, im_F, G``."""
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t_s", "re_F", "im_F", "G"])
            for t, f, g in zip(self.t, self.big_f, self.g):
                writer.writerow([repr(float(t)), repr(float(f.real)), repr(float(f.imag)), repr(float(g))])
        finally:
            if own:
                fh.close()


def trajectory(sc: GateScenario, n_samples: int = 201) -> Trajectory:
    """Sample ``F`` and ``G`` on a uniform grid over ``[0, tau]``."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    t = np.linspace(0.0, sc.gate_time, int(n_samples))
    big_f = np.asarray(displacement_f_big(sc.tones, sc.detuning_error, t), dtype=complex)
    big_f[0] = 0.0
    g = np.array([phase_g(sc.tones, sc.detuning_error, ti) for ti in t])
    return Trajectory(t=t, big_f=big_f, g=g, scenario=sc)


def loop_closure_ratio(ts_a: ToneSet, ts_b: ToneSet, frac_err: float) -> float:
    """``|F_a(tau)| / |F_b(tau)|`` at ``Delta = frac_err * delta``.

    Returns ``math.inf`` when ``|F_b(tau)| < 1e-300`` (loop b closed to
    machine precision).
    """
    if ts_a.delta != ts_b.delta:
        raise ValueError("both tone sets must share delta")
    if frac_err == 0 or not math.isfinite(frac_err):
        raise ValueError("frac_err must be finite and non-zero")
    if ts_a == ts_b:
        return 1.0
    delta_err = frac_err * ts_a.delta
    tau = ts_a.gate_time
    fa = abs(displacement_f_big(ts_a, delta_err, tau))
    fb = abs(displacement_f_big(ts_b, delta_err, tau))
    if fb < 1e-300:
        return math.inf
    return fa / fb


def effective_heating_factor(ts: ToneSet) -> float:
    """Ratio of effective to bare heating rate, ``8 (sum c^2/k^2 + (sum c/k)^2)``."""
    _, closure = constraint_residuals(ts)
    return 8.0 * (displacement_weight(ts) + closure**2)


def fidelity_heating(ts: ToneSet, heating_rate: float) -> float:
    """Bell-state fidelity of a closed-loop gate under heating alone."""
    if not (heating_rate >= 0):
        raise ValueError(f"heating_rate must be >= 0, got {heating_rate!r}")
    x = effective_heating_factor(ts) * heating_rate * ts.gate_time
    return (3.0 + 4.0 * math.exp(-x / 2.0) + math.exp(-2.0 * x)) / 8.0


def _endpoint(sc):
    tau = sc.gate_time
    big_f = displacement_f_big(sc.tones, sc.detuning_error, tau)
    g = phase_g(sc.tones, sc.detuning_error, tau)
    return big_f, g - IDEAL_PHASE


def infidelity_detuning(sc: GateScenario) -> float:
    """``1 - F`` for symmetric detuning, evaluated without cancellation."""
    big_f, g_err = _endpoint(sc)
    a = 4.0 * (sc.nbar + 0.5) * abs(big_f) ** 2
    half = -math.expm1(-a) + math.exp(-a) * 2.0 * math.sin(2.0 * g_err) ** 2
    return 0.5 * half - 0.125 * math.expm1(-4.0 * a)


def fidelity_detuning(sc: GateScenario) -> float:
    """Bell-state fidelity under symmetric detuning error (heating ignored).

    ``3/8 + (1/2) cos(4 G_D) exp(-4 (nbar + 1/2)|F|^2)
    + (1/8) exp(-16 (nbar + 1/2)|F|^2)`` at ``t = tau``, where
    ``G_D = G(tau) - pi/8``.
    """
    return 1.0 - infidelity_detuning(sc)


def spin_state_detuning(sc: GateScenario, basis: str = "sigma_x_sum") -> np.ndarray:
    """Reduced two-qubit state after the gate, starting from ``|00>``.

    Exact for ``heating_rate = 0``: in the eigenbasis of the coupling
    operator ``S`` the coherence between eigenvalues ``s, s'`` picks up the
    phase ``exp(i G (s^2 - s'^2))`` and the thermal overlap
    ``exp(-(s - s')^2 (nbar + 1/2) |F|^2)``.
    Heating is ignored.
    """
    from .lindblad import coupling_operator

    big_f, _ = _endpoint(sc)
    g = phase_g(sc.tones, sc.detuning_error, sc.gate_time)
    s_op = coupling_operator(basis)
    evals, evecs = np.linalg.eigh(s_op)
    psi0 = np.zeros(4, dtype=complex)
    psi0[0] = 1.0
    amp = evecs.conj().T @ psi0
    ds = evals[:, None] - evals[None, :]
    phase = np.exp(1j * g * (evals[:, None] ** 2 - evals[None, :] ** 2))
    overlap = np.exp(-(ds**2) * (sc.nbar + 0.5) * abs(big_f) ** 2)
    rho_eig = np.outer(amp, amp.conj()) * phase * overlap
    return evecs @ rho_eig @ evecs.conj().T


@dataclass(frozen=True)
class ErrorBudget:
    """Leading-order infidelities; ``in_regime`` is False outside the small-error regime."""

    e_heating: float
    e_detuning: float
    description: str
    in_regime: bool = True


def leading_order_budget(sc: GateScenario) -> ErrorBudget:
    """Leading-order heating and detuning infidelities.

    ``e_heating = pi * ndot_MT / delta``. The detuning term expands the
    closed-form fidelity to second order in ``x = Delta/delta``::

        16 pi^2 x^2 (W + C^2)^2 + 16 (nbar + 1/2) pi^2 x^2 C^2

    with ``W = sum c^2/k^2`` and ``C = sum c/k``. It reduces to
    ``(3/4 + nbar) pi^2 x^2`` for one tone and to ``16 pi^2 x^2 W^2`` when
    the loop closes (``C = 0``). The regime flag requires
    ``pi ndot_MT/delta <= 0.1`` and ``|x| <= 0.05``.
    """
    ts = sc.tones
    factor = effective_heating_factor(ts)
    e_h = math.pi * factor * sc.heating_rate / ts.delta
    x = sc.fractional_detuning
    w = displacement_weight(ts)
    _, closure = constraint_residuals(ts)
    if ts.n_tones >= 2 and abs(closure) <= 1e-12:
        closure = 0.0
    phase_part = 16.0 * math.pi**2 * x**2 * (w + closure**2) ** 2
    motion_part = 16.0 * (sc.nbar + 0.5) * math.pi**2 * x**2 * closure**2
    in_regime = e_h <= 0.1 and abs(x) <= 0.05
    return ErrorBudget(
        e_heating=e_h,
        e_detuning=phase_part + motion_part,
        description="first order in heating rate, second order in Delta/delta",
        in_regime=in_regime,
    )
