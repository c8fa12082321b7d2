"""Master-equation simulation of the gate on (two qubits) x (truncated Fock space).

The joint space is ordered ``kron(spin, motion)`` with spin index ``0..3``
for ``|00>, |01>, |10>, |11>`` (``|0>`` is the lower state of each qubit)
and motion index ``0..M-1``.

Heating is modelled by the pair of dissipators ``D[a]`` and ``D[a^dag]``,
each at rate ``ndot``. Integration runs in the dimensionless time
``s = delta * t`` on ``[0, 2 pi]``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import sparse
from scipy.integrate import DOP853

from .dynamics import GateScenario, displacement_f_big, phase_g_closed
from .tones import NumericError

__all__ = [
    "BASES",
    "FidelityReport",
    "JointState",
    "SimConfig",
    "SweepRow",
    "TruncationError",
    "asymmetric_detuning_evolve",
    "bell_components",
    "coupling_operator",
    "default_truncation",
    "evolve",
    "hamiltonian_at",
    "ladder",
    "sweep",
    "target_state",
    "thermal_state",
]

BASES = ("sigma_x_sum", "sigma_y_difference")

LEAK_THRESHOLD = 1e-6

_I2 = np.eye(2, dtype=complex)
_SP = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|, raises the lower state


class TruncationError(ValueError):
    """The Fock truncation cannot hold the requested motional state."""


def _raising_parts(basis):
    """Coefficients ``u_k`` with ``S = sum_k (u_k sigma+_k + h.c.)``."""
    if basis == "sigma_x_sum":
        return (1.0, 1.0)
    if basis == "sigma_y_difference":
        # sigma_y = -i sigma+ + i sigma-
        return (-1j, 1j)
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


def _spin_raising(basis):
    u1, u2 = _raising_parts(basis)
    return u1 * np.kron(_SP, _I2) + u2 * np.kron(_I2, _SP)


def coupling_operator(basis: str = "sigma_x_sum") -> np.ndarray:
    """Two-qubit coupling operator ``S_x = sx1 + sx2`` or ``S_y = sy1 - sy2``."""
    sp = _spin_raising(basis)
    return sp + sp.conj().T


def ladder(m: int) -> np.ndarray:
    """Truncated annihilation operator on ``m`` Fock levels."""
    return np.diag(np.sqrt(np.arange(1, m, dtype=float)), k=1).astype(complex)


def thermal_state(nbar: float, m: int) -> np.ndarray:
    """Thermal motional state truncated to ``m`` levels and renormalized.

    Raises :class:`TruncationError` if the truncation keeps less than
    99.9% of the untruncated weight.
    """
    if m < 2:
        raise ValueError("truncation must be >= 2")
    if not (nbar >= 0 and math.isfinite(nbar)):
        raise ValueError(f"nbar must be >= 0, got {nbar!r}")
    if nbar == 0:
        p = np.zeros(m)
        p[0] = 1.0
        return np.diag(p).astype(complex)
    r = nbar / (nbar + 1.0)
    kept = -math.expm1(m * math.log(r))
    if kept < 0.999:
        raise TruncationError(
            f"M={m} keeps only {kept:.4%} of a thermal state with nbar={nbar}"
        )
    p = r ** np.arange(m)
    return np.diag(p / p.sum()).astype(complex)


def _thermal_levels(nbar, weight):
    # smallest M with kept weight >= 1 - weight
    if nbar == 0:
        return 2
    r = nbar / (nbar + 1.0)
    return int(math.ceil(math.log(weight) / math.log(r)))


def default_truncation(sc: GateScenario) -> int:
    """Default Fock truncation for a scenario.

    ``ceil(n + 10 sqrt(n + 1) + 20 + 16 max|F|^2)`` where ``n`` is the
    occupation at the end of the gate (initial plus heating), raised when
    needed so the initial thermal state keeps 99.9% of its weight.
    """
    n_end = sc.nbar + sc.heating_rate * sc.gate_time
    t = np.linspace(0.0, sc.gate_time, 401)
    fmax2 = float(np.max(np.abs(displacement_f_big(sc.tones, sc.detuning_error, t)) ** 2))
    m = math.ceil(n_end + 10.0 * math.sqrt(n_end + 1.0) + 20.0 + 16.0 * fmax2)
    return max(m, _thermal_levels(sc.nbar, 1e-3) + 1)


@dataclass(frozen=True)
class SimConfig:
    """One master-equation run.

    ``fock_truncation=None`` picks :func:`default_truncation`.
    ``detuning_offset`` (rad/s) is added to the scenario's detuning error.
    """

    scenario: GateScenario
    fock_truncation: int | None = None
    step_tolerance: float = 1e-8
    basis: str = "sigma_x_sum"
    detuning_offset: float = 0.0

    def __post_init__(self):
        if self.fock_truncation is not None and int(self.fock_truncation) < 2:
            raise ValueError("fock_truncation must be >= 2")
        if not (0 < self.step_tolerance <= 1e-3):
            raise ValueError("step_tolerance must lie in (0, 1e-3]")
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}; expected one of {BASES}")
        if not math.isfinite(self.detuning_offset):
            raise ValueError("detuning_offset must be finite")

    @property
    def detuning(self) -> float:
        return self.scenario.detuning_error + self.detuning_offset

    @property
    def truncation(self) -> int:
        if self.fock_truncation is not None:
            return int(self.fock_truncation)
        return default_truncation(replace(self.scenario, detuning_error=self.detuning))


@dataclass
class JointState:
    """Density matrix on (two qubits) x (Fock levels)."""

    rho: np.ndarray
    fock_truncation: int

    def spin_state(self) -> np.ndarray:
        m = self.fock_truncation
        return np.einsum("anbn->ab", self.rho.reshape(4, m, 4, m))

    def motional_populations(self) -> np.ndarray:
        m = self.fock_truncation
        return np.einsum("anan->n", self.rho.reshape(4, m, 4, m)).real

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def trace_error(self) -> float:
        return float(abs(np.trace(self.rho) - 1.0))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])


@dataclass
class FidelityReport:
    """Outcome of one run.

    ``fidelity`` is the overlap with the ideal (zero-error) output state.
    ``fidelity_free_phase`` instead uses the Bell state with whatever phase
    the gate actually produced.
    """

    fidelity: float
    truncation_converged: bool
    leaked_population: float
    fock_truncation: int
    pop_even: float = float("nan")
    parity_amplitude: float = float("nan")
    bell_phase_error: float = float("nan")
    fidelity_free_phase: float = float("nan")
    max_trace_error: float = float("nan")
    hermiticity_error: float = float("nan")
    n_steps: int = 0
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def target_state(cfg: SimConfig) -> np.ndarray:
    """Ideal output ``exp(i G0 S^2) |00>`` for the configured tone set and basis.

    ``G0`` is the phase the tone set accumulates with no detuning, so this
    is the zero-error gate applied to ``|00>``.
    """
    ts = cfg.scenario.tones
    g0 = phase_g_closed(ts, 0.0, ts.gate_time)
    s = coupling_operator(cfg.basis)
    evals, evecs = np.linalg.eigh(s)
    u = evecs @ np.diag(np.exp(1j * g0 * evals**2)) @ evecs.conj().T
    psi0 = np.zeros(4, dtype=complex)
    psi0[0] = 1.0
    return u @ psi0


def bell_components(rho_spin: np.ndarray) -> tuple[float, float, float]:
    """``(pop_even, parity_amplitude, bell_phase)`` for the ``|00>, |11>`` subspace.

    ``pop_even = rho_00 + rho_33``, ``parity_amplitude = 2 |rho_30|`` and
    ``bell_phase = arg(rho_30)``.
    """
    pop = float((rho_spin[0, 0] + rho_spin[3, 3]).real)
    coh = rho_spin[3, 0]
    return pop, float(2 * abs(coh)), float(np.angle(coh))


def _drive_terms(ts, x_shift):
    """Callable ``s -> sum_j c_j exp(i (j + x) s)`` in units of delta."""
    c = ts.as_array()
    w = ts.harmonics + x_shift

    def g(s):
        return complex(np.exp(1j * w * s) @ c)

    return g


def _symmetric_terms(cfg, m):
    ts = cfg.scenario.tones
    g = _drive_terms(ts, cfg.detuning / ts.delta)
    a = sparse.csr_matrix(ladder(m))
    s_op = sparse.csr_matrix(coupling_operator(cfg.basis))
    up = sparse.kron(s_op, a.conj().T, format="csr")
    down = sparse.kron(s_op, a, format="csr")
    return [(up, g), (down, lambda s: np.conj(g(s)))]


def _sideband_terms(cfg, m, delta_r, delta_b):
    ts = cfg.scenario.tones
    g_b = _drive_terms(ts, delta_b / ts.delta)
    g_r = _drive_terms(ts, delta_r / ts.delta)
    a = sparse.csr_matrix(ladder(m))
    ad = a.conj().T.tocsr()
    sp = sparse.csr_matrix(_spin_raising(cfg.basis))
    sm = sp.conj().T.tocsr()
    # blue: S+ a^dag, red: S- a^dag, plus conjugates
    return [
        (sparse.kron(sp, ad, format="csr"), g_b),
        (sparse.kron(sm, a, format="csr"), lambda s: np.conj(g_b(s))),
        (sparse.kron(sm, ad, format="csr"), g_r),
        (sparse.kron(sp, a, format="csr"), lambda s: np.conj(g_r(s))),
    ]


def _assemble(terms, s, scale):
    h = None
    for op, coef in terms:
        part = op * (scale * coef(s))
        h = part if h is None else h + part
    return h


def hamiltonian_at(cfg: SimConfig, t: float) -> sparse.csr_matrix:
    """``H(t)/hbar`` in rad/s on the joint space (sparse)."""
    ts = cfg.scenario.tones
    terms = _symmetric_terms(cfg, cfg.truncation)
    return _assemble(terms, ts.delta * t, ts.delta).tocsr()


def _initial_state(nbar, m):
    spin0 = np.zeros((4, 4), dtype=complex)
    spin0[0, 0] = 1.0
    return np.kron(spin0, thermal_state(nbar, m))


def _integrate(cfg, terms, m):
    sc = cfg.scenario
    ts = sc.tones
    dim = 4 * m
    rate = sc.heating_rate / ts.delta
    a = sparse.kron(sparse.identity(4, format="csr"), sparse.csr_matrix(ladder(m)), format="csr")
    ad = a.conj().T.tocsr()
    n_levels = np.arange(m, dtype=float)
    # diagonal of a^dag a + a a^dag under truncation
    anti = np.tile(n_levels + np.append(n_levels[1:], 0.0), 4)

    def rhs(s, y):
        rho = y.reshape(dim, dim)
        hrho = None
        for op, coef in terms:
            part = coef(s) * (op @ rho)
            hrho = part if hrho is None else hrho + part
        out = -1j * (hrho - hrho.conj().T)
        if rate:
            # rho is Hermitian, so rho a^dag = (a rho)^dag and rho a = (a^dag rho)^dag
            out += rate * (a @ (a @ rho).conj().T)
            out += rate * (ad @ (ad @ rho).conj().T)
            out -= 0.5 * rate * (anti[:, None] * rho + rho * anti[None, :])
        return out.ravel()

    rho0 = _initial_state(sc.nbar, m)
    t_end = 2.0 * math.pi
    max_step = t_end / (200 * ts.n_tones)
    solver = DOP853(
        rhs,
        0.0,
        rho0.ravel(),
        t_end,
        rtol=cfg.step_tolerance,
        atol=cfg.step_tolerance * 1e-3,
        max_step=max_step,
    )
    top = np.zeros(m, dtype=bool)
    top[-2:] = True
    top_idx = np.flatnonzero(np.tile(top, 4))
    diag_idx = np.arange(dim) * (dim + 1)
    leak = 0.0
    max_trace_err = 0.0
    n_steps = 0
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise NumericError(f"integrator failed at s={solver.t:.6g} (t={solver.t / ts.delta:.6g} s): {msg}")
        n_steps += 1
        diag = solver.y[diag_idx].real
        max_trace_err = max(max_trace_err, abs(diag.sum() - 1.0))
        leak = max(leak, float(diag[top_idx].sum()))
    rho = solver.y.reshape(dim, dim)
    return rho, leak, max_trace_err, n_steps


def _run(cfg, terms_fn):
    start = time.perf_counter()
    m = cfg.truncation
    terms = terms_fn(m)
    rho, leak, trace_err, n_steps = _integrate(cfg, terms, m)
    state = JointState(rho=rho, fock_truncation=m)
    spin = state.spin_state()
    psi = target_state(cfg)
    fid = float(np.real(psi.conj() @ spin @ psi))
    pop, amp, phase = bell_components(spin)
    target_phase = float(np.angle(psi[3] / psi[0]))
    dphi = (phase - target_phase + math.pi) % (2 * math.pi) - math.pi
    report = FidelityReport(
        fidelity=fid,
        truncation_converged=leak <= LEAK_THRESHOLD,
        leaked_population=leak,
        fock_truncation=m,
        pop_even=pop,
        parity_amplitude=amp,
        bell_phase_error=dphi,
        fidelity_free_phase=pop / 2 + amp / 2,
        max_trace_error=trace_err,
        hermiticity_error=state.hermiticity_error(),
        n_steps=n_steps,
        wall_time_s=time.perf_counter() - start,
    )
    return state, report


def evolve(cfg: SimConfig) -> tuple[JointState, FidelityReport]:
    """Integrate the master equation from ``|00><00| x thermal`` over one gate."""
    return _run(cfg, lambda m: _symmetric_terms(cfg, m))


def asymmetric_detuning_evolve(
    cfg: SimConfig, delta_r: float, delta_b: float
) -> tuple[JointState, FidelityReport]:
    """Like :func:`evolve` with independent red and blue sideband shifts.

    The scenario's own ``detuning_error`` is ignored; ``cfg.detuning_offset``
    is added to both shifts.
    """
    off = cfg.detuning_offset
    shifted = replace(
        cfg,
        scenario=replace(cfg.scenario, detuning_error=0.5 * (delta_r + delta_b)),
        detuning_offset=0.0,
    )
    if cfg.fock_truncation is None:
        m = default_truncation(replace(cfg.scenario, detuning_error=max(abs(delta_r), abs(delta_b)) + abs(off)))
        shifted = replace(shifted, fock_truncation=m)
    return _run(shifted, lambda m: _sideband_terms(shifted, m, delta_r + off, delta_b + off))


@dataclass
class SweepRow:
    """One sweep point: scenario parameters plus the run outcome or error."""

    index: int
    n_tones: int
    delta_rad_per_s: float
    detuning_error: float
    heating_rate: float
    nbar: float
    basis: str
    fidelity: float = float("nan")
    fidelity_free_phase: float = float("nan")
    truncation_converged: bool = False
    leaked_population: float = float("nan")
    fock_truncation: int = 0
    error: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _sweep_point(args):
    i, cfg = args
    sc = cfg.scenario
    row = SweepRow(
        index=i,
        n_tones=sc.tones.n_tones,
        delta_rad_per_s=sc.delta,
        detuning_error=cfg.detuning,
        heating_rate=sc.heating_rate,
        nbar=sc.nbar,
        basis=cfg.basis,
    )
    try:
        _, rep = evolve(cfg)
    except (NumericError, ValueError, ArithmeticError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    row.fidelity = rep.fidelity
    row.fidelity_free_phase = rep.fidelity_free_phase
    row.truncation_converged = rep.truncation_converged
    row.leaked_population = rep.leaked_population
    row.fock_truncation = rep.fock_truncation
    return row


def sweep(cfg_grid, workers: int = 1, progress=None) -> list[SweepRow]:
    """Run :func:`evolve` on every config; rows come back in input order.

    Per-point failures are recorded in ``SweepRow.error``. ``progress`` is
    an optional callable ``(done, total)``.
    """
    grid = list(cfg_grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    jobs = list(enumerate(grid))
    rows = []
    if workers <= 1:
        for job in jobs:
            rows.append(_sweep_point(job))
            if progress:
                progress(len(rows), len(jobs))
        return rows
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for row in pool.map(_sweep_point, jobs):
            rows.append(row)
            if progress:
                progress(len(rows), len(jobs))
    return rows
