"""Synthetic two-ion fluorescence data and maximum-likelihood analysis.

Outcomes are the number of bright ions, ``0, 1, 2``. A :class:`SpamMap`
holds ``P(observed | true)`` with rows indexed by the observed outcome and
columns by the true one, so ``p_obs = P @ p_true``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import gammaln, xlogy

from .tones import NumericError

__all__ = [
    "CountsRecord",
    "DEFAULT_COMBINED_FIDELITY",
    "ParityDataset",
    "ParityFit",
    "PopulationFit",
    "SpamMap",
    "analysis_pulse",
    "apply_spam",
    "bell_fidelity_estimate",
    "bell_fidelity_stderr",
    "mle_parity_fit",
    "mle_populations",
    "outcome_probabilities",
    "parity_scan_probabilities",
    "sample_counts",
    "simulate_parity_dataset",
]

DEFAULT_COMBINED_FIDELITY = 0.87


def _check_triple(p, name="probability triple"):
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} must be three finite numbers")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must be non-negative and sum to 1, got {p.tolist()}")
    return p


@dataclass(frozen=True)
class SpamMap:
    """Column-stochastic 3x3 map ``P(i|j)`` (rows observed, columns true)."""

    p_obs_given_true: np.ndarray

    def __post_init__(self):
        m = np.array(self.p_obs_given_true, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("SPAM map must be 3x3")
        if np.any(m < 0) or np.any(m > 1):
            raise ValueError("SPAM entries must lie in [0, 1]")
        if np.max(np.abs(m.sum(axis=0) - 1.0)) > 1e-12:
            raise ValueError("SPAM columns must sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "p_obs_given_true", m)

    @property
    def matrix(self) -> np.ndarray:
        return self.p_obs_given_true

    @classmethod
    def identity(cls) -> "SpamMap":
        return cls(np.eye(3))

    @classmethod
    def symmetric(cls, epsilon: float) -> "SpamMap":
        """Each ion independently misread with probability ``epsilon``."""
        if not 0 <= epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        single = np.array([[1 - epsilon, epsilon], [epsilon, 1 - epsilon]])
        m = np.zeros((3, 3))
        for b1 in (0, 1):
            for b2 in (0, 1):
                for o1 in (0, 1):
                    for o2 in (0, 1):
                        m[o1 + o2, b1 + b2] += single[o1, b1] * single[o2, b2] * (
                            # |01> and |10> share the "one bright" column
                            0.5 if b1 + b2 == 1 else 1.0
                        )
        return cls(m)

    @classmethod
    def from_combined_fidelity(cls, fidelity: float = DEFAULT_COMBINED_FIDELITY) -> "SpamMap":
        """Symmetric map with ``(1 - epsilon)^2 = fidelity``."""
        return cls.symmetric(1.0 - math.sqrt(fidelity))

    def odd_reduction(self) -> tuple[float, float]:
        """``(P(odd|odd), P(odd|even))`` with the even column averaged over 0 and 2."""
        m = self.matrix
        return float(m[1, 1]), float(0.5 * (m[1, 0] + m[1, 2]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "orientation": "rows=observed, columns=true",
                "p_obs_given_true": self.matrix.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SpamMap":
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["p_obs_given_true"]
        return cls(np.array(data, dtype=float))


@dataclass(frozen=True)
class CountsRecord:
    """Shots with 0, 1 and 2 bright ions."""

    x0: int
    x1: int
    x2: int

    def __post_init__(self):
        for v in (self.x0, self.x1, self.x2):
            if int(v) != v or v < 0:
                raise ValueError("counts must be non-negative integers")
        if self.n < 1:
            raise ValueError("a counts record needs at least one shot")

    @property
    def n(self) -> int:
        return int(self.x0 + self.x1 + self.x2)

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.x1, self.x2], dtype=float)

    @property
    def odd(self) -> int:
        return int(self.x1)


@dataclass
class ParityDataset:
    """Counts recorded at several analysis-pulse phases."""

    phis: np.ndarray
    counts: list
    spam: SpamMap = field(default_factory=SpamMap.identity)

    def __post_init__(self):
        self.phis = np.asarray(self.phis, dtype=float)
        if len(self.phis) != len(self.counts):
            raise ValueError("one counts record per phase is required")

    def validate(self):
        distinct = np.unique(np.round(np.mod(self.phis, 2 * math.pi), 12))
        if len(distinct) < 4:
            raise ValueError(f"need at least 4 distinct phases, got {len(distinct)}")
        if np.ptp(self.phis) < math.pi - 1e-12:
            raise ValueError("phases must span at least pi")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phi_rad", "x0", "x1", "x2"])
            for phi, c in zip(self.phis, self.counts):
                w.writerow([repr(float(phi)), c.x0, c.x1, c.x2])

    @classmethod
    def from_csv(cls, path, spam: SpamMap | None = None) -> "ParityDataset":
        phis, counts = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"phi_rad", "x0", "x1", "x2"} - set(reader.fieldnames or [])
            if missing:
                raise ValueError(f"parity CSV missing columns: {sorted(missing)}")
            for row in reader:
                phis.append(float(row["phi_rad"]))
                counts.append(CountsRecord(int(row["x0"]), int(row["x1"]), int(row["x2"])))
        return cls(np.array(phis), counts, spam or SpamMap.identity())


def apply_spam(p_true, spam: SpamMap) -> np.ndarray:
    """Observed outcome probabilities ``P @ p_true``."""
    p = _check_triple(p_true)
    out = spam.matrix @ p
    # a stochastic map keeps the simplex; clip rounding noise only
    out = np.clip(out, 0.0, None)
    return out / out.sum()


def sample_counts(p_obs, n_shots: int, seed) -> CountsRecord:
    """Multinomial draw of ``n_shots`` outcomes; reproducible given ``seed``."""
    p = _check_triple(p_obs)
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = rng.multinomial(int(n_shots), p / p.sum())
    return CountsRecord(int(x[0]), int(x[1]), int(x[2]))


@dataclass
class PopulationFit:
    p1: float
    p2: float
    log_likelihood: float
    covariance: np.ndarray

    @property
    def p0(self) -> float:
        return 1.0 - self.p1 - self.p2

    @property
    def pop_even(self) -> float:
        return self.p0 + self.p2

    @property
    def pop_even_stderr(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    def __iter__(self):
        return iter((self.p1, self.p2, self.log_likelihood))


def _multinomial_loglik(x, p_obs):
    n = x.sum()
    const = math.log((n + 1) * (n + 2)) + gammaln(n + 1) - gammaln(x + 1).sum()
    return float(const + xlogy(x, p_obs).sum())


def _pop_loglik(q, x, m):
    p = np.array([1.0 - q[0] - q[1], q[0], q[1]])
    po = m @ p
    if np.any((po <= 0) & (x > 0)):
        return -np.inf
    return _multinomial_loglik(x, po)


def _pop_hessian(q, x, m):
    # -d^2 loglik / dq^2 with p_obs linear in q
    grad_p = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    jac = m @ grad_p
    po = m @ np.array([1.0 - q[0] - q[1], q[0], q[1]])
    # only observed outcomes contribute; dividing twice avoids po**2 underflow
    w = np.divide(np.divide(x, po, out=np.zeros_like(x), where=x > 0), po, out=np.zeros_like(x), where=x > 0)
    return jac.T @ (w[:, None] * jac)


def _edge_search(x, m):
    """Best point on the simplex boundary (the likelihood is concave)."""
    edges = [
        lambda s: np.array([s, 0.0]),
        lambda s: np.array([0.0, s]),
        lambda s: np.array([s, 1.0 - s]),
    ]
    best = None
    for edge in edges:
        res = optimize.minimize_scalar(
            lambda s: -_pop_loglik(edge(s), x, m) if np.isfinite(_pop_loglik(edge(s), x, m)) else 1e300,
            bounds=(0.0, 1.0),
            method="bounded",
            options={"xatol": 1e-13},
        )
        for s in (0.0, 1.0, float(res.x)):
            q = edge(s)
            ll = _pop_loglik(q, x, m)
            if best is None or ll > best[1]:
                best = (q, ll)
    return best


def mle_populations(counts: CountsRecord, spam: SpamMap) -> PopulationFit:
    """Maximum-likelihood true populations ``(p1, p2)`` from SPAM-corrupted counts.

    Maximizes the multinomial log-likelihood over the simplex. When the
    SPAM-inverted empirical frequencies lie inside the simplex they are the
    unconstrained optimum; otherwise the optimum sits on the boundary and a
    bounded search along the three edges finds it. Unpacks as
    ``p1, p2, loglik``.
    """
    x = counts.as_array()
    m = spam.matrix
    q = None
    try:
        p_inv = np.linalg.solve(m, x / x.sum())
    except np.linalg.LinAlgError:
        p_inv = None
    if p_inv is not None and np.all(p_inv >= 0):
        q = p_inv[1:]
        ll = _pop_loglik(q, x, m)
    else:
        # SLSQP from the clipped inversion as a cross-check on the edge search
        q, ll = _edge_search(x, m)
        start = np.clip(p_inv if p_inv is not None else x / x.sum(), 1e-6, None)
        start = start / start.sum()
        res = optimize.minimize(
            lambda v: -_pop_loglik(v, x, m) if np.isfinite(_pop_loglik(v, x, m)) else 1e300,
            start[1:],
            method="SLSQP",
            bounds=[(0, 1), (0, 1)],
            constraints=[{"type": "ineq", "fun": lambda v: 1.0 - v[0] - v[1]}],
            options={"ftol": 1e-15, "maxiter": 500},
        )
        if res.success and _pop_loglik(res.x, x, m) > ll:
            q, ll = np.clip(res.x, 0, 1), _pop_loglik(np.clip(res.x, 0, 1), x, m)
        if not np.isfinite(ll):
            raise NumericError(f"population MLE failed; last iterate {q!r}, optimizer: {res.message}")
    hess = _pop_hessian(q, x, m)
    cov = np.linalg.pinv(hess)
    # covariance of (pop_even, p2) is what callers need most: pop_even = 1 - p1
    return PopulationFit(p1=float(q[0]), p2=float(q[1]), log_likelihood=ll, covariance=cov)


@dataclass
class ParityFit:
    amplitude: float
    phase: float
    log_likelihood: float
    amplitude_stderr: float
    phase_stderr: float

    def __iter__(self):
        return iter((self.amplitude, self.phase, self.log_likelihood))


def _parity_loglik(uv, phis, odd, n, q_oo, q_oe):
    parity = uv[0] * np.cos(2 * phis) + uv[1] * np.sin(2 * phis)
    p_odd = 0.5 * (1.0 - parity)
    po = q_oo * p_odd + q_oe * (1.0 - p_odd)
    if np.any((po <= 0) & (odd > 0)) or np.any((po >= 1) & (odd < n)):
        return -np.inf
    const = np.log(n + 1) + gammaln(n + 1) - gammaln(odd + 1) - gammaln(n - odd + 1)
    return float(np.sum(const + xlogy(odd, po) + xlogy(n - odd, 1.0 - po)))


def mle_parity_fit(ds: ParityDataset) -> ParityFit:
    """Maximum-likelihood fit of ``Pi = A cos(2 phi + phi0)`` to odd-parity counts.

    Writing ``Pi = u cos 2phi + v sin 2phi`` (``u = A cos phi0``,
    ``v = -A sin phi0``) makes the binomial log-likelihood concave on the
    disc ``u^2 + v^2 <= 1``. The returned amplitude is non-negative and the
    phase lies in ``(-pi, pi]``.
    """
    ds.validate()
    phis = ds.phis
    odd = np.array([c.odd for c in ds.counts], dtype=float)
    n = np.array([c.n for c in ds.counts], dtype=float)
    q_oo, q_oe = ds.spam.odd_reduction()
    if abs(q_oo - q_oe) < 1e-12:
        raise ValueError("SPAM map erases the parity signal")

    def nll(uv):
        ll = _parity_loglik(uv, phis, odd, n, q_oo, q_oe)
        return -ll if np.isfinite(ll) else 1e300

    # linear least squares on SPAM-corrected parity for the start point
    p_odd_obs = odd / n
    p_odd_true = (p_odd_obs - q_oe) / (q_oo - q_oe)
    design = np.column_stack([np.cos(2 * phis), np.sin(2 * phis)])
    uv0, *_ = np.linalg.lstsq(design, 1.0 - 2.0 * p_odd_true, rcond=None)
    r0 = np.hypot(*uv0)
    starts = [uv0 * min(1.0, 0.95 / r0) if r0 > 0 else uv0, np.zeros(2), np.array([0.5, 0.0]), np.array([0.0, 0.5])]
    best = None
    for start in starts:
        res = optimize.minimize(
            nll,
            start,
            method="SLSQP",
            constraints=[{"type": "ineq", "fun": lambda v: 1.0 - v[0] ** 2 - v[1] ** 2}],
            options={"ftol": 1e-15, "maxiter": 1000},
        )
        uv = res.x
        r = np.hypot(*uv)
        if r > 1.0:
            uv = uv / r
        val = nll(uv)
        if best is None or val < best[1]:
            best = (uv, val, res)
    uv, val, res = best
    if val >= 1e300:
        raise NumericError(f"parity fit failed to find a feasible optimum: {res.message}; last iterate {res.x!r}")
    amp = float(np.hypot(*uv))
    phase = float(math.atan2(-uv[1], uv[0])) if amp > 0 else 0.0
    amp_se, phase_se = _parity_stderr(amp, phase, phis, odd, n, q_oo, q_oe)
    return ParityFit(amp, phase, -val, amp_se, phase_se)


def _parity_stderr(amp, phase, phis, odd, n, q_oo, q_oe):
    # observed information in (A, phi0); d p'_odd / d theta is analytic
    c = np.cos(2 * phis + phase)
    s = np.sin(2 * phis + phase)
    parity = amp * c
    po = q_oo * 0.5 * (1 - parity) + q_oe * 0.5 * (1 + parity)
    scale = 0.5 * (q_oe - q_oo)
    d_amp = scale * c
    d_phase = -scale * amp * s
    jac = np.column_stack([d_amp, d_phase])
    # second derivative of p' wrt theta
    d2 = np.zeros((len(phis), 2, 2))
    d2[:, 0, 1] = d2[:, 1, 0] = -scale * s
    d2[:, 1, 1] = -scale * amp * c
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = np.where(po > 0, odd / po, 0.0) - np.where(po < 1, (n - odd) / (1 - po), 0.0)
        g2 = np.where(po > 0, odd / po**2, 0.0) + np.where(po < 1, (n - odd) / (1 - po) ** 2, 0.0)
    info = np.einsum("i,ia,ib->ab", g2, jac, jac) - np.einsum("i,iab->ab", g1, d2)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    return float(math.sqrt(abs(cov[0, 0]))), float(math.sqrt(abs(cov[1, 1])))


def bell_fidelity_estimate(pop_even: float, parity_amplitude: float, delta_phi: float = 0.0) -> float:
    """Bell-state fidelity ``pop_even/2 + |A cos(delta_phi)|/2``.

    >>> round(bell_fidelity_estimate(0.96, 0.92, 0.0), 12)
    0.94
    """
    if not 0.0 <= pop_even <= 1.0:
        raise ValueError(f"pop_even must lie in [0, 1], got {pop_even!r}")
    if abs(parity_amplitude) > 1.0:
        raise ValueError(f"|parity_amplitude| must be <= 1, got {parity_amplitude!r}")
    if not math.isfinite(delta_phi):
        raise ValueError("delta_phi must be finite")
    return pop_even / 2 + abs(parity_amplitude * math.cos(delta_phi)) / 2


def bell_fidelity_stderr(pop_stderr: float, amp_stderr: float, delta_phi: float = 0.0) -> float:
    """Standard error of :func:`bell_fidelity_estimate` from independent inputs."""
    return 0.5 * math.hypot(pop_stderr, amp_stderr * math.cos(delta_phi))


# --- synthetic data from a two-qubit state ---------------------------------

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)


def analysis_pulse(phi: float) -> np.ndarray:
    """Two-qubit ``pi/2`` rotation about ``cos(phi) x + sin(phi) y`` on both ions."""
    axis = math.cos(phi) * _SX + math.sin(phi) * _SY
    single = math.cos(math.pi / 4) * np.eye(2) - 1j * math.sin(math.pi / 4) * axis
    return np.kron(single, single)


def outcome_probabilities(rho_spin: np.ndarray) -> np.ndarray:
    """``(p0, p1, p2)`` bright-ion probabilities; the upper state ``|1>`` is bright."""
    d = np.clip(np.real(np.diag(rho_spin)), 0.0, None)
    p = np.array([d[0], d[1] + d[2], d[3]])
    return p / p.sum()


def parity_scan_probabilities(rho_spin: np.ndarray, phis) -> np.ndarray:
    """Outcome probabilities after the analysis pulse at each phase; shape ``(n, 3)``."""
    out = []
    for phi in np.asarray(phis, dtype=float):
        u = analysis_pulse(phi)
        out.append(outcome_probabilities(u @ rho_spin @ u.conj().T))
    return np.array(out)


def simulate_parity_dataset(
    rho_spin: np.ndarray, phis, n_shots: int, spam: SpamMap, seed
) -> ParityDataset:
    """Sample SPAM-corrupted counts for a parity scan of ``rho_spin``."""
    rng = np.random.default_rng(seed)
    probs = parity_scan_probabilities(rho_spin, phis)
    counts = [sample_counts(apply_spam(p, spam), n_shots, rng) for p in probs]
    return ParityDataset(np.asarray(phis, dtype=float), counts, spam)
