"""Tone coefficients for single- and multi-tone Molmer-Sorensen gates.

A gate with ``N`` tones drives each sideband at detunings ``j * delta``
(``j = 1..N``) with dimensionless strengths ``c_j``. Two constraints fix the
family of useful gates:

* maximal entanglement: ``sum_j c_j**2 / j == 1/16``
* zero mean displacement (loop closure): ``sum_j c_j / j == 0``  (N >= 2)

Among all coefficient sets satisfying both, the optimized set minimizes the
mean squared phase-space displacement ``sum_k c_k**2 / k**2``.

Sign convention: the solution is unique only up to ``c -> -c``. Optimized
sets with ``N >= 2`` are returned with ``c_1 < 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ENTANGLING_TARGET",
    "NumericError",
    "ToneSet",
    "closure_root",
    "constraint_residuals",
    "displacement_weight",
    "optimize_tones",
    "single_tone",
]

ENTANGLING_TARGET = 1.0 / 16.0


class NumericError(RuntimeError):
    """Raised when a numerical routine fails to converge."""


@dataclass(frozen=True)
class ToneSet:
    """Coefficients ``c_1..c_N`` and base detuning ``delta`` (rad/s)."""

    n_tones: int
    coeffs: tuple[float, ...]
    delta: float
    # smallest closure root for optimized sets; None otherwise
    multiplier: float | None = field(default=None, compare=False)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if int(self.n_tones) != self.n_tones or self.n_tones < 1:
            raise ValueError(f"n_tones must be a positive integer, got {self.n_tones!r}")
        if len(coeffs) != self.n_tones:
            raise ValueError(
                f"expected {self.n_tones} coefficients, got {len(coeffs)}"
            )
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be a positive angular frequency, got {self.delta!r}")

    @property
    def gate_time(self) -> float:
        """Gate duration ``2 pi / delta`` in seconds."""
        return 2.0 * math.pi / self.delta

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(1, self.n_tones + 1, dtype=float)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def to_dict(self) -> dict:
        return {
            "n_tones": self.n_tones,
            "coeffs": list(self.coeffs),
            "delta_rad_per_s": self.delta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ToneSet":
        return cls(
            n_tones=int(data["n_tones"]),
            coeffs=tuple(data["coeffs"]),
            delta=float(data["delta_rad_per_s"]),
        )


def _check_delta(delta):
    if not (math.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be a positive angular frequency, got {delta!r}")


def single_tone(delta: float) -> ToneSet:
    """Standard single-tone gate, ``c_1 = 1/4``."""
    _check_delta(delta)
    return ToneSet(n_tones=1, coeffs=(0.25,), delta=delta)


def constraint_residuals(ts: ToneSet) -> tuple[float, float]:
    """Return ``(sum c_j^2/j - 1/16, sum c_j/j)``."""
    c = ts.as_array()
    j = ts.harmonics
    return float(np.sum(c**2 / j) - ENTANGLING_TARGET), float(np.sum(c / j))


def displacement_weight(ts: ToneSet) -> float:
    """Mean squared displacement weight ``sum_k c_k^2 / k^2``."""
    c = ts.as_array()
    return float(np.sum(c**2 / ts.harmonics**2))


def _closure(lam, n):
    j = np.arange(1, n + 1)
    return float(np.sum(1.0 / (1.0 - j * lam)))


def closure_root(n_tones: int, rtol: float = 1e-14, max_iter: int = 400) -> float:
    """Smallest real root of ``sum_{j=1..N} 1/(1 - j*lam) = 0``.

    The N-1 roots sit one per interval between consecutive poles
    ``1/(j+1) < lam < 1/j``; the smallest lies in ``(1/N, 1/(N-1))``.
    Found by bisection, which cannot escape the bracket.
    """
    if n_tones < 2:
        raise ValueError("closure root exists only for n_tones >= 2")
    lo, hi = 1.0 / n_tones, 1.0 / (n_tones - 1)
    # just inside the poles: f(lo+) -> -inf, f(hi-) -> +inf
    a = lo + (hi - lo) * 1e-12
    b = hi - (hi - lo) * 1e-12
    fa, fb = _closure(a, n_tones), _closure(b, n_tones)
    if not (fa < 0 < fb):
        raise NumericError(
            f"closure root not bracketed on ({a!r}, {b!r}): f = ({fa!r}, {fb!r})"
        )
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        fm = _closure(mid, n_tones)
        if fm == 0.0:
            return mid
        if fm < 0:
            a = mid
        else:
            b = mid
        if b - a <= rtol * abs(mid):
            return 0.5 * (a + b)
    raise NumericError(
        f"bisection did not converge within {max_iter} iterations; "
        f"bracket=({a!r}, {b!r})"
    )


def optimize_tones(n_tones: int, delta: float = 1.0) -> ToneSet:
    """Optimized coefficients for an ``n_tones`` gate.

    For N >= 2 the constrained minimum of ``sum c_k^2/k^2`` is
    ``c_j = j b / (1 - j lam)`` with ``lam`` the smallest closure root and
    ``b = -(1/4) (sum_j j/(1 - j lam)^2)^(-1/2)``.

    Examples
    --------
    >>> [round(c, 5) for c in optimize_tones(2).coeffs]
    [-0.14434, 0.28868]
    """
    if int(n_tones) != n_tones or n_tones < 1:
        raise ValueError(f"n_tones must be a positive integer, got {n_tones!r}")
    _check_delta(delta)
    if n_tones == 1:
        return single_tone(delta)
    lam = closure_root(n_tones)
    j = np.arange(1, n_tones + 1, dtype=float)
    denom = 1.0 - j * lam
    b = -0.25 / math.sqrt(float(np.sum(j / denom**2)))
    coeffs = j * b / denom
    return ToneSet(n_tones=int(n_tones), coeffs=tuple(coeffs), delta=delta, multiplier=lam)
