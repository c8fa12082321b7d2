"""Designing multi-tone gates.

A single-tone gate drives each sideband at detuning delta with strength
c_1 = 1/4. Adding harmonics 2 delta, 3 delta, ... gives freedom to shrink the
phase-space loop while keeping the same entangling phase. Here we compute
the optimal coefficients for a few tone counts and see what they buy.
"""

import math

from mtms import constraint_residuals, effective_heating_factor, optimize_tones
from mtms.presets import PAPER

print(f"Gate detuning delta/2pi = {PAPER.delta_hz} Hz, gate time {PAPER.gate_time_s * 1e3:.2f} ms\n")

print(" N  coefficients                                   heating factor   residuals")
for n in range(1, 6):
    ts = optimize_tones(n, PAPER.delta)
    ent, clo = constraint_residuals(ts)
    coeffs = ", ".join(f"{c:+.4f}" for c in ts.coeffs)
    print(f" {n}  [{coeffs:<44}]  1/{1 / effective_heating_factor(ts):<7.3f}        {abs(ent):.0e} {abs(clo):.0e}")

# For two tones the optimum is known in closed form.
b = -1 / (12 * math.sqrt(3))
print(f"\nTwo tones in closed form: c_1 = {3 * b:.6f}, c_2 = {-6 * b:.6f}")
print("Every extra tone lowers the sensitivity to motional heating.")
