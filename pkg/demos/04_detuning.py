"""Symmetric detuning errors.

Shifting every tone by Delta leaves the loop open and spoils the phase.
The single-tone infidelity grows as (3/4 + nbar) pi^2 (Delta/delta)^2; with
two tones the loop closes to first order and the remaining error,
pi^2/36 (Delta/delta)^2, no longer depends on the temperature.
"""

import math

from mtms import GateScenario, SimConfig, evolve, fidelity_detuning, optimize_tones
from mtms.presets import PAPER

delta = PAPER.delta
t1, t2 = optimize_tones(1, delta), optimize_tones(2, delta)

print("Delta/delta   nbar   1-F (N=1)    1-F (N=2)")
for frac in (0.01, 0.05):
    for nbar in (0.0, 10.0, 53.0):
        i1 = 1 - fidelity_detuning(GateScenario(t1, frac * delta, 0.0, nbar))
        i2 = 1 - fidelity_detuning(GateScenario(t2, frac * delta, 0.0, nbar))
        print(f"{frac:10.2f}   {nbar:4.0f}   {i1:.3e}    {i2:.3e}")

print(f"\nLeading order at Delta/delta=0.01, N=2: {math.pi**2 / 36 * 1e-4:.3e}")

sc = GateScenario(t2, 0.05 * delta, 0.0, 2.0)
_, rep = evolve(SimConfig(sc, fock_truncation=40))
print(f"Master equation at Delta/delta=0.05, nbar=2: F = {rep.fidelity:.6f} "
      f"(closed form {fidelity_detuning(sc):.6f})")
