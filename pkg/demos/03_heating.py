"""Heating during the gate: closed form against the master equation.

Motional heating at rate ndot scrambles the spin-motion correlations. For
a closed loop the Bell-state fidelity has a closed form with an effective
rate ndot_MT = factor * ndot, where the factor depends on the tone set. We
check that against a full master-equation simulation.
"""

from mtms import GateScenario, SimConfig, evolve, fidelity_heating, optimize_tones
from mtms.figures import fast_single_tone
from mtms.presets import PAPER

delta = PAPER.delta
print("ndot [1/s]  N  closed form   master eq.   |diff|")
for n in (1, 2):
    ts = optimize_tones(n, delta)
    for rate in (50.0, 150.0, 300.0):
        _, rep = evolve(SimConfig(GateScenario(ts, 0.0, rate, 0.0), fock_truncation=30))
        closed = fidelity_heating(ts, rate)
        print(f"{rate:9.0f}   {n}  {closed:.6f}     {rep.fidelity:.6f}     {abs(closed - rep.fidelity):.1e}")

# A faster single-tone gate at the same peak laser power as the two-tone gate
fast = fast_single_tone(optimize_tones(2, delta))
print(f"\nSingle tone at the two-tone peak Rabi frequency runs {fast.delta / delta:.3f} times faster.")
for rate in (150.0, 300.0):
    print(f"  ndot={rate:.0f}: fast single tone {fidelity_heating(fast, rate):.4f}, "
          f"two tones {fidelity_heating(optimize_tones(2, delta), rate):.4f}")
