"""Phase-space loops and what a detuning error does to them.

With the right detuning every tone set returns the motion to where it
started, F(tau) = 0. A small symmetric detuning error leaves the loop open.
Extra tones close the loop much more tightly.
"""

from mtms import GateScenario, loop_closure_ratio, optimize_tones, trajectory
from mtms.presets import PAPER

delta = PAPER.delta
tones = {n: optimize_tones(n, delta) for n in (1, 2, 3)}

for frac in (0.0, 0.05):
    print(f"Delta/delta = {frac}")
    for n, ts in tones.items():
        tr = trajectory(GateScenario(ts, frac * delta), 401)
        print(f"  N={n}: max |F| = {abs(tr.big_f).max():.4f}, |F(tau)| = {abs(tr.big_f[-1]):.2e}, "
              f"G(tau) = {tr.g[-1]:.6f}")

print("\nHow much closer the loop ends to the origin than with one tone:")
for n in (2, 3):
    print(f"  N={n}: {loop_closure_ratio(tones[1], tones[n], 0.05):.1f} x")

tr = trajectory(GateScenario(tones[2], 0.05 * delta), 201)
tr.to_csv("two_tone_trajectory.csv")
print("\nWrote two_tone_trajectory.csv (t_s, re_F, im_F, G) for plotting.")
