"""Hot ions: parity fringes after Doppler cooling only.

At nbar ~ 53 even a small detuning error wrecks a single-tone gate,
because the open loop entangles the spins with a very broad motional state.
The two-tone gate barely notices. Parity fringes show it directly.
"""

from mtms.figures import fig4_analytic
from mtms.presets import PAPER

curves, summary = fig4_analytic(frac_detuning=0.03, nbar=PAPER.nbar_doppler)
for label, name in (("single", "one tone "), ("two", "two tones")):
    s = summary[label]
    print(f"{name}: fidelity {s['fidelity']:.4f}, parity contrast {s['parity_contrast']:.3f}")

print("\nphi/pi   parity(1 tone)   parity(2 tones)")
for a, b in list(zip(curves["single"], curves["two"]))[::9]:
    print(f"{a['phi_rad'] / 3.141592653589793:6.3f}   {a['parity']:+.3f}           {b['parity']:+.3f}")
