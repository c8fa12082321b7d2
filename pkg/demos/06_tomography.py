"""From fluorescence counts to a Bell-state fidelity.

The experiment never sees the state directly: it counts how many ions
fluoresce, through imperfect detection. We simulate an ideal two-tone gate,
corrupt the readout with an 87% detection fidelity, and recover the
populations, the parity amplitude and finally the fidelity, with error bars.
"""

import math

import numpy as np

from mtms import GateScenario, SimConfig, evolve, optimize_tones
from mtms.presets import PAPER
from mtms.tomography import (
    SpamMap,
    apply_spam,
    bell_fidelity_estimate,
    bell_fidelity_stderr,
    mle_parity_fit,
    mle_populations,
    sample_counts,
    simulate_parity_dataset,
)

state, _ = evolve(SimConfig(GateScenario(optimize_tones(2, PAPER.delta)), fock_truncation=12))
rho = state.spin_state()
spam = SpamMap.from_combined_fidelity(0.87)
rng = np.random.default_rng(2024)

p_true = np.clip(np.real([rho[0, 0], rho[1, 1] + rho[2, 2], rho[3, 3]]), 0, None)
counts = sample_counts(apply_spam(p_true / p_true.sum(), spam), 10_000, rng)
pops = mle_populations(counts, spam)
print(f"Raw counts {counts.x0, counts.x1, counts.x2}")
print(f"Even population {pops.pop_even:.4f} +- {pops.pop_even_stderr:.4f}")

phis = np.linspace(0, math.pi, 12)
fit = mle_parity_fit(simulate_parity_dataset(rho, phis, 500, spam, rng))
print(f"Parity amplitude {fit.amplitude:.4f} +- {fit.amplitude_stderr:.4f}, "
      f"phase {fit.phase:.3f} +- {fit.phase_stderr:.3f} rad (ideal pi/2)")

dphi = fit.phase - math.pi / 2
f = bell_fidelity_estimate(min(pops.pop_even, 1.0), fit.amplitude, dphi)
df = bell_fidelity_stderr(pops.pop_even_stderr, fit.amplitude_stderr, dphi)
print(f"Bell-state fidelity {f:.4f} +- {df:.4f} (true value 1)")
