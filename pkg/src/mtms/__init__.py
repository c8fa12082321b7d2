"""Design and validation tools for multi-tone Molmer-Sorensen gates."""

from .dynamics import (
    ErrorBudget,
    GateScenario,
    Trajectory,
    displacement_f_big,
    drive_f,
    effective_heating_factor,
    fidelity_detuning,
    fidelity_heating,
    infidelity_detuning,
    leading_order_budget,
    loop_closure_ratio,
    phase_g,
    trajectory,
)
from .lindblad import (
    FidelityReport,
    JointState,
    SimConfig,
    asymmetric_detuning_evolve,
    evolve,
    hamiltonian_at,
    sweep,
    thermal_state,
)
from .presets import PAPER, PaperPreset
from .tomography import (
    CountsRecord,
    ParityDataset,
    SpamMap,
    apply_spam,
    bell_fidelity_estimate,
    mle_parity_fit,
    mle_populations,
    sample_counts,
)
from .tones import NumericError, ToneSet, constraint_residuals, optimize_tones, single_tone

__version__ = "0.1.0"
