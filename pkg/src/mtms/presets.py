"""Experimental parameters of the reference two-ion demonstration."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PaperPreset:
    delta_hz: float = 292.0
    gate_time_s: float = 3.42e-3
    lamb_dicke: float = 0.004
    carrier_rabi_hz: float = 36e3
    mode_freq_hz: float = 461e3
    nbar_cold: float = 0.1
    nbar_doppler: float = 53.0

    @property
    def delta(self) -> float:
        """Gate detuning in rad/s."""
        return 2.0 * math.pi * self.delta_hz

    def check(self, rtol: float = 5e-3) -> None:
        """Printed detuning and gate time must satisfy ``delta * tau = 2 pi``."""
        prod = self.delta * self.gate_time_s
        if abs(prod / (2 * math.pi) - 1.0) > rtol:
            raise ValueError(f"delta * tau = {prod:.5f}, expected 2 pi")


PAPER = PaperPreset()
PRESETS = {"paper": PAPER}
