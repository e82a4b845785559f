"""Source, amplifier, filter and fiber composition into per-pulse mode pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .photon_stats import BoseEinstein, LaguerreGauss, PhotonDistribution, Poisson

SMF_ATTENUATION = 0.2  # dB/km at 1550 nm
ULTRA_LOW_LOSS_ATTENUATION = 0.17  # dB/km


@dataclass(frozen=True)
class AmplifierSpec:
    """Phase-insensitive amplifier. ``chi=1`` is the quantum-limited (3 dB) case."""

    gain: float = 1.0
    chi: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.gain) or self.gain < 1.0:
            raise ValueError(f"gain must be >= 1, got {self.gain!r}")
        if not math.isfinite(self.chi) or self.chi < 1.0:
            raise ValueError(f"excess noise factor must be >= 1, got {self.chi!r}")

    @property
    def n_sp(self) -> float:
        return ase_mean(self)


@dataclass(frozen=True)
class FiberSpec:
    length_km: float = 0.0
    alpha_db_per_km: float = SMF_ATTENUATION

    def __post_init__(self):
        if not math.isfinite(self.length_km) or self.length_km < 0:
            raise ValueError(f"span length must be >= 0 km, got {self.length_km!r}")
        if not math.isfinite(self.alpha_db_per_km) or self.alpha_db_per_km <= 0:
            raise ValueError(f"attenuation must be > 0 dB/km, got {self.alpha_db_per_km!r}")

    @property
    def loss_db(self) -> float:
        return self.alpha_db_per_km * self.length_km


@dataclass(frozen=True)
class FilterSpec:
    """Matched optical filters at both enclaves.

    Out-of-band ASE and Raman light are treated as fully suppressed, so only
    the single-longitudinal-mode configuration is accepted.
    """

    single_longitudinal_mode: bool = True
    out_of_band_rejection_db: float = 30.0

    def __post_init__(self):
        if not self.single_longitudinal_mode:
            raise ValueError("only single longitudinal mode filtering is modeled")
        if self.out_of_band_rejection_db <= 0:
            raise ValueError("out-of-band rejection must be positive (dB)")


@dataclass(frozen=True)
class PolarizationSpec:
    p_pol: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.p_pol <= 0.5:
            raise ValueError(f"polarization error must lie in [0, 0.5], got {self.p_pol!r}")


@dataclass(frozen=True)
class ModePair:
    """Photon-number laws of the two polarization modes of one pulse."""

    signal: PhotonDistribution
    orth: PhotonDistribution

    @property
    def mean(self) -> float:
        return self.signal.mean + self.orth.mean

    @property
    def fidelity(self) -> float:
        total = self.mean
        if total == 0.0:
            raise ValueError("fidelity undefined for an empty pulse")
        return self.signal.mean / total


def ase_mean(amp: AmplifierSpec) -> float:
    """Mean ASE photons per polarization mode, ``chi * (G - 1)``."""
    return amp.chi * (amp.gain - 1.0)


def amplified_state(mu: float, amp: AmplifierSpec) -> ModePair:
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu!r}")
    if amp.gain == 1.0:
        return ModePair(Poisson(mu), Poisson(0.0))
    n_sp = ase_mean(amp)
    return ModePair(LaguerreGauss(amp.gain * mu, n_sp), BoseEinstein(n_sp))


def transmittance(fiber: FiberSpec) -> float:
    return 10.0 ** (-fiber.loss_db / 10.0)


def propagate(state: ModePair, eta: float) -> ModePair:
    return ModePair(state.signal.thin(eta), state.orth.thin(eta))
