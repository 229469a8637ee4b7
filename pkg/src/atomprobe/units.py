"""Unit system and atomic species data.

Internally everything is expressed in hbar = 1 units with lengths in
micrometres and times in microseconds: energies carry units of hbar/us,
wavenumbers um^-1, and the only species-dependent constant is m/hbar in
us/um^2.  Conversions to experimentalist units (cm/s, s^-1, nm) happen
only at public entry points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

# SI constants used to build species data.
HBAR_SI = 1.0546e-34        # J s
CS_MASS_SI = 2.2069e-25     # kg, cesium-133
CS_GAMMA_PER_S = 33.3e6     # 1/s, D2 line decay rate
CS_LAMBDA_UM = 0.852        # um, D2 transition

# Exact decimal scale factors between unit systems.
CM_PER_S_TO_UM_PER_US = 1e-2    # 1 cm/s = 0.01 um/us
PER_S_TO_PER_US = 1e-6
NM_TO_UM = 1e-3
# (m/hbar) in s/m^2  ->  us/um^2
SI_MASS_OVER_HBAR_TO_INTERNAL = 1e-6


@dataclass(frozen=True)
class AtomSpecies:
    """Atomic constants in internal units.

    mass_over_hbar : m/hbar in us/um^2
    gamma          : excited-state decay rate in 1/us
    lambda_laser   : transition wavelength in um
    """

    name: str
    mass_over_hbar: float
    gamma: float
    lambda_laser: float

    def __post_init__(self):
        if self.mass_over_hbar <= 0:
            raise ValueError("mass_over_hbar must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.lambda_laser <= 0:
            raise ValueError("lambda_laser must be positive")


def species_from_si(name: str, mass_kg: float, gamma_per_s: float,
                    lambda_nm: float) -> AtomSpecies:
    """Build an AtomSpecies from SI constants."""
    return AtomSpecies(
        name=name,
        mass_over_hbar=(mass_kg / HBAR_SI) * SI_MASS_OVER_HBAR_TO_INTERNAL,
        gamma=gamma_per_s * PER_S_TO_PER_US,
        lambda_laser=lambda_nm * NM_TO_UM,
    )


def cesium_default() -> AtomSpecies:
    """Cesium-133 on the D2 line (852 nm, gamma = 33.3e6 s^-1)."""
    return AtomSpecies(
        name="cesium",
        mass_over_hbar=(CS_MASS_SI / HBAR_SI) * SI_MASS_OVER_HBAR_TO_INTERNAL,
        gamma=CS_GAMMA_PER_S * PER_S_TO_PER_US,
        lambda_laser=CS_LAMBDA_UM,
    )


def velocity_cm_s_to_internal(v_cm_s: float) -> float:
    return v_cm_s * CM_PER_S_TO_UM_PER_US


def velocity_internal_to_cm_s(v: float) -> float:
    return v / CM_PER_S_TO_UM_PER_US


def rate_per_s_to_internal(rate_per_s: float) -> float:
    return rate_per_s * PER_S_TO_PER_US


def rate_internal_to_per_s(rate: float) -> float:
    return rate / PER_S_TO_PER_US


def velocity_to_wavenumber(v_cm_s: float, species: AtomSpecies) -> float:
    """k = (m/hbar) v for v given in cm/s; returns k in um^-1.

    Only positive velocities describe an incident beam.
    """
    if v_cm_s <= 0:
        raise ValueError(f"velocity must be positive, got {v_cm_s} cm/s")
    return species.mass_over_hbar * velocity_cm_s_to_internal(v_cm_s)


def wavenumber_to_velocity(k: float, species: AtomSpecies) -> float:
    """Inverse of velocity_to_wavenumber; returns cm/s."""
    if k <= 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    return velocity_internal_to_cm_s(k / species.mass_over_hbar)


def kinetic_energy(k: float, species: AtomSpecies) -> float:
    """E(k) = k^2 / (2 m/hbar), in units of hbar/us."""
    return k * k / (2.0 * species.mass_over_hbar)


def recoil_velocity(species: AtomSpecies) -> float:
    """Single-photon recoil velocity hbar k_laser / m, in cm/s."""
    k_laser = 2.0 * math.pi / species.lambda_laser
    return velocity_internal_to_cm_s(k_laser / species.mass_over_hbar)
