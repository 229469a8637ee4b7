"""Piecewise-constant laser profiles and their complex-potential equivalents.

A weakly driven two-level atom moving through a laser beam sees, after the
excited state is eliminated, the one-channel complex potential

    V = (hbar/2) Omega^2 / (2 Delta + i gamma)

whose negative imaginary part encodes photon scattering.  Both directions of
that map live here, together with the dimensionless ratios that bound where
the elimination is trustworthy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .units import AtomSpecies


@dataclass(frozen=True)
class Segment:
    """One constant-intensity slice of a laser profile.

    width in um, detuning in 1/us (hbar units absorbed), rabi in 1/us.
    """

    width: float
    detuning: float
    rabi: float

    def __post_init__(self):
        if not (self.width > 0):
            raise ValueError(f"segment width must be positive, got {self.width}")
        if self.rabi < 0:
            raise ValueError(f"Rabi frequency must be nonnegative, got {self.rabi}")


@dataclass(frozen=True)
class LaserProfile:
    """Contiguous segments starting at x_start, plus the species they address."""

    species: AtomSpecies
    x_start: float
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def total_length(self) -> float:
        return sum(s.width for s in self.segments)

    @property
    def x_end(self) -> float:
        return self.x_start + self.total_length

    def edges(self) -> list[float]:
        xs = [self.x_start]
        for s in self.segments:
            xs.append(xs[-1] + s.width)
        return xs


@dataclass(frozen=True)
class ComplexPotentialProfile:
    """Piecewise-constant complex potential; Im V <= 0 everywhere (absorbing)."""

    x_start: float
    values: tuple[tuple[float, complex], ...]   # (width, V)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple((float(w), complex(V)) for w, V in self.values))
        for w, V in self.values:
            if not (w > 0):
                raise ValueError(f"segment width must be positive, got {w}")
            if V.imag > 0:
                raise ValueError(f"amplifying potential (Im V = {V.imag} > 0) not representable")

    @property
    def total_length(self) -> float:
        return sum(w for w, _ in self.values)

    @property
    def x_end(self) -> float:
        return self.x_start + self.total_length

    def edges(self) -> list[float]:
        xs = [self.x_start]
        for w, _ in self.values:
            xs.append(xs[-1] + w)
        return xs


def potential_from_laser(segment: Segment, species: AtomSpecies) -> complex:
    """Eliminated-excited-state potential of one segment, in hbar/us."""
    denom = 2.0 * segment.detuning + 1j * species.gamma
    return 0.5 * segment.rabi ** 2 / denom


def laser_from_potential(value: complex, species: AtomSpecies) -> tuple[float, float]:
    """Invert potential_from_laser: V -> (detuning, rabi).

    Only strictly absorbing potentials (Im V < 0) correspond to a real
    laser; Im V = 0 would need an infinite or vanishing drive.
    """
    value = complex(value)
    if not (value.imag < 0):
        raise ValueError(
            f"non-absorbing potential has no laser realization (Im V = {value.imag})")
    gamma = species.gamma
    detuning = -gamma * value.real / (2.0 * value.imag)
    rabi = abs(value) * math.sqrt(2.0 * gamma / (-value.imag))
    return detuning, rabi


def profile_to_potential(profile: LaserProfile) -> ComplexPotentialProfile:
    values = tuple((s.width, potential_from_laser(s, profile.species))
                   for s in profile.segments)
    return ComplexPotentialProfile(x_start=profile.x_start, values=values)


def profile_from_potential(potential: ComplexPotentialProfile,
                           species: AtomSpecies) -> LaserProfile:
    segs = []
    for w, V in potential.values:
        detuning, rabi = laser_from_potential(V, species)
        segs.append(Segment(width=w, detuning=detuning, rabi=rabi))
    return LaserProfile(species=species, x_start=potential.x_start, segments=tuple(segs))


def weak_driving_ratio(segment: Segment, energy_max: float,
                       species: AtomSpecies) -> tuple[float, float]:
    """Validity ratios of the one-channel reduction for one segment.

    r_omega  = Omega / |2 Delta + i gamma|     (drive vs. level scale)
    r_energy = E_max / (|2 Delta + i gamma|/2) (kinetic vs. level scale)

    Both must stay well below 1; kappa = 0.2 is the default threshold.
    """
    if energy_max < 0:
        raise ValueError("energy_max must be nonnegative")
    scale = abs(2.0 * segment.detuning + 1j * species.gamma)
    return segment.rabi / scale, 2.0 * energy_max / scale


def profile_weak_driving(profile: LaserProfile,
                         energy_max: float) -> tuple[float, float, bool]:
    """Worst-case validity ratios over a profile and the kappa = 0.2 verdict."""
    r_om = r_en = 0.0
    for seg in profile.segments:
        a, b = weak_driving_ratio(seg, energy_max, profile.species)
        r_om = max(r_om, a)
        r_en = max(r_en, b)
    return r_om, r_en, (r_om <= 0.2 and r_en <= 0.2)


def segments_to_dicts(profile: LaserProfile) -> list[dict]:
    """Plain-dict form of the segments, in experimentalist units (um, 1/s)."""
    from .units import rate_internal_to_per_s
    return [
        {
            "width_um": s.width,
            "detuning_per_s": rate_internal_to_per_s(s.detuning),
            "rabi_per_s": rate_internal_to_per_s(s.rabi),
        }
        for s in profile.segments
    ]


def segments_from_dicts(rows: list[dict], species: AtomSpecies,
                        x_start: float = 0.0) -> LaserProfile:
    from .units import rate_per_s_to_internal
    segs = tuple(
        Segment(
            width=float(r["width_um"]),
            detuning=rate_per_s_to_internal(float(r["detuning_per_s"])),
            rabi=rate_per_s_to_internal(float(r["rabi_per_s"])),
        )
        for r in rows
    )
    return LaserProfile(species=species, x_start=x_start, segments=segs)
