"""Level schemes, decay parameters and unit conventions.

Every public interface in this package uses cyclic MHz for frequencies and
microseconds for times.  The factor 2*pi is applied exactly once, inside the
Hamiltonian builders in :mod:`stirapsim.dynamics`, which work in angular
rad/us.  Decay rates are plain 1/us (no 2*pi).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi

#: default weak/strong transition dipole moment ratio for the spin-flip
#: transitions of Tm3+:YAG
DEFAULT_WEAK_RATIO = 0.37


class Variant(enum.Enum):
    """Which level set a scheme models."""

    THREE_LEVEL = "three_level"
    FOUR_LEVEL_META = "four_level_meta"


class Role(enum.Enum):
    """Which of the two spectrally prepared ion ensembles is simulated.

    STOKES_ON_STRONG: the Stokes field is (near) resonant with the strong
    |3>-|4> transition and the pump with the weak |1>-|4> one.
    STOKES_ON_WEAK is the opposite pairing, with |2> as the shared excited
    level.
    """

    STOKES_ON_STRONG = "stokes_on_strong"
    STOKES_ON_WEAK = "stokes_on_weak"


@dataclass(frozen=True)
class LevelScheme:
    """Static level structure.

    Parameters
    ----------
    variant:
        THREE_LEVEL (bare lambda system: |1>, |2>, |3>) or FOUR_LEVEL_META
        (|1>, |3> ground Zeeman levels, |2>, |4> excited Zeeman levels plus
        the metastable reservoir |m>).
    ground_splitting:
        Ground-state Zeeman splitting E(|3>) - E(|1>), cyclic MHz.
    excited_splitting:
        Excited-state Zeeman splitting E(|2>) - E(|4>), cyclic MHz.
    dipole_weak_ratio:
        Dipole moment of the spin-flip (weak) transitions relative to the
        spin-preserving (strong) ones.
    """

    variant: Variant
    ground_splitting: float = 0.0
    excited_splitting: float = 0.0
    dipole_weak_ratio: float = DEFAULT_WEAK_RATIO

    def __post_init__(self) -> None:
        if self.ground_splitting < 0:
            raise ValueError("ground_splitting must be >= 0")
        if self.excited_splitting < 0:
            raise ValueError("excited_splitting must be >= 0")
        if not 0.0 < self.dipole_weak_ratio <= 1.0:
            raise ValueError("dipole_weak_ratio must be in (0, 1]")

    @classmethod
    def from_ground_splitting(
        cls,
        ground_splitting: float,
        variant: Variant = Variant.FOUR_LEVEL_META,
        dipole_weak_ratio: float = DEFAULT_WEAK_RATIO,
    ) -> "LevelScheme":
        """Scheme with the excited splitting derived as ground/2.5."""
        return cls(
            variant=variant,
            ground_splitting=ground_splitting,
            excited_splitting=ground_splitting / 2.5,
            dipole_weak_ratio=dipole_weak_ratio,
        )

    @property
    def n_levels(self) -> int:
        return 3 if self.variant is Variant.THREE_LEVEL else 5

    @property
    def labels(self) -> tuple[str, ...]:
        if self.variant is Variant.THREE_LEVEL:
            return ("1", "2", "3")
        return ("1", "2", "3", "4", "m")


@dataclass(frozen=True)
class DecayParams:
    """Population and coherence decay constants.

    Lifetimes in us, dephasing rates in 1/us.  ``meta_branch`` is the
    fraction of excited-state decay routed to the metastable reservoir;
    the remainder goes to the ground levels split proportionally to the
    squared transition dipole.  ``meta_branch_g1`` is the fraction of
    metastable decay landing in |1> (the rest lands in |3>).
    """

    excited_lifetime: float = 800.0
    meta_lifetime: float = 10_000.0
    meta_branch: float = 0.75
    optical_dephasing: float = 0.01
    spin_dephasing: float = 0.004
    meta_branch_g1: float = 0.5

    def __post_init__(self) -> None:
        if not self.excited_lifetime > 0:
            raise ValueError("excited_lifetime must be > 0")
        if not self.meta_lifetime > 0:
            raise ValueError("meta_lifetime must be > 0")
        if not 0.0 <= self.meta_branch <= 1.0:
            raise ValueError("meta_branch must be in [0, 1]")
        if self.optical_dephasing < 0 or self.spin_dephasing < 0:
            raise ValueError("dephasing rates must be >= 0")
        if not 0.0 <= self.meta_branch_g1 <= 1.0:
            raise ValueError("meta_branch_g1 must be in [0, 1]")

    @classmethod
    def disabled(cls) -> "DecayParams":
        """Fully coherent dynamics (infinite lifetimes, no dephasing)."""
        return cls(
            excited_lifetime=math.inf,
            meta_lifetime=math.inf,
            optical_dephasing=0.0,
            spin_dephasing=0.0,
        )


@dataclass(frozen=True)
class FieldToScheme:
    """Magnetic-field-to-splitting conversion rates, MHz per tesla."""

    ground_per_tesla: float = 41.0
    excited_per_tesla: float = 16.0
    raman_fwhm_per_tesla: float = 0.4

    def __post_init__(self) -> None:
        if min(self.ground_per_tesla, self.excited_per_tesla, self.raman_fwhm_per_tesla) <= 0:
            raise ValueError("conversion rates must be strictly positive")


DEFAULT_FIELD_CONVERSION = FieldToScheme()


def scheme_from_field(
    field_tesla: float,
    conversion: FieldToScheme = DEFAULT_FIELD_CONVERSION,
    dipole_weak_ratio: float = DEFAULT_WEAK_RATIO,
) -> tuple[LevelScheme, float]:
    """Four-level scheme and Raman inhomogeneous FWHM for an applied field.

    Returns ``(scheme, raman_fwhm)`` with splittings ``41*B`` / ``16*B`` and
    ``raman_fwhm = 0.4*B`` (all cyclic MHz) for the default conversion.
    """
    if field_tesla < 0:
        raise ValueError("magnetic field must be >= 0")
    scheme = LevelScheme(
        variant=Variant.FOUR_LEVEL_META,
        ground_splitting=conversion.ground_per_tesla * field_tesla,
        excited_splitting=conversion.excited_per_tesla * field_tesla,
        dipole_weak_ratio=dipole_weak_ratio,
    )
    return scheme, conversion.raman_fwhm_per_tesla * field_tesla
