"""Gaussian pump/Stokes pulse pair.

The pulse width is specified as the FWHM of the *intensity* profile; the
Rabi frequency (amplitude) envelope is then a Gaussian whose FWHM is
sqrt(2) times wider.  Envelopes are truncated to exactly zero beyond four
amplitude-FWHMs from their centre (tail < 1e-19 of peak), which bounds the
integration window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .levels import DEFAULT_WEAK_RATIO

LN2 = math.log(2.0)

#: default intensity FWHM, us
DEFAULT_INTENSITY_FWHM = 30.0 / math.sqrt(2.0)

#: envelopes are zero beyond this many amplitude-FWHMs from centre
TRUNCATION_FWHMS = 4.0


@dataclass(frozen=True)
class PulsePair:
    """Delayed Gaussian pump/Stokes envelope pair.

    ``peak_rabi_strong`` is the peak Rabi frequency either field produces on
    a *strong* transition (cyclic MHz); per-transition scaling by the weak
    dipole ratio is applied by the Hamiltonian builder, not here.  ``delay``
    is Stokes centre minus pump centre, so negative means Stokes first.
    ``stokes_saturation``, when set, caps the Stokes amplitude with
    ``om -> sat * tanh(om / sat)`` to mimic modulator saturation.
    """

    peak_rabi_strong: float
    intensity_fwhm: float = DEFAULT_INTENSITY_FWHM
    delay: float = -17.0
    pump_center: float = 0.0
    dipole_weak_ratio: float = DEFAULT_WEAK_RATIO
    stokes_saturation: float | None = None

    def __post_init__(self) -> None:
        if not self.intensity_fwhm > 0:
            raise ValueError("intensity_fwhm must be > 0")
        if self.peak_rabi_strong < 0:
            raise ValueError("peak_rabi_strong must be >= 0")
        if not 0.0 < self.dipole_weak_ratio <= 1.0:
            raise ValueError("dipole_weak_ratio must be in (0, 1]")
        if self.stokes_saturation is not None and not self.stokes_saturation > 0:
            raise ValueError("stokes_saturation must be > 0 when set")

    @property
    def amplitude_fwhm(self) -> float:
        """FWHM of the Rabi-frequency envelope, us."""
        return math.sqrt(2.0) * self.intensity_fwhm

    @property
    def stokes_center(self) -> float:
        return self.pump_center + self.delay

    @property
    def truncation_halfwidth(self) -> float:
        return TRUNCATION_FWHMS * self.amplitude_fwhm


def envelope(t, center: float, pair: PulsePair):
    """Gaussian Rabi envelope of one pulse, cyclic MHz.

    ``om(t) = peak * exp(-4 ln2 (t - center)^2 / W^2)`` with W the amplitude
    FWHM, truncated to zero beyond the support window.  Accepts scalar or
    array ``t``.
    """
    w = pair.amplitude_fwhm
    x = np.asarray(t, dtype=float) - center
    out = pair.peak_rabi_strong * np.exp(-4.0 * LN2 * x * x / (w * w))
    out = np.where(np.abs(x) <= pair.truncation_halfwidth, out, 0.0)
    if np.isscalar(t):
        return float(out)
    return out


def _saturate(om, sat: float | None):
    if sat is None:
        return om
    return sat * np.tanh(np.asarray(om, dtype=float) / sat)


def rabi_at(t, pair: PulsePair):
    """Pump and Stokes Rabi frequencies at time ``t``.

    Both are reported at the strong-transition scale; the optional Stokes
    saturation transform is applied here.
    """
    om_p = envelope(t, pair.pump_center, pair)
    om_s = envelope(t, pair.stokes_center, pair)
    om_s = _saturate(om_s, pair.stokes_saturation)
    if np.isscalar(t):
        return float(om_p), float(om_s)
    return om_p, om_s


def envelope_derivative(t: float, center: float, pair: PulsePair) -> float:
    """d(envelope)/dt of one pulse at scalar ``t`` (analytic)."""
    w = pair.amplitude_fwhm
    x = t - center
    if abs(x) > pair.truncation_halfwidth:
        return 0.0
    om = pair.peak_rabi_strong * math.exp(-4.0 * LN2 * x * x / (w * w))
    return -8.0 * LN2 * x / (w * w) * om


def rabi_derivatives_at(t: float, pair: PulsePair) -> tuple[float, float]:
    """Analytic time derivatives of (pump, Stokes) Rabi frequencies."""
    dp = envelope_derivative(t, pair.pump_center, pair)
    ds = envelope_derivative(t, pair.stokes_center, pair)
    if pair.stokes_saturation is not None:
        om_s = envelope(t, pair.stokes_center, pair)
        ds *= 1.0 / math.cosh(om_s / pair.stokes_saturation) ** 2
    return dp, ds


def effective_rabi(omega_pump: float, omega_stokes: float) -> float:
    """Euclidean norm of the two Rabi frequencies."""
    if omega_pump < 0 or omega_stokes < 0:
        raise ValueError("Rabi frequencies must be >= 0")
    return math.hypot(omega_pump, omega_stokes)
