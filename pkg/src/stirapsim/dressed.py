"""Closed-form dressed-state diagnostics for the 3-level lambda system.

All quantities use the package-wide cyclic MHz / us convention; the
adiabaticity ratios deliberately compare |d(theta)/dt| (1/us) against the
dressed-state gaps in cyclic MHz with no 2*pi factor, i.e. the same cyclic
algebra the global conditions use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .levels import Role
from .pulses import PulsePair, rabi_at, rabi_derivatives_at


class UndefinedMixingAngleError(ValueError):
    """Both Rabi frequencies are zero; the mixing angle is 0/0."""


def field_scales(role: Role, weak_ratio: float) -> tuple[float, float]:
    """(pump, Stokes) dipole scaling factors for the given ensemble role."""
    if role is Role.STOKES_ON_STRONG:
        return weak_ratio, 1.0
    return 1.0, weak_ratio


@dataclass(frozen=True)
class MixingAngles:
    theta: float  # radians, atan2(omega_pump, omega_stokes)
    phi: float  # radians, 0.5 * atan2(sqrt(op^2 + os^2), detuning)


@dataclass(frozen=True)
class DressedSystem:
    """Dressed eigenvectors (over bare |1>, |2>, |3>) and eigenvalues (MHz)."""

    a_plus: np.ndarray
    a_zero: np.ndarray
    a_minus: np.ndarray
    w_plus: float
    w_zero: float
    w_minus: float


@dataclass(frozen=True)
class LocalAdiabaticity:
    coupling: float  # |d(theta)/dt|, 1/us
    gap_upper: float  # |w_plus|, MHz
    gap_lower: float  # |w_minus|, MHz
    ratio: float  # coupling / min(gaps); small means adiabatic


@dataclass(frozen=True)
class GlobalConditions:
    near_resonance_product: float  # Omega_eff * tau, dimensionless
    far_resonance_lhs: float  # Omega_eff^2 * tau, MHz
    far_resonance_rhs: float  # |optical detuning|, MHz


def mixing_angles(
    omega_pump: float, omega_stokes: float, optical_detuning: float
) -> MixingAngles:
    """Mixing angles of the instantaneous dressed basis."""
    if omega_pump == 0.0 and omega_stokes == 0.0:
        raise UndefinedMixingAngleError("mixing angle undefined for zero fields")
    theta = math.atan2(omega_pump, omega_stokes)
    phi = 0.5 * math.atan2(math.hypot(omega_pump, omega_stokes), optical_detuning)
    return MixingAngles(theta=theta, phi=phi)


def eigenvalues(
    omega_pump: float, omega_stokes: float, optical_detuning: float
) -> tuple[float, float, float]:
    """(w_plus, 0, w_minus) dressed eigenvalues in cyclic MHz."""
    root = math.sqrt(optical_detuning**2 + omega_pump**2 + omega_stokes**2)
    return 0.5 * (optical_detuning + root), 0.0, 0.5 * (optical_detuning - root)


def dressed_system(
    omega_pump: float, omega_stokes: float, optical_detuning: float
) -> DressedSystem:
    """Instantaneous dressed eigenvectors and eigenvalues.

    The dark vector has exactly zero |2> component and is independent of the
    optical detuning by construction.
    """
    ang = mixing_angles(omega_pump, omega_stokes, optical_detuning)
    st, ct = math.sin(ang.theta), math.cos(ang.theta)
    sp, cp = math.sin(ang.phi), math.cos(ang.phi)
    a_plus = np.array([st * sp, cp, ct * sp])
    a_zero = np.array([ct, 0.0, -st])
    a_minus = np.array([st * cp, -sp, ct * cp])
    w_plus, w_zero, w_minus = eigenvalues(omega_pump, omega_stokes, optical_detuning)
    return DressedSystem(a_plus, a_zero, a_minus, w_plus, w_zero, w_minus)


def _scaled_fields(pair: PulsePair, t: float, role: Role) -> tuple[float, float, float, float]:
    scale_p, scale_s = field_scales(role, pair.dipole_weak_ratio)
    om_p, om_s = rabi_at(t, pair)
    dp, ds = rabi_derivatives_at(t, pair)
    return scale_p * om_p, scale_s * om_s, scale_p * dp, scale_s * ds


def adiabaticity_local(
    pair: PulsePair,
    t: float,
    optical_detuning: float,
    role: Role = Role.STOKES_ON_STRONG,
) -> LocalAdiabaticity:
    """Local adiabaticity check at time ``t``.

    The nonadiabatic coupling is the analytic
    ``|(dOp*Os - Op*dOs) / (Op^2 + Os^2)| = |d(theta)/dt|`` evaluated with
    the role-scaled Gaussian envelopes and their exact derivatives; the gaps
    are the magnitudes of the bright-state eigenvalues.
    """
    op, os_, dp, ds = _scaled_fields(pair, t, role)
    denom = op * op + os_ * os_
    if denom == 0.0:
        raise UndefinedMixingAngleError(f"both envelopes are zero at t={t}")
    coupling = abs(dp * os_ - op * ds) / denom
    w_plus, _, w_minus = eigenvalues(op, os_, optical_detuning)
    gap_upper, gap_lower = abs(w_plus), abs(w_minus)
    return LocalAdiabaticity(
        coupling=coupling,
        gap_upper=gap_upper,
        gap_lower=gap_lower,
        ratio=coupling / min(gap_upper, gap_lower),
    )


def global_conditions(
    pair: PulsePair,
    optical_detuning: float,
    role: Role = Role.STOKES_ON_STRONG,
) -> GlobalConditions:
    """Pulse-level adiabaticity figures of merit.

    Uses the peak effective Rabi frequency of the strong/weak pairing and
    tau = the intensity FWHM, evaluated in cyclic units throughout.
    """
    scale_p, scale_s = field_scales(role, pair.dipole_weak_ratio)
    peak_p = scale_p * pair.peak_rabi_strong
    peak_s = scale_s * pair.peak_rabi_strong
    if pair.stokes_saturation is not None:
        peak_s = pair.stokes_saturation * math.tanh(peak_s / pair.stokes_saturation)
    om_eff = math.hypot(peak_p, peak_s)
    tau = pair.intensity_fwhm
    return GlobalConditions(
        near_resonance_product=om_eff * tau,
        far_resonance_lhs=om_eff * om_eff * tau,
        far_resonance_rhs=abs(optical_detuning),
    )


def theta_profile(pair: PulsePair, ts, role: Role = Role.STOKES_ON_STRONG) -> np.ndarray:
    """Mixing angle theta over a time grid, for diagnostics/plotting.

    Where both envelopes are truncated to zero the angle is held at its last
    defined value (theta is 0/0 there and the dynamics do not depend on it).
    """
    scale_p, scale_s = field_scales(role, pair.dipole_weak_ratio)
    out = np.empty(len(ts))
    last = 0.0
    for i, t in enumerate(ts):
        om_p, om_s = rabi_at(float(t), pair)
        p, s = scale_p * om_p, scale_s * om_s
        if p == 0.0 and s == 0.0:
            out[i] = last
        else:
            last = math.atan2(p, s)
            out[i] = last
    return out
