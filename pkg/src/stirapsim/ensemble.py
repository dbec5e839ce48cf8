"""Averaging over the Gaussian inhomogeneous distribution of two-photon
detunings (the "+" variants of the level models).

The quadrature is a uniform node grid across +/- ``span`` standard
deviations with trapezoid weights times the Gaussian density, normalized to
unit total weight.  For two-photon scans the bare detuning profile is
evaluated once on a refined lattice aligned with the scan grid and convolved
per scan point (the same filter construction for every mean detuning);
delay/optical/Rabi scans average full dynamics over the detuning nodes at
each scan point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import map_ordered
from .analysis import SCAN_KINDS, ScanResult, _efficiency_task, point_config
from .dynamics import DEFAULT_PROBE_DELAY, DriveConfig
from .levels import Role

_SIGMA_PER_FWHM = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

_BOTH_ROLES = (Role.STOKES_ON_STRONG, Role.STOKES_ON_WEAK)


class EnsembleNodeError(ValueError):
    """A profile evaluation returned a non-finite value at some node."""


@dataclass(frozen=True)
class EnsembleSpec:
    """Gaussian distribution of two-photon detunings.

    ``fwhm`` is the inhomogeneous width (cyclic MHz), ``mean`` the centre,
    ``n_nodes`` the quadrature node count (odd, so the centre is a node) and
    ``span`` the integration half-width in standard deviations.
    """

    fwhm: float
    mean: float = 0.0
    n_nodes: int = 41
    span: float = 3.0

    def __post_init__(self):
        if self.fwhm < 0:
            raise ValueError("fwhm must be >= 0")
        if self.n_nodes < 5 or self.n_nodes % 2 == 0:
            raise ValueError("n_nodes must be odd and >= 5")
        if self.span < 2:
            raise ValueError("span must be >= 2")

    @property
    def sigma(self) -> float:
        return self.fwhm * _SIGMA_PER_FWHM


def quadrature_offsets(spec: EnsembleSpec) -> tuple[np.ndarray, np.ndarray]:
    """Node offsets from the mean and normalized weights."""
    if spec.fwhm == 0.0:
        return np.array([0.0]), np.array([1.0])
    sigma = spec.sigma
    xs = np.linspace(-spec.span * sigma, spec.span * sigma, spec.n_nodes)
    w = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    w[0] *= 0.5
    w[-1] *= 0.5
    return xs, w / w.sum()


def average(profile, spec: EnsembleSpec) -> float:
    """Weighted quadrature of ``profile(delta)`` against the distribution."""
    offsets, weights = quadrature_offsets(spec)
    acc = 0.0
    for off, wt in zip(offsets, weights):
        delta = spec.mean + off
        val = float(profile(delta))
        if not math.isfinite(val):
            raise EnsembleNodeError(f"profile returned {val} at delta = {delta}")
        acc += wt * val
    return acc


def _convolution_lattice(xs: np.ndarray, spec: EnsembleSpec):
    """Fine evaluation lattice plus window offsets/weights for a uniform scan."""
    steps = np.diff(xs)
    h_scan = float(steps[0])
    if np.any(np.abs(steps - h_scan) > 1e-9 * abs(h_scan)):
        raise ValueError("two-photon averaged scans need a uniform grid")
    sigma = spec.sigma
    target = 2.0 * spec.span * sigma / (spec.n_nodes - 1)
    m_ref = max(1, math.ceil(abs(h_scan) / target - 1e-12))
    h_fine = h_scan / m_ref
    k_half = math.ceil(spec.span * sigma / abs(h_fine) - 1e-12)
    count = (len(xs) - 1) * m_ref + 2 * k_half + 1
    fine = xs[0] - k_half * h_fine + h_fine * np.arange(count)
    offs = h_fine * np.arange(-k_half, k_half + 1)
    w = np.exp(-(offs * offs) / (2.0 * sigma * sigma))
    w[0] *= 0.5
    w[-1] *= 0.5
    return fine, m_ref, k_half, w / w.sum()


def averaged_scan(
    kind: str,
    cfg: DriveConfig,
    spec: EnsembleSpec,
    xs,
    *,
    workers: int = 1,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    probe_delay: float = DEFAULT_PROBE_DELAY,
    include_both_roles: bool = False,
) -> ScanResult:
    """Inhomogeneously averaged scan of ``kind`` over grid ``xs``.

    For ``kind="two_photon"`` the x values are the *mean* two-photon
    detunings of the distribution.
    """
    if kind not in SCAN_KINDS:
        raise ValueError(f"unknown scan kind {kind!r}")
    xs = np.asarray([float(x) for x in xs])
    roles = _BOTH_ROLES if include_both_roles else (cfg.role,)
    name, units = SCAN_KINDS[kind]

    if kind == "two_photon" and spec.fwhm > 0.0 and len(xs) >= 2:
        fine, m_ref, k_half, weights = _convolution_lattice(xs, spec)
        tasks = [
            (point_config(cfg, "two_photon", spec.mean + d), roles, rtol, atol, probe_delay,
             f"two_photon_detuning={spec.mean + d!r}")
            for d in fine
        ]
        vals = np.array(map_ordered(_efficiency_task, tasks, workers))
        effs = [
            float(weights @ vals[i * m_ref : i * m_ref + 2 * k_half + 1])
            for i in range(len(xs))
        ]
    else:
        offsets, weights = quadrature_offsets(spec)
        tasks = []
        for x in xs:
            for off in offsets:
                if kind == "two_photon":
                    pc = point_config(cfg, kind, x + spec.mean + off)
                else:
                    pc = point_config(cfg, kind, x, two_photon=spec.mean + off)
                tasks.append((pc, roles, rtol, atol, probe_delay,
                              f"{name}={x!r} node_detuning={spec.mean + off!r}"))
        vals = np.array(map_ordered(_efficiency_task, tasks, workers)).reshape(len(xs), -1)
        effs = [float(v) for v in vals @ weights]

    clipped = [min(1.05, max(-0.05, e)) for e in effs]
    return ScanResult(
        parameter=name,
        units=units,
        x=tuple(float(x) for x in xs),
        efficiency=tuple(clipped),
        config=cfg,
        ensemble=spec,
        averaged=tuple(spec.fwhm > 0.0 for _ in xs),
    )
