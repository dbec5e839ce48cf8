"""Observables: transfer efficiency, parameter scans, linewidths, fits and
probe-spectrum feature prediction."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._parallel import map_ordered
from .dynamics import DEFAULT_PROBE_DELAY, DriveConfig, Trajectory, default_window, evolve
from .levels import LevelScheme, Role, Variant
from .pulses import LN2

EFFICIENCY_MIN = -0.05
EFFICIENCY_MAX = 1.05

KIND_STIRAP_ABSORPTION = "stirap-absorption"
KIND_STIRAP_TRANSMISSION = "stirap-transmission"
KIND_PREP_ABSORPTION = "prep-absorption"
KIND_PREP_TRANSMISSION = "prep-transmission"

_BOTH_ROLES = (Role.STOKES_ON_STRONG, Role.STOKES_ON_WEAK)

#: scan kind -> (parameter name, units)
SCAN_KINDS = {
    "delay": ("delay", "us"),
    "optical": ("optical_detuning", "mhz"),
    "two_photon": ("two_photon_detuning", "mhz"),
    "rabi": ("rabi", "mhz"),
}


class FwhmNotResolvableError(ValueError):
    """The scan does not cross half maximum on one of the peak's sides."""


@dataclass(frozen=True)
class ScanResult:
    """Ordered (parameter value, transfer efficiency) points plus metadata."""

    parameter: str
    units: str
    x: tuple[float, ...]
    efficiency: tuple[float, ...]
    config: DriveConfig
    ensemble: object = None  # EnsembleSpec when the points are averaged
    averaged: tuple[bool, ...] = ()

    def __post_init__(self):
        if len(self.x) != len(self.efficiency):
            raise ValueError("x and efficiency length mismatch")
        dx = np.diff(self.x)
        if len(dx) and not (np.all(dx > 0) or np.all(dx < 0)):
            raise ValueError("scan x values must be strictly monotone")
        if self.averaged and len(self.averaged) != len(self.x):
            raise ValueError("averaged flags length mismatch")
        for e in self.efficiency:
            if not (EFFICIENCY_MIN - 1e-12 <= e <= EFFICIENCY_MAX + 1e-12):
                raise ValueError(f"efficiency {e} outside reporting range")

    @property
    def column_name(self) -> str:
        return f"{self.parameter}_{self.units}"


@dataclass(frozen=True)
class GaussianFit:
    amplitude: float
    center: float
    fwhm: float
    offset: float
    residual_norm: float
    converged: bool
    n_iterations: int = 0


@dataclass(frozen=True)
class SpectrumFeature:
    frequency: float  # MHz, same reference as nu_s/nu_p inputs
    kind: str
    contributors: tuple[Role, ...]
    small: bool


def transfer_efficiency(traj: Trajectory, t_probe: float) -> float:
    """Probe-visible transfer efficiency at ``t_probe``.

    The probe measures the population difference between the target ground
    level |3> and the excited level it shares a transition with, so
    ``eta = P3 - P_excited`` clamped to the reporting range.
    """
    pops = traj.populations_at(t_probe)
    eta = float(pops[2] - pops[traj.probed_excited_index])
    return min(EFFICIENCY_MAX, max(EFFICIENCY_MIN, eta))


def point_config(base: DriveConfig, kind: str, x: float, two_photon: float | None = None) -> DriveConfig:
    """Per-point configuration for a scan of ``kind`` at value ``x``.

    Delay and Rabi scans run at optical and two-photon resonance; the
    optical scan at two-photon resonance; the two-photon scan at optical
    resonance.  ``two_photon`` overrides the two-photon detuning afterwards
    (used by the inhomogeneous averaging).
    """
    if kind == "delay":
        cfg = replace(base, optical_detuning=0.0, two_photon_detuning=0.0,
                      pair=replace(base.pair, delay=x))
    elif kind == "optical":
        cfg = replace(base, optical_detuning=x, two_photon_detuning=0.0)
    elif kind == "two_photon":
        cfg = replace(base, optical_detuning=0.0, two_photon_detuning=x)
    elif kind == "rabi":
        cfg = replace(base, optical_detuning=0.0, two_photon_detuning=0.0,
                      pair=replace(base.pair, peak_rabi_strong=x))
    else:
        raise ValueError(f"unknown scan kind {kind!r}")
    if two_photon is not None and kind != "two_photon":
        cfg = replace(cfg, two_photon_detuning=two_photon)
    return cfg


def _efficiency_task(args) -> float:
    cfg, roles, rtol, atol, probe_delay, label = args
    from .dynamics import IntegrationError

    acc = 0.0
    for role in roles:
        c = replace(cfg, role=role)
        window = default_window(c, probe_delay)
        try:
            traj = evolve(c, window=window, t_samples=np.array([window[1]]), rtol=rtol, atol=atol)
        except IntegrationError as exc:
            raise IntegrationError(exc.t, f"at scan point {label}: {exc}") from exc
        acc += transfer_efficiency(traj, window[1])
    return acc / len(roles)


def _run_scan(
    base: DriveConfig,
    kind: str,
    xs,
    workers: int,
    rtol: float,
    atol: float,
    probe_delay: float,
    include_both_roles: bool,
) -> ScanResult:
    xs = [float(x) for x in xs]
    roles = _BOTH_ROLES if include_both_roles else (base.role,)
    name, units = SCAN_KINDS[kind]
    tasks = [
        (point_config(base, kind, x), roles, rtol, atol, probe_delay, f"{name}={x!r}")
        for x in xs
    ]
    effs = map_ordered(_efficiency_task, tasks, workers)
    return ScanResult(
        parameter=name,
        units=units,
        x=tuple(xs),
        efficiency=tuple(effs),
        config=base,
        averaged=tuple(False for _ in xs),
    )


def scan_delay(cfg, delays, *, workers=1, rtol=1e-8, atol=1e-10,
               probe_delay=DEFAULT_PROBE_DELAY, include_both_roles=False) -> ScanResult:
    """Transfer efficiency vs Stokes-pump delay at full resonance."""
    return _run_scan(cfg, "delay", delays, workers, rtol, atol, probe_delay, include_both_roles)


def scan_optical(cfg, detunings, *, workers=1, rtol=1e-8, atol=1e-10,
                 probe_delay=DEFAULT_PROBE_DELAY, include_both_roles=False) -> ScanResult:
    """Transfer efficiency vs optical detuning at two-photon resonance."""
    return _run_scan(cfg, "optical", detunings, workers, rtol, atol, probe_delay, include_both_roles)


def scan_two_photon(cfg, detunings, *, workers=1, rtol=1e-8, atol=1e-10,
                    probe_delay=DEFAULT_PROBE_DELAY, include_both_roles=False) -> ScanResult:
    """Transfer efficiency vs two-photon detuning at optical resonance."""
    return _run_scan(cfg, "two_photon", detunings, workers, rtol, atol, probe_delay, include_both_roles)


def scan_rabi(cfg, peaks, *, workers=1, rtol=1e-8, atol=1e-10,
              probe_delay=DEFAULT_PROBE_DELAY, include_both_roles=False) -> ScanResult:
    """Transfer efficiency vs peak strong-transition Rabi frequency."""
    return _run_scan(cfg, "rabi", peaks, workers, rtol, atol, probe_delay, include_both_roles)


def fwhm_xy(x, y) -> float:
    """Full width at half maximum from sampled points.

    Half maximum is taken between the peak and the smaller of the two scan
    edge values (diabatic wings leave nonzero floors); crossings are located
    by linear interpolation moving outward from the peak.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ip = int(np.argmax(y))
    if ip == 0 or ip == len(y) - 1:
        raise FwhmNotResolvableError("maximum lies on a scan edge")
    baseline = min(y[0], y[-1])
    if y[ip] <= baseline:
        raise FwhmNotResolvableError("no peak above the edge baseline")
    half = baseline + 0.5 * (y[ip] - baseline)

    def crossing(direction: int) -> float:
        k = ip
        while 0 <= k + direction < len(y):
            k += direction
            if y[k] < half:
                x0, x1 = x[k], x[k - direction]
                y0, y1 = y[k], y[k - direction]
                return x0 + (half - y0) * (x1 - x0) / (y1 - y0)
        side = "left" if direction < 0 else "right"
        raise FwhmNotResolvableError(f"half maximum not crossed on the {side} side")

    return float(abs(crossing(+1) - crossing(-1)))


def fwhm(scan: ScanResult) -> float:
    """FWHM of a scan, in the scan's x units."""
    return fwhm_xy(scan.x, scan.efficiency)


def peak_location(scan: ScanResult) -> float:
    """Peak x position, parabolic refinement around the maximum sample."""
    x = np.asarray(scan.x, dtype=float)
    y = np.asarray(scan.efficiency, dtype=float)
    ip = int(np.argmax(y))
    if ip == 0 or ip == len(y) - 1:
        return float(x[ip])
    denom = y[ip - 1] - 2.0 * y[ip] + y[ip + 1]
    if denom >= 0:
        return float(x[ip])
    shift = 0.5 * (y[ip - 1] - y[ip + 1]) / denom
    return float(x[ip] + shift * (x[ip + 1] - x[ip]))


def _gauss_model(p, x):
    a, c, w, b = p
    w2 = w * w if w != 0.0 else 1e-24
    u = x - c
    e = np.exp(-4.0 * LN2 * u * u / w2)
    f = a * e + b
    jac = np.column_stack(
        [
            e,
            a * e * 8.0 * LN2 * u / w2,
            a * e * 8.0 * LN2 * u * u / (w2 * (w if w != 0.0 else 1e-12)),
            np.ones_like(x),
        ]
    )
    return f, jac


def fit_gaussian_xy(x, y, max_iter: int = 200, step_tol: float = 1e-10) -> GaussianFit:
    """Levenberg-Marquardt fit of ``a*exp(-4 ln2 (x-c)^2/w^2) + b``.

    Initialized from the peak sample, an interpolated FWHM and the edge
    offset; analytic Jacobian; converged when the relative step drops below
    ``step_tol``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 5:
        raise ValueError("gaussian fit needs at least 5 points")
    b0 = float(min(y[0], y[-1]))
    ip = int(np.argmax(y))
    a0 = float(y[ip] - b0)
    c0 = float(x[ip])
    try:
        w0 = fwhm_xy(x, y)
    except FwhmNotResolvableError:
        w0 = float(abs(x[-1] - x[0])) / 4.0
    p = np.array([a0, c0, w0, b0])

    f, jac = _gauss_model(p, x)
    r = f - y
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        a_mat = jac.T @ jac
        g = jac.T @ r
        d = np.diag(a_mat).copy()
        d[d <= 0] = 1.0
        try:
            step = np.linalg.solve(a_mat + lam * np.diag(d), -g)
        except np.linalg.LinAlgError:
            lam = min(lam * 10.0, 1e12)
            continue
        p_new = p + step
        f_new, jac_new = _gauss_model(p_new, x)
        r_new = f_new - y
        cost_new = float(r_new @ r_new)
        if cost_new <= cost:
            rel = float(np.linalg.norm(step)) / (float(np.linalg.norm(p)) + 1e-300)
            p, r, jac, cost = p_new, r_new, jac_new, cost_new
            lam = max(lam / 3.0, 1e-12)
            if rel < step_tol:
                converged = True
                break
        else:
            lam = min(lam * 10.0, 1e12)
    return GaussianFit(
        amplitude=float(p[0]),
        center=float(p[1]),
        fwhm=float(abs(p[2])),
        offset=float(p[3]),
        residual_norm=math.sqrt(cost),
        converged=converged,
        n_iterations=iterations,
    )


def fit_gaussian(scan: ScanResult, max_iter: int = 200, step_tol: float = 1e-10) -> GaussianFit:
    return fit_gaussian_xy(scan.x, scan.efficiency, max_iter=max_iter, step_tol=step_tol)


def beer_efficiency(i1: float, i2: float, i3: float) -> float:
    """Transfer efficiency from probe transmission levels.

    ``i1``: equal population in the two ground levels (absorbance reference
    for P3 = 1/2), ``i2``: transmission after the transfer sequence,
    ``i3``: transmission of the emptied level.  Absorbance ln(i3/i) is
    proportional to P3, so ``eta = ln(i3/i2) / (2 ln(i3/i1))``.
    """
    if min(i1, i2, i3) <= 0.0:
        raise ValueError("intensities must be positive")
    if not i3 > i1:
        raise ValueError("i3 (empty-level transmission) must exceed i1 (equal-population level)")
    if i2 > i3:
        raise ValueError("i2 cannot exceed the empty-level transmission i3")
    return math.log(i3 / i2) / (2.0 * math.log(i3 / i1))


def predict_spectrum_features(nu_s: float, nu_p: float, scheme: LevelScheme) -> list[SpectrumFeature]:
    """Probe-spectrum features produced by preparation plus the transfer pulses.

    Frequencies are on the same (relative) scale as ``nu_s``/``nu_p``.
    Requires the resonant preparation convention ``nu_p - nu_s`` equal to the
    ground splitting.  Satellite features at +/- the excited splitting carry
    exactly one contributing ensemble; degenerate splittings merge features.
    """
    if scheme.variant is not Variant.FOUR_LEVEL_META:
        raise ValueError("spectrum features require the four-level scheme")
    dg = scheme.ground_splitting
    de = scheme.excited_splitting
    if abs((nu_p - nu_s) - dg) > 1e-9 * max(1.0, abs(dg)):
        raise ValueError("nu_p - nu_s must equal the ground splitting (resonant preparation)")

    strong = (Role.STOKES_ON_STRONG,)
    weak = (Role.STOKES_ON_WEAK,)
    raw = [
        (nu_s, KIND_STIRAP_ABSORPTION, _BOTH_ROLES, False),
        (nu_s + de, KIND_STIRAP_ABSORPTION, strong, False),
        (nu_s - de, KIND_STIRAP_ABSORPTION, weak, True),
        (nu_p, KIND_STIRAP_TRANSMISSION, _BOTH_ROLES, False),
        (nu_p - de, KIND_STIRAP_TRANSMISSION, weak, False),
        (nu_p + de, KIND_STIRAP_TRANSMISSION, strong, True),
        (nu_s - dg, KIND_PREP_ABSORPTION, _BOTH_ROLES, False),
        (nu_s, KIND_PREP_TRANSMISSION, _BOTH_ROLES, False),
    ]
    merged: dict[tuple[float, str], tuple[set, list[bool]]] = {}
    for freq, kind, contributors, small in raw:
        key = (freq, kind)
        if key not in merged:
            merged[key] = (set(), [])
        merged[key][0].update(contributors)
        merged[key][1].append(small)
    features = []
    for (freq, kind), (contributors, smalls) in merged.items():
        ordered = tuple(r for r in _BOTH_ROLES if r in contributors)
        features.append(SpectrumFeature(frequency=freq, kind=kind,
                                        contributors=ordered, small=all(smalls)))
    features.sort(key=lambda f: (f.frequency, f.kind))
    return features


def scan_to_csv(scan: ScanResult, path, header_lines: tuple[str, ...] = ()) -> None:
    """Write a scan as CSV; ``header_lines`` become leading '#' comments."""
    lines = [f"# {h}" for h in header_lines]
    lines.append(f"{scan.column_name},efficiency")
    for xv, ev in zip(scan.x, scan.efficiency):
        lines.append(f"{xv!r},{ev!r}")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
