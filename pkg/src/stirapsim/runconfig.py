"""Text config files: parsing, validation, canonical serialization.

Format: INI-style ``[section]`` headers with ``key = value`` lines and ``#``
comments.  Unknown sections or keys are rejected; every value is validated
against the owning type's invariants before any computation.  The full
resolved configuration (defaults filled in) can be serialized back to a
canonical line list, which output writers embed so every artifact is
reproducible from its own header.  See ``docs/config_schema.md``.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DriveConfig
from .ensemble import EnsembleSpec
from .levels import DecayParams, LevelScheme, Role, Variant, scheme_from_field
from .pulses import PulsePair


class ConfigError(ValueError):
    """Invalid configuration file, named key included in the message."""


@dataclass(frozen=True)
class ScanSpec:
    kind: str  # delay | optical | two_photon | rabi
    start: float
    stop: float
    points: int
    fit_gaussian: bool = False

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class FeaturesSpec:
    nu_stokes: float
    nu_pump: float


@dataclass(frozen=True)
class RunSettings:
    probe_delay: float = 300.0
    rtol: float = 1e-8
    atol: float = 1e-10
    workers: int = 1
    trajectory_sample: float = 0.25


@dataclass(frozen=True)
class RunConfig:
    scheme: LevelScheme
    decay: DecayParams
    pair: PulsePair
    optical_detuning: float
    two_photon_detuning: float
    role: Role | None  # None means: average both prepared ensembles
    ensemble: EnsembleSpec | None
    scan: ScanSpec | None
    features: FeaturesSpec | None
    run: RunSettings

    def drive_config(self, role: Role | None = None) -> DriveConfig:
        use = role or self.role or Role.STOKES_ON_STRONG
        return DriveConfig(
            scheme=self.scheme,
            pair=self.pair,
            decay=self.decay,
            optical_detuning=self.optical_detuning,
            two_photon_detuning=self.two_photon_detuning,
            role=use,
        )

    @property
    def include_both_roles(self) -> bool:
        return self.role is None

    def resolved_items(self) -> list[tuple[str, str, str]]:
        """Canonical (section, key, value) triples of the resolved config."""
        items: list[tuple[str, str, str]] = []

        def add(section, key, value):
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            items.append((section, key, str(value)))

        add("scheme", "variant", self.scheme.variant.value)
        add("scheme", "ground_splitting_mhz", float(self.scheme.ground_splitting))
        add("scheme", "excited_splitting_mhz", float(self.scheme.excited_splitting))
        add("scheme", "dipole_weak_ratio", float(self.scheme.dipole_weak_ratio))
        add("decay", "excited_lifetime_us", float(self.decay.excited_lifetime))
        add("decay", "meta_lifetime_us", float(self.decay.meta_lifetime))
        add("decay", "meta_branch", float(self.decay.meta_branch))
        add("decay", "optical_dephasing_per_us", float(self.decay.optical_dephasing))
        add("decay", "spin_dephasing_per_us", float(self.decay.spin_dephasing))
        add("decay", "meta_branch_g1", float(self.decay.meta_branch_g1))
        add("pulses", "peak_rabi_mhz", float(self.pair.peak_rabi_strong))
        add("pulses", "intensity_fwhm_us", float(self.pair.intensity_fwhm))
        add("pulses", "delay_us", float(self.pair.delay))
        add("pulses", "pump_center_us", float(self.pair.pump_center))
        if self.pair.stokes_saturation is not None:
            add("pulses", "stokes_saturation_mhz", float(self.pair.stokes_saturation))
        add("drive", "optical_detuning_mhz", float(self.optical_detuning))
        add("drive", "two_photon_detuning_mhz", float(self.two_photon_detuning))
        add("drive", "ensemble_role", "both" if self.role is None else self.role.value)
        if self.ensemble is not None:
            add("ensemble", "fwhm_mhz", float(self.ensemble.fwhm))
            add("ensemble", "mean_mhz", float(self.ensemble.mean))
            add("ensemble", "n_nodes", self.ensemble.n_nodes)
            add("ensemble", "span_sigma", float(self.ensemble.span))
        if self.scan is not None:
            add("scan", "type", self.scan.kind)
            add("scan", "start", float(self.scan.start))
            add("scan", "stop", float(self.scan.stop))
            add("scan", "points", self.scan.points)
            add("scan", "fit_gaussian", self.scan.fit_gaussian)
        if self.features is not None:
            add("features", "nu_stokes_mhz", float(self.features.nu_stokes))
            add("features", "nu_pump_mhz", float(self.features.nu_pump))
        # run.workers is deliberately omitted: the worker count must not
        # change any output artifact
        add("run", "probe_delay_us", float(self.run.probe_delay))
        add("run", "rtol", float(self.run.rtol))
        add("run", "atol", float(self.run.atol))
        add("run", "trajectory_sample_us", float(self.run.trajectory_sample))
        return items

    def canonical_text(self) -> str:
        lines = []
        current = None
        for section, key, value in self.resolved_items():
            if section != current:
                lines.append(f"[{section}]")
                current = section
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:12]

    def header_lines(self) -> tuple[str, ...]:
        """Comment lines for output artifacts: hash plus resolved config."""
        out = [f"config_hash = {self.config_hash()}"]
        out.extend(self.canonical_text().rstrip("\n").split("\n"))
        return tuple(out)


_FLOAT, _INT, _BOOL, _STR = "float", "int", "bool", "str"

#: section -> key -> (type, constraint documentation)
SCHEMA: dict[str, dict[str, tuple[str, str]]] = {
    "scheme": {
        "variant": (_STR, "three_level | four_level_meta"),
        "field_tesla": (_FLOAT, ">= 0; exclusive with explicit splittings"),
        "ground_splitting_mhz": (_FLOAT, ">= 0"),
        "excited_splitting_mhz": (_FLOAT, ">= 0; default ground/2.5"),
        "dipole_weak_ratio": (_FLOAT, "in (0, 1]"),
    },
    "decay": {
        "excited_lifetime_us": (_FLOAT, "> 0 (inf allowed)"),
        "meta_lifetime_us": (_FLOAT, "> 0 (inf allowed)"),
        "meta_branch": (_FLOAT, "in [0, 1]"),
        "optical_dephasing_per_us": (_FLOAT, ">= 0"),
        "spin_dephasing_per_us": (_FLOAT, ">= 0"),
        "meta_branch_g1": (_FLOAT, "in [0, 1]"),
    },
    "pulses": {
        "peak_rabi_mhz": (_FLOAT, ">= 0; required"),
        "intensity_fwhm_us": (_FLOAT, "> 0"),
        "delay_us": (_FLOAT, "Stokes centre minus pump centre"),
        "pump_center_us": (_FLOAT, "time origin anchor"),
        "stokes_saturation_mhz": (_FLOAT, "> 0; omit for pure Gaussian"),
    },
    "drive": {
        "optical_detuning_mhz": (_FLOAT, ""),
        "two_photon_detuning_mhz": (_FLOAT, ""),
        "ensemble_role": (_STR, "stokes_on_strong | stokes_on_weak | both"),
    },
    "ensemble": {
        "fwhm_mhz": (_FLOAT, ">= 0; required when section present"),
        "mean_mhz": (_FLOAT, ""),
        "n_nodes": (_INT, "odd, >= 5"),
        "span_sigma": (_FLOAT, ">= 2"),
    },
    "scan": {
        "type": (_STR, "delay | optical | two_photon | rabi"),
        "start": (_FLOAT, "required"),
        "stop": (_FLOAT, "required; != start"),
        "points": (_INT, ">= 2"),
        "fit_gaussian": (_BOOL, ""),
    },
    "features": {
        "nu_stokes_mhz": (_FLOAT, "Stokes frequency, relative scale"),
        "nu_pump_mhz": (_FLOAT, "default nu_stokes + ground splitting"),
    },
    "run": {
        "probe_delay_us": (_FLOAT, "> 0; readout time after pump centre"),
        "rtol": (_FLOAT, "> 0"),
        "atol": (_FLOAT, "> 0"),
        "workers": (_INT, ">= 1"),
        "trajectory_sample_us": (_FLOAT, "> 0"),
    },
}


def _parse_value(section: str, key: str, raw: str):
    kind, constraint = SCHEMA[section][key]
    raw = raw.strip()
    try:
        if kind == _FLOAT:
            return float(raw)
        if kind == _INT:
            return int(raw)
        if kind == _BOOL:
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError("not a boolean")
        return raw
    except ValueError as exc:
        raise ConfigError(
            f"{section}.{key}: cannot parse {raw!r} as {kind}"
            + (f" ({constraint})" if constraint else "")
        ) from exc


def _read_raw(path: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None, strict=True
    )
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _apply_overrides(raw: dict[str, dict[str, str]], overrides) -> None:
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} must look like section.key=value")
        target, value = ov.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override {ov!r} must look like section.key=value")
        section, key = target.strip().split(".", 1)
        raw.setdefault(section.strip(), {})[key.strip()] = value.strip()


def _validate_keys(raw: dict[str, dict[str, str]]) -> None:
    for section, keys in raw.items():
        if section not in SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]; allowed: {', '.join(sorted(SCHEMA))}"
            )
        for key in keys:
            if key not in SCHEMA[section]:
                raise ConfigError(
                    f"unknown key {section}.{key}; allowed: "
                    + ", ".join(sorted(SCHEMA[section]))
                )


def _build(raw: dict[str, dict[str, str]]) -> RunConfig:
    vals: dict[str, dict[str, object]] = {
        s: {k: _parse_value(s, k, v) for k, v in keys.items()} for s, keys in raw.items()
    }

    def get(section, key, default=None):
        return vals.get(section, {}).get(key, default)

    # --- scheme
    variant_s = get("scheme", "variant", "four_level_meta")
    try:
        variant = Variant(variant_s)
    except ValueError as exc:
        raise ConfigError(
            f"scheme.variant: {variant_s!r} is not one of three_level, four_level_meta"
        ) from exc
    ratio = get("scheme", "dipole_weak_ratio", 0.37)
    field = get("scheme", "field_tesla")
    ground = get("scheme", "ground_splitting_mhz")
    excited = get("scheme", "excited_splitting_mhz")
    raman_from_field = None
    try:
        if field is not None:
            if ground is not None or excited is not None:
                raise ConfigError(
                    "scheme.field_tesla is exclusive with explicit splittings"
                )
            if variant is not Variant.FOUR_LEVEL_META:
                raise ConfigError("scheme.field_tesla requires variant four_level_meta")
            scheme, raman_from_field = scheme_from_field(field, dipole_weak_ratio=ratio)
        elif variant is Variant.FOUR_LEVEL_META:
            if ground is None:
                raise ConfigError(
                    "scheme.ground_splitting_mhz (or field_tesla) is required for four_level_meta"
                )
            if excited is None:
                scheme = LevelScheme.from_ground_splitting(ground, variant, ratio)
            else:
                scheme = LevelScheme(variant, ground, excited, ratio)
        else:
            scheme = LevelScheme(variant, ground or 0.0, excited or 0.0, ratio)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"scheme: {exc}") from exc

    # --- decay
    try:
        decay = DecayParams(
            excited_lifetime=get("decay", "excited_lifetime_us", 800.0),
            meta_lifetime=get("decay", "meta_lifetime_us", 10_000.0),
            meta_branch=get("decay", "meta_branch", 0.75),
            optical_dephasing=get("decay", "optical_dephasing_per_us", 0.01),
            spin_dephasing=get("decay", "spin_dephasing_per_us", 0.001),
            meta_branch_g1=get("decay", "meta_branch_g1", 0.5),
        )
    except ValueError as exc:
        raise ConfigError(f"decay: {exc}") from exc

    # --- pulses
    peak = get("pulses", "peak_rabi_mhz")
    if peak is None:
        raise ConfigError("pulses.peak_rabi_mhz is required")
    try:
        pair = PulsePair(
            peak_rabi_strong=peak,
            intensity_fwhm=get("pulses", "intensity_fwhm_us", 30.0 / math.sqrt(2.0)),
            delay=get("pulses", "delay_us", -17.0),
            pump_center=get("pulses", "pump_center_us", 0.0),
            dipole_weak_ratio=scheme.dipole_weak_ratio,
            stokes_saturation=get("pulses", "stokes_saturation_mhz"),
        )
    except ValueError as exc:
        key = "intensity_fwhm_us" if "intensity_fwhm" in str(exc) else "pulses section"
        raise ConfigError(f"pulses.{key}: {exc}") from exc

    # --- drive
    role_s = get("drive", "ensemble_role", "stokes_on_strong")
    if role_s == "both":
        role = None
    else:
        try:
            role = Role(role_s)
        except ValueError as exc:
            raise ConfigError(
                f"drive.ensemble_role: {role_s!r} is not one of "
                "stokes_on_strong, stokes_on_weak, both"
            ) from exc

    # --- ensemble
    ens = None
    if "ensemble" in vals:
        fwhm = get("ensemble", "fwhm_mhz")
        if fwhm is None:
            if raman_from_field is not None:
                fwhm = raman_from_field
            else:
                raise ConfigError("ensemble.fwhm_mhz is required (no field_tesla given)")
        try:
            ens = EnsembleSpec(
                fwhm=fwhm,
                mean=get("ensemble", "mean_mhz", 0.0),
                n_nodes=get("ensemble", "n_nodes", 41),
                span=get("ensemble", "span_sigma", 3.0),
            )
        except ValueError as exc:
            raise ConfigError(f"ensemble: {exc}") from exc

    # --- scan
    scan = None
    if "scan" in vals:
        kind = get("scan", "type")
        if kind not in ("delay", "optical", "two_photon", "rabi"):
            raise ConfigError(
                "scan.type must be one of delay, optical, two_photon, rabi"
            )
        start, stop = get("scan", "start"), get("scan", "stop")
        if start is None or stop is None:
            raise ConfigError("scan.start and scan.stop are required")
        if stop == start:
            raise ConfigError("scan.stop must differ from scan.start")
        points = get("scan", "points", 81)
        if points < 2:
            raise ConfigError("scan.points must be >= 2")
        if kind == "rabi" and min(start, stop) < 0:
            raise ConfigError("scan bounds for a rabi scan must be >= 0")
        scan = ScanSpec(kind, start, stop, points, get("scan", "fit_gaussian", False))

    # --- features
    features = None
    if "features" in vals:
        nu_s = get("features", "nu_stokes_mhz", 0.0)
        nu_p = get("features", "nu_pump_mhz", nu_s + scheme.ground_splitting)
        features = FeaturesSpec(nu_stokes=nu_s, nu_pump=nu_p)

    # --- run
    run = RunSettings(
        probe_delay=get("run", "probe_delay_us", 300.0),
        rtol=get("run", "rtol", 1e-8),
        atol=get("run", "atol", 1e-10),
        workers=get("run", "workers", 1),
        trajectory_sample=get("run", "trajectory_sample_us", 0.25),
    )
    if run.probe_delay <= 0:
        raise ConfigError("run.probe_delay_us must be > 0")
    if run.rtol <= 0 or run.atol <= 0:
        raise ConfigError("run.rtol and run.atol must be > 0")
    if run.workers < 1:
        raise ConfigError("run.workers must be >= 1")
    if run.trajectory_sample <= 0:
        raise ConfigError("run.trajectory_sample_us must be > 0")

    return RunConfig(
        scheme=scheme,
        decay=decay,
        pair=pair,
        optical_detuning=get("drive", "optical_detuning_mhz", 0.0),
        two_photon_detuning=get("drive", "two_photon_detuning_mhz", 0.0),
        role=role,
        ensemble=ens,
        scan=scan,
        features=features,
        run=run,
    )


def load_config(path: str, overrides=()) -> RunConfig:
    """Parse and validate a config file, applying section.key=value overrides."""
    raw = _read_raw(path)
    _apply_overrides(raw, overrides)
    _validate_keys(raw)
    return _build(raw)
