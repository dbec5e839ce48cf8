"""Command-line front end.

Subcommands: ``simulate`` (single evolution -> trajectory CSV + summary
JSON), ``scan`` (parameter scan -> CSV, optional Gaussian-fit JSON),
``ensemble-scan`` (inhomogeneously averaged scan -> CSV) and ``features``
(probe-spectrum feature table -> JSON).  Exit codes: 0 success, 2 config
error, 3 numerical failure.  Outputs embed the full resolved config, so any
artifact is reproducible from its own header; results are assembled in input
order and do not depend on the worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import kernel
from .analysis import (
    FwhmNotResolvableError,
    fit_gaussian,
    scan_delay,
    scan_optical,
    scan_rabi,
    scan_to_csv,
    scan_two_photon,
    transfer_efficiency,
    predict_spectrum_features,
)
from .dressed import UndefinedMixingAngleError, adiabaticity_local, global_conditions
from .dynamics import IntegrationError, default_window, evolve
from .ensemble import EnsembleNodeError, averaged_scan
from .runconfig import ConfigError, RunConfig, load_config

_SCANNERS = {
    "delay": scan_delay,
    "optical": scan_optical,
    "two_photon": scan_two_photon,
    "rabi": scan_rabi,
}


def _config_dict(rc: RunConfig) -> dict:
    out: dict[str, dict[str, str]] = {}
    for section, key, value in rc.resolved_items():
        out.setdefault(section, {})[key] = value
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _adiabaticity_report(rc: RunConfig) -> dict:
    cfg = rc.drive_config()
    gc = global_conditions(cfg.pair, cfg.optical_detuning, cfg.role)
    pair = cfg.pair
    lo = min(pair.pump_center, pair.stokes_center) - pair.amplitude_fwhm
    hi = max(pair.pump_center, pair.stokes_center) + pair.amplitude_fwhm
    max_ratio = 0.0
    min_gap = math.inf
    for t in np.linspace(lo, hi, 121):
        try:
            loc = adiabaticity_local(pair, float(t), cfg.optical_detuning, cfg.role)
        except UndefinedMixingAngleError:
            continue
        max_ratio = max(max_ratio, loc.ratio)
        min_gap = min(min_gap, loc.gap_upper, loc.gap_lower)
    return {
        "near_resonance_product": gc.near_resonance_product,
        "far_resonance_lhs_mhz": gc.far_resonance_lhs,
        "far_resonance_rhs_mhz": gc.far_resonance_rhs,
        "max_local_ratio": max_ratio if max_ratio > 0.0 else None,
        "min_dressed_gap_mhz": None if math.isinf(min_gap) else min_gap,
    }


def _out_path(args, stem: str, suffix: str) -> Path:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / f"{stem}.{suffix}"


def _load(args) -> RunConfig:
    rc = load_config(args.config, tuple(args.override or ()))
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        rc = replace(rc, run=replace(rc.run, workers=args.workers))
    return rc


def cmd_simulate(args) -> int:
    rc = _load(args)
    if rc.include_both_roles:
        raise ConfigError(
            "drive.ensemble_role = both is not supported by simulate; pick one ensemble"
        )
    cfg = rc.drive_config()
    window = default_window(cfg, rc.run.probe_delay)
    n_samples = max(2, int(round((window[1] - window[0]) / rc.run.trajectory_sample)) + 1)
    t_samples = np.linspace(window[0], window[1], min(n_samples, 20001))
    traj = evolve(cfg, window=window, t_samples=t_samples, rtol=rc.run.rtol, atol=rc.run.atol)
    t_probe = cfg.pair.pump_center + rc.run.probe_delay
    eta = transfer_efficiency(traj, t_probe)

    stem = Path(args.config).stem
    csv_path = _out_path(args, stem, "trajectory.csv")
    traj.to_csv(csv_path, header_lines=rc.header_lines())
    final = traj.populations[-1]
    summary = {
        "config_hash": rc.config_hash(),
        "config": _config_dict(rc),
        "backend": kernel.BACKEND,
        "t_probe_us": t_probe,
        "transfer_efficiency": eta,
        "final_populations": {lab: float(p) for lab, p in zip(traj.labels, final)},
        "adiabaticity": _adiabaticity_report(rc),
    }
    json_path = _out_path(args, stem, "summary.json")
    _write_json(json_path, summary)
    print(csv_path)
    print(json_path)
    return 0


def _run_configured_scan(rc: RunConfig, averaged: bool):
    if rc.scan is None:
        raise ConfigError("a [scan] section is required for this command")
    grid = rc.scan.grid()
    cfg = rc.drive_config()
    if averaged:
        if rc.ensemble is None:
            raise ConfigError("an [ensemble] section is required for ensemble-scan")
        return averaged_scan(
            rc.scan.kind,
            cfg,
            rc.ensemble,
            grid,
            workers=rc.run.workers,
            rtol=rc.run.rtol,
            atol=rc.run.atol,
            probe_delay=rc.run.probe_delay,
            include_both_roles=rc.include_both_roles,
        )
    scanner = _SCANNERS[rc.scan.kind]
    return scanner(
        cfg,
        grid,
        workers=rc.run.workers,
        rtol=rc.run.rtol,
        atol=rc.run.atol,
        probe_delay=rc.run.probe_delay,
        include_both_roles=rc.include_both_roles,
    )


def _scan_command(args, averaged: bool) -> int:
    rc = _load(args)
    scan = _run_configured_scan(rc, averaged)
    stem = Path(args.config).stem
    csv_path = _out_path(args, stem, "scan.csv")
    scan_to_csv(scan, csv_path, header_lines=rc.header_lines())
    print(csv_path)
    if rc.scan.fit_gaussian:
        fit = fit_gaussian(scan)
        payload = {"config_hash": rc.config_hash(), "config": _config_dict(rc)}
        payload.update(asdict(fit))
        fit_path = _out_path(args, stem, "fit.json")
        _write_json(fit_path, payload)
        print(fit_path)
    return 0


def cmd_scan(args) -> int:
    return _scan_command(args, averaged=False)


def cmd_ensemble_scan(args) -> int:
    return _scan_command(args, averaged=True)


def cmd_features(args) -> int:
    rc = _load(args)
    nu_s = rc.features.nu_stokes if rc.features else 0.0
    nu_p = rc.features.nu_pump if rc.features else nu_s + rc.scheme.ground_splitting
    feats = predict_spectrum_features(nu_s, nu_p, rc.scheme)
    rows = [
        {
            "frequency_mhz": f.frequency,
            "kind": f.kind,
            "contributors": [r.value for r in f.contributors],
            "small": f.small,
        }
        for f in feats
    ]
    payload = {
        "config_hash": rc.config_hash(),
        "config": _config_dict(rc),
        "nu_stokes_mhz": nu_s,
        "nu_pump_mhz": nu_p,
        "features": rows,
    }
    stem = Path(args.config).stem
    json_path = _out_path(args, stem, "features.json")
    _write_json(json_path, payload)
    for row in rows:
        tag = " (small)" if row["small"] else ""
        who = "+".join(row["contributors"])
        print(f"{row['frequency_mhz']:+10.4f} MHz  {row['kind']:<20} [{who}]{tag}")
    print(json_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stirapsim",
        description="STIRAP transfer simulator: single runs, scans and "
        "inhomogeneously averaged scans driven by a config file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in (
        ("simulate", cmd_simulate, "run one evolution; write trajectory CSV + summary JSON"),
        ("scan", cmd_scan, "run the configured parameter scan; write CSV (+ fit JSON)"),
        ("ensemble-scan", cmd_ensemble_scan, "run the configured scan averaged over the inhomogeneous line"),
        ("features", cmd_features, "predict probe-spectrum features; write JSON"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to the INI-style config file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--workers", type=int, default=None, help="override run.workers")
        p.add_argument(
            "--override",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, EnsembleNodeError, FwhmNotResolvableError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
