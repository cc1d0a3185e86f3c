"""Command-line front end: ``bilat sweep | bands | delta | validate``.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 numerical
failure. Output is deterministic for a given set of arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bands import (
    ZoneError,
    bloch_cos_phi,
    double_cell_kard,
    find_band_edges,
    kard_decompose,
    log_derivatives,
    split_band,
    tan2_half_phi,
    z_squared,
)
from .deltamodel import DeltaSpec, delta_bragg_point, delta_gap_edges, delta_half_cell
from .device import ConfigError, Device, Ordering, build_biperiodic, reference_half_cell, parse_device
from .oracle import OracleConfig, compare, delta_limit_half_cell, integrate_w
from .tmatrix import device_w, half_cell_w
from .transmission import SweepRecord, find_transparent, lead_velocity, sweep

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

VALIDATE_TOL = 1e-8
MU_TOL = 1e-9
DEFAULT_SLICES = (4e-3, 2e-3, 1e-3)


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunManifest:
    """Everything that determines one CLI run's output."""

    subcommand: str
    config_path: Optional[str] = None
    grid_min: Optional[float] = None
    grid_max: Optional[float] = None
    points: Optional[int] = None
    n_half: Optional[int] = None
    out: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.points is not None and self.points < 2:
            raise ConfigError(f"need at least 2 grid points, got {self.points}")
        if self.grid_min is not None and self.grid_max is not None and not self.grid_min < self.grid_max:
            raise ConfigError(f"grid minimum {self.grid_min} must be below maximum {self.grid_max}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.n_half is not None and self.n_half < 1:
            raise ConfigError(f"--half-cells must be >= 1, got {self.n_half}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.grid_min, self.grid_max, self.points)


# -- output helpers -------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def render_table(columns: Sequence[str], rows: Sequence[Sequence], fmt: str) -> str:
    if fmt == "json":
        doc = [{c: _json_value(v) for c, v in zip(columns, row)} for row in rows]
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_device(manifest: RunManifest, order: Optional[str]) -> Device:
    if manifest.config_path is None:
        raise ConfigError("--device is required")
    try:
        text = Path(manifest.config_path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {manifest.config_path}: {exc.strerror}") from None
    device = parse_device(text)
    if (manifest.n_half is not None or order is not None) and not device.is_biperiodic:
        raise ConfigError("--half-cells and --order need a biperiodic device")
    if device.is_biperiodic:
        n_half = manifest.n_half if manifest.n_half is not None else device.n_half_cells
        ordering = Ordering.parse(order) if order is not None else device.ordering
        device = build_biperiodic(device.half_cell, n_half, ordering)
    return device


# -- subcommands ----------------------------------------------------------------

def cmd_sweep(manifest: RunManifest, order: Optional[str] = None) -> int:
    device = _load_device(manifest, order)
    records = sweep(device, manifest.grid())
    text = render_table(SweepRecord.columns(), [r.row() for r in records], manifest.format)
    _emit(text, manifest.out)
    return EXIT_OK


def cmd_bands(manifest: RunManifest, order: Optional[str] = None, resolution: float = 0.01) -> int:
    device = _load_device(manifest, order)
    if not device.is_biperiodic:
        raise ConfigError("bands needs a biperiodic device")
    spec = device.half_cell
    lo = manifest.grid_min if manifest.grid_min is not None else resolution
    hi = manifest.grid_max if manifest.grid_max is not None else spec.barrier_height
    cell = device.leading_half_cell()
    edges = find_band_edges(cell, (lo, hi), resolution)
    try:
        sb = split_band(cell, (lo, hi), resolution)
    except StopIteration:
        raise NumericalError(f"no split band found in [{lo}, {hi}] meV") from None
    transparent = None
    for name, band in (("lower", sb.lower), ("upper", sb.upper)):
        if band[1] <= band[0]:
            continue
        energy = find_transparent(spec, band, device.ordering)
        if energy is not None:
            transparent = {"energy": energy, "band": name}
            break
    doc = {
        "ordering": device.ordering.value,
        "edges": [{"energy": e.energy, "kind": e.kind.value, "function": e.which_function.value}
                  for e in edges],
        "bands": {"lower": list(sb.lower), "upper": list(sb.upper)},
        "gap": {"lo": sb.gap[0], "hi": sb.gap[1]},
        "transparent": transparent,
    }
    _emit(json.dumps(doc, indent=2) + "\n", manifest.out)
    return EXIT_OK


DELTA_COLUMNS = ["kd_over_pi", "g", "u", "gp", "up", "gamma", "lambda", "cos_phi_h",
                 "cos_phi", "Z2", "Z2_tilde", "tan2_half_phi"]


def cmd_delta(manifest: RunManifest, omega_d_pi: float, asym: float, edges: bool = False) -> int:
    try:
        spec = DeltaSpec(omega_d_pi * math.pi, asym)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    lo, hi = manifest.grid_min, manifest.grid_max
    if not lo > 0:
        raise ConfigError("--kdmin-pi must be positive")
    if edges:
        bracket = (lo * math.pi, hi * math.pi)
        report = {"omega_d_over_pi": omega_d_pi, "s_over_d": asym,
                  "bragg_over_pi": delta_bragg_point(spec, bracket) / math.pi}
        if asym != 0:
            ge = delta_gap_edges(spec, bracket)
            report["gap_over_pi"] = {"lo": ge.lower / math.pi, "hi": ge.upper / math.pi}
        else:
            report["gap_over_pi"] = None
        _emit(json.dumps(report, indent=2) + "\n", manifest.out)
        return EXIT_OK
    rows = []
    for k in manifest.grid() * math.pi:
        w = delta_half_cell(float(k), spec)
        ld = log_derivatives(w)
        ch, cphi = bloch_cos_phi(w)
        z2, z2t = z_squared(w)
        try:
            t2 = tan2_half_phi(w)
        except ZeroDivisionError:
            t2 = math.nan
        rows.append([float(k / math.pi), w.g, w.u, w.gp, w.up, ld.gamma, ld.lam, ch, cphi, z2, z2t, t2])
    _emit(render_table(DELTA_COLUMNS, rows, manifest.format), manifest.out)
    return EXIT_OK


def _mu_battery(points: int = 400) -> float:
    """Largest ``|ln(nu/Z) - (eta - alpha)|`` over a reference-device sweep."""
    spec = reference_half_cell()
    worst = 0.0
    for order in Ordering:
        cell = spec.oriented(order)
        for e in np.linspace(1.0, 280.0, points):
            try:
                kp = kard_decompose(half_cell_w(cell, float(e)), lead_velocity(cell, float(e)))
            except ZoneError:
                continue
            worst = max(worst, double_cell_kard(kp).residual)
    return worst


def cmd_validate(slice_widths: Sequence[float] = DEFAULT_SLICES, energy: float = 100.0,
                 richardson: bool = True, out=None) -> int:
    out = out or sys.stdout
    widths = sorted(slice_widths, reverse=True)
    device = build_biperiodic(reference_half_cell(), 2)
    exact = device_w(device, energy)
    out.write(f"oracle convergence: reference double cell at {energy:g} meV\n")
    out.write(f"{'slice_nm':>12} {'max_diff':>12} {'ratio':>8} {'richardson':>12}\n")
    prev = None
    finest = math.inf
    for h in widths:
        raw = compare(integrate_w(device, energy, OracleConfig(h)), exact)
        extra = compare(integrate_w(device, energy, OracleConfig(h, True)), exact) if richardson else math.nan
        ratio = prev / raw if prev is not None and raw > 0 else math.nan
        out.write(f"{h:12.3e} {raw:12.3e} {ratio:8.3f} {extra:12.3e}\n")
        prev = raw
        finest = extra if richardson else raw
    out.write("delta limit: half-cell with finite barrier, Omega d = 1.403 pi, s/d = 0.1, kd = 0.8 pi\n")
    dspec = DeltaSpec(1.403 * math.pi, 0.1)
    ref = delta_half_cell(0.8 * math.pi, dspec)
    for w in (4e-3, 2e-3, 1e-3):
        diff = compare(delta_limit_half_cell(dspec.omega_d, 0.1, 0.8 * math.pi, w), ref)
        out.write(f"{w:12.3e} {diff:12.3e}\n")
    mu_resid = _mu_battery()
    out.write(f"mu = eta - alpha battery: max residual {mu_resid:.3e}\n")
    ok = finest < VALIDATE_TOL and mu_resid < MU_TOL
    out.write(f"finest level {finest:.3e} (tolerance {VALIDATE_TOL:g}): {'PASS' if ok else 'FAIL'}\n")
    return EXIT_OK if ok else EXIT_VALIDATION


# -- argument parsing -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bilat", description="Biperiodic superlattice transport tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    def device_args(p, grid_required: bool):
        p.add_argument("--device", required=True, help="JSON device description")
        p.add_argument("--emin", type=float, required=grid_required, help="lowest energy (meV)")
        p.add_argument("--emax", type=float, required=grid_required, help="highest energy (meV)")
        p.add_argument("--half-cells", type=int, help="override the number of half-cells")
        p.add_argument("--order", choices=["wide", "narrow"], help="override the ordering")
        p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("sweep", help="transmission and Kard parameters on an energy grid")
    device_args(p, True)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("bands", help="band edges, split-band gap and transparent state (JSON)")
    device_args(p, False)
    p.add_argument("--resolution", type=float, default=0.01, help="edge scan step (meV)")

    p = sub.add_parser("delta", help="delta-barrier half-cell quantities on a kd grid")
    p.add_argument("--omega-d-pi", type=float, required=True, help="barrier strength Omega d in units of pi")
    p.add_argument("--asym", type=float, default=0.0, help="asymmetry s/d")
    p.add_argument("--kdmin-pi", type=float, default=0.01)
    p.add_argument("--kdmax-pi", type=float, default=1.0)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--edges", action="store_true", help="report Bragg point and gap edges instead")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")

    p = sub.add_parser("validate", help="oracle convergence and identity checks")
    p.add_argument("--slice-widths", type=float, nargs="+", default=list(DEFAULT_SLICES),
                   help="slice widths (nm)")
    p.add_argument("--energy", type=float, default=100.0)
    p.add_argument("--no-richardson", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            m = RunManifest("sweep", args.device, args.emin, args.emax, args.points,
                            args.half_cells, args.out, args.format)
            return cmd_sweep(m, args.order)
        if args.command == "bands":
            m = RunManifest("bands", args.device, args.emin, args.emax, None,
                            args.half_cells, args.out, "json")
            if not args.resolution > 0:
                raise ConfigError("--resolution must be positive")
            return cmd_bands(m, args.order, args.resolution)
        if args.command == "delta":
            m = RunManifest("delta", None, args.kdmin_pi, args.kdmax_pi, args.points,
                            None, args.out, args.format)
            return cmd_delta(m, args.omega_d_pi, args.asym, args.edges)
        if any(not h > 0 for h in args.slice_widths):
            raise ConfigError("slice widths must be positive")
        return cmd_validate(args.slice_widths, args.energy, not args.no_richardson)
    except ConfigError as exc:
        print(f"bilat: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ZoneError, ValueError, ArithmeticError) as exc:
        print(f"bilat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
