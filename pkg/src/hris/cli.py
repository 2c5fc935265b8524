"""Command line front end.

Every subcommand writes its outputs plus ``config.json`` (the resolved
arguments) into the output directory: ``--out``, else ``$HRIS_OUTPUT_DIR``,
else ``./hris_out``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .controller import CalibrationTable, build_lut, direction_grid, random_scenes, run_episode
from .errors import HRISError
from .fields import (Direction, GridSpec, array_factor, continuous_gammas, directivity_db, gammas_for,
                     load_matrix_to_json, pattern_from_gammas, pointed_load_matrix, quantized_load_matrix)
from .geometry import PanelLayout, UnitCellSpec, check_fit, generate_layout, validate_layout
from .retrieval import (MaterialModel, SlabSpec, classify_dng_bands, forward_table, dng_fixture_model,
                        unwrap_branch)
from .sensing import DEFAULT_LEAK, Scene, estimate_doa, isolation_report, snapshot_model
from .touchstone import read_sparams, write_sparam_csv, write_touchstone
from .unitcell import LoadBank

OUT_ENV = "HRIS_OUTPUT_DIR"


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _layout(args) -> PanelLayout:
    if getattr(args, "layout", None):
        return PanelLayout.from_json(Path(args.layout).read_text(encoding="utf-8"))
    return generate_layout(args.nx, args.ny, args.freq_ghz * 1e9)


def _bank(args) -> LoadBank:
    if getattr(args, "bank", None):
        return LoadBank.from_json(Path(args.bank).read_text(encoding="utf-8"))
    return LoadBank.default(insertion_loss=getattr(args, "insertion_loss", 1.0))


def cmd_retrieve(args, out: Path) -> int:
    slab = SlabSpec(args.thickness)  # validates before any parsing
    table = read_sparams(args.input, args.z0)
    params = unwrap_branch(table, slab, initial_branch=args.branch)
    bands = classify_dng_bands(params)
    _write(out, "effective_params.csv", params.to_csv())
    report = {
        "input": str(args.input),
        "points": len(params),
        "gaps": int(params.gap.sum()),
        "dng_bands_hz": [list(b) for b in bands],
        "time_convention": "exp(-i*omega*t)",
    }
    _write(out, "dng_bands.json", _dump(report))
    print(f"retrieved {len(params)} points ({report['gaps']} gaps)")
    for lo, hi in bands:
        print(f"DNG band: {lo / 1e9:.4f} - {hi / 1e9:.4f} GHz")
    if not bands:
        print("no DNG band")
    return 0


def cmd_forward(args, out: Path) -> int:
    slab = SlabSpec(args.thickness)
    if args.model:
        model = MaterialModel.from_dict(json.loads(Path(args.model).read_text(encoding="utf-8")))
    else:
        model = dng_fixture_model()
    f = np.linspace(args.fmin_ghz * 1e9, args.fmax_ghz * 1e9, args.points)
    table = forward_table(model, slab, f)
    if args.format == "csv":
        path = _write(out, "slab.csv", write_sparam_csv(table))
    else:
        path = _write(out, "slab.s2p", write_touchstone(
            table, args.data_format, "GHz",
            comments=[f"homogeneous slab, d = {args.thickness!r} m", "time convention exp(-i*omega*t)"]))
    _write(out, "model.json", _dump(model.to_dict()))
    print(f"wrote {path}")
    return 0


def cmd_layout(args, out: Path) -> int:
    f = args.freq_ghz * 1e9
    pitch = None if args.pitch_mm is None else args.pitch_mm * 1e-3
    layout = generate_layout(args.nx, args.ny, f, args.axis, pitch)
    report = validate_layout(layout, args.tolerance)
    _write(out, "layout.json", layout.to_json() + "\n")
    _write(out, "validation.json", _dump(report.to_dict()))
    counts = {k: sum(e.kind.value == k for e in layout.elements) for k in ("SenseA", "SenseB", "Reflect")}
    print(f"{args.nx}x{args.ny} panel: {counts}")
    print(f"validation {'PASS' if report.ok else 'FAIL'}; max deviations "
          + ", ".join(f"{k}={v:.2%}" for k, v in report.deviations.items()))
    return 0 if report.ok else 1


def cmd_checkfit(args, out: Path) -> int:
    spec = UnitCellSpec(
        cell_pitch=args.pitch_mm * 1e-3,
        outer_ring_diameter=args.ring_mm * 1e-3,
        inner_disc_diameter=args.disc_mm * 1e-3,
        substrate_thickness=args.thickness_mm * 1e-3,
        eps_ring=args.eps_ring,
        eps_disc=args.eps_disc,
        design_frequency=args.freq_ghz * 1e9,
    )
    report = check_fit(spec, args.slack)
    _write(out, "fit_report.json", _dump(report.to_dict()))
    print(report.summary())
    return 0 if report.passed else 1


def cmd_steer(args, out: Path) -> int:
    layout = _layout(args)
    f = layout.design_frequency
    bank = _bank(args)
    inc = Direction.deg(args.incident_theta, args.incident_phi)
    tgt = Direction.deg(args.target_theta, args.target_phi)
    grid = GridSpec(args.grid_step, args.grid_step)
    if args.continuous:
        gammas = continuous_gammas(layout, inc, tgt, f) * np.abs(bank.reflections()).max()
    else:
        if args.objective == "pointing":
            lm = pointed_load_matrix(layout, bank, inc, tgt, f, grid, args.rho)
        else:
            lm = quantized_load_matrix(layout, bank, inc, tgt, f, args.rho)
        _write(out, "load_matrix.json", load_matrix_to_json(lm) + "\n")
        gammas = gammas_for(lm, bank)
    pat = pattern_from_gammas(layout, gammas, inc, f, grid, args.rho)
    _write(out, "pattern.csv", pat.to_csv())
    peak = pat.peak()
    af_t = array_factor(layout, gammas, inc, tgt, f, args.rho)
    summary = {
        "peak_theta_deg": peak.theta_deg,
        "peak_phi_deg": peak.phi_deg,
        "target_gain_db": 20 * math.log10(abs(af_t)) if af_t else None,
        "target_directivity_db": directivity_db(pat, tgt, af_t),
        "quantized": not args.continuous,
    }
    _write(out, "summary.json", _dump(summary))
    print(f"pattern peak at theta={peak.theta_deg:.1f} deg, phi={peak.phi_deg:.1f} deg; "
          f"directivity toward target {summary['target_directivity_db']:.2f} dB")
    return 0


def cmd_sense(args, out: Path) -> int:
    layout = _layout(args)
    scene = Scene(Direction.deg(args.tx_theta, args.tx_phi), Direction.deg(args.rx_theta, args.rx_phi),
                  snr_db=args.snr_db, snapshots=args.snapshots, seed=args.seed, leak=args.leak)
    g1, g2 = snapshot_model(layout, scene, args.rho)
    grid = GridSpec(args.grid_step, args.grid_step)
    ests = [estimate_doa(g, layout, g.group, grid) for g in (g1, g2)]
    _write(out, "snapshots_group1.csv", g1.to_csv())
    _write(out, "snapshots_group2.csv", g2.to_csv())
    _write(out, "doa.json", _dump([e.to_dict() for e in ests]))
    _write(out, "isolation.json", _dump({f"group{k}_db": v for k, v in isolation_report(layout, scene).items()}))
    for e in ests:
        print(f"group {e.group}: theta={e.direction.theta_deg:.3f} deg, phi={e.direction.phi_deg:.3f} deg")
    return 0


def cmd_loop(args, out: Path) -> int:
    layout = _layout(args)
    bank = _bank(args)
    if args.lut:
        table = CalibrationTable.from_json(Path(args.lut).read_text(encoding="utf-8"))
    else:
        grid = direction_grid(_floats(args.theta_grid), _floats(args.phi_grid))
        table = build_lut(layout, bank, grid, grid, rho=args.rho)
        _write(out, "lut.json", table.to_json() + "\n")
    scenes = random_scenes(args.scenes, seed=args.seed, theta_max_deg=args.theta_max,
                           snr_db=args.snr_db, snapshots=args.snapshots, leak=args.leak)
    log = run_episode(layout, bank, table, scenes, rho=args.rho, grid=GridSpec(args.grid_step, args.grid_step))
    _write(out, "episode.csv", log.to_csv())
    loss = log.column("loss_db")
    print(f"{len(log)} steps: median loss vs ideal {np.median(loss):.3f} dB, "
          f"median pointing error {np.median(log.column('rx_error_deg')):.3f} deg")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--freq-ghz", type=float, default=5.5, help="design frequency (default 5.5)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./hris_out)")

    panel = argparse.ArgumentParser(add_help=False)
    panel.add_argument("--nx", type=int, default=16)
    panel.add_argument("--ny", type=int, default=16)
    panel.add_argument("--layout", help="PanelLayout JSON (overrides --nx/--ny)")
    panel.add_argument("--rho", type=float, default=0.5, help="hybrid-cell sensing power fraction")
    panel.add_argument("--grid-step", type=float, default=1.0, help="angular grid step in degrees")

    parser = argparse.ArgumentParser(prog="hris", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("retrieve", parents=[common], help="effective parameters from S-parameters")
    p.add_argument("--input", required=True, help=".s2p/.snp Touchstone or .csv file")
    p.add_argument("--thickness", type=float, required=True, help="effective slab thickness in metres")
    p.add_argument("--z0", type=float, default=None, help="override reference impedance")
    p.add_argument("--branch", type=int, default=None, help="branch index at the first frequency")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("forward", parents=[common], help="slab S-parameters from a Lorentz material model")
    p.add_argument("--model", help="MaterialModel JSON (default: built-in DNG fixture)")
    p.add_argument("--thickness", type=float, default=0.8e-3, help="slab thickness in metres")
    p.add_argument("--fmin-ghz", type=float, default=4.0)
    p.add_argument("--fmax-ghz", type=float, default=7.0)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--format", choices=("s2p", "csv"), default="s2p")
    p.add_argument("--data-format", choices=("RI", "MA", "DB"), default="RI")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("layout", parents=[common], help="generate and validate the panel layout")
    p.add_argument("--nx", type=int, default=16)
    p.add_argument("--ny", type=int, default=16)
    p.add_argument("--axis", choices=("x", "y"), default="x", help="interleave axis of the lambda/4 offset")
    p.add_argument("--pitch-mm", type=float, default=None, help="reflective pitch (default lambda/8)")
    p.add_argument("--tolerance", type=float, default=0.05)
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("checkfit", parents=[common], help="hybrid unit-cell fit check")
    p.add_argument("--pitch-mm", type=float, default=7.0)
    p.add_argument("--ring-mm", type=float, default=6.4)
    p.add_argument("--disc-mm", type=float, default=3.8)
    p.add_argument("--thickness-mm", type=float, default=0.8)
    p.add_argument("--eps-ring", type=float, default=3.5)
    p.add_argument("--eps-disc", type=float, default=10.2)
    p.add_argument("--slack", type=float, default=0.0)
    p.set_defaults(func=cmd_checkfit)

    p = sub.add_parser("steer", parents=[common, panel], help="reflected beam pattern")
    p.add_argument("--incident-theta", type=float, default=0.0)
    p.add_argument("--incident-phi", type=float, default=0.0)
    p.add_argument("--target-theta", type=float, default=20.0)
    p.add_argument("--target-phi", type=float, default=0.0)
    p.add_argument("--continuous", action="store_true", help="ideal continuous phases instead of 2-bit")
    p.add_argument("--objective", choices=("pointing", "gain"), default="pointing",
                   help="2-bit rounding: keep the pattern peak on the target node, or maximise target gain")
    p.add_argument("--bank", help="LoadBank JSON (default open/+jZ0/short/-jZ0)")
    p.add_argument("--insertion-loss", type=float, default=1.0)
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("sense", parents=[common, panel], help="sensing snapshots and DoA estimates")
    p.add_argument("--tx-theta", type=float, default=30.0)
    p.add_argument("--tx-phi", type=float, default=0.0)
    p.add_argument("--rx-theta", type=float, default=20.0)
    p.add_argument("--rx-phi", type=float, default=180.0)
    p.add_argument("--snr-db", type=float, default=30.0)
    p.add_argument("--snapshots", type=int, default=64)
    p.add_argument("--leak", type=float, default=DEFAULT_LEAK, help="cross-pol leakage amplitude")
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("loop", parents=[common, panel], help="closed-loop episode over seeded scenes")
    p.add_argument("--scenes", type=int, default=20)
    p.add_argument("--snr-db", type=float, default=30.0)
    p.add_argument("--snapshots", type=int, default=64)
    p.add_argument("--leak", type=float, default=DEFAULT_LEAK)
    p.add_argument("--theta-max", type=float, default=60.0, help="max scene theta in degrees")
    p.add_argument("--theta-grid", default="0,10,20,30,40,50,60")
    p.add_argument("--phi-grid", default="0,90,180,270")
    p.add_argument("--lut", help="CalibrationTable JSON to reuse")
    p.add_argument("--bank", help="LoadBank JSON")
    p.add_argument("--insertion-loss", type=float, default=1.0)
    p.set_defaults(func=cmd_loop)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out or os.environ.get(OUT_ENV) or "hris_out")
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write(out, "config.json", _dump(config))
        return args.func(args, out)
    except (HRISError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
