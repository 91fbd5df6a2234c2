"""Command-line front end: ``pam4link <command> ...``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from pam4link import bench
from pam4link.errors import LinkError
from pam4link.txdsp import PRBS15_PERIOD


def _scenario(args) -> bench.Scenario:
    s = bench.load_scenario(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.symbols is not None:
        # round up to whole pattern periods
        changes["n_symbols"] = max(1, -(-args.symbols // PRBS15_PERIOD)) * PRBS15_PERIOD
    if getattr(args, "rop", None) is not None and args.command != "eye":
        changes["rop_sweep"] = tuple(args.rop)
    return replace(s, **changes) if changes else s


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, s: bench.Scenario, argv) -> None:
    (out / "manifest").write_text(bench.manifest(s, " ".join(["pam4link", *argv])))


def _write_response(path: Path, h) -> None:
    g = h.gains
    data = np.column_stack([h.freqs, 20 * np.log10(np.abs(g) + 1e-300), np.degrees(np.angle(g)), g.real, g.imag])
    np.savetxt(path, data, delimiter=",", header="freq_hz,mag_db,phase_deg,re,im", comments="", fmt="%.9g")


def cmd_characterize(args, argv) -> int:
    s = _scenario(args)
    out = _outdir(args)
    full = replace(s, cores=tuple(bench._all_cores(s)))
    responses = bench.characterize_link(full, noise=args.noise, averages=args.averages)
    for k in s.cores:
        _write_response(out / f"s21_core{k}.csv", responses[k])
        print(f"core {k}: wrote {out / f's21_core{k}.csv'}")
    _write_manifest(out, s, argv)
    return 0


def cmd_run(args, argv) -> int:
    s = _scenario(args)
    out = _outdir(args)
    res = bench.run_scenario(s, workers=args.workers)
    (out / "records.csv").write_text(bench.records_csv(res.records))
    for k, h in res.responses.items():
        _write_response(out / f"s21_core{k}.csv", h)
    for k, eye in res.eyes.items():
        eye.to_csv(out / f"eye_core{k}.csv")
    _write_manifest(out, s, argv)
    print(res.summary())
    return 0


def cmd_sweep_rop(args, argv) -> int:
    s = _scenario(args)
    out = _outdir(args)
    sweep = bench.sweep_rop(s, seeds=args.seeds, workers=args.workers)
    (out / "records.csv").write_text(bench.records_csv(sweep.records))
    rows = [{"core": k, "rop_7pct_dbm": c["7pct"], "rop_kp4_dbm": c["kp4"]} for k, c in sweep.crossings.items()]
    bench.write_rows(rows, out / "crossings.csv")
    _write_manifest(out, s, argv)
    for r in rows:
        print(f"core {r['core']}: HD-FEC crossing {_fmt(r['rop_7pct_dbm'])}, KP4 crossing {_fmt(r['rop_kp4_dbm'])}")
    return 0


def _fmt(v) -> str:
    return "none in range" if v is None else f"{v:+.2f} dBm"


def cmd_sweep_taps(args, argv) -> int:
    s = _scenario(args)
    out = _outdir(args)
    rop = args.rop[0] if args.rop else max(s.rop_sweep)
    rows = bench.sweep_taps(s, range(0, args.max_taps + 1), rop=rop, core=args.core, seeds=args.seeds)
    bench.write_rows(rows, out / "taps.csv")
    _write_manifest(out, s, argv)
    for r in rows:
        print(f"{r['combo']:>10} {r['taps']:2d} taps: BER {r['ber']:.3e}")
    return 0


def cmd_notch(args, argv) -> int:
    out = _outdir(args)
    base = bench.load_scenario(args.scenario) if args.scenario else None
    rows = bench.notch_report(args.alpha, args.dispersion, args.wavelength * 1e-9, base=base,
                              simulate=not args.no_simulate, kappa=args.kappa)
    bench.write_rows(rows, out / "notch.csv")
    for r in rows:
        pred = "-" if r["predicted_hz"] is None else f"{r['predicted_hz'] / 1e9:.3f} GHz"
        sim = r["note"] or ("-" if r["simulated_hz"] is None
                            else f"{r['simulated_hz'] / 1e9:.3f} GHz, {r['depth_db']:.1f} dB")
        print(f"D = {r['d_total_ps_nm']:g} ps/nm: predicted {pred}; simulated {sim}")
    return 0


def cmd_eye(args, argv) -> int:
    s = _scenario(args)
    out = _outdir(args)
    rop = max(s.rop_sweep) if args.rop is None else args.rop[0]
    eye = bench.eye_at(s, args.core, rop, bins=args.bins)
    eye.to_csv(out / f"eye_core{args.core}.csv")
    eye.to_pgm(out / f"eye_core{args.core}.pgm")
    _write_manifest(out, s, argv)
    print(f"wrote {out / f'eye_core{args.core}.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pam4link", description="PAM-4 VCSEL multicore-fiber link simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, fn, help_):
        c = sub.add_parser(name, help=help_)
        c.add_argument("scenario", help="preset name or scenario YAML file")
        c.add_argument("--seed", type=int, help="override master_seed")
        c.add_argument("--symbols", type=int, help="override n_symbols (rounded up to whole pattern periods)")
        c.add_argument("--out", default=".", help="output directory")
        c.set_defaults(func=fn)
        return c

    c = scenario_cmd("characterize", cmd_characterize, "measure per-core electrical-to-electrical responses")
    c.add_argument("--noise", action="store_true", help="keep receiver noise and quantization on")
    c.add_argument("--averages", type=int, default=1)
    c.add_argument("--rop", type=float, nargs="+", help="received power(s) in dBm")

    c = scenario_cmd("run", cmd_run, "BER for every core and received power")
    c.add_argument("--rop", type=float, nargs="+", help="override the received power sweep (dBm)")
    c.add_argument("--workers", type=int, default=1)

    c = scenario_cmd("sweep-rop", cmd_sweep_rop, "BER versus received power with FEC crossings")
    c.add_argument("--rop", type=float, nargs="+", help="override the received power sweep (dBm)")
    c.add_argument("--seeds", type=int, default=1)
    c.add_argument("--workers", type=int, default=1)

    c = scenario_cmd("sweep-taps", cmd_sweep_taps, "BER versus equalizer taps for three structures")
    c.add_argument("--rop", type=float, nargs=1, help="received power (dBm); default is the sweep maximum")
    c.add_argument("--core", type=int)
    c.add_argument("--max-taps", type=int, default=21)
    c.add_argument("--seeds", type=int, default=1)

    c = sub.add_parser("notch", help="closed-form and simulated power-fading nulls")
    c.add_argument("--alpha", type=float, required=True, help="linewidth enhancement factor")
    c.add_argument("--dispersion", type=float, nargs="+", required=True, help="net dispersion values (ps/nm)")
    c.add_argument("--kappa", type=float, help="adiabatic chirp (rad/s/W); default keeps the base scenario value")
    c.add_argument("--wavelength", type=float, default=1550.0, help="nm")
    c.add_argument("--scenario", help="base scenario for the simulated column")
    c.add_argument("--no-simulate", action="store_true", help="closed form only")
    c.add_argument("--out", default=".")
    c.set_defaults(func=cmd_notch)

    c = scenario_cmd("eye", cmd_eye, "equalized eye histogram of one core")
    c.add_argument("--core", type=int, required=True)
    c.add_argument("--rop", type=float, nargs=1)
    c.add_argument("--bins", type=int, default=128)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except (LinkError, ValueError, FileNotFoundError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
