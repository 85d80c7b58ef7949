"""``sim`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 physics precondition,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from ..errors import ConfigError, NumericalError, PhysicsError
from ..units import khz, to_khz
from .config import load_config, validate
from .presets import PRESETS
from .runner import dump_json, execute, run_config, run_preset

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_NUMERIC = 0, 2, 3, 4


def _parser():
    p = argparse.ArgumentParser(prog="sim", description="Trapped-ion three-spin interaction simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a JSON config")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS), metavar="NAME", help="one of: " + ", ".join(sorted(PRESETS)))
    src.add_argument("--config", type=Path, metavar="FILE")
    run.add_argument("--out", type=Path, default=None, metavar="DIR", help="output directory (default results/)")
    run.add_argument("--jobs", type=int, default=1, metavar="N", help="concurrent runs for sweeps and tables")

    modes = sub.add_parser("modes", help="print the transverse mode spectrum")
    modes.add_argument("--n", type=int, default=3)
    modes.add_argument("--omega-x-khz", type=float, default=5000.0)
    modes.add_argument("--omega-z-khz", type=float, default=1000.0)
    modes.add_argument("--omega-rec-khz", type=float, default=26.0)

    q = sub.add_parser("qlm", help="string-breaking quench of the quantum link model")
    q.add_argument("--nstag", type=int, default=4)
    q.add_argument("--g", type=float, default=None, help="perturbation divisor (omit for the exact model)")
    q.add_argument("--J", type=float, default=1.0)
    q.add_argument("--mu", type=float, default=0.5)
    q.add_argument("--t-max", type=float, default=20.0)
    q.add_argument("--n-times", type=int, default=2001)
    q.add_argument("--out", type=Path, default=None, metavar="FILE", help="CSV path (summary goes next to it)")

    g = sub.add_parser("gate-check", help="verify the MS-gate decomposition of the three-spin gate")
    g.add_argument("--alpha", type=float, default=0.7)
    return p


def _cmd_run(args):
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    if args.preset:
        out = args.out or Path("results") / args.preset
        summary = run_preset(args.preset, out, args.jobs)
    else:
        cfg = load_config(args.config)
        out = args.out or Path(cfg.output or "results")
        summary = run_config(cfg, out, args.jobs)
    sys.stdout.write(dump_json(summary))
    print(f"outputs written to {out}", file=sys.stderr)


def _cmd_modes(args):
    from .. import trap

    cfg = trap.TrapConfig(args.n, khz(args.omega_x_khz), khz(args.omega_z_khz), khz(args.omega_rec_khz))
    spec = trap.transverse_modes(cfg)
    print(f"{'mode':<8} {'freq_MHz':>12} {'eta_ion1':>10}  participation")
    for m in range(spec.n_modes):
        vec = " ".join(f"{v:+.4f}" for v in spec.eigenvectors[m])
        print(f"{spec.mode_names[m]:<8} {to_khz(spec.frequencies[m]) / 1e3:>12.6f} {spec.lamb_dicke[m, 0]:>10.5f}  {vec}")
    print("positions (units of the length scale): " + " ".join(f"{u:+.5f}" for u in spec.equilibrium_positions))
    if args.n >= 2:
        print(f"zig-zag bound: {to_khz(trap.zigzag_bound(khz(args.omega_x_khz), args.n)) / 1e3:.2f} MHz")


def _cmd_qlm(args):
    cfg = validate(
        dict(model="qlm", name=f"qlm_nstag{args.nstag}", n_stag=args.nstag, g=args.g, J=args.J, mu=args.mu,
             t_max=args.t_max, n_times=args.n_times)
    )
    text, summary = execute(cfg)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
        args.out.with_suffix(".json").write_text(dump_json(summary), encoding="utf-8")
    sys.stdout.write(dump_json(summary))


def _cmd_gate(args):
    _, summary = execute(validate(dict(model="gate_check", alpha=args.alpha)))
    print(f"alpha = {summary['alpha']:g}")
    print(f"three-body factorization residual: {summary['residual_three_body']:.3e}")
    print(f"12-gate decomposition residual:    {summary['residual_two_body']:.3e}")
    print(f"fidelity budget 0.995^12 = {summary['budget_rounded']:.3f}")


def _failing_module(exc):
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        parts = Path(frame.filename).parts
        if "threespin" in parts:
            return Path(frame.filename).stem
    return "cli"


def main(argv=None):
    args = _parser().parse_args(argv)
    handlers = {"run": _cmd_run, "modes": _cmd_modes, "qlm": _cmd_qlm, "gate-check": _cmd_gate}
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            handlers[args.command](args)
        except ConfigError as exc:
            return _fail(exc, "configuration error", EXIT_CONFIG)
        except PhysicsError as exc:
            return _fail(exc, "physics precondition failed", EXIT_PHYSICS)
        except NumericalError as exc:
            return _fail(exc, "numerical failure", EXIT_NUMERIC)
    return EXIT_OK


def _fail(exc, kind, code):
    print(f"sim: {kind} in module '{_failing_module(exc)}': {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
