"""``bhgen`` command line: malthus, ensemble, oracle, verify, figures.

Exit codes: 0 success/pass, 1 verification failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .calibration import CalibrationError
from .config import ConfigError, constants_for, load_config
from .distributions import QuadratureError
from .ensemble import default_jobs, ensemble_to_dir, verify, write_oracle
from .estimator import SpecMismatchError
from .oracle import ResolutionError, default_dt, moment_grids

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def cmd_malthus(args) -> int:
    cfg = load_config(args.config)
    consts = constants_for(cfg.process)
    for k, v in consts.as_table().items():
        print(f"{k}={_fmt_value(v)}")
    if consts.lattice_warning:
        print("WARNING: lattice (deterministic) lifetime; asymptotic constants assume non-lattice lifetimes")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.outputs
    manifest = ensemble_to_dir(cfg, out, jobs=args.jobs)
    for f in manifest["files"]:
        print(f"p={f['p']:g}: {Path(out) / f['trajectories']} {Path(out) / f['estimator']}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.process
    dt = args.dt or cfg.oracle_dt or default_dt(spec)
    t_max = args.t_max or cfg.t_max
    grids = moment_grids(spec, dt, t_max, second_moments=spec.n_types == 1)
    out = Path(args.out or Path(cfg.outputs) / "oracle.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_oracle(out, grids, spec_hash=spec.digest(ignore_label=True))
    print(f"wrote {out} ({', '.join(grids)}; dt={dt:g}, t_max={t_max:g})")
    return EXIT_OK


def cmd_verify(args) -> int:
    verdict = verify(args.ensemble_dir, args.oracle_csv)
    out = Path(args.out or Path(args.ensemble_dir) / "verdict.json")
    out.write_text(json.dumps(verdict, indent=2) + "\n")
    for c in verdict["criteria"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}: value={c['value']:.6g} threshold={c['threshold']:.6g}")
    for d in verdict["diagnostics"]:
        print("INFO " + " ".join(f"{k}={_fmt_value(v)}" for k, v in d.items()))
    print(f"verdict: {'PASS' if verdict['all_pass'] else 'FAIL'} -> {out}")
    return EXIT_OK if verdict["all_pass"] else EXIT_FAIL


def cmd_figures(args) -> int:
    from .figures import write_all

    written = write_all(args.out, scale=args.scale, master_seed=args.seed, jobs=args.jobs,
                        only=args.only)
    for name in written:
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bhgen", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("malthus", help="print Malthusian parameters and derived constants")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_malthus)

    p = sub.add_parser("ensemble", help="simulate replicates, write trajectory and estimator CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: config 'outputs')")
    p.add_argument("--jobs", type=int, default=default_jobs())
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("oracle", help="solve the renewal equations for the moment grids")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="oracle CSV path (default: <outputs>/oracle.csv)")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="check an ensemble against an oracle CSV")
    p.add_argument("ensemble_dir")
    p.add_argument("oracle_csv")
    p.add_argument("--out", help="verdict path (default: <ensemble_dir>/verdict.json)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figures", help="write the CSV data behind each figure panel")
    p.add_argument("--out", default="figures")
    p.add_argument("--scale", type=float, default=1.0, help="fraction of the default replicate counts")
    p.add_argument("--seed", type=int, default=20190101)
    p.add_argument("--jobs", type=int, default=default_jobs())
    p.add_argument("--only", nargs="*", help="panel groups to emit, e.g. fig2 fig3")
    p.set_defaults(func=cmd_figures)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, CalibrationError, ResolutionError, QuadratureError, SpecMismatchError,
            FileNotFoundError, ValueError) as e:
        print(f"bhgen {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
