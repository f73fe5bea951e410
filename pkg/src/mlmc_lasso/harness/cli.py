"""``mlmc-lasso`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import os
import sys

from ..errors import ConfigError, ConvergenceError, PlanningError
from ..model import problem_to_json
from ..rng import StreamFactory
from ..schemes import LevelGrid, simulate_path
from .config import load_config
from .experiments import (
    Session,
    resolve_threads,
    run_bangbang,
    run_beta_sweep,
    run_figures,
    run_table1,
    run_table2_3,
    run_table4,
    trajectory_csv,
)
from .io import DiskCache, write_metadata, write_text

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 2, 3, 4


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON experiment configuration")
    common.add_argument("--seed", type=_u64, metavar="U64", help="master seed")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    common.add_argument("--threads", type=_nonneg, metavar="N", help="worker threads, 0 = all cores")
    common.add_argument(
        "--scheme", choices=["sies", "ees1", "ees2", "all"], type=str.lower, default=None,
        help="restrict to one scheme",
    )
    common.add_argument("--eta2", type=float, help="target mean-square error")
    common.add_argument("--quiet", action="store_true", help="no progress lines on stderr")

    parser = argparse.ArgumentParser(prog="mlmc-lasso", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write the seeded test problem as JSON")
    sp = sub.add_parser("path", parents=[common], help="dump one sample path")
    sp.add_argument("--level", type=_nonneg, help="level (default l_s)")
    sub.add_parser("error-curve", parents=[common], help="e_l for each scheme")
    sub.add_parser("mc-cost", parents=[common], help="single-level MC plans")
    sub.add_parser("mlmc-cost", parents=[common], help="MLMC plans")
    sub.add_parser("mcmc-cost", parents=[common], help="MCMC costs against MC")
    bp = sub.add_parser("bangbang", parents=[common], help="SIES against the exact bang-bang law")
    bp.add_argument("--lam", type=float, default=1.0)
    bp.add_argument("--t", type=float, default=10.0)
    bp.add_argument("--x0", type=float, default=0.0)
    bp.add_argument("--samples", type=int, default=100_000)
    bp.add_argument("--level", type=_nonneg, help="default: smallest with dt <= 0.01")
    sub.add_parser("beta-sweep", parents=[common], help="distance to the Lasso as beta grows")
    sub.add_parser("tables", parents=[common], help="all four cost tables")
    sub.add_parser("figures", parents=[common], help="trajectory and error-curve data plus plot descriptions")
    return parser


def _config(args):
    schemes = None
    if args.scheme and args.scheme != "all":
        schemes = [args.scheme.upper()]
    return load_config(args.config, seed=args.seed, threads=args.threads, schemes=schemes, eta2=args.eta2)


def _write(out, name, text):
    path = os.path.join(out, name)
    write_text(path, text)
    return path


def _run(args):
    cfg = _config(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    cache = DiskCache()
    progress = not args.quiet
    cmd = args.command

    if cmd == "bangbang":
        for name in ("lam", "t"):
            if not getattr(args, name) > 0:
                raise ConfigError(f"--{name} must be positive")
        if args.samples < 100:
            raise ConfigError("--samples must be at least 100")
        text, ks = run_bangbang(
            args.lam, args.t, args.x0, args.samples, cfg.seed, args.level, threads=resolve_threads(cfg.threads)
        )
        _write(out, "bangbang.csv", text)
        print(f"ks = {ks:.6g}")
        write_metadata(out, cmd, cfg)
        return 0

    s = Session(cfg, cache=cache, progress=progress)
    if cmd == "gen":
        _write(out, "problem.json", problem_to_json(s.inst, s.x_true, cfg.problem_seed_value))
    elif cmd == "path":
        l = cfg.l_s if args.level is None else args.level
        grid = LevelGrid(cfg.T, l)
        for scheme in cfg.schemes:
            stream = StreamFactory(cfg.seed, "path", s.inst.p, l, scheme)(0)
            res = simulate_path(scheme, s.inst, grid, stream, record=True)
            _write(out, f"path_{scheme}_l{l}.csv", trajectory_csv(res, grid.dt))
    elif cmd == "error-curve":
        _write(out, "error_curve.csv", run_table1(s))
    elif cmd in ("mc-cost", "mlmc-cost"):
        t = run_table2_3(s)
        if cmd == "mc-cost":
            _write(out, "mc_plan.csv", t.mc_csv)
        else:
            _write(out, "mlmc_plan.csv", t.mlmc_csv)
            _write(out, "mlmc_plan_detail.csv", t.mlmc_detail_csv)
        sys.stdout.write(t.verdict)
    elif cmd == "mcmc-cost":
        _write_table4(out, run_table4(s))
    elif cmd == "beta-sweep":
        text, _ = run_beta_sweep(s)
        _write(out, "beta_sweep.csv", text)
    elif cmd == "tables":
        _write(out, "table1.csv", run_table1(s))
        t = run_table2_3(s)
        _write(out, "table2.csv", t.mc_csv)
        _write(out, "table3.csv", t.mlmc_csv)
        _write(out, "table3_detail.csv", t.mlmc_detail_csv)
        _write(out, "verdict.txt", t.verdict)
        _write_table4(out, run_table4(s))
        sys.stdout.write(t.verdict)
    elif cmd == "figures":
        run_figures(s, out)
    write_metadata(out, cmd, cfg, {"cache_dir": cache.root})
    return 0


def _write_table4(out, t4):
    _write(out, "table4.csv", t4.csv)
    for scheme, text in t4.cost_csvs.items():
        _write(out, f"mcmc_cost_{scheme}.csv", text)
    for stem, text in t4.traces.items():
        _write(out, f"{stem}.csv", text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits with 2 on bad usage
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, PlanningError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
