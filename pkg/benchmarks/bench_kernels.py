#!/usr/bin/env python3
"""Time the hot kernels under both backends.

The backend is fixed at import, so each one runs in its own interpreter with
MLMC_LASSO_DISABLE_NUMBA set or cleared.  The first call of every workload is
a warmup (it pays numba's compile or cache load) and is not timed.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time


def workloads(quick):
    import numpy as np

    from mlmc_lasso.mcmc import ChainSpec, chain_means
    from mlmc_lasso.model import generate_problem, lasso_solve
    from mlmc_lasso.rng import StreamFactory
    from mlmc_lasso.schemes import LevelGrid, sample_coupled, sample_endpoints

    inst, _ = generate_problem(10, 7, 1)
    N = 200 if quick else 1000
    l = 8 if quick else 10
    steps = 2000 if quick else 20000
    fac = StreamFactory(1, "bench", inst.p, l, "SIES")

    def endpoints():
        sample_endpoints("SIES", inst, LevelGrid(10.0, l), N, fac)

    def coupled():
        sample_coupled("EES1", inst, LevelGrid(10.0, l), N, fac)

    def mh():
        chain_means(ChainSpec("EES1", dt=0.01), inst, steps, 20, 1)

    def ista():
        for seed in range(20):
            lasso_solve(generate_problem(10, 7, seed)[0])

    np.seterr(all="ignore")
    return {
        f"endpoints SIES N={N} l={l}": endpoints,
        f"coupled EES1 N={N} l={l}": coupled,
        f"MH chains EES1 20x{steps}": mh,
        "ISTA 20 problems": ista,
    }


def worker(repeat, quick):
    from mlmc_lasso._backend import BACKEND

    out = {"backend": BACKEND, "times": {}}
    for name, fn in workloads(quick).items():
        fn()
        ts = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            ts.append(time.perf_counter() - t0)
        out["times"][name] = statistics.median(ts)
    print(json.dumps(out))


def run_backend(disable, repeat, quick):
    env = dict(os.environ)
    if disable:
        env["MLMC_LASSO_DISABLE_NUMBA"] = "1"
    else:
        env.pop("MLMC_LASSO_DISABLE_NUMBA", None)
    cmd = [sys.executable, __file__, "--worker", "--repeat", str(repeat)] + (["--quick"] if quick else [])
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        worker(args.repeat, args.quick)
        return
    nb = run_backend(False, args.repeat, args.quick)
    np_ = run_backend(True, args.repeat, args.quick)
    if nb["backend"] != "numba":
        print("warning: numba is not importable, both columns use numpy", file=sys.stderr)
    print(f"{'workload':<32} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for name, t_nb in nb["times"].items():
        t_np = np_["times"][name]
        print(f"{name:<32} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
