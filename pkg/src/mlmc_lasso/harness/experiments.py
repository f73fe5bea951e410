"""The seeded experiment pipeline: error curves, cost tables, figures, beta sweep.

A :class:`Session` owns one problem instance and memoizes the intermediate
artifacts (error curves, plans, references) so that ``tables`` computes each
of them once.  All CSV text is a pure function of the configuration.
"""

import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from ..bangbang import BangBangParams, TransitionCdf, ks_distance, transition_density
from ..estimators import (
    choose_mlmc_level,
    error_curve,
    level_variances,
    mc_plan,
    mlmc_plan,
    reference_estimate,
)
from ..mcmc import ChainSpec, Proposal, chain_means, mcmc_cost
from ..model import ProblemInstance, generate_problem, lasso_solve
from ..rng import StreamFactory
from ..schemes import LevelGrid, SchemeKind, sample_endpoints, simulate_path
from .io import csv_text, write_text

TABLE1_HEADER = ["scheme", "l", "e"]
TABLE2_HEADER = ["scheme", "lopt", "Nopt", "var", "e_lopt", "cost", "cost_real"]
PLAN_HEADER = ["scheme", "l_s", "lopt", "levels", "N_per_level", "cost"]
PLAN_DETAIL_HEADER = ["scheme", "l", "V", "N", "N_real"]
TABLE4_HEADER = ["scheme_or_proposal", "method", "cost"]
MCMC_COST_HEADER = ["method", "proposal", "param", "N", "mse", "cost"]
TRACE_HEADER = ["N", "mse"]
BETA_HEADER = ["beta", "distance", "stderr"]
BANGBANG_HEADER = ["x", "exact_density", "empirical_density", "ks"]
FIG5_HEADER = ["scheme", "l", "criterion"]


def resolve_threads(n):
    if n == 0:
        return os.cpu_count() or 1
    return n


class Session:
    def __init__(self, config, cache=None, progress=False):
        self.config = config
        self.inst, self.x_true = generate_problem(config.p, config.n, config.problem_seed_value)
        self.cache = cache
        self.threads = resolve_threads(config.threads)
        self.progress = progress
        self._curves = {}
        self._mc = {}
        self._mlmc = {}

    def log(self, msg):
        if self.progress:
            print(f"[mlmc-lasso] {msg}", file=sys.stderr, flush=True)

    @property
    def levels(self):
        return range(self.config.l_s, self.config.l_max + 1)

    def reference(self, scheme):
        c = self.config
        self.log(f"reference {scheme} level {c.L}, N={c.N_curve}")
        return reference_estimate(scheme, self.inst, c.T, c.L, c.N_curve, c.seed, self.threads, self.cache)

    def curve(self, scheme):
        scheme = SchemeKind.parse(scheme).name
        if scheme not in self._curves:
            c = self.config
            self.reference(scheme)
            self.log(f"error curve {scheme} levels {c.l_s}..{c.l_max}")
            self._curves[scheme] = error_curve(
                scheme, self.inst, c.T, self.levels, c.L, c.N_curve, c.seed, self.threads, self.cache
            )
        return self._curves[scheme]

    def mc_plan(self, scheme):
        scheme = SchemeKind.parse(scheme).name
        if scheme not in self._mc:
            self._mc[scheme] = mc_plan(self.curve(scheme), self.config.eta2)
        return self._mc[scheme]

    def mlmc_plan(self, scheme):
        scheme = SchemeKind.parse(scheme).name
        if scheme not in self._mlmc:
            c = self.config
            curve = self.curve(scheme)
            lopt = choose_mlmc_level(curve, c.eta2, c.l_s)
            self.log(f"MLMC variance pilot {scheme} levels {c.l_s}..{lopt}")
            v = level_variances(scheme, self.inst, c.T, c.l_s, lopt, c.N_pilot, c.seed, self.threads)
            self._mlmc[scheme] = mlmc_plan(curve, c.eta2, v, c.l_s)
        return self._mlmc[scheme]


def _session(obj, **kw):
    return obj if isinstance(obj, Session) else Session(obj, **kw)


def run_table1(cfg, **kw):
    s = _session(cfg, **kw)
    rows = []
    for scheme in s.config.schemes:
        for l, e in s.curve(scheme).entries:
            rows.append((scheme, l, e))
    return csv_text(TABLE1_HEADER, rows)


@dataclass(frozen=True)
class CostTables:
    mc_csv: str
    mlmc_csv: str
    mlmc_detail_csv: str
    verdict: str
    mc_plans: dict
    mlmc_plans: dict


def cost_verdict(mc_plans, mlmc_plans):
    lines = []
    for scheme in mc_plans:
        if scheme in mlmc_plans:
            a, b = mlmc_plans[scheme].cost, mc_plans[scheme].cost
            lines.append(f"{scheme}: MLMC cost {a:.10g} {'<' if a < b else '>='} MC cost {b:.10g}")
    every = [(p.cost, "MC", s) for s, p in mc_plans.items()]
    every += [(p.cost, "MLMC", s) for s, p in mlmc_plans.items()]
    cost, method, scheme = min(every)
    lines.append(f"winner: {method} with {scheme} (cost {cost:.10g})")
    return "\n".join(lines) + "\n"


def run_table2_3(cfg, **kw):
    s = _session(cfg, **kw)
    mc_rows, plan_rows, detail_rows = [], [], []
    mc_plans, mlmc_plans = {}, {}
    for scheme in s.config.schemes:
        mp = s.mc_plan(scheme)
        mc_plans[scheme] = mp
        mc_rows.append((scheme, mp.lopt, mp.Nopt, mp.var_l, mp.e_lopt, mp.cost, mp.cost_real))
        ml = s.mlmc_plan(scheme)
        mlmc_plans[scheme] = ml
        plan_rows.append((scheme, ml.l_s, ml.lopt, ml.levels, ml.n, ml.cost))
        for l, v, n, nr in zip(ml.levels, ml.v, ml.n, ml.n_real):
            detail_rows.append((scheme, l, v, n, nr))
    return CostTables(
        csv_text(TABLE2_HEADER, mc_rows),
        csv_text(PLAN_HEADER, plan_rows),
        csv_text(PLAN_DETAIL_HEADER, detail_rows),
        cost_verdict(mc_plans, mlmc_plans),
        mc_plans,
        mlmc_plans,
    )


def chain_spec_for(entry, mc_plan_, T):
    prop = Proposal.parse(entry.proposal)
    if prop is Proposal.RW:
        return ChainSpec(prop, sigma2=entry.sigma2)
    dt = entry.dt if entry.dt is not None else LevelGrid(T, mc_plan_.lopt).dt
    return ChainSpec(prop, dt=dt)


def _method_name(spec):
    if spec.proposal is Proposal.RW:
        return f"MCMC_RW(sigma2={spec.sigma2:.10g})"
    return spec.label


@dataclass(frozen=True)
class McmcTable:
    csv: str
    cost_csvs: dict  # reference scheme -> CSV text
    traces: dict  # file stem -> CSV text
    costs: dict  # (scheme, method) -> cost


def run_table4(cfg, **kw):
    """MC versus MCMC costs, one block of rows per EES scheme.

    Each block measures the MCMC mean-square error against that scheme's
    level-L reference mean.  A prox proposal is only paired with its own
    scheme.
    """
    s = _session(cfg, **kw)
    c = s.config
    rows, cost_csvs, traces, costs = [], {}, {}, {}
    for scheme in c.schemes:
        if scheme == "SIES":
            continue
        mp = s.mc_plan(scheme)
        ref = s.reference(scheme).mean
        rows.append((scheme, "MC", mp.cost))
        costs[(scheme, "MC")] = mp.cost
        crows = []
        for entry in c.mcmc:
            if entry.proposal != "RW" and entry.proposal != scheme:
                continue
            spec = chain_spec_for(entry, mp, c.T)
            name = _method_name(spec)
            s.log(f"MCMC cost {scheme} {name}")
            res = mcmc_cost(spec, s.inst, c.eta2, c.M, ref, c.seed, c.mcmc_n_min, c.mcmc_n_max, threads=s.threads)
            mse = dict(res.trace)[res.N]
            rows.append((scheme, name, float(res.N)))
            costs[(scheme, name)] = res.N
            crows.append((spec.label, spec.proposal.name, spec.scale, res.N, mse, float(res.N)))
            stem = f"trace_{scheme}_{spec.proposal.name}_{spec.scale:.10g}"
            traces[stem] = csv_text(TRACE_HEADER, res.trace)
        cost_csvs[scheme] = csv_text(MCMC_COST_HEADER, crows)
    return McmcTable(csv_text(TABLE4_HEADER, rows), cost_csvs, traces, costs)


def trajectory_csv(result, dt, coords=None):
    traj = result.trajectory if coords is None else result.trajectory[:, coords]
    p = traj.shape[1]
    names = [f"x_{i + 1}" for i in (range(p) if coords is None else coords)]
    rows = [(int(k), float(k * dt), *map(float, x)) for k, x in zip(result.step_index, traj)]
    return csv_text(["step", "t", *names], rows)


def _figure_text(title, files, xlabel, ylabel, series, lines=()):
    out = [f"title: {title}", f"xlabel: {xlabel}", f"ylabel: {ylabel}"]
    out += [f"data: {f}" for f in files]
    out += [f"series: {s}" for s in series]
    out += [f"hline: {h}" for h in lines]
    return "\n".join(out) + "\n"


def run_figures(cfg, out_dir, **kw):
    """Write trajectory/error-curve CSVs and one description file per figure.

    Returns the list of written paths.
    """
    s = _session(cfg, **kw)
    c = s.config
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        write_text(path, text)
        written.append(path)
        return name

    levels = [c.l_s + k for k in range(c.figure_levels)]
    for fig, l in enumerate(levels, start=1):
        files = []
        grid = LevelGrid(c.T, l)
        for scheme in c.schemes:
            stream = StreamFactory(c.seed, "figure", s.inst.p, l, scheme)(0)
            res = simulate_path(scheme, s.inst, grid, stream, record=True)
            files.append(put(f"traj_{scheme}_l{l}.csv", trajectory_csv(res, grid.dt)))
        put(
            f"figure{fig}.txt",
            _figure_text(
                f"Paths of {', '.join(c.schemes)} at level {l}",
                files, "t", "x_i(t)",
                [f"{f}: one line per coordinate x_1..x_{s.inst.p}" for f in files],
            ),
        )
    fine = LevelGrid(c.T, c.figure_fine_level)
    files = []
    for scheme in c.schemes:
        stream = StreamFactory(c.seed, "figure", s.inst.p, fine.l, scheme)(0)
        res = simulate_path(scheme, s.inst, fine, stream, record=True, stride=c.figure_decimation)
        files.append(put(f"traj_{scheme}_l{fine.l}_x1.csv", trajectory_csv(res, fine.dt, coords=[0])))
    fig = len(levels) + 1
    put(
        f"figure{fig}.txt",
        _figure_text(
            f"First coordinate at level {fine.l}, every {c.figure_decimation}th step",
            files, "t", "x_1(t)", [f"{f}: solid line" for f in files],
        ),
    )
    crit_rows, e_rows = [], []
    for scheme in c.schemes:
        e = s.curve(scheme).as_dict()
        for l in sorted(e):
            e_rows.append((scheme, l, e[l]))
            if l + 1 in e:
                crit_rows.append((scheme, l, 3.0 * e[l] - 2.0 * e[l + 1]))
    f5 = put("error_criterion.csv", csv_text(FIG5_HEADER, crit_rows))
    put(
        f"figure{fig + 1}.txt",
        _figure_text(
            "MC optimal level: 3 e_l - 2 e_(l+1) against eta^2",
            [f5], "l", "3 e_l - 2 e_(l+1)",
            [f"{sc}: markers and line" for sc in c.schemes],
            [f"eta^2 = {c.eta2:.10g}"],
        ),
    )
    f6 = put("error_curve.csv", csv_text(TABLE1_HEADER, e_rows))
    put(
        f"figure{fig + 2}.txt",
        _figure_text(
            "MLMC optimal level: e_l against eta^2 / 2",
            [f6], "l", "e_l",
            [f"{sc}: markers and line" for sc in c.schemes],
            [f"eta^2 / 2 = {c.eta2 / 2:.10g}"],
        ),
    )
    return written


@dataclass(frozen=True)
class BetaPoint:
    beta: float
    estimate: np.ndarray
    distance: float
    stderr: float
    acceptance: float


def posterior_mean_rw(inst, beta, steps, chains, seed, scale=0.3, x0=None, threads=1):
    """Posterior mean at inverse temperature ``beta`` from ``chains`` RW chains.

    The RW variance is ``scale / beta**2``: the l1 part of the posterior
    narrows like ``1/beta``, so a ``1/beta`` variance would freeze the chains.
    Returns ``(estimate, covariance of the estimate, mean acceptance)``; chains
    start at ``x0`` and discard ``steps // 10`` burn-in steps.
    """
    spec = ChainSpec(Proposal.RW, sigma2=scale / beta**2, burn_in=steps // 10)
    means, acc = chain_means(
        spec, inst.with_beta(beta), steps, chains, seed, x0=x0, threads=threads, purpose=f"beta:{beta!r}"
    )
    est = means.mean(axis=0)
    cov = np.atleast_2d(np.cov(means, rowvar=False, ddof=1)) / chains
    return est, cov, float(acc.mean())


def run_beta_sweep(cfg, **kw):
    """Distance from the posterior-mean estimate to the Lasso for each beta.

    The standard error is the delta-method propagation of the chain-to-chain
    covariance of the estimate through the Euclidean norm.
    """
    s = _session(cfg, **kw)
    c = s.config
    x_star = lasso_solve(s.inst)
    points = []
    for beta in c.beta_sweep:
        s.log(f"beta sweep: beta = {beta:g}")
        est, cov, acc = posterior_mean_rw(
            s.inst, beta, c.beta_steps, c.beta_chains, c.seed, c.beta_rw_scale, x_star, s.threads
        )
        d = est - x_star
        dist = float(np.linalg.norm(d))
        se = math.sqrt(max(float(d @ cov @ d), 0.0)) / dist if dist > 0 else math.sqrt(float(np.trace(cov)))
        points.append(BetaPoint(beta, est, dist, se, acc))
    text = csv_text(BETA_HEADER, [(p.beta, p.distance, p.stderr) for p in points])
    return text, points


def bangbang_level(T, max_dt=0.01):
    return max(0, math.ceil(math.log2(T / max_dt)))


def bangbang_samples(lam, t, x0, N, seed, level=None, threads=1):
    """SIES endpoints of ``dx = -lam sgn(x) dt + dw`` over time ``t`` from ``x0``.

    Uses the scaling ``x(s) = lam^-1 z(lam^2 s)`` with ``z`` the unit-drift
    process, which is the ``A = 0`` Lasso diffusion in one dimension.
    """
    T = lam * lam * t
    if level is None:
        level = bangbang_level(T)
    inst = ProblemInstance([[0.0]], [0.0])
    streams = StreamFactory(seed, "bangbang", 1, level, "SIES")
    z = sample_endpoints("SIES", inst, LevelGrid(T, level), N, streams, x0=np.array([lam * x0]), threads=threads)
    return z[:, 0] / lam


def run_bangbang(lam, t, x0, N, seed, level=None, bins=200, threads=1):
    params = BangBangParams(lam, t, x0)
    samples = bangbang_samples(lam, t, x0, N, seed, level, threads)
    cdf = TransitionCdf(params)
    ks = ks_distance(samples, cdf)
    lo, hi = np.quantile(samples, [0.001, 0.999])
    hist, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    emp = hist / (N * np.diff(edges))
    exact = transition_density(params, centers)
    rows = [(float(x), float(e), float(m), ks) for x, e, m in zip(centers, exact, emp)]
    return csv_text(BANGBANG_HEADER, rows), ks
