"""Monte Carlo and multilevel Monte Carlo estimation of the endpoint mean,
together with the cost-minimizing level/sample-size planners.

Variances use divisor ``N`` throughout, summed over coordinates.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PlanningError
from .rng import StreamFactory
from .schemes import LevelGrid, SchemeKind, sample_coupled, sample_endpoints


@dataclass(frozen=True)
class McEstimate:
    mean: np.ndarray
    var_scalar: float
    coord_var: np.ndarray
    N: int

    def __iter__(self):
        # unpacks as (mean, var_scalar)
        return iter((self.mean, self.var_scalar))


@dataclass(frozen=True)
class MlmcEstimate:
    mean: np.ndarray
    per_level_v: list
    mean_var: np.ndarray  # per-coordinate variance of the estimator
    levels: list

    def __iter__(self):
        return iter((self.mean, self.per_level_v))


@dataclass
class ErrorCurve:
    """Squared distance ``e_l`` between level-l and reference-level sample means.

    ``variances`` and ``means`` keep the per-level sample statistics that were
    used, so planners can reuse them without resampling.
    """

    scheme: SchemeKind
    reference_level: int
    entries: list
    variances: dict = field(default_factory=dict)
    means: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = sorted((int(l), float(e)) for l, e in self.entries)

    @property
    def levels(self):
        return [l for l, _ in self.entries]

    def e(self, l):
        for lv, e in self.entries:
            if lv == l:
                return e
        raise KeyError(l)

    def as_dict(self):
        return dict(self.entries)


@dataclass(frozen=True)
class McPlan:
    lopt: int
    Nopt: int
    var_l: float
    cost: float
    e_lopt: float = 0.0
    nopt_real: float = 0.0

    @property
    def cost_real(self):
        return self.nopt_real * 2**self.lopt


@dataclass(frozen=True)
class MlmcPlan:
    l_s: int
    lopt: int
    v: list
    n: list
    cost: float
    e_lopt: float = 0.0
    n_real: list = ()

    @property
    def levels(self):
        return list(range(self.l_s, self.lopt + 1))

    @property
    def cost_real(self):
        return float(sum(nr * 2**l for nr, l in zip(self.n_real, self.levels)))

    def variance_bound(self):
        return float(sum(v / n for v, n in zip(self.v, self.n)))


def _stats(samples):
    # shifting by the first sample keeps identical samples at exactly zero variance
    shift = samples[0]
    D = samples - shift
    dm = D.mean(axis=0)
    coord_var = ((D - dm) ** 2).mean(axis=0)
    return shift + dm, coord_var


def mc_mean(scheme, inst, grid, N, master_seed, streams=None, threads=1, purpose="mc"):
    """Plain Monte Carlo over ``N`` independent endpoints at ``grid``."""
    if N < 2:
        raise ValueError("need at least two samples")
    scheme = SchemeKind.parse(scheme)
    if streams is None:
        streams = StreamFactory(master_seed, purpose, inst.p, grid.l, scheme.name)
    X = sample_endpoints(scheme, inst, grid, N, streams, threads=threads)
    mean, cv = _stats(X)
    return McEstimate(mean, float(cv.sum()), cv, N)


def reference_estimate(scheme, inst, T, L, N, master_seed, threads=1, cache=None):
    """Level-``L`` Monte Carlo reference, optionally memoized by ``cache``.

    ``cache`` is any object with ``get(key)`` / ``put(key, McEstimate)``.
    """
    scheme = SchemeKind.parse(scheme)
    key = None
    if cache is not None:
        key = cache.key("ref", inst, scheme.name, T, L, N, master_seed)
        hit = cache.get(key)
        if hit is not None:
            return hit
    est = mc_mean(scheme, inst, LevelGrid(T, L), N, master_seed, threads=threads, purpose="ref")
    if cache is not None:
        cache.put(key, est)
    return est


def error_curve(scheme, inst, T, levels, L, N, master_seed, threads=1, cache=None, streams=None):
    """``e_l = ||mean_L - mean_l||^2`` with independent N-sample runs per level.

    ``streams``, if given, is a callable ``level -> stream factory`` used for
    every level including the reference (tests pass zero-noise factories).
    """
    scheme = SchemeKind.parse(scheme)
    levels = sorted(set(int(l) for l in levels))
    if levels and levels[-1] > L:
        raise ValueError("levels must not exceed the reference level")
    if streams is None:
        ref = reference_estimate(scheme, inst, T, L, N, master_seed, threads, cache)
    else:
        ref = mc_mean(scheme, inst, LevelGrid(T, L), N, master_seed, streams(L), threads)
    entries, variances, means = [], {}, {}
    for l in levels:
        if l == L:
            est = ref
        else:
            fac = streams(l) if streams is not None else None
            est = mc_mean(scheme, inst, LevelGrid(T, l), N, master_seed, fac, threads, "curve")
        d = ref.mean - est.mean
        entries.append((l, float(d @ d)))
        variances[l] = est.var_scalar
        means[l] = est.mean
    variances[L] = ref.var_scalar
    means[L] = ref.mean
    return ErrorCurve(scheme, L, entries, variances, means)


def _lookup(provider, l):
    if callable(provider):
        return float(provider(l))
    return float(provider[l])


def choose_mc_level(curve, eta2):
    """Level whose ``3 e_l - 2 e_{l+1}`` is closest to ``eta2`` among ``e_l < eta2``."""
    e = curve.as_dict()
    best = None
    for l in sorted(e):
        if l + 1 not in e or not e[l] < eta2:
            continue
        score = abs(3.0 * e[l] - 2.0 * e[l + 1] - eta2)
        if best is None or score < best[0]:
            best = (score, l)
    if best is None:
        raise PlanningError(f"no level with a successor satisfies e_l < eta2 = {eta2:g}")
    return best[1]


def mc_plan(curve, eta2, var_provider=None):
    """Single-level MC plan: ``Nopt = ceil(Var_lopt / (eta2 - e_lopt))``, at least 2.

    ``var_provider`` maps a level to its endpoint variance (mapping or
    callable); by default the variances stored in ``curve`` are used.
    """
    if not eta2 > 0:
        raise ValueError("eta2 must be positive")
    lopt = choose_mc_level(curve, eta2)
    e = curve.e(lopt)
    var = _lookup(curve.variances if var_provider is None else var_provider, lopt)
    n_real = var / (eta2 - e)
    nopt = max(2, math.ceil(n_real))
    return McPlan(lopt, nopt, var, float(nopt * 2**lopt), e, n_real)


def choose_mlmc_level(curve, eta2, l_s=None):
    """Level whose ``e_l`` is closest to ``eta2 / 2`` (ties: smaller level)."""
    best = None
    for l, e in curve.entries:
        if l_s is not None and l < l_s:
            continue
        score = abs(e - 0.5 * eta2)
        if best is None or score < best[0]:
            best = (score, l)
    if best is None:
        raise PlanningError("error curve has no usable level")
    return best[1]


def mlmc_allocation(v, levels, budget):
    """Real-valued Lagrange allocation ``N_l = sqrt(V_l 2^-l) sum_k sqrt(V_k 2^k) / budget``.

    The sum runs over every planned level (``l_s .. lopt``).
    """
    if not budget > 0:
        raise PlanningError(f"variance budget must be positive, got {budget:g}")
    v = np.asarray(v, dtype=float)
    w = 2.0 ** np.asarray(levels, dtype=float)
    total = float(np.sum(np.sqrt(v * w)))
    return np.sqrt(v / w) * total / budget


def mlmc_plan(curve, eta2, v, l_s=None):
    """MLMC plan with ``lopt`` from :func:`choose_mlmc_level`.

    ``v`` maps each level ``l_s .. lopt`` to its variance (the base level's
    endpoint variance, then coupled-difference variances).  ``l_s`` defaults
    to the smallest level on the curve.
    """
    if l_s is None:
        l_s = curve.levels[0]
    lopt = choose_mlmc_level(curve, eta2, l_s)
    e = curve.e(lopt)
    if not eta2 > e:
        raise PlanningError(f"eta2 = {eta2:g} does not exceed e_lopt = {e:g}")
    levels = list(range(l_s, lopt + 1))
    vs = [_lookup(v, l) for l in levels]
    n_real = mlmc_allocation(vs, levels, eta2 - e)
    n = [max(2, math.ceil(x)) for x in n_real]
    cost = float(sum(nl * 2**l for nl, l in zip(n, levels)))
    return MlmcPlan(l_s, lopt, vs, n, cost, e, [float(x) for x in n_real])


def level_variances(scheme, inst, T, l_s, lopt, N, master_seed, threads=1):
    """Pilot estimates ``{l: V_l}`` for ``l_s .. lopt`` with ``N`` samples per level."""
    scheme = SchemeKind.parse(scheme)
    out = {}
    for l in range(l_s, lopt + 1):
        fac = StreamFactory(master_seed, "pilot", inst.p, l, scheme.name)
        if l == l_s:
            X = sample_endpoints(scheme, inst, LevelGrid(T, l), N, fac, threads=threads)
        else:
            F, C = sample_coupled(scheme, inst, LevelGrid(T, l), N, fac, threads=threads)
            X = F - C
        out[l] = float(_stats(X)[1].sum())
    return out


def mlmc_estimate(scheme, inst, T, l_s, lopt, n, master_seed, threads=1, streams=None):
    """Telescoping MLMC estimate of the level-``lopt`` endpoint mean.

    ``n`` lists the sample sizes for levels ``l_s .. lopt``.  Every level block
    draws from its own substreams, so blocks are independent.  ``streams`` may
    map a level to a custom stream factory.
    """
    scheme = SchemeKind.parse(scheme)
    levels = list(range(l_s, lopt + 1))
    if len(n) != len(levels):
        raise ValueError(f"need {len(levels)} sample sizes, got {len(n)}")
    if any(int(k) < 2 for k in n):
        raise ValueError("every level needs at least two samples")
    mean = np.zeros(inst.p)
    mean_var = np.zeros(inst.p)
    per_level_v = []
    for l, N in zip(levels, n):
        N = int(N)
        fac = streams(l) if streams is not None else StreamFactory(master_seed, "mlmc", inst.p, l, scheme.name)
        if l == l_s:
            X = sample_endpoints(scheme, inst, LevelGrid(T, l), N, fac, threads=threads)
        else:
            F, C = sample_coupled(scheme, inst, LevelGrid(T, l), N, fac, threads=threads)
            X = F - C
        m, cv = _stats(X)
        mean += m
        mean_var += cv / N
        per_level_v.append(float(cv.sum()))
    return MlmcEstimate(mean, per_level_v, mean_var, levels)
