import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from mlmc_lasso.errors import PlanningError
from mlmc_lasso.estimators import (
    ErrorCurve,
    choose_mc_level,
    choose_mlmc_level,
    error_curve,
    level_variances,
    mc_mean,
    mc_plan,
    mlmc_allocation,
    mlmc_estimate,
    mlmc_plan,
)
from mlmc_lasso.model import ProblemInstance, generate_problem
from mlmc_lasso.rng import ArrayStream, ZeroStream, ZeroStreamFactory
from mlmc_lasso.schemes import LevelGrid, simulate_path

INST, _ = generate_problem(10, 7, 1)
LEVELS = list(range(5, 14))


def geometric_curve(c, levels=LEVELS):
    return ErrorCurve("SIES", 16, [(l, c * 2.0**-l) for l in levels])


def lagrange_oracle(v, levels, budget):
    """Minimize sum N_l 2^l subject to sum V_l / N_l = budget over positive reals."""
    v = np.asarray(v, float)
    w = 2.0 ** np.asarray(levels, float)
    # substitute N = exp(u) to keep the search positive
    x0 = np.log(len(v) * v / budget)
    scale = float(np.sum(np.sqrt(v * w))) ** 2 / budget
    res = minimize(
        lambda u: np.sum(np.exp(u) * w) / scale,
        x0,
        constraints=[{"type": "eq", "fun": lambda u: np.sum(v * np.exp(-u)) / budget - 1.0}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    assert res.success, res.message
    return np.exp(res.x)


def test_mc_mean_two_point_formula():
    noise = np.random.default_rng(0).normal(size=(2, 8, 10))
    fac = lambda i: ArrayStream(noise[i])
    grid = LevelGrid(1.0, 3)
    est = mc_mean("EES1", INST, grid, 2, 0, streams=fac)
    e1, e2 = (simulate_path("EES1", INST, grid, ArrayStream(noise[i])).endpoint for i in range(2))
    np.testing.assert_allclose(est.mean, (e1 + e2) / 2, atol=1e-14)
    assert est.var_scalar == pytest.approx(np.sum((e1 - e2) ** 2) / 4, rel=1e-12)
    mean, var = est
    assert var == est.var_scalar and mean is est.mean


def test_mc_mean_degenerate_and_invalid():
    est = mc_mean("SIES", INST, LevelGrid(10.0, 5), 7, 0, streams=ZeroStreamFactory(10))
    assert est.var_scalar == 0.0
    with pytest.raises(ValueError):
        mc_mean("SIES", INST, LevelGrid(10.0, 5), 1, 0)


def test_mc_mean_symmetric_flat_target():
    flat = ProblemInstance([[0.0]], [0.0])
    est = mc_mean("SIES", flat, LevelGrid(10.0, 6), 100_000, 3)
    assert abs(est.mean[0]) <= 3 * math.sqrt(est.var_scalar / est.N)


def test_error_curve_zero_noise_and_reference_level():
    zero = lambda l: ZeroStreamFactory(10)
    curve = error_curve("EES2", INST, 10.0, [5, 6, 8], 8, 4, 0, streams=zero)
    assert curve.levels == [5, 6, 8] and curve.e(8) == 0.0
    x8 = simulate_path("EES2", INST, LevelGrid(10.0, 8), ZeroStream(10)).endpoint
    x5 = simulate_path("EES2", INST, LevelGrid(10.0, 5), ZeroStream(10)).endpoint
    assert curve.e(5) == pytest.approx(np.sum((x8 - x5) ** 2), rel=1e-12)
    with pytest.raises(ValueError):
        error_curve("EES2", INST, 10.0, [9], 8, 4, 0, streams=zero)


def test_error_curve_uses_cache(tmp_path):
    from mlmc_lasso.harness.io import DiskCache

    cache = DiskCache(tmp_path)
    a = error_curve("SIES", INST, 10.0, [3, 4], 6, 50, 5, cache=cache)
    assert len(list(tmp_path.glob("*.npz"))) == 1
    b = error_curve("SIES", INST, 10.0, [3, 4], 6, 50, 5, cache=cache)
    assert a.entries == b.entries


def test_error_curve_spread_scales_with_sample_size():
    # e is dominated by sampling noise ~ Var/N, so doubling N halves its spread
    def iqr(N):
        es = [error_curve("SIES", INST, 10.0, [4], 6, N, s).e(4) for s in range(20)]
        q1, q3 = np.percentile(es, [25, 75])
        return q3 - q1

    ratio = iqr(250) / iqr(500)
    assert 1.2 < ratio < 4.0, ratio


def test_mc_plan_arithmetic():
    curve = ErrorCurve("SIES", 16, [(5, 0.003), (6, 0.0)])
    plan = mc_plan(curve, 0.01, {5: 0.7, 6: 1.0})
    assert plan.lopt == 5 and plan.Nopt == 100 and plan.cost == 3200
    assert plan.nopt_real == pytest.approx(100.0)
    assert plan.cost_real == pytest.approx(3200.0)


def test_mc_plan_geometric_curve():
    # 3 e_l - 2 e_{l+1} = 2 c 2^-l; nearest to eta2 = 0.04 with c = 10 is l = 9
    curve = geometric_curve(10.0)
    assert choose_mc_level(curve, 0.04) == 9
    plan = mc_plan(curve, 0.04, lambda l: 2.0)
    assert plan.Nopt == math.ceil(2.0 / (0.04 - 10 / 512))
    assert plan.cost == plan.Nopt * 512


def test_mc_plan_floor_and_errors():
    curve = geometric_curve(10.0)
    assert mc_plan(curve, 1e6, lambda l: 1.0).Nopt == 2
    with pytest.raises(PlanningError):
        mc_plan(ErrorCurve("SIES", 16, [(5, 0.5), (6, 0.5)]), 0.1, lambda l: 1.0)
    with pytest.raises(ValueError):
        mc_plan(curve, 0.0, lambda l: 1.0)


def test_mc_level_ties_prefer_smaller_level():
    curve = ErrorCurve("SIES", 16, [(5, 0.01), (6, 0.01), (7, 0.01)])
    assert choose_mc_level(curve, 0.04) == 5


def test_mlmc_allocation_example():
    n = mlmc_allocation([0.7, 0.05], [5, 6], 0.01)
    oracle = lagrange_oracle([0.7, 0.05], [5, 6], 0.01)
    np.testing.assert_allclose(n, oracle, rtol=1e-6)
    assert [math.ceil(x) for x in n] == [97, 19]
    curve = ErrorCurve("SIES", 16, [(5, 0.03), (6, 0.02), (7, 0.001)])
    plan = mlmc_plan(curve, 0.03, {5: 0.7, 6: 0.05})
    assert plan.lopt == 6 and plan.n == [97, 19] and plan.cost == 4320
    assert plan.levels == [5, 6]


@pytest.mark.parametrize("seed", range(20))
def test_mlmc_allocation_matches_numerical_minimization(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 6))
    levels = list(range(5, 5 + k))
    v = np.exp(rng.uniform(-6, 1, size=k))
    budget = float(rng.uniform(0.005, 0.05))
    n = mlmc_allocation(v, levels, budget)
    np.testing.assert_allclose(n, lagrange_oracle(v, levels, budget), rtol=1e-5)


@given(
    st.lists(st.floats(1e-4, 5.0), min_size=1, max_size=8),
    st.floats(1e-3, 0.1),
    st.floats(0.0, 0.9),
)
def test_mlmc_plan_optimality_and_feasibility(vs, eta2, frac):
    levels = list(range(5, 5 + len(vs)))
    e_top = frac * eta2
    entries = [(l, 10.0) for l in levels[:-1]] + [(levels[-1], e_top)]
    if abs(e_top - eta2 / 2) > abs(10.0 - eta2 / 2):
        return
    plan = mlmc_plan(ErrorCurve("SIES", 16, entries), eta2, dict(zip(levels, vs)))
    ratio = np.array(plan.n_real) / np.sqrt(np.array(vs) * 2.0 ** -np.array(levels))
    assert np.ptp(ratio) <= 1e-9 * ratio.max()
    assert sum(np.array(vs) / np.array(plan.n_real)) == pytest.approx(eta2 - e_top, rel=1e-12)
    assert plan.variance_bound() <= eta2 - e_top
    assert plan.cost == sum(n * 2**l for n, l in zip(plan.n, levels))
    assert all(n >= 2 for n in plan.n)


def test_mlmc_single_level_matches_mc_formula():
    curve = ErrorCurve("SIES", 16, [(5, 0.25), (6, 0.0)])
    plan = mlmc_plan(curve, 0.75, {5: 2.0})
    assert plan.lopt == 5 and plan.n == [4] and plan.n_real == [4.0]


def test_mlmc_plan_errors():
    with pytest.raises(PlanningError):
        mlmc_plan(ErrorCurve("SIES", 16, [(5, 1.0), (6, 1.0)]), 0.5, {5: 1.0})
    with pytest.raises(PlanningError):
        mlmc_allocation([1.0], [5], 0.0)


@given(st.floats(0.1, 100.0), st.floats(1e-3, 0.2), st.floats(1.0, 1.5))
def test_mc_cost_monotone_in_eta2(c, eta2, factor):
    curve = geometric_curve(c)
    var = lambda l: 2.0
    try:
        lo = mc_plan(curve, eta2, var)
    except PlanningError:
        return
    hi = mc_plan(curve, eta2 * factor, var)
    assert hi.cost_real <= lo.cost_real * (1 + 1e-12)


@given(st.floats(1.0, 1.5))
def test_mlmc_cost_monotone_at_fixed_level(factor):
    curve = ErrorCurve("SIES", 16, [(5, 0.5), (6, 0.5), (7, 0.01)])
    v = {5: 3.0, 6: 0.2, 7: 0.1}
    lo, hi = mlmc_plan(curve, 0.02, v), mlmc_plan(curve, 0.02 * factor, v)
    assert lo.lopt == hi.lopt == 7
    assert hi.cost <= lo.cost


def test_mlmc_cost_jumps_where_the_level_switches():
    # lopt tracks e_l ~ eta2/2; dropping a level can shrink the budget
    # eta2 - e_lopt enough to raise the total cost
    curve = geometric_curve(10.0)
    v = {l: (3.0 if l == 5 else 0.5 * 2.0 ** (6 - l)) for l in LEVELS}
    a, b = mlmc_plan(curve, 0.0292, v), mlmc_plan(curve, 0.0294, v)
    assert b.lopt == a.lopt - 1
    assert b.cost > a.cost


def test_mlmc_level_choice():
    curve = geometric_curve(10.0)
    assert choose_mlmc_level(curve, 0.04) == 9
    assert choose_mlmc_level(curve, 0.04, l_s=10) == 10
    tie = ErrorCurve("SIES", 16, [(5, 0.25), (6, 0.75)])
    assert choose_mlmc_level(tie, 1.0) == 5


def test_mlmc_estimate_reduces_to_mc():
    a = mlmc_estimate("SIES", INST, 10.0, 5, 5, [300], 2)
    b = mc_mean("SIES", INST, LevelGrid(10.0, 5), 300, 2, purpose="mlmc")
    np.testing.assert_array_equal(a.mean, b.mean)
    assert a.per_level_v == [b.var_scalar]


def test_mlmc_estimate_zero_noise():
    zero = lambda l: ZeroStreamFactory(10)
    est = mlmc_estimate("EES1", INST, 10.0, 5, 8, [3, 3, 3, 3], 0, streams=zero)
    x8 = simulate_path("EES1", INST, LevelGrid(10.0, 8), ZeroStream(10)).endpoint
    np.testing.assert_allclose(est.mean, x8, atol=1e-13)
    assert est.per_level_v == [0.0] * 4 and est.levels == [5, 6, 7, 8]


def test_mlmc_estimate_validation():
    with pytest.raises(ValueError):
        mlmc_estimate("SIES", INST, 10.0, 5, 6, [10], 0)
    with pytest.raises(ValueError):
        mlmc_estimate("SIES", INST, 10.0, 5, 6, [10, 1], 0)


def test_mlmc_estimate_is_unbiased_for_the_fine_level():
    est = mlmc_estimate("SIES", INST, 10.0, 5, 7, [4000, 1000, 500], 8)
    ref = mc_mean("SIES", INST, LevelGrid(10.0, 7), 4000, 9)
    se = np.sqrt(est.mean_var + ref.coord_var / ref.N)
    assert np.all(np.abs(est.mean - ref.mean) <= 3 * se)


def test_level_variances_decay():
    v = level_variances("SIES", INST, 10.0, 5, 8, 400, 1)
    assert sorted(v) == [5, 6, 7, 8]
    assert v[5] > v[6] > v[7] > v[8] > 0
