"""The numba kernels and their numpy twins must agree to rounding."""

import os
import subprocess
import sys

import numpy as np
import pytest

from mlmc_lasso import kernels
from mlmc_lasso.model import generate_problem

INST, _ = generate_problem(10, 7, 21)
A, Y = np.ascontiguousarray(INST.A), np.ascontiguousarray(INST.y)


@pytest.mark.parametrize("kind", [0, 1, 2])
def test_advance_twins_agree(kind):
    rng = np.random.default_rng(kind)
    X0 = rng.normal(size=(5, 10))
    noise = rng.normal(size=(5, 300, 10))
    Xa, Xb = X0.copy(), X0.copy()
    kernels.advance_nb(kind, A, Y, Xa, noise, 0.01)
    kernels.advance_np(kind, A, Y, Xb, noise, 0.01)
    np.testing.assert_allclose(Xa, Xb, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("kind", [0, 1, 2])
def test_advance_record_twins_agree(kind):
    rng = np.random.default_rng(10 + kind)
    noise = rng.normal(size=(50, 10))
    xa, xb = np.zeros(10), np.zeros(10)
    oa, ob = np.empty((50, 10)), np.empty((50, 10))
    kernels.advance_record_nb(kind, A, Y, xa, noise, 0.05, oa)
    kernels.advance_record_np(kind, A, Y, xb, noise, 0.05, ob)
    np.testing.assert_allclose(oa, ob, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(xa, xb, rtol=1e-10, atol=1e-12)
    np.testing.assert_array_equal(xa, oa[-1])


@pytest.mark.parametrize("prop,c", [(1, 0.05), (2, 0.05), (3, 0.3)])
def test_mh_advance_twins_agree(prop, c):
    rng = np.random.default_rng(prop)
    B, steps = 4, 400
    X0 = rng.normal(size=(B, 10)) * 0.3
    noise = rng.normal(size=(B, steps, 10))
    logu = np.log(rng.random((B, steps)))
    ref = rng.normal(size=10)
    out = []
    for fn in (kernels.mh_advance_nb, kernels.mh_advance_np):
        X, S = X0.copy(), np.zeros((B, 10))
        err, acc = np.empty((B, steps)), np.zeros(B, dtype=np.int64)
        rec = np.empty((B, steps, 10))
        fn(prop, A, Y, 1.0, c, X, S, 0, noise, logu, ref, err, acc, rec, True)
        out.append((X, S, err, acc, rec))
    (Xa, Sa, ea, aa, ra), (Xb, Sb, eb, ab, rb) = out
    # identical decisions, so identical acceptance counts
    np.testing.assert_array_equal(aa, ab)
    assert 0 < aa.sum() < B * steps
    for u, v in [(Xa, Xb), (Sa, Sb), (ea, eb), (ra, rb)]:
        np.testing.assert_allclose(u, v, rtol=1e-9, atol=1e-11)


def test_ista_twins_agree():
    xa, ra, ia = kernels.ista_nb(A, Y, 0.3, 1e-12, 100000)
    xb, rb, ib = kernels.ista_np(A, Y, 0.3, 1e-12, 100000)
    np.testing.assert_allclose(xa, xb, atol=1e-10)
    assert ra <= 1e-12 and rb <= 1e-12
    assert abs(ia - ib) <= 2


def test_backend_flag_selects_numpy():
    code = "from mlmc_lasso import BACKEND, kernels; print(BACKEND, kernels.advance is kernels.advance_np)"
    env = dict(os.environ, MLMC_LASSO_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
    env["MLMC_LASSO_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numba", "False"]
