"""Hot inner loops: scheme time-stepping, Metropolis-Hastings chains, ISTA.

Every kernel exists twice, a numba ``@njit`` version (suffix ``_nb``) that
loops sample by sample, and a numpy version (suffix ``_np``) vectorized over
the leading batch axis.  The public names (``advance``, ``advance_record``,
``mh_advance``, ``ista``) are bound to one of them at import time according
to :mod:`mlmc_lasso._backend`.

Scheme codes: 0 = SIES, 1 = EES1, 2 = EES2.
Proposal codes: 1 = EES1, 2 = EES2, 3 = Gaussian random walk.

All kernels mutate their state arguments in place.
"""

import math

import numpy as np

from ._backend import USE_NUMBA, njit

SIES, EES1, EES2, RW = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# numba kernels


@njit(inline="always")
def _soft(z, a):
    if z > a:
        return z - a
    if z < -a:
        return z + a
    return 0.0


@njit(inline="always")
def _grad_quad(A, y, x, r, g):
    """r <- A x - y, g <- A^T r; returns ||r||^2 / 2.

    Both products run in axpy order so the inner loops carry no dependency.
    """
    n, p = A.shape
    for i in range(n):
        r[i] = -y[i]
    for j in range(p):
        xj = x[j]
        for i in range(n):
            r[i] += A[i, j] * xj
    half = 0.0
    for j in range(p):
        g[j] = 0.0
    for i in range(n):
        ri = r[i]
        half += ri * ri
        for j in range(p):
            g[j] += A[i, j] * ri
    return 0.5 * half


@njit(inline="always")
def _grad(A, y, x, r, g):
    """Same products as :func:`_grad_quad` without the residual norm."""
    n, p = A.shape
    for i in range(n):
        r[i] = -y[i]
    for j in range(p):
        xj = x[j]
        for i in range(n):
            r[i] += A[i, j] * xj
    for j in range(p):
        g[j] = 0.0
    for i in range(n):
        ri = r[i]
        for j in range(p):
            g[j] += A[i, j] * ri


@njit(inline="always")
def _scheme_step(kind, A, y, x, noise, b, k, dt, sq, r, g):
    # noise is indexed in place: slicing a view per step costs more than the step
    _grad(A, y, x, r, g)
    p = x.shape[0]
    if kind == 0:
        for j in range(p):
            x[j] = _soft(x[j] - g[j] * dt + sq * noise[b, k, j], dt)
    elif kind == 1:
        for j in range(p):
            x[j] = _soft(x[j] - g[j] * dt, dt) + sq * noise[b, k, j]
    else:
        for j in range(p):
            x[j] = _soft(x[j], dt) - g[j] * dt + sq * noise[b, k, j]


@njit
def advance_nb(kind, A, y, X, noise, dt):
    B, p = X.shape
    n = A.shape[0]
    steps = noise.shape[1]
    sq = math.sqrt(dt)
    r = np.empty(n)
    g = np.empty(p)
    x = np.empty(p)
    for b in range(B):
        for j in range(p):
            x[j] = X[b, j]
        # one loop per scheme: a kind test inside the step loop blocks unswitching
        if kind == 0:
            for k in range(steps):
                _grad(A, y, x, r, g)
                for j in range(p):
                    x[j] = _soft(x[j] - g[j] * dt + sq * noise[b, k, j], dt)
        elif kind == 1:
            for k in range(steps):
                _grad(A, y, x, r, g)
                for j in range(p):
                    x[j] = _soft(x[j] - g[j] * dt, dt) + sq * noise[b, k, j]
        else:
            for k in range(steps):
                _grad(A, y, x, r, g)
                for j in range(p):
                    x[j] = _soft(x[j], dt) - g[j] * dt + sq * noise[b, k, j]
        for j in range(p):
            X[b, j] = x[j]


@njit
def advance_record_nb(kind, A, y, x, noise, dt, out):
    n, p = A.shape
    sq = math.sqrt(dt)
    r = np.empty(n)
    g = np.empty(p)
    noise3 = noise.reshape((1,) + noise.shape)
    for k in range(noise.shape[0]):
        _scheme_step(kind, A, y, x, noise3, 0, k, dt, sq, r, g)
        for j in range(p):
            out[k, j] = x[j]


@njit(inline="always")
def _energy_mean(prop, A, y, x, c, r, g, mu):
    """Objective F(x) and proposal mean mu(x); returns F."""
    p = x.shape[0]
    quad = _grad_quad(A, y, x, r, g)
    l1 = 0.0
    for j in range(p):
        l1 += abs(x[j])
    if prop == 1:
        for j in range(p):
            mu[j] = _soft(x[j] - g[j] * c, c)
    elif prop == 2:
        for j in range(p):
            mu[j] = _soft(x[j], c) - g[j] * c
    else:
        for j in range(p):
            mu[j] = x[j]
    return l1 + quad


@njit
def mh_advance_nb(prop, A, y, beta, c, X, S, count0, noise, logu, ref, err, acc, rec, accumulate):
    B, p = X.shape
    n = A.shape[0]
    steps = logu.shape[1]
    sq = math.sqrt(c)
    record = rec.shape[0] > 0
    r = np.empty(n)
    g = np.empty(p)
    mu1 = np.empty(p)
    mu2 = np.empty(p)
    z = np.empty(p)
    for b in range(B):
        x = X[b]
        f1 = _energy_mean(prop, A, y, x, c, r, g, mu1)
        for k in range(steps):
            for j in range(p):
                z[j] = mu1[j] + sq * noise[b, k, j]
            f2 = _energy_mean(prop, A, y, z, c, r, g, mu2)
            fwd = 0.0
            bwd = 0.0
            for j in range(p):
                d1 = z[j] - mu1[j]
                d2 = x[j] - mu2[j]
                fwd += d1 * d1
                bwd += d2 * d2
            la = -2.0 * beta * (f2 - f1) + (fwd - bwd) / (2.0 * c)
            if la > 0.0:
                la = 0.0
            if logu[b, k] < la:
                for j in range(p):
                    x[j] = z[j]
                    mu1[j] = mu2[j]
                f1 = f2
                acc[b] += 1
            if accumulate:
                cnt = count0 + k + 1
                e = 0.0
                for j in range(p):
                    S[b, j] += x[j]
                    d = ref[j] - S[b, j] / cnt
                    e += d * d
                err[b, k] = e
            if record:
                for j in range(p):
                    rec[b, k, j] = x[j]


@njit(inline="always")
def _kkt_residual(A, y, x, r, g):
    _grad_quad(A, y, x, r, g)
    res = 0.0
    for j in range(x.shape[0]):
        xi = -g[j]
        v = abs(xi) - 1.0
        if v > res:
            res = v
        if x[j] != 0.0:
            s = 1.0 if x[j] > 0.0 else -1.0
            v = abs(xi - s)
            if v > res:
                res = v
    return res


@njit
def ista_nb(A, y, step, tol, max_iter):
    n, p = A.shape
    x = np.zeros(p)
    r = np.empty(n)
    g = np.empty(p)
    res = _kkt_residual(A, y, x, r, g)
    it = 0
    while res > tol and it < max_iter:
        _grad_quad(A, y, x, r, g)
        for j in range(p):
            x[j] = _soft(x[j] - step * g[j], step)
        res = _kkt_residual(A, y, x, r, g)
        it += 1
    return x, res, it


# ---------------------------------------------------------------------------
# numpy twins


def _soft_np(z, a):
    return np.where(z > a, z - a, np.where(z < -a, z + a, 0.0))


def _scheme_step_np(kind, A, y, X, nz, dt, sq):
    G = (X @ A.T - y) @ A
    if kind == SIES:
        return _soft_np(X - G * dt + sq * nz, dt)
    if kind == EES1:
        return _soft_np(X - G * dt, dt) + sq * nz
    return _soft_np(X, dt) - G * dt + sq * nz


def advance_np(kind, A, y, X, noise, dt):
    sq = math.sqrt(dt)
    for k in range(noise.shape[1]):
        X[...] = _scheme_step_np(kind, A, y, X, noise[:, k, :], dt, sq)


def advance_record_np(kind, A, y, x, noise, dt, out):
    sq = math.sqrt(dt)
    X = x[None, :]
    for k in range(noise.shape[0]):
        X = _scheme_step_np(kind, A, y, X, noise[k][None, :], dt, sq)
        out[k] = X[0]
    x[...] = X[0]


def _energy_mean_np(prop, A, y, X, c):
    R = X @ A.T - y
    F = np.abs(X).sum(axis=1) + 0.5 * (R * R).sum(axis=1)
    if prop == EES1:
        mu = _soft_np(X - (R @ A) * c, c)
    elif prop == EES2:
        mu = _soft_np(X, c) - (R @ A) * c
    else:
        mu = X.copy()
    return F, mu


def mh_advance_np(prop, A, y, beta, c, X, S, count0, noise, logu, ref, err, acc, rec, accumulate):
    sq = math.sqrt(c)
    record = rec.shape[0] > 0
    F1, M1 = _energy_mean_np(prop, A, y, X, c)
    for k in range(logu.shape[1]):
        Z = M1 + sq * noise[:, k, :]
        F2, M2 = _energy_mean_np(prop, A, y, Z, c)
        fwd = ((Z - M1) ** 2).sum(axis=1)
        bwd = ((X - M2) ** 2).sum(axis=1)
        la = np.minimum(-2.0 * beta * (F2 - F1) + (fwd - bwd) / (2.0 * c), 0.0)
        ok = logu[:, k] < la
        X[ok] = Z[ok]
        M1[ok] = M2[ok]
        F1[ok] = F2[ok]
        acc += ok
        if accumulate:
            S += X
            err[:, k] = ((ref - S / (count0 + k + 1)) ** 2).sum(axis=1)
        if record:
            rec[:, k, :] = X


def _kkt_residual_np(A, y, x):
    xi = A.T @ (y - A @ x)
    res = max(0.0, float(np.max(np.abs(xi) - 1.0)))
    nz = x != 0.0
    if nz.any():
        res = max(res, float(np.max(np.abs(xi[nz] - np.sign(x[nz])))))
    return res


def ista_np(A, y, step, tol, max_iter):
    x = np.zeros(A.shape[1])
    res = _kkt_residual_np(A, y, x)
    it = 0
    while res > tol and it < max_iter:
        x = _soft_np(x - step * (A.T @ (A @ x - y)), step)
        res = _kkt_residual_np(A, y, x)
        it += 1
    return x, res, it


if USE_NUMBA:
    advance = advance_nb
    advance_record = advance_record_nb
    mh_advance = mh_advance_nb
    ista = ista_nb
else:
    advance = advance_np
    advance_record = advance_record_np
    mh_advance = mh_advance_np
    ista = ista_np
