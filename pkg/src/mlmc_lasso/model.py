"""Regression model, Lasso objective, posterior density and KKT checks.

The posterior over the signal is proportional to ``exp(-2 * beta * F(x))`` with
``F(x) = ||x||_1 + ||A x - y||^2 / 2``; its mode is the Lasso.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConvergenceError
from .rng import substream

KKT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    A: np.ndarray
    y: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float, ndmin=1)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError(f"A must be a non-empty matrix, got shape {A.shape}")
        if y.shape != (A.shape[0],):
            raise ValueError(f"y must have length {A.shape[0]}, got shape {y.shape}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        A.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.A.shape[1]

    def with_beta(self, beta):
        return ProblemInstance(self.A, self.y, beta)

    def check_vector(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise ValueError(f"expected a vector of length {self.p}, got shape {x.shape}")
        return x

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.beta == other.beta
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None


@dataclass(frozen=True)
class ObjectiveValue:
    l1: float
    quad: float
    total: float


@dataclass(frozen=True)
class KktCertificate:
    """Optimality certificate ``xi = A^T (y - A x)`` and the index sets it induces.

    Index sets are 0-based sorted tuples.  ``boundary_injective`` reports
    whether the columns of ``A`` indexed by ``boundary`` are linearly
    independent (a sufficient condition for a unique Lasso); it is not enforced.
    """

    xi: np.ndarray
    setI: tuple
    boundary: tuple
    support: tuple
    residual: float
    boundary_injective: bool = field(default=True)

    @property
    def zero_set(self):
        s = set(self.support)
        return tuple(i for i in range(len(self.xi)) if i not in s)

    @property
    def zero_boundary(self):
        s = set(self.support)
        return tuple(i for i in self.boundary if i not in s)


def sample_laplace(rng, size, rate=2.0):
    """Laplace variates with density proportional to ``exp(-rate |t|)`` by inverse CDF."""
    # u strictly inside (0, 1)
    u = (rng.integers(0, 2**53, size=size) + 0.5) / 2.0**53
    c = u - 0.5
    return -np.sign(c) * np.log1p(-2.0 * np.abs(c)) / rate


def generate_problem(p, n, seed):
    """Random test problem: Bernoulli ``+-1/sqrt(n)`` design, Laplace(rate 2) signal.

    Returns ``(instance, x_true)`` with ``y = A x_true + w`` and ``w ~ N(0, I/2)``.
    """
    if p < 1 or n < 1:
        raise ValueError(f"p and n must be positive, got p={p}, n={n}")
    rng = substream(seed, "problem", 0, 0, f"{p}x{n}")
    signs = rng.integers(0, 2, size=(n, p))
    A = np.where(signs == 1, 1.0, -1.0) / math.sqrt(n)
    x_true = sample_laplace(rng, p)
    w = math.sqrt(0.5) * rng.standard_normal(n)
    y = A @ x_true + w
    return ProblemInstance(A, y), x_true


def objective(inst, x):
    x = inst.check_vector(x)
    r = inst.A @ x - inst.y
    l1 = float(np.sum(np.abs(x)))
    quad = 0.5 * float(r @ r)
    return ObjectiveValue(l1, quad, l1 + quad)


def log_posterior_unnorm(inst, x):
    """``-2 beta F(x)``: the log posterior up to its partition function."""
    return -2.0 * inst.beta * objective(inst, x).total


def spectral_norm_sq(A, iters=100):
    """Largest eigenvalue of ``A^T A`` by power iteration from the all-ones vector."""
    v = np.ones(A.shape[1]) / math.sqrt(A.shape[1])
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def lasso_solve(inst, tol=1e-10, max_iter=1_000_000):
    """Lasso by proximal gradient (ISTA) started at zero, step ``1 / ||A^T A||_2``.

    Iterates until the KKT residual (see :func:`kkt_check`) is at most ``tol``.
    Raises :class:`ConvergenceError` after ``max_iter`` iterations.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    L = spectral_norm_sq(inst.A)
    if L == 0.0:
        return np.zeros(inst.p)
    x, res, it = kernels.ista(
        np.ascontiguousarray(inst.A), np.ascontiguousarray(inst.y), 1.0 / L, tol, max_iter
    )
    if res > tol:
        raise ConvergenceError(
            f"ISTA did not reach KKT residual {tol:g} in {it} iterations (last {res:.3g})",
            residual=res,
        )
    return _polish(inst, np.asarray(x), res)


def _kkt_residual(inst, x):
    xi = inst.A.T @ (inst.y - inst.A @ x)
    res = max(0.0, float(np.max(np.abs(xi) - 1.0)))
    nz = x != 0.0
    if nz.any():
        res = max(res, float(np.max(np.abs(xi[nz] - np.sign(x[nz])))))
    return res


def _polish(inst, x, res):
    """Re-solve the stationarity equations on the support with fixed signs.

    ISTA only reaches its tolerance; when the support and signs are right this
    lands on the exact solution up to rounding.  Kept only if it helps.
    """
    S = np.flatnonzero(x)
    if S.size == 0:
        return x
    As = inst.A[:, S]
    sg = np.sign(x[S])
    # minimum-norm solve: duplicated columns leave the system singular
    z = np.linalg.lstsq(As.T @ As, As.T @ inst.y - sg, rcond=None)[0]
    if np.any(np.sign(z) != sg):
        return x
    cand = np.zeros_like(x)
    cand[S] = z
    return cand if _kkt_residual(inst, cand) < res else x


def kkt_check(inst, x, tol=KKT_TOL):
    x = inst.check_vector(x)
    xi = inst.A.T @ (inst.y - inst.A @ x)
    a = np.abs(xi)
    residual = max(0.0, float(np.max(a - 1.0)))
    nz = np.flatnonzero(x != 0.0)
    if nz.size:
        residual = max(residual, float(np.max(np.abs(xi[nz] - np.sign(x[nz])))))
    setI = tuple(int(i) for i in np.flatnonzero(a < 1.0 - tol))
    boundary = tuple(int(i) for i in np.flatnonzero(a >= 1.0 - tol))
    if boundary:
        injective = bool(np.linalg.matrix_rank(inst.A[:, list(boundary)]) == len(boundary))
    else:
        injective = True
    return KktCertificate(
        xi=xi,
        setI=setI,
        boundary=boundary,
        support=tuple(int(i) for i in nz),
        residual=residual,
        boundary_injective=injective,
    )


def objective_gap_decomposition(inst, x, x_star):
    """``F(x) - F(x*)`` computed directly and through the KKT vector of ``x*``.

    The second form is ``sum_i |x_i| (1 - sign(x_i) xi_i) + ||A (x - x*)||^2 / 2``.
    """
    x = inst.check_vector(x)
    cert = kkt_check(inst, x_star)
    if cert.residual > 1e-6:
        raise ValueError(f"x_star is not a Lasso solution (KKT residual {cert.residual:.3g})")
    gap_direct = objective(inst, x).total - objective(inst, x_star).total
    # zero coordinates contribute nothing whatever xi_i is
    l1_part = float(np.sum(np.abs(x) * (1.0 - np.sign(x) * cert.xi)))
    d = inst.A @ (x - np.asarray(x_star, dtype=float))
    return gap_direct, l1_part + 0.5 * float(d @ d)


def _fmt(v):
    return format(float(v), ".17g")


def problem_to_json(inst, x_true=None, seed=None):
    """Serialize with 17 significant digits so floats round-trip exactly."""
    rows = ",".join("[" + ",".join(_fmt(v) for v in row) + "]" for row in inst.A)
    parts = [
        f'"p":{inst.p}',
        f'"n":{inst.n}',
        f'"beta":{_fmt(inst.beta)}',
        f'"A":[{rows}]',
        '"y":[' + ",".join(_fmt(v) for v in inst.y) + "]",
    ]
    if x_true is not None:
        parts.append('"x_true":[' + ",".join(_fmt(v) for v in x_true) + "]")
    if seed is not None:
        parts.append(f'"seed":{int(seed)}')
    return "{" + ",".join(parts) + "}\n"


def problem_from_json(text):
    """Inverse of :func:`problem_to_json`; returns ``(instance, x_true, seed)``."""
    doc = json.loads(text)
    inst = ProblemInstance(np.array(doc["A"], dtype=float), np.array(doc["y"], dtype=float), doc.get("beta", 1.0))
    if inst.p != doc["p"] or inst.n != doc["n"]:
        raise ValueError("declared dimensions do not match A")
    x_true = np.array(doc["x_true"], dtype=float) if "x_true" in doc else None
    return inst, x_true, doc.get("seed")
