"""Exact transition law of bang-bang Brownian motion ``dx = -lam sgn(x) dt + dw``.

The transition density from ``x0`` after time ``t`` is::

    exp(lam (|x0| - |x|) - lam^2 t / 2) * g_t(x - x0)
        + lam exp(-2 lam |x|) * Phi((lam t - |x| - |x0|) / sqrt(t))

with ``g_t`` the heat kernel and ``Phi`` the standard normal CDF.  Both terms
are evaluated in log space and combined with ``logaddexp``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import log_ndtr

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
MAX_CELLS = 400_000


@dataclass(frozen=True)
class BangBangParams:
    lam: float
    t: float
    x0: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")


def log_transition_density(params, x):
    lam, t, x0 = params.lam, params.t, params.x0
    x = np.asarray(x, dtype=float)
    ax, a0 = np.abs(x), abs(x0)
    heat = lam * (a0 - ax) - 0.5 * lam * lam * t - (x - x0) ** 2 / (2.0 * t) - 0.5 * math.log(2.0 * math.pi * t)
    jump = math.log(lam) - 2.0 * lam * ax + log_ndtr((lam * t - ax - a0) / math.sqrt(t))
    return np.logaddexp(heat, jump)


def transition_density(params, x):
    out = np.exp(log_transition_density(params, x))
    return float(out) if np.ndim(out) == 0 else out


def stationary_density(lam, x):
    """Invariant Laplace density ``lam exp(-2 lam |x|)``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    out = lam * np.exp(-2.0 * lam * np.abs(np.asarray(x, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


class TransitionCdf:
    """CDF of the transition law by composite Gauss-Legendre on a cached grid.

    Cells never straddle the kinks at ``0`` and ``x0``; their width is a
    fraction of both length scales ``sqrt(t)`` and ``1/lam``.
    """

    def __init__(self, params, half_width=None):
        self.params = params
        lam, t, x0 = params.lam, params.t, params.x0
        if half_width is None:
            half_width = 40.0 / lam + 12.0 * math.sqrt(t)
        lo = min(x0, 0.0) - half_width
        hi = max(x0, 0.0) + half_width
        h = min(0.5 * math.sqrt(t), 0.25 / lam)
        knots = sorted({lo, 0.0, x0, hi})
        edges = [np.array([lo])]
        for a, b in zip(knots[:-1], knots[1:]):
            if b <= a:
                continue
            k = max(1, math.ceil((b - a) / h))
            edges.append(np.linspace(a, b, k + 1)[1:])
        self.edges = np.concatenate(edges)
        if self.edges.size > MAX_CELLS:
            raise ValueError("quadrature grid too fine; t is too small for this window")
        self.lo, self.hi = lo, hi
        cells = self._integrate(self.edges[:-1], self.edges[1:])
        self.cum = np.concatenate([[0.0], np.cumsum(cells)])
        self.mass = float(self.cum[-1])

    def _integrate(self, a, b):
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        vals = transition_density(self.params, mid + half * _GL_X)
        return (half * vals * _GL_W).sum(axis=-1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self.lo, self.hi)
        i = np.clip(np.searchsorted(self.edges, xc, side="right") - 1, 0, self.edges.size - 2)
        out = self.cum[i] + self._integrate(self.edges[i], xc)
        return float(out) if out.ndim == 0 else out

    def ppf(self, q, iters=12):
        """Inverse CDF: Newton steps confined to the bracketing cell.

        The CDF is smooth inside a cell, so a handful of steps reaches
        rounding level.
        """
        q = np.asarray(q, dtype=float)
        i = np.clip(np.searchsorted(self.cum, q, side="right") - 1, 0, self.edges.size - 2)
        a, b = self.edges[i], self.edges[i + 1]
        base = self.cum[i]
        x = 0.5 * (a + b)
        for _ in range(iters):
            f = base + self._integrate(a, x) - q
            d = transition_density(self.params, x)
            x = np.clip(x - f / np.maximum(d, 1e-300), a, b)
        return float(x) if x.ndim == 0 else x


def ks_distance(samples, cdf):
    """Kolmogorov-Smirnov sup-distance between the empirical CDF and ``cdf``."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 100:
        raise ValueError(f"need at least 100 samples, got {samples.size}")
    return float(stats.kstest(samples, cdf).statistic)
