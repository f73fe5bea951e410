"""Time discretizations of the l1-drift Langevin diffusion on dyadic grids.

Three one-step maps are provided, all driven by a raw standard Gaussian
vector ``n`` and the quadratic-part gradient ``g(x) = A^T (A x - y)``::

    SIES:  x' = prox_dt(x - g(x) dt + sqrt(dt) n)
    EES1:  x' = prox_dt(x - g(x) dt) + sqrt(dt) n
    EES2:  x' = prox_dt(x) - g(x) dt + sqrt(dt) n

where ``prox_dt`` is soft-thresholding at ``dt``.  Paths at level ``l`` on
horizon ``T`` take ``2**l`` steps of size ``T * 2**-l``.
"""

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._backend import USE_NUMBA
from .prox import soft_threshold

# samples per work unit; fixed so results do not depend on the thread count
BLOCK = 32 if USE_NUMBA else 256
CHUNK = 2048


class SchemeKind(enum.Enum):
    SIES = 0
    EES1 = 1
    EES2 = 2

    @property
    def code(self):
        return self.value

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; expected one of SIES, EES1, EES2") from None


@dataclass(frozen=True)
class LevelGrid:
    T: float
    l: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.l < 0:
            raise ValueError(f"level must be nonnegative, got {self.l}")

    @property
    def dt(self):
        return math.ldexp(self.T, -self.l)

    @property
    def steps(self):
        return 1 << self.l

    def coarser(self):
        return LevelGrid(self.T, self.l - 1)


@dataclass(frozen=True)
class CoupledEndpoints:
    fine: np.ndarray
    coarse: np.ndarray

    @property
    def delta(self):
        return self.fine - self.coarse


@dataclass(frozen=True)
class PathResult:
    endpoint: np.ndarray
    trajectory: np.ndarray = None
    step_index: np.ndarray = None


def default_small_level(T):
    """Coarsest level: ``ceil(log2 T) + 1`` (gives 5 for ``T = 10``)."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    return max(0, math.ceil(math.log2(T)) + 1)


def step(kind, inst, x, dt, noise):
    """One step of ``kind`` from ``x`` with raw standard-Gaussian ``noise``."""
    kind = SchemeKind.parse(kind)
    x = inst.check_vector(x)
    noise = inst.check_vector(noise)
    g = inst.A.T @ (inst.A @ x - inst.y)
    sq = math.sqrt(dt)
    if kind is SchemeKind.SIES:
        return soft_threshold(x - g * dt + sq * noise, dt)
    if kind is SchemeKind.EES1:
        return soft_threshold(x - g * dt, dt) + sq * noise
    return soft_threshold(x, dt) - g * dt + sq * noise


def _arrays(inst):
    return np.ascontiguousarray(inst.A), np.ascontiguousarray(inst.y)


def _start(inst, x0):
    if x0 is None:
        return np.zeros(inst.p)
    return inst.check_vector(x0).copy()


def simulate_path(kind, inst, grid, stream, x0=None, record=False, stride=1):
    """Run one path over ``grid.steps`` steps, drawing noise from ``stream``.

    With ``record=True`` the trajectory is kept every ``stride`` steps (row 0
    is the initial state, the final step is always kept).
    """
    kind = SchemeKind.parse(kind)
    A, y = _arrays(inst)
    x = _start(inst, x0)
    steps, dt = grid.steps, grid.dt
    rows, idx = ([x.copy()], [0]) if record else (None, None)
    done = 0
    while done < steps:
        c = min(CHUNK, steps - done)
        noise = np.ascontiguousarray(stream.normals(c))
        if record:
            out = np.empty((c, inst.p))
            kernels.advance_record(kind.code, A, y, x, noise, dt, out)
            for k in range(c):
                s = done + k + 1
                if s % stride == 0 or s == steps:
                    rows.append(out[k].copy())
                    idx.append(s)
        else:
            kernels.advance(kind.code, A, y, x[None, :], noise[None, :, :], dt)
        done += c
    if record:
        return PathResult(x, np.array(rows), np.array(idx))
    return PathResult(x)


def coarse_noise(fine_noise):
    """Coarse-step standard normals ``(n_{2j} + n_{2j+1}) / sqrt(2)`` along axis -2."""
    return (fine_noise[..., 0::2, :] + fine_noise[..., 1::2, :]) / math.sqrt(2.0)


def simulate_coupled(kind, inst, fine_grid, stream, x0=None, return_increments=False):
    """Fine (level l) and coarse (level l-1) paths sharing one Brownian path.

    With ``return_increments=True`` also returns the Brownian increments fed
    to each grid, shapes ``(2**l, p)`` and ``(2**(l-1), p)``.
    """
    if fine_grid.l < 1:
        raise ValueError("coupled simulation needs level >= 1")
    kind = SchemeKind.parse(kind)
    A, y = _arrays(inst)
    xf = _start(inst, x0)[None, :]
    xc = xf.copy()
    dtf, dtc = fine_grid.dt, fine_grid.coarser().dt
    steps = fine_grid.steps
    inc_f, inc_c = [], []
    done = 0
    while done < steps:
        c = min(CHUNK, steps - done)
        nf = np.ascontiguousarray(stream.normals(c))[None]
        nc = np.ascontiguousarray(coarse_noise(nf))
        kernels.advance(kind.code, A, y, xf, nf, dtf)
        kernels.advance(kind.code, A, y, xc, nc, dtc)
        if return_increments:
            inc_f.append(math.sqrt(dtf) * nf[0])
            inc_c.append(math.sqrt(dtc) * nc[0])
        done += c
    res = CoupledEndpoints(xf[0], xc[0])
    if return_increments:
        return res, np.concatenate(inc_f), np.concatenate(inc_c)
    return res


def _run_blocks(fn, N, threads):
    blocks = [(s, min(s + BLOCK, N)) for s in range(0, N, BLOCK)]
    if threads is None or threads <= 1 or len(blocks) == 1:
        return [fn(a, b) for a, b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), blocks))


def sample_endpoints(kind, inst, grid, N, streams, x0=None, threads=1):
    """Endpoints of ``N`` independent paths; sample ``i`` uses ``streams(i)``.

    Returns an ``(N, p)`` array, identical for any ``threads``.
    """
    kind = SchemeKind.parse(kind)
    A, y = _arrays(inst)
    start = _start(inst, x0)
    steps, dt = grid.steps, grid.dt

    def block(a, b):
        X = np.tile(start, (b - a, 1))
        ss = [streams(i) for i in range(a, b)]
        done = 0
        while done < steps:
            c = min(CHUNK, steps - done)
            noise = np.stack([s.normals(c) for s in ss])
            kernels.advance(kind.code, A, y, X, noise, dt)
            done += c
        return X

    return np.concatenate(_run_blocks(block, N, threads))


def sample_coupled(kind, inst, fine_grid, N, streams, x0=None, threads=1):
    """``N`` coupled (fine, coarse) endpoint pairs, each an ``(N, p)`` array."""
    if fine_grid.l < 1:
        raise ValueError("coupled simulation needs level >= 1")
    kind = SchemeKind.parse(kind)
    A, y = _arrays(inst)
    start = _start(inst, x0)
    steps = fine_grid.steps
    dtf, dtc = fine_grid.dt, fine_grid.coarser().dt

    def block(a, b):
        Xf = np.tile(start, (b - a, 1))
        Xc = Xf.copy()
        ss = [streams(i) for i in range(a, b)]
        done = 0
        while done < steps:
            c = min(CHUNK, steps - done)
            nf = np.stack([s.normals(c) for s in ss])
            nc = np.ascontiguousarray(coarse_noise(nf))
            kernels.advance(kind.code, A, y, Xf, nf, dtf)
            kernels.advance(kind.code, A, y, Xc, nc, dtc)
            done += c
        return Xf, Xc

    parts = _run_blocks(block, N, threads)
    return np.concatenate([f for f, _ in parts]), np.concatenate([c for _, c in parts])
