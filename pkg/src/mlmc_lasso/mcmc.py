"""Metropolis-Hastings chains targeting the Lasso posterior.

Proposals are Gaussian with mean ``mu(x)`` and covariance ``c I``:

* EES1 (labelled PMALA): ``mu = prox_dt(x - g(x) dt)``, ``c = dt``
* EES2: ``mu = prox_dt(x) - g(x) dt``, ``c = dt``
* RW: ``mu = x``, ``c = sigma2``

so one proposal is exactly one step of the corresponding scheme.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConvergenceError
from .model import log_posterior_unnorm
from .prox import soft_threshold
from .rng import StreamFactory
from .schemes import BLOCK, CHUNK, _run_blocks

_EMPTY_REC = np.empty((0, 0, 0))


class Proposal(enum.Enum):
    EES1 = 1
    EES2 = 2
    RW = 3

    @property
    def code(self):
        return self.value

    @property
    def label(self):
        return {"EES1": "PMALA", "EES2": "MCMC_prox(EES2)", "RW": "MCMC_RW"}[self.name]

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).upper()
        if key == "PMALA":
            key = "EES1"
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown proposal {name!r}; expected EES1, EES2 or RW") from None


@dataclass(frozen=True)
class ChainSpec:
    proposal: Proposal
    dt: float = None
    sigma2: float = None
    burn_in: int = 0

    def __post_init__(self):
        object.__setattr__(self, "proposal", Proposal.parse(self.proposal))
        if self.proposal is Proposal.RW:
            if self.sigma2 is None or not self.sigma2 > 0:
                raise ValueError("RW proposal needs a positive sigma2")
        elif self.dt is None or not self.dt > 0:
            raise ValueError(f"{self.proposal.name} proposal needs a positive dt")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")

    @property
    def scale(self):
        """Proposal variance per coordinate."""
        return self.sigma2 if self.proposal is Proposal.RW else self.dt

    @property
    def label(self):
        return self.proposal.label

    @property
    def param(self):
        return self.scale

    def tag(self):
        return f"{self.proposal.name}:{self.scale!r}:{self.burn_in}"


@dataclass(frozen=True)
class ChainRun:
    samples: np.ndarray
    acceptance: float
    final: np.ndarray


@dataclass(frozen=True)
class McmcCost:
    N: int
    trace: list  # (N, mse) pairs in the order they were tested
    acceptance: float

    @property
    def cost(self):
        return self.N


def proposal_mean(spec, inst, x):
    x = inst.check_vector(x)
    c = spec.scale
    if spec.proposal is Proposal.RW:
        return x.copy()
    g = inst.A.T @ (inst.A @ x - inst.y)
    if spec.proposal is Proposal.EES1:
        return soft_threshold(x - g * c, c)
    return soft_threshold(x, c) - g * c


def proposal_sample(spec, inst, x, stream):
    return proposal_mean(spec, inst, x) + math.sqrt(spec.scale) * stream.normals(1)[0]


def proposal_logdensity(spec, inst, x_from, x_to):
    x_to = inst.check_vector(x_to)
    c = spec.scale
    d = x_to - proposal_mean(spec, inst, x_from)
    return -0.5 * inst.p * math.log(2.0 * math.pi * c) - float(d @ d) / (2.0 * c)


def log_acceptance(spec, inst, x1, x2, log_target=None):
    """``min(0, log rho(x2) - log rho(x1) + log q(x1|x2) - log q(x2|x1))``."""
    lt = log_target or (lambda v: log_posterior_unnorm(inst, v))
    a, b = lt(x1), lt(x2)
    if b == -math.inf:
        return -math.inf
    la = (b - a) + (
        proposal_logdensity(spec, inst, x2, x1) - proposal_logdensity(spec, inst, x1, x2)
    )
    return min(0.0, la)


def mh_step(spec, inst, x, stream, log_target=None):
    """One MH transition; draws one proposal and one uniform from ``stream``."""
    x = inst.check_vector(x)
    x2 = proposal_sample(spec, inst, x, stream)
    la = log_acceptance(spec, inst, x, x2, log_target)
    u = stream.uniforms(1)[0]
    # u == 0 would make log u = -inf; treat it as below any finite la
    if la > -math.inf and (u == 0.0 or math.log(u) < la):
        return x2, True
    return x.copy(), False


def _arrays(inst):
    return np.ascontiguousarray(inst.A), np.ascontiguousarray(inst.y)


def _advance_block(spec, inst, X, S, acc, streams, count0, steps, ref, accumulate, record=False):
    """Advance the chains in ``X`` by ``steps`` MH transitions, chunk by chunk.

    Returns the per-step error sums over the block (if ``accumulate``) and
    the recorded states (if ``record``).
    """
    A, y = _arrays(inst)
    B = X.shape[0]
    errsum = np.zeros(steps) if accumulate else None
    recs = [] if record else None
    done = 0
    while done < steps:
        c = min(CHUNK, steps - done)
        noise = np.stack([s.normals(c) for s in streams])
        with np.errstate(divide="ignore"):
            logu = np.log(np.stack([s.uniforms(c) for s in streams]))
        err = np.empty((B, c)) if accumulate else np.empty((0, 0))
        rec = np.empty((B, c, inst.p)) if record else _EMPTY_REC
        kernels.mh_advance(
            spec.proposal.code, A, y, inst.beta, spec.scale, X, S, count0 + done,
            noise, logu, ref, err, acc, rec, accumulate,
        )
        if accumulate:
            errsum[done : done + c] = err.sum(axis=0)
        if record:
            recs.append(rec)
        done += c
    if record:
        return errsum, np.concatenate(recs, axis=1)
    return errsum


def run_chain(spec, inst, steps, stream, x0=None, record=True):
    """Single chain of ``steps`` transitions after ``spec.burn_in`` discarded ones."""
    X = np.zeros((1, inst.p)) if x0 is None else inst.check_vector(x0).copy()[None, :]
    S = np.zeros_like(X)
    acc = np.zeros(1, dtype=np.int64)
    ref = np.zeros(inst.p)
    if spec.burn_in:
        _advance_block(spec, inst, X, S, acc, [stream], 0, spec.burn_in, ref, False)
        acc[:] = 0
    if record:
        _, rec = _advance_block(spec, inst, X, S, acc, [stream], 0, steps, ref, False, record=True)
        samples = rec[0]
    else:
        _advance_block(spec, inst, X, S, acc, [stream], 0, steps, ref, False)
        samples = None
    return ChainRun(samples, float(acc[0]) / steps if steps else 0.0, X[0].copy())


def chain_means(spec, inst, steps, M, master_seed, x0=None, threads=1, purpose="chains"):
    """Running means after ``steps`` transitions for ``M`` independent chains.

    Returns ``(means (M, p), acceptance rates (M,))``.
    """
    fac = StreamFactory(master_seed, purpose, inst.p, 0, spec.tag())
    start = np.zeros(inst.p) if x0 is None else inst.check_vector(x0)

    def block(a, b):
        X = np.tile(start, (b - a, 1))
        S = np.zeros_like(X)
        acc = np.zeros(b - a, dtype=np.int64)
        streams = [fac(i) for i in range(a, b)]
        ref = np.zeros(inst.p)
        if spec.burn_in:
            _advance_block(spec, inst, X, S, acc, streams, 0, spec.burn_in, ref, False)
            acc[:] = 0
        _advance_block(spec, inst, X, S, acc, streams, 0, steps, ref, True)
        return S / steps, acc / steps

    parts = _run_blocks(block, M, threads)
    return np.concatenate([m for m, _ in parts]), np.concatenate([a for _, a in parts])


def batch_means_stderr(samples, batches=50):
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n < 2 * batches:
        raise ValueError(f"need at least {2 * batches} samples for {batches} batches")
    size = n // batches
    bm = samples[: size * batches].reshape((batches, size) + samples.shape[1:]).mean(axis=1)
    return bm.std(axis=0, ddof=1) / math.sqrt(batches)


def mcmc_cost(spec, inst, eta2, M, reference_mean, master_seed, n_min=128, n_max=2**20, x0=None, threads=1):
    """Smallest tested chain length ``N`` whose replicate MSE is at most ``eta2``.

    ``MSE(N) = mean_i ||reference_mean - mean_{k<=N} chain_i(k)||^2`` over
    ``M`` independent chains.  ``N`` is searched on the doubling schedule
    ``n_min, 2 n_min, ...`` and then bisected inside the bracketing pair.
    Raises :class:`ConvergenceError` (with the trace) if ``n_max`` is reached.
    """
    if not eta2 > 0:
        raise ValueError("eta2 must be positive")
    if M < 10:
        raise ValueError("need at least 10 replicate chains")
    if n_min < 1 or n_max < n_min:
        raise ValueError("need 1 <= n_min <= n_max")
    ref = np.ascontiguousarray(inst.check_vector(reference_mean), dtype=float)
    fac = StreamFactory(master_seed, "mcmc", inst.p, 0, spec.tag())
    start = np.zeros(inst.p) if x0 is None else inst.check_vector(x0)
    blocks = [(a, min(a + BLOCK, M)) for a in range(0, M, BLOCK)]
    states = []
    for a, b in blocks:
        X = np.tile(start, (b - a, 1))
        states.append([X, np.zeros_like(X), np.zeros(b - a, dtype=np.int64), [fac(i) for i in range(a, b)]])
    if spec.burn_in:
        for X, S, acc, ss in states:
            _advance_block(spec, inst, X, S, acc, ss, 0, spec.burn_in, ref, False)
            acc[:] = 0

    mse = np.empty(0)
    trace = []

    def extend(target):
        nonlocal mse
        count0 = mse.shape[0]
        steps = target - count0

        def run(i):
            X, S, acc, ss = states[i]
            return _advance_block(spec, inst, X, S, acc, ss, count0, steps, ref, True)

        idx = list(range(len(states)))
        if threads is None or threads <= 1 or len(idx) == 1:
            sums = [run(i) for i in idx]
        else:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                sums = list(pool.map(run, idx))
        total = np.zeros(steps)
        for s in sums:  # fixed block order keeps the reduction deterministic
            total += s
        mse = np.concatenate([mse, total / M])

    def acceptance():
        n = mse.shape[0]
        return float(sum(int(st[2].sum()) for st in states)) / (M * n)

    N = n_min
    lo = None
    while True:
        extend(N)
        trace.append((N, float(mse[N - 1])))
        if mse[N - 1] <= eta2:
            break
        lo = N
        if N >= n_max:
            raise ConvergenceError(
                f"MCMC MSE did not reach {eta2:g} within {n_max} steps (last {mse[N - 1]:.3g})",
                trace=trace,
            )
        N = min(2 * N, n_max)
    hi = N
    if lo is not None:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            trace.append((mid, float(mse[mid - 1])))
            if mse[mid - 1] <= eta2:
                hi = mid
            else:
                lo = mid
    return McmcCost(hi, trace, acceptance())


__all__ = [
    "ChainRun",
    "ChainSpec",
    "McmcCost",
    "Proposal",
    "batch_means_stderr",
    "chain_means",
    "log_acceptance",
    "mcmc_cost",
    "mh_step",
    "proposal_logdensity",
    "proposal_mean",
    "proposal_sample",
    "run_chain",
]
