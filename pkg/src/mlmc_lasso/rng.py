"""Seed splitting and Gaussian noise streams.

Every independent sample gets its own counter-based Philox generator whose
128-bit key is a stable hash of ``(master_seed, purpose, scheme, level,
index)``.  Results therefore do not depend on how samples are batched or
distributed over threads.
"""

import hashlib

import numpy as np

from .errors import StreamExhausted


def substream_key(master_seed, purpose, level=0, index=0, scheme=""):
    """128-bit Philox key for one sample stream."""
    token = f"{int(master_seed)}|{purpose}|{scheme}|{int(level)}|{int(index)}"
    digest = hashlib.blake2b(token.encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def substream(master_seed, purpose, level=0, index=0, scheme=""):
    key = substream_key(master_seed, purpose, level, index, scheme)
    return np.random.Generator(np.random.Philox(key=key))


class GaussianStream:
    """Unbounded stream of standard Gaussian p-vectors and uniforms."""

    def __init__(self, generator, p):
        self.generator = generator
        self.p = p

    def normals(self, k):
        return self.generator.standard_normal((k, self.p))

    def uniforms(self, k):
        return self.generator.random(k)


class ZeroStream:
    """Deterministic stream: zero noise, uniforms fixed at ``u``."""

    def __init__(self, p, u=0.5):
        self.p = p
        self.u = u

    def normals(self, k):
        return np.zeros((k, self.p))

    def uniforms(self, k):
        return np.full(k, self.u)


class ArrayStream:
    """Replays a fixed (steps, p) array; raises once it is used up."""

    def __init__(self, normals, uniforms=()):
        self._normals = np.atleast_2d(np.asarray(normals, dtype=float))
        self._uniforms = np.asarray(uniforms, dtype=float)
        self.p = self._normals.shape[1]
        self._i = 0
        self._j = 0

    def normals(self, k):
        if self._i + k > self._normals.shape[0]:
            raise StreamExhausted(
                f"requested {k} normals, {self._normals.shape[0] - self._i} left"
            )
        out = self._normals[self._i : self._i + k]
        self._i += k
        return out.copy()

    def uniforms(self, k):
        if self._j + k > self._uniforms.shape[0]:
            raise StreamExhausted(f"requested {k} uniforms, {self._uniforms.shape[0] - self._j} left")
        out = self._uniforms[self._j : self._j + k]
        self._j += k
        return out.copy()


class StreamFactory:
    """Maps a sample index to that sample's :class:`GaussianStream`."""

    def __init__(self, master_seed, purpose, p, level=0, scheme=""):
        self.master_seed = master_seed
        self.purpose = purpose
        self.p = p
        self.level = level
        self.scheme = scheme

    def __call__(self, index):
        gen = substream(self.master_seed, self.purpose, self.level, index, self.scheme)
        return GaussianStream(gen, self.p)


class ZeroStreamFactory:
    def __init__(self, p):
        self.p = p

    def __call__(self, index):
        return ZeroStream(self.p)
