"""CSV writing, the on-disk reference cache and the run metadata sidecar."""

import csv
import datetime
import hashlib
import io
import json
import os
import platform
import tempfile

import numpy as np

from .. import __version__
from .._backend import BACKEND
from ..estimators import McEstimate

SIG_DIGITS = 10


def fmt(v):
    """Floats at 10 significant digits; everything else via ``str``."""
    if isinstance(v, (float, np.floating)):
        return format(float(v), f".{SIG_DIGITS}g")
    if isinstance(v, (list, tuple)):
        return ";".join(fmt(x) for x in v)
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(path, text):
    """Atomic write: readers never see a half-written file."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    write_text(path, csv_text(header, rows))
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_metadata(out_dir, command, config=None, extra=None):
    """Sidecar with everything non-deterministic about a run (timestamps, host)."""
    meta = {
        "command": command,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
        "backend": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if config is not None:
        meta["config"] = config.to_dict()
    if extra:
        meta.update(extra)
    path = os.path.join(out_dir, "run_meta.json")
    write_text(path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def default_cache_dir():
    env = os.environ.get("MLMC_LASSO_CACHE")
    if env:
        return env
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return os.path.join(base, "mlmc-lasso")


class DiskCache:
    """Write-once ``.npz`` store for expensive Monte Carlo references.

    Keys hash the full problem data, the sampling parameters and the kernel
    backend, so a stale entry can never be picked up.
    """

    def __init__(self, root=None):
        self.root = root or default_cache_dir()

    def key(self, purpose, inst, *parts):
        h = hashlib.sha256()
        h.update(f"{purpose}|{BACKEND}|{inst.n}x{inst.p}|{inst.beta!r}|".encode())
        h.update(np.ascontiguousarray(inst.A).tobytes())
        h.update(np.ascontiguousarray(inst.y).tobytes())
        h.update("|".join(repr(p) for p in parts).encode())
        return f"{purpose}-{h.hexdigest()[:32]}"

    def _path(self, key):
        return os.path.join(self.root, key + ".npz")

    def get(self, key):
        path = self._path(key)
        if not os.path.exists(path):
            return None
        try:
            with np.load(path) as z:
                return McEstimate(z["mean"], float(z["var_scalar"]), z["coord_var"], int(z["N"]))
        except (OSError, KeyError, ValueError):
            return None  # unreadable entry: recompute and overwrite

    def put(self, key, est):
        os.makedirs(self.root, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".npz")
        os.close(fd)
        try:
            np.savez(tmp, mean=est.mean, var_scalar=est.var_scalar, coord_var=est.coord_var, N=est.N)
            os.replace(tmp, self._path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
