import os

import pytest
from hypothesis import settings

# numba compiles on first call, so per-example deadlines are meaningless
settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


@pytest.fixture(scope="session", autouse=True)
def _isolated_cache(tmp_path_factory):
    if "MLMC_LASSO_CACHE" not in os.environ:
        os.environ["MLMC_LASSO_CACHE"] = str(tmp_path_factory.mktemp("cache"))
    yield


def golden_min(diff, lo, hi, tol=1e-13, max_iter=400):
    """Golden-section search for the minimizer of a unimodal objective on [lo, hi].

    ``diff(c, d)`` must return ``f(c) - f(d)``.  Passing the difference rather
    than ``f`` lets callers evaluate it without cancellation, so the search
    resolves the minimizer far below the ``sqrt(machine eps)`` floor of
    comparing raw objective values.
    """
    g = (5 ** 0.5 - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if diff(c, d) < 0:
            b, d = d, c
            c = b - g * (b - a)
        else:
            a, c = c, d
            d = a + g * (b - a)
    return 0.5 * (a + b)


def soft_objective_diff(x, a):
    """``f(c) - f(d)`` for ``f(z) = a |z| + (z - x)^2 / 2``."""
    return lambda c, d: a * (abs(c) - abs(d)) + (c - d) * (c + d - 2 * x) / 2


def huber_diff(c, d, eps):
    ac, ad = abs(c), abs(d)
    if ac >= eps and ad >= eps:
        return ac - ad
    if ac < eps and ad < eps:
        return (ac - ad) * (ac + ad) / (2 * eps)
    hc = ac - eps / 2 if ac >= eps else ac * ac / (2 * eps)
    hd = ad - eps / 2 if ad >= eps else ad * ad / (2 * eps)
    return hc - hd


def smoothed_objective_diff(x, a, eps):
    """``f(c) - f(d)`` for ``f(z) = a huber_eps(z) + (z - x)^2 / 2``."""
    return lambda c, d: a * huber_diff(c, d, eps) + (c - d) * (c + d - 2 * x) / 2


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    num, title = marker.args
    entry = _CRITERIA.setdefault(num, {"title": title, "failed": [], "passed": []})
    part = marker.kwargs.get("part", item.name)
    if rep.when == "call":
        (entry["failed"] if rep.failed else entry["passed"]).append(part)
    else:
        entry["failed"].append(part)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        verdict = "FAIL" if e["failed"] else "PASS"
        extra = f"  (failed: {', '.join(e['failed'])})" if e["failed"] else ""
        tr.write_line(f"criterion {num:>2}: {verdict}  {e['title']}{extra}")
