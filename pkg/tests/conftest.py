"""Shared fixtures and the acceptance-criteria summary hook.

Tests named ``test_criterion_NN_*`` are tracked individually and a one-line
pass/fail verdict per criterion is printed at the end of the run.
"""

import re

import numpy as np
import pytest

from dnnr.dataset import Dataset, friedman1

ACCEPTANCE_CRITERIA = {
    1: "Friedman-1 headline: DNNR <= 0.05, KNN in [2.5, 5.5], unscaled DNNR in [0.5, 2.0]",
    2: "affine exactness over 100 trials: DNNR and local-linear MSE < 1e-10, KNN MSE > 0",
    3: "gradient error: empirical rate slope >= 0.9 and derived bound never exceeded",
    4: "bound simulation: >= 95% coverage and Spearman > 0.2 for DNNR and KNN tolerances",
    5: "guarantee arithmetic: pinned example values exact, n_required lands in 1e13..1e17",
    6: "feature rescaling leaves predictions unchanged (1e-8) and neighbor order intact",
    7: "zero-gradient DNNR is bit-identical to plain KNN on 1000 queries",
    8: "learned weights: informative dims outweigh noise dims; scaled beats unscaled DNNR",
    9: "relevance-guided selection on California housing: drop-top-3 doubles MSE, keep-top-3 within 10%",
}

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")
_outcomes: dict[int, tuple[str, str]] = {}


def _skip_reason(report) -> str:
    rep = report.longrepr
    if isinstance(rep, tuple) and len(rep) == 3:
        reason = str(rep[2])
        return reason.removeprefix("Skipped: ")
    return ""


def pytest_runtest_logreport(report):
    match = _CRITERION_RE.search(report.nodeid)
    if match is None:
        return
    num = int(match.group(1))
    if report.when == "call":
        if report.passed:
            _outcomes[num] = ("PASS", "")
        elif report.skipped:
            _outcomes[num] = ("SKIP", _skip_reason(report))
        else:
            _outcomes[num] = ("FAIL", "")
    elif report.when == "setup":
        if report.skipped:
            _outcomes[num] = ("SKIP", _skip_reason(report))
        elif report.failed:
            _outcomes[num] = ("FAIL", "fixture error")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    ran = {num for num in _outcomes}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_CRITERIA):
        status, note = _outcomes.get(num, ("NOT RUN", ""))
        line = f"criterion {num}: {status} - {ACCEPTANCE_CRITERIA[num]}"
        if note:
            line += f" [{note}]"
        terminalreporter.write_line(line)


def make_affine_dataset(rng, n, d, coef_low=0.2, coef_high=2.0):
    """Random affine-target dataset; coefficients bounded away from zero."""
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    coef = rng.uniform(coef_low, coef_high, size=d) * rng.choice([-1.0, 1.0], size=d)
    intercept = rng.uniform(-1.0, 1.0)
    y = x @ coef + intercept
    return Dataset(features=x, targets=y), coef, intercept


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def friedman_small():
    """Shared noiseless Friedman-1 sample for cheap sanity checks."""
    return friedman1(400, n_features=6, noise_scale=0.0, seed=3)
