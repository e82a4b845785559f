import numpy as np
import pytest
from scipy import stats

from aqkd.photon_stats import cutoff


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def chisquare_pvalue(draws, dist, min_expected=5.0):
    """Chi-square goodness of fit of integer draws against ``dist.pmf``, pooling sparse cells."""
    draws = np.asarray(draws)
    nmax = max(cutoff(dist), int(draws.max()))
    expected = dist.pmf(np.arange(nmax + 1)) * draws.size
    observed = np.bincount(draws, minlength=nmax + 1)
    keep = expected >= min_expected
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], draws.size - expected[keep].sum())
    return stats.chisquare(obs, exp).pvalue


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in results:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
    passed = sum(ok for _, ok, _ in results)
    terminalreporter.write_line(f"{passed}/{len(results)} acceptance checks passed")


def within_sigma(observed, p, n, k):
    """Binomial proportion check: |observed - p| <= k standard errors."""
    return abs(observed - p) <= k * np.sqrt(p * (1 - p) / n)
