import numpy as np
import pytest

# Filled in by tests/test_acceptance.py; printed as a closing summary so the
# per-criterion verdict survives pytest's output capture.
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for num in sorted(ACCEPTANCE_RESULTS):
        name, verdict = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"  criterion {num:>2}: {verdict:8s} {name}")


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-based relative error, safe near zero gradients."""
    analytic = np.asarray(analytic, dtype=float).ravel()
    numeric = np.asarray(numeric, dtype=float).ravel()
    denom = max(1e-8, np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return float(np.linalg.norm(analytic - numeric) / denom)


def central_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f wrt every entry of x (in place)."""
    g = np.zeros_like(x, dtype=float)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
