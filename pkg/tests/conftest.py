import numpy as np
import pytest

from hetsbm.hsbm import HsbmParams, pattern_family_a, sample_hsbm


@pytest.fixture(scope="session")
def params_a25():
    return HsbmParams.synthetic(pattern_family_a(0.25))


@pytest.fixture(scope="session")
def graph_a25(params_a25):
    return sample_hsbm(params_a25, 0)


@pytest.fixture(scope="session")
def graph_5000():
    params = HsbmParams.synthetic(pattern_family_a(0.2), n=5000)
    return params, sample_hsbm(params, 11)


def random_csr(n, density, seed):
    import scipy.sparse as sp
    a = sp.random(n, n, density=density, random_state=seed, format="csr")
    return a.indptr.astype(np.int64), a.indices.astype(np.int64)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
