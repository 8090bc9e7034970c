import numpy as np
import pytest
import scipy.sparse as sp

from edgemg import sparse


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sparse(rng, m, n, density=0.4):
    """Random SparseMatrix plus its dense twin."""
    a = sp.random(m, n, density=density, random_state=rng, format="csr")
    a.data = rng.standard_normal(a.nnz)
    return sparse.from_scipy(a), a.toarray()


def laplacian_1d(n):
    return sparse.from_scipy(sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]))


_ACCEPTANCE = []


def record_acceptance(criterion, ok, detail):
    _ACCEPTANCE.append((criterion, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
