import numpy as np
import pytest

from crsobolev.meshgen import unit_square


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def square():
    return unit_square(1, 1)


REF2 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF3 = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def random_simplex(rng, d, max_aspect=1e6):
    """Random simplex: a random rotation of a box-scaled random simplex."""
    while True:
        P = rng.standard_normal((d + 1, d))
        scales = np.exp(rng.uniform(0.0, np.log(max_aspect), d))
        scales /= scales.max()
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        P = (P * scales) @ Q.T
        E = P[1:] - P[0]
        vol = abs(np.linalg.det(E))
        if vol > 1e-3 * np.prod(scales):
            return P


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
