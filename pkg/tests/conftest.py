import os
import sys

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

sys.path.insert(0, os.path.dirname(__file__))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from latbose.lattice import LatticeModel, load_config, simple_cubic  # noqa: E402


def anisotropic(U=4.0):
    return LatticeModel.from_hopping(np.eye(3), [((1, 0, 0), 0.5), ((0, 1, 0), 1.0), ((0, 0, 1), 1.0)], U)


def fcc_like(U=4.0):
    """Six directions a1, a2, a3, a1-a2, a1-a3, a2-a3 on FCC primitive vectors."""
    A = 0.5 * np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=float).T
    hop = [((1, 0, 0), 1.0), ((0, 1, 0), 1.0), ((0, 0, 1), 1.0), ((1, -1, 0), 1.0), ((1, 0, -1), 1.0), ((0, 1, -1), 1.0)]
    return LatticeModel.from_hopping(A, hop, U)


def bundled(U=4.0):
    return [load_config(n).with_U(U) for n in ("cubic", "orthorhombic", "cubic_nnn")]


def five_lattices(U=4.0):
    return bundled(U) + [anisotropic(U), fcc_like(U)]


@pytest.fixture
def cubic():
    return simple_cubic()


@pytest.fixture
def nnn():
    return load_config("cubic_nnn")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
