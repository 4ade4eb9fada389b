from pathlib import Path

import numpy as np
import pytest

from dsenlg.dataset import Dataset

DATA_DIR = Path(__file__).resolve().parents[1] / "data" / "keel"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def data_dir():
    if not DATA_DIR.is_dir():
        pytest.skip("bundled KEEL data not found")
    return DATA_DIR


def make_blobs(n_min=20, n_maj=60, s=4, shift=2.0, seed=0, name="blobs"):
    r = np.random.default_rng(seed)
    X = np.vstack([r.normal(shift, 1.0, size=(n_min, s)), r.normal(0.0, 1.0, size=(n_maj, s))])
    y = np.r_[np.ones(n_min, dtype=np.int8), np.zeros(n_maj, dtype=np.int8)]
    return Dataset(name, X, y, [f"f{i}" for i in range(s)], "pos", "neg")


@pytest.fixture
def blobs():
    return make_blobs()


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(n, ok, detail)``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(n, ok, detail):
        lines.append((n, f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"))
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
