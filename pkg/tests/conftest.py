import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from densepre.sparse_core import SparseMatrix, coo

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_pattern(rng, nrows, ncols, density, values="uniform"):
    mask = rng.random((nrows, ncols)) < density
    rows, cols = np.nonzero(mask)
    vals = rng.uniform(0.1, 1.0, rows.size) if values == "uniform" else np.ones(rows.size)
    return coo(nrows, ncols, rows, cols, vals)


@st.composite
def sparse_matrices(draw, max_dim=12, nrows=None, ncols=None):
    m = nrows if nrows is not None else draw(st.integers(1, max_dim))
    n = ncols if ncols is not None else draw(st.integers(1, max_dim))
    density = draw(st.floats(0.0, 1.0))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_pattern(np.random.default_rng(seed), m, n, density)


@st.composite
def dense_rows(draw, min_n=2, max_n=40, allow_zeros=True):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    b = rng.uniform(-1.0, 1.0, n)
    if allow_zeros:
        b[rng.random(n) < draw(st.floats(0.0, 0.9))] = 0.0
    if not b.any():
        b[rng.integers(n)] = 1.0
    return b


@pytest.fixture
def rng():
    return np.random.default_rng(20141001)


# The 5x5 product example: A, B patterns with unit values (0-based rows).
SAMPLE_A = [(0, 1), (0, 3), (1, 0), (1, 3), (1, 4), (2, 2), (3, 0), (3, 1), (3, 4), (4, 3)]
SAMPLE_B = [(0, 0), (1, 1), (1, 3), (2, 1), (2, 4), (3, 2), (4, 0), (4, 1)]


def pattern(entries, n=5):
    r, c = zip(*entries)
    return coo(n, n, np.array(r), np.array(c), np.ones(len(entries)))


@pytest.fixture
def sample_pair():
    return pattern(SAMPLE_A), pattern(SAMPLE_B)


SAMPLE_ROW = np.array([0.0, 1.0, -3.0, 0.0, -1.0, 2.0, 0.0, 0.0])


def as_matrix(dense) -> SparseMatrix:
    return SparseMatrix.from_dense(np.asarray(dense, dtype=float))


# -- acceptance report ---------------------------------------------------------

class AcceptanceRecorder:
    def __init__(self, store, label):
        self.store, self.label, self.done = store, label, False

    def check(self, passed: bool, detail: str, elapsed: float | None = None):
        t = "" if elapsed is None else f" [{elapsed:.1f} s]"
        line = f"{'PASS' if passed else 'FAIL'}  {self.label}: {detail}{t}"
        self.store.append(line)
        self.done = True
        print(line)
        assert passed, line


@pytest.fixture
def acceptance(request):
    store = request.config.__dict__.setdefault("_acceptance_lines", [])
    label = request.node.get_closest_marker("criterion").args[0]
    rec = AcceptanceRecorder(store, label)
    yield rec
    if not rec.done:
        store.append(f"FAIL  {label}: raised before its check completed")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("AC")[1].split()[0])):
            terminalreporter.write_line(line)
