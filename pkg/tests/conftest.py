import numpy as np
import pytest

from parfit.pdfs.base import standalone_table


def raw_on(node, xs, params=None):
    """Raw kernel of a standalone node at 1D points ``xs``."""
    registry, table = standalone_table(node)
    params = registry.values() if params is None else np.asarray(params, dtype=np.float64)
    cols = [np.asarray(xs, dtype=np.float64)] + [None] * (table.n_columns - 1)
    node.prepare(params, table)
    return np.broadcast_to(node.raw(cols, params, table), np.shape(xs)), registry, table


def density_on(node, xs, params=None):
    registry, table = standalone_table(node)
    params = registry.values() if params is None else np.asarray(params, dtype=np.float64)
    cols = [np.asarray(xs, dtype=np.float64)] + [None] * (table.n_columns - 1)
    node.prepare(params, table)
    return np.broadcast_to(node.density(cols, params, table), np.shape(xs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
