import pytest

from bhgen.config import constants_for
from bhgen.ensemble import run_ensemble
from bhgen.oracle import moment_grids
from bhgen.presets import single_type_spec, two_type_spec

SEED = 20190101
CHECK_TIMES = [24.0, 48.0, 72.0, 96.0]


@pytest.fixture(scope="session")
def bcell_spec():
    return single_type_spec()


@pytest.fixture(scope="session")
def bcell_ensemble(bcell_spec):
    """1000 replicates of the single-type B-cell process, unconditioned."""
    return run_ensemble(bcell_spec, CHECK_TIMES, 1000, SEED)


@pytest.fixture(scope="session")
def bcell_grids(bcell_spec):
    return moment_grids(bcell_spec, dt=0.05, t_max=96.0)


@pytest.fixture(scope="session")
def two_type_runs():
    """ordering -> (spec, constants, 1000 replicates observed at CHECK_TIMES)."""
    out = {}
    for ordering in ("alpha1_less", "alpha2_less"):
        spec = two_type_spec(ordering)
        out[ordering] = (spec, constants_for(spec), run_ensemble(spec, CHECK_TIMES, 1000, SEED))
    return out


def tree_with_cells(min_cells: int, t: float = 96.0):
    """First B-cell tree (seed 31, stream order) with at least ``min_cells`` alive at ``t``."""
    from bhgen.distributions import RngStream
    from bhgen.engine import simulate

    spec = single_type_spec()
    for idx in range(1000):
        tr = simulate(spec, RngStream(31, idx), [t], keep_generations=True, record_cells=True)
        if tr.snapshots[-1].Z[0] >= min_cells:
            return tr
    raise RuntimeError("no tree large enough")


ACCEPTANCE_LINES: list[str] = []


def report(number, name: str, ok: bool, detail: str) -> bool:
    """Record one acceptance line; printed live and again in the terminal summary."""
    line = f"criterion {number:>3} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
