import pytest

from tnfo.scenario import run_scenario, sensitivity_sweep, study_scenarios
from tnfo.synth import campus_spec, minimal_network, synth_network


@pytest.fixture
def mini():
    return minimal_network()


@pytest.fixture(scope="session")
def campus():
    return synth_network(campus_spec())


@pytest.fixture(scope="session")
def study_runs(campus):
    """The five study scenarios, solved once per session."""
    return {s.name: run_scenario(campus, s) for s in study_scenarios(campus)}


@pytest.fixture(scope="session")
def sweep_points(campus):
    return sensitivity_sweep(campus, 1.0, 2.0, 11)


ACCEPTANCE_CRITERIA = 9
_verdicts: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record and print one pass/fail line for an acceptance criterion, then assert it."""

    def record(n: int, ok: bool, detail: str):
        ok = bool(ok)
        _verdicts[n] = (ok, detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_CRITERIA + 1):
        if n in _verdicts:
            ok, detail = _verdicts[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        else:
            terminalreporter.write_line(f"criterion {n}: FAIL (not run or errored before a verdict)")
