import pytest

from semcascade.bench import BenchConfig, Experiment

_EXPERIMENTS = {}
ACCEPTANCE = {}


def experiment(name: str, **overrides) -> Experiment:
    """Session-wide cache of trained experiments on the built-in profiles."""
    key = (name, tuple(sorted(overrides.items())))
    if key not in _EXPERIMENTS:
        _EXPERIMENTS[key] = Experiment(BenchConfig(data=f"profile:{name}", **overrides))
    return _EXPERIMENTS[key]


@pytest.fixture(scope="session")
def experiments():
    return experiment


@pytest.fixture(scope="session")
def acceptance():
    """Record one part of a criterion; a criterion passes when all its parts do."""
    def record(criterion, passed, detail=""):
        ACCEPTANCE.setdefault(str(criterion), []).append((bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in map(str, range(1, 10)):
        parts = ACCEPTANCE.get(criterion)
        if not parts:
            terminalreporter.write_line(f"criterion {criterion}: NOT RUN")
            continue
        status = "PASS" if all(p for p, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts if d)
        terminalreporter.write_line(f"criterion {criterion}: {status}  {detail}")
