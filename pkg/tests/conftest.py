import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion for the terminal summary."""
    results = request.config.stash[_RESULTS]

    def record(criterion: str, passed: bool, detail: str) -> bool:
        results.append(f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_RESULTS, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: s.split("criterion ")[1]):
        terminalreporter.write_line(line)
