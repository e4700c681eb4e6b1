import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome for the end-of-run summary.

    Call as ``criterion(number, passed, detail)``; the test should assert
    ``passed`` afterwards so the failure also shows up as a test failure.
    """
    results = request.config.stash[_RESULTS]

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        results.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(results, key=lambda r: r[0]):
        terminalreporter.write_line(line)
