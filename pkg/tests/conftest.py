import pytest

_RESULTS: list = []


class Recorder:
    def __call__(self, name: str, passed: bool, detail: str = "") -> bool:
        _RESULTS.append((name, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        return passed


@pytest.fixture(scope="session")
def criterion():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
