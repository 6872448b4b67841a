import pytest

_CRITERIA = {}


class _Recorder:
    def __call__(self, cid, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {cid}: {detail}"
        _CRITERIA[cid] = line
        print(line)
        assert ok, line


@pytest.fixture(scope="session")
def criterion():
    """``criterion(cid, ok, detail)`` prints one PASS/FAIL line and asserts ``ok``."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(_CRITERIA, key=lambda c: int(c[1:])):
            terminalreporter.write_line(_CRITERIA[cid])
