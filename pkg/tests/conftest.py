import pytest

from nmpm_ion.fock_core import TruncationConfig

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Record one acceptance line: ``acceptance(criterion, passed, detail)``."""

    def record(name: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def trunc32():
    return TruncationConfig(32)


@pytest.fixture(scope="session")
def trunc64():
    return TruncationConfig(64)


@pytest.fixture(scope="session")
def trunc128():
    return TruncationConfig(128)
