import pytest

from toral_recurrence.exact_linalg import IntegerMatrix

# criterion number -> (status, detail); filled by test_acceptance and echoed at the end
ACCEPTANCE = {}


def record(num: int, ok: bool, detail: str = "", status: str | None = None):
    ACCEPTANCE[num] = (status or ("PASS" if ok else "FAIL"), detail)
    print(f"criterion {num:2d}: {ACCEPTANCE[num][0]}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")


@pytest.fixture
def golden():
    return IntegerMatrix.parse("[[3,1],[1,2]]")


@pytest.fixture
def doubling():
    return IntegerMatrix.parse("[[2]]")
