import pytest

CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line; returns the pass flag."""

    def record(number, passed, detail, soft=False):
        tag = "PASS" if passed else ("SOFT-FAIL" if soft else "FAIL")
        line = f"{tag} criterion {number:>2}: {detail}"
        CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(CRITERIA, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
