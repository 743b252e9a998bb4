import pytest

# criterion id -> (passed, detail), filled by the acceptance module
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid:>4} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def report():
    def _report(cid, ok, detail):
        ACCEPTANCE[cid] = (bool(ok), detail)
        print(f"{cid} {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return _report
