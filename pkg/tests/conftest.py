import _fixtures


def pytest_terminal_summary(terminalreporter):
    if not _fixtures.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_fixtures.ACCEPTANCE):
        passed, detail = _fixtures.ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
