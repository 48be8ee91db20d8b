"""Shared pytest hooks: per-criterion summary lines for the acceptance
suite."""

CRITERIA = {}


def pytest_runtest_makereport(item, call):
    if call.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    name = item.function.__name__
    if not name.startswith("test_criterion"):
        return
    doc = (item.function.__doc__ or name).strip().splitlines()[0]
    CRITERIA[name] = (doc, call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(CRITERIA):
        doc, passed = CRITERIA[name]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {doc}")
