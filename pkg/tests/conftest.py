from verdicts import LINES

AUDIT_TEST = "test_constraint_audit_is_clean"


def pytest_collection_modifyitems(items):
    # the audit has to see every solution the rest of the run produced
    last = [i for i in items if i.name == AUDIT_TEST]
    items[:] = [i for i in items if i.name != AUDIT_TEST] + last


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
