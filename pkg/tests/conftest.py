ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    """Repeat the per-criterion verdicts at the end of the run."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
