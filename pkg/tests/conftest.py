import pytest

ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """``{criterion: [(part, passed, detail), ...]}``, printed in the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE, None)
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(log, key=lambda k: (int(str(k).split()[0]), str(k))):
        parts = log[crit]
        ok = all(passed for _, passed, _ in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}")
        for part, passed, detail in parts:
            terminalreporter.write_line(f"    {'pass' if passed else 'FAIL'}  {part}: {detail}")
