"""Every acceptance criterion at its stated resolution and tolerance.

One PASS/FAIL line per criterion is printed as it finishes and again in a
summary block at the end of the module.
"""

import pytest

from crackstab.acceptance import CRITERIA, AcceptanceContext

_LINES: dict = {}


@pytest.fixture(scope="module")
def ctx():
    return AcceptanceContext()


@pytest.fixture(scope="module")
def report(request):
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(line):
        _LINES[line.split()[1]] = line
        print(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)

    yield emit
    if reporter is not None:
        reporter.write_line("")
        reporter.write_line("acceptance summary")
        for key in sorted(_LINES, key=int):
            reporter.write_line(_LINES[key])


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, ctx, report):
    result = CRITERIA[number](ctx)
    report(result.line())
    for check in result.checks:
        print("   ", check)
    assert result.passed, "\n".join(str(c) for c in result.failures())
