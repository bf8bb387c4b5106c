import pytest

from superneumann.bifurcation import asymmetric_sweep, sweep_diagram
from superneumann.core import ProblemParams

_DIAGRAMS = {}
CRITERIA = {}


def diagram(lam, c_right=1.0):
    """Validated diagram for p = 3, b = 1, c_left = 1, computed once per session."""
    key = (lam, c_right)
    if key not in _DIAGRAMS:
        params = ProblemParams(lam, 3.0, 1.0, 1.0, c_right, 0.0)
        if c_right == 1.0:
            _DIAGRAMS[key] = sweep_diagram(params)
        else:
            ref = _DIAGRAMS.get((lam, 1.0))
            _DIAGRAMS[key] = asymmetric_sweep(params, reference=ref)
    return _DIAGRAMS[key]


@pytest.fixture(scope="session")
def diagrams():
    return diagram


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = ""
        if rep.failed and call.excinfo is not None:
            detail = str(call.excinfo.value).strip().splitlines()[0]
        CRITERIA[number] = (title, rep.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, outcome, detail = CRITERIA[number]
        status = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        line = f"criterion {number:>2}  {status}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
