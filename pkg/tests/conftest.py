import pytest

from bubblecrash.backtest import scan
from bubblecrash.data import ScenarioSpec, generate_bubble_scenario

SCRIPTED_CRASH = 220


@pytest.fixture(scope="session")
def scenario():
    return generate_bubble_scenario(ScenarioSpec(n_days=300, bubble_start=100, crash_index=SCRIPTED_CRASH, seed=42))


@pytest.fixture(scope="session")
def scenario_signals(scenario):
    return scan(scenario, 50)


ACCEPTANCE_RESULTS = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        ACCEPTANCE_RESULTS.append((marker.args[0], status, item.name))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, test in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{status}] {name} ({test})")
