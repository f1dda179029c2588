import pytest

from crxstream.emulator import CrxEmulator, EmulatorConfig
from crxstream.harness.experiments import embedded_session
from crxstream.regproto import serve

ACCEPTANCE_LINES = []


@pytest.fixture
def config():
    return EmulatorConfig(kp=12.0, vmax=60.0, amax=720.0, command_latency=0.2)


@pytest.fixture
def emulator(config):
    return CrxEmulator(config).run("virtual")


@pytest.fixture
def served(emulator):
    server = serve(emulator.registers, emulator.feedback, ("127.0.0.1", 0))
    yield server, emulator
    server.close()


@pytest.fixture
def session(config):
    with embedded_session(config) as pair:
        yield pair


def pytest_runtest_logreport(report):
    criterion = dict(report.user_properties).get("criterion")
    if criterion and report.when == "call":
        ACCEPTANCE_LINES.append((criterion, report.outcome))


def _criterion_order(item):
    label = item[0].split()[0]
    return (int(label[1:]) if label[1:].isdigit() else 0, item[0])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, outcome in sorted(ACCEPTANCE_LINES, key=_criterion_order):
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {criterion}")
