import pytest

from heston_weak_lab.model import PRESETS


@pytest.fixture(params=sorted(PRESETS))
def preset_params(request):
    return PRESETS[request.param]


@pytest.fixture
def model1():
    return PRESETS["model1"]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
