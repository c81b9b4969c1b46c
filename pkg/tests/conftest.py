import pytest
from hypothesis import HealthCheck, settings

from gatorview.graph import Graph
from gatorview.workloads import design_network, example_typegraph, running_network

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def tg():
    return example_typegraph()


@pytest.fixture(scope="session")
def running(tg):
    return running_network(tg)


@pytest.fixture(scope="session")
def design(tg):
    return design_network(tg)


@pytest.fixture
def graph(tg):
    return Graph(tg)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
