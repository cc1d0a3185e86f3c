import pytest
from hypothesis import HealthCheck, settings

from bilat.device import HalfCellSpec, reference_half_cell

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


@pytest.fixture
def ref_cell() -> HalfCellSpec:
    return reference_half_cell()


@pytest.fixture
def symmetric() -> HalfCellSpec:
    return HalfCellSpec.from_wells(4.05, 4.05, 3.8, 288.09)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[number])
