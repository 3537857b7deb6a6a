import pytest
from hypothesis import HealthCheck, settings

from agcml.rxsim import GainTable, LinkBudget

# Property tests share the suite with slow end-to-end checks; per-example
# deadlines only add flakiness there.
settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def table() -> GainTable:
    return GainTable()


@pytest.fixture(scope="session")
def budget() -> LinkBudget:
    return LinkBudget()
