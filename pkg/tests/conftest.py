import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: long-running Monte Carlo acceptance checks")


@pytest.fixture(scope="session")
def gaussian_spec():
    from polymerlab.disorder import DisorderSpec
    return DisorderSpec.gaussian()


@pytest.fixture(scope="session")
def bernoulli_spec():
    from polymerlab.disorder import DisorderSpec
    return DisorderSpec.bernoulli()
