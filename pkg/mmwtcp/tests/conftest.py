import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False,
        help="Run multi-second end to end simulations"
    )
    parser.addoption(
        "--seeds", action="store", default=3, type=int,
        help="Seeds per config in the slow Monte Carlo checks"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end to end simulation")
    config.cache.set('runslow', config.getoption('--runslow'))


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
