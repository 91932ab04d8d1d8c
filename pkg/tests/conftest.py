import pytest

import netadvect as na


@pytest.fixture(scope="session")
def diamond():
    """The bundled seven-edge example network."""
    return na.load_network(na.bundled_config_path())
