import pytest

from phasecav.data_models.config import RunConfig
from .paths import TEST_DATA

@pytest.fixture
def small_config_path():
    yield TEST_DATA / 'config_small.json'

@pytest.fixture
def small_config(small_config_path, tmp_path):
    config = RunConfig.load(small_config_path)
    yield config.with_overrides(output_dir=str(tmp_path / 'out'))
