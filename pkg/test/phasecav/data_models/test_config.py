# Test Imports
import pytest
from pytest import approx
import json

# Modules Under Test
from phasecav.data_models.config import RunConfig

def test_load(small_config_path):
    config = RunConfig.load(small_config_path)
    assert config.mesh.recon_h == approx(0.2)
    assert config.schedule.n_phases == 2
    assert config.seed == 3
    assert config.cavity.components[0].radius == approx(0.3)

def test_overrides():
    config = RunConfig().with_overrides(seed=5, noise=0.05, alpha=1e-4, epsilon0=0.2, delta0=1e-3,
                                        phases=2, mesh_h=0.1, sigma_arc='0,3.0', output_dir='elsewhere')
    assert config.seed == 5
    assert config.noise == approx(0.05)
    assert config.schedule.alpha == approx(1e-4)
    assert config.schedule.epsilon0 == approx(0.2)
    assert config.schedule.delta0 == approx(1e-3)
    assert config.schedule.n_phases == 2
    assert config.mesh.recon_h == approx(0.1)
    assert config.sigma_arc.end == approx(3.0)
    assert config.output_dir == 'elsewhere'

def test_overrides_ignore_none():
    base = RunConfig()
    assert base.with_overrides(seed=None, noise=None) == base

def test_override_validation():
    with pytest.raises(ValueError):
        RunConfig().with_overrides(noise=-1.0)

    with pytest.raises(ValueError):
        RunConfig().with_overrides(delta0=2.0)

    with pytest.raises(ValueError):
        RunConfig().with_overrides(unknown=1)

def test_cavity_outside_domain():
    with pytest.raises(ValueError):
        RunConfig.model_validate({'cavity': {'components': [{'kind': 'disk', 'center': [0.8, 0.0], 'radius': 0.15}]}})

def test_cavity_in_pinned_band():
    cavity = {'components': [{'kind': 'disk', 'center': [0.0, 0.0], 'radius': 0.8}]}

    # 0.2 from the boundary passes the cavity distance check and the default band
    config = RunConfig.model_validate({'cavity': cavity})
    assert config.cavity.components[0].radius == approx(0.8)

    with pytest.raises(ValueError):
        RunConfig.model_validate({'cavity': cavity, 'fictitious': {'d0_band': 0.3}})

    with pytest.raises(ValueError):
        RunConfig.model_validate({'fictitious': {'d0_band': 0.75}})

def test_config_hash():
    config = RunConfig()
    assert config.config_hash() == RunConfig().config_hash()
    assert config.config_hash() == config.with_overrides(output_dir='other').config_hash()
    assert config.config_hash() != config.with_overrides(seed=1).config_hash()

def test_save_roundtrip(tmp_path):
    config = RunConfig().with_overrides(seed=11, sigma_arc='0.5,2.5')
    path = tmp_path / 'config.json'
    config.save(path)

    loaded = RunConfig.load(path)
    assert loaded == config
    assert loaded.config_hash() == config.config_hash()
    assert json.load(open(path))['seed'] == 11
