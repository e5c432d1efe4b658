import pytest

from config import KEYS, Config, RunConfig, parse_dims
from errors import ConfigError


def test_parse_dims():
    assert parse_dims('2x2x1') == (2, 2, 1)
    assert parse_dims('4,2,1') == (4, 2, 1)
    for bad in ('2x2', '2x0x1', 'axbxc'):
        with pytest.raises(ConfigError):
            parse_dims(bad)


def test_run_config_round_trip(tmp_path):
    config = RunConfig(spatial_n=32, collision='boltzmann', velocity_n=16, t_final=0.07, dims=(2, 2, 1),
                       workers=4, tau=0.25)
    path = config.to_config().save(tmp_path / 'run.cfg')
    assert Config.load(path).to_run_config() == config


def test_serialize_uses_canonical_key_order():
    text = Config({'workers': 2, 'spatial_n': 8, 'n_cycles': 3}).serialize()
    assert text == 'spatial_n=8\nn_cycles=3\nworkers=2\n'
    assert KEYS[0] == 'spatial_n'


def test_from_text_comments_and_dashes():
    config = Config.from_text("# Sod run\nspatial-n = 16  # cells per axis\n\ncollision=BGK\nt_final=0.07\n")
    run = config.to_run_config()
    assert run.spatial_n == 16
    assert run.collision == 'bgk'
    assert run.t_final == 0.07


def test_bad_lines_name_the_source():
    with pytest.raises(ConfigError, match='run.cfg:2'):
        Config.from_text("spatial_n=8\nnot a pair\n", source='run.cfg')
    with pytest.raises(ConfigError, match='unknown'):
        Config.from_text("colour=blue\n")


def test_typed_getters():
    config = Config({'spatial_n': '8x', 'cfl': 'fast'})
    with pytest.raises(ConfigError):
        config.get_int('spatial_n')
    with pytest.raises(ConfigError):
        config.get_float('cfl')
    assert config.get_int('workers', 3) == 3


def test_dims_imply_workers():
    run = Config({'dims': '2x2x2', 'n_cycles': 1}).to_run_config()
    assert run.workers == 8
    assert run.resolved_dims == (2, 2, 2)


@pytest.mark.parametrize("kwargs", [
    {},
    {'t_final': 0.07, 'n_cycles': 3},
    {'n_cycles': 0},
    {'n_cycles': 1, 'collision': 'lattice'},
    {'n_cycles': 1, 'collision': 'bgk', 'tau': 0.0},
    {'n_cycles': 1, 'collision': 'boltzmann', 'velocity_n': 7},
    {'n_cycles': 1, 'cfl': 1.5},
    {'n_cycles': 1, 'workers': 4, 'dims': (2, 1, 1)},
    {'n_cycles': 1, 'v_min': 1.0, 'v_max': -1.0},
    {'n_cycles': 1, 'scheduler': 'mpi'},
])
def test_validation(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_tau_only_matters_for_bgk():
    assert RunConfig(n_cycles=1, collision='none', tau=0.0).tau == 0.0


def test_with_workers():
    config = RunConfig(n_cycles=1)
    assert config.with_workers(4).resolved_dims == (4, 1, 1)
    assert config.with_workers(4, (2, 2, 1)).dims == (2, 2, 1)
