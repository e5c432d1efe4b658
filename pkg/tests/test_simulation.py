import logging

import numpy as np
import pytest

from config import RunConfig
from initial_state import init_uniform
from phase_space import field_moments
from profiler import ROUTINES
from simulation import run_simulation


def test_uniform_field_without_collisions_is_unchanged():
    config = RunConfig(spatial_n=4, velocity_n=4, collision='none', initial='uniform', n_cycles=7)
    result = run_simulation(config)
    masses, conserved = init_uniform(result.harness.sgrid, result.harness.vgrid)
    np.testing.assert_array_equal(result.masses, masses)
    np.testing.assert_array_equal(result.conserved, conserved)


def test_runs_are_deterministic():
    config = RunConfig(spatial_n=8, velocity_n=4, v_min=-4.0, v_max=4.0, collision='bgk', initial='random',
                       n_cycles=4, workers=2)
    a, b = run_simulation(config), run_simulation(config)
    np.testing.assert_array_equal(a.conserved, b.conserved)


def test_t_final_stops_exactly():
    config = RunConfig(spatial_n=4, velocity_n=4, v_min=-4.0, v_max=4.0, collision='bgk', tau=0.2, t_final=0.3)
    result = run_simulation(config)
    assert result.time == pytest.approx(0.3, rel=1e-12)
    assert result.cycles == 3


def test_report_labels_and_counts():
    config = RunConfig(spatial_n=4, velocity_n=4, v_min=-4.0, v_max=4.0, collision='bgk', tau=0.2,
                       n_cycles=3, workers=2)
    report = run_simulation(config).report
    assert report.cycles == 3
    assert report.workers == 2
    assert report.n_cells == 64
    assert set(report.routine_seconds) == set(ROUTINES)
    assert report.routine_seconds['Collision'] > 0
    assert report.routine_seconds['Communication'] > 0


def test_overshooting_relaxation_is_logged_once(caplog):
    config = RunConfig(spatial_n=4, velocity_n=4, v_min=-4.0, v_max=4.0, collision='bgk', tau=0.05,
                       initial='uniform', n_cycles=3, workers=2)
    with caplog.at_level(logging.WARNING):
        run_simulation(config)
    assert sum('overshoots' in r.getMessage() for r in caplog.records) == 1


@pytest.mark.slow
def test_boltzmann_run_keeps_mass():
    config = RunConfig(spatial_n=2, velocity_n=8, v_min=-np.pi, v_max=np.pi, collision='boltzmann',
                       initial='uniform', cfl=0.05, n_cycles=2)
    result = run_simulation(config)
    assert result.report.extras['kernel_active_directions'] == 12.0
    assert result.report.extras['transforms_per_cell'] == 29.0
    initial = init_uniform(result.harness.sgrid, result.harness.vgrid)[1]
    density = field_moments(result.masses, result.harness.vgrid)[..., 0]
    np.testing.assert_allclose(density, initial[..., 0], rtol=1e-8)
