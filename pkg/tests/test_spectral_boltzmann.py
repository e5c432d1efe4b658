import logging
import tracemalloc

import numpy as np
import pytest
from scipy import integrate

from errors import ConfigError, CostGuardError
from phase_space import Primitive, build_velocity_grid, cell_moments, discrete_maxwellian
from spectral_boltzmann import (FastSpectralCollision, SpectralConfig, angular_directions, boltzmann_step,
                                carleman_reference, check_support, forward_modes, mode_axis, phi_r3,
                                phi_r3_literal, precompute_kernel, psi_r3, psi_r3_exact, q_boltzmann_direct,
                                q_boltzmann_fast, quadrature_weight, support_leak_fraction)

RADIUS = SpectralConfig(8).radius


def _setup(n, **kwargs):
    config = SpectralConfig(n, **kwargs)
    return config, precompute_kernel(config), build_velocity_grid(n, -np.pi, np.pi)


@pytest.fixture(scope='module')
def grid8():
    return _setup(8)


@pytest.fixture(scope='module')
def grid12():
    return _setup(12)


@pytest.fixture(scope='module')
def grid16():
    return _setup(16)


def _bimodal(vgrid, T=0.06):
    a = discrete_maxwellian(Primitive(1.0, np.array([0.35, 0.1, 0.0]), T), vgrid)
    b = discrete_maxwellian(Primitive(0.5, np.array([-0.3, 0.0, 0.15]), T), vgrid)
    return a + b


def _q(masses, setup):
    config, kernel, vgrid = setup
    return q_boltzmann_fast(masses, kernel, config, vgrid)


def test_config_validation():
    for n in (0, 3, 7):
        with pytest.raises(ConfigError):
            SpectralConfig(n)
    with pytest.raises(ConfigError):
        SpectralConfig(8, a1=0)
    with pytest.raises(ConfigError):
        SpectralConfig(8, alpha_const=0.0)
    config = SpectralConfig(16)
    assert config.radius == pytest.approx(2.0 * np.pi / (3.0 + np.sqrt(2.0)))
    assert config.padded_size == 24


def test_mode_axis_is_fft_order():
    assert mode_axis(4).tolist() == [0, 1, -2, -1]


@pytest.mark.parametrize("s", [0.3, 1.0, 2.5, 7.0, 13.0])
def test_phi_matches_quadrature(s):
    even = integrate.quad(lambda r: 2.0 * r * np.cos(r * s), 0.0, RADIUS, epsabs=1e-14)[0]
    odd = integrate.quad(lambda r: 2.0 * r * np.sin(r * s), 0.0, RADIUS, epsabs=1e-14)[0]
    assert phi_r3(s, RADIUS) == pytest.approx(even, rel=1e-10, abs=1e-12)
    assert phi_r3_literal(s, RADIUS) == pytest.approx(1j * odd, rel=1e-10, abs=1e-12)


def test_phi_at_zero():
    assert phi_r3(0.0, RADIUS) == pytest.approx(RADIUS ** 2)
    assert phi_r3_literal(0.0, RADIUS) == 0
    s = np.linspace(-5.0, 5.0, 11)
    np.testing.assert_allclose(phi_r3(s, RADIUS), phi_r3(-s, RADIUS), rtol=1e-15)


def test_psi_quadrature_matches_disk_integral():
    s = np.linspace(0.0, 20.0, 81)
    exact = psi_r3_exact(s, RADIUS)
    assert exact[0] == pytest.approx(np.pi * RADIUS ** 2)
    np.testing.assert_allclose(psi_r3(s, RADIUS, 64), exact, rtol=0, atol=1e-10 * np.max(np.abs(exact)))


def test_psi_over_many_arguments():
    # more values than one evaluation chunk holds
    s = np.linspace(0.0, 20.0, 3 * 5000).reshape(3, 5000)
    exact = psi_r3_exact(s, RADIUS)
    out = psi_r3(s, RADIUS, 64)
    assert out.shape == (3, 5000)
    np.testing.assert_allclose(out, exact, rtol=0, atol=1e-10 * np.max(np.abs(exact)))


def test_angular_directions():
    e, sin_theta = angular_directions(4, 4)
    assert e.shape == (16, 3)
    np.testing.assert_allclose(np.linalg.norm(e, axis=1), 1.0, rtol=1e-15)
    assert np.count_nonzero(sin_theta > 0) == 12


def test_kernel_shape(grid8):
    config, kernel, _ = grid8
    assert kernel.alpha.shape == (16, 8, 8, 8)
    assert kernel.n_active == 12
    assert kernel.transforms_per_cell == 29
    assert not kernel.psi_replaced
    assert kernel.weight == pytest.approx(4.0 * np.pi ** 2 / 16)


PAIRS = [((1, 0, 0), (0, 1, 0)), ((1, 2, 0), (-1, 0, 2)), ((0, 0, 0), (2, 1, 1)), ((3, -1, 2), (1, 1, -2)),
         ((2, 2, 2), (0, 0, 0))]


def _quadrature_weights(a):
    config = SpectralConfig(8, a1=a, a2=a)
    return np.array([quadrature_weight(l, m, config) for l, m in PAIRS])


def test_pair_weights_match_the_kernel_tables(grid8):
    config, kernel, _ = grid8
    for l, m in PAIRS:
        assert quadrature_weight(l, m, config) == pytest.approx(kernel.carleman_weight(l, m), rel=1e-12, abs=1e-12)


def test_precompute_memory_stays_bounded():
    tracemalloc.start()
    try:
        precompute_kernel(SpectralConfig(8, a1=16, a2=16))
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    assert peak < 64 * 2 ** 20


def test_angular_quadrature_converges():
    values = {a: _quadrature_weights(a) for a in (2, 4, 8)}
    coarse = np.max(np.abs(values[2] - values[4]))
    fine = np.max(np.abs(values[4] - values[8]))
    assert fine < coarse


def test_quadrature_approaches_carleman_reference():
    config = SpectralConfig(8)
    reference = np.array([carleman_reference(l, m, config) for l, m in PAIRS])
    scale = carleman_reference((0, 0, 0), (0, 0, 0), config)
    assert scale == pytest.approx(8.0 * np.pi ** 2 * config.radius ** 4, rel=1e-8)

    errors = {a: np.max(np.abs(_quadrature_weights(a) - reference)) for a in (16, 64)}
    assert errors[64] <= errors[16]
    assert errors[64] < 1e-3 * scale


def test_forward_modes_examples(grid8):
    config, _, vgrid = grid8
    constant = forward_modes(np.full(vgrid.n_points, 2.0), vgrid, config)
    assert constant.at((0, 0, 0)) == pytest.approx(2.0)
    others = np.abs(constant.coefficients.ravel()[1:])
    assert np.max(others) < 1e-14

    point = np.zeros(vgrid.n_points)
    point[123] = 1.0
    magnitudes = np.abs(forward_modes(point, vgrid, config).coefficients)
    np.testing.assert_allclose(magnitudes, 1.0 / vgrid.n_points, rtol=1e-12)


def test_forward_modes_conjugate_symmetry(grid8, rng):
    config, _, vgrid = grid8
    modes = forward_modes(rng.random(vgrid.n_points), vgrid, config)
    for k in [(1, 0, 0), (2, -3, 1), (3, 3, -3)]:
        minus = tuple(-c for c in k)
        assert modes.at(minus) == pytest.approx(np.conj(modes.at(k)), abs=1e-14)


@pytest.mark.parametrize("name", ['grid8', 'grid12'])
def test_fast_matches_direct(name, request, rng):
    config, kernel, vgrid = setup = request.getfixturevalue(name)
    worst = 0.0
    for _ in range(50):
        masses = rng.random(vgrid.n_points)
        fast = _q(masses, setup)
        direct = q_boltzmann_direct(masses, kernel, config, vgrid)
        worst = max(worst, np.max(np.abs(fast - direct)) / np.max(np.abs(direct)))
    assert worst < 1e-10


def test_quadratic_form(grid8, rng):
    _, _, vgrid = grid8
    f = rng.random(vgrid.n_points)
    g = rng.random(vgrid.n_points)
    lhs = _q(f + g, grid8) + _q(f - g, grid8)
    rhs = 2.0 * _q(f, grid8) + 2.0 * _q(g, grid8)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10 * np.max(np.abs(rhs)))
    np.testing.assert_allclose(_q(3.0 * f, grid8), 9.0 * _q(f, grid8), rtol=0,
                               atol=1e-10 * np.max(np.abs(_q(f, grid8))) * 9.0)


def test_result_is_real(grid8, rng):
    config, kernel, vgrid = grid8
    evaluator = FastSpectralCollision(kernel, vgrid)
    real, imag = evaluator.back_transform(evaluator.collision_modes(rng.random(vgrid.n_points)))
    assert real.dtype == np.float64
    assert imag <= 1e-10 * np.max(np.abs(real))


def test_zero_density_gives_zero(grid8):
    _, _, vgrid = grid8
    assert not np.any(_q(np.zeros(vgrid.n_points), grid8))


def test_mass_is_conserved(grid16):
    _, _, vgrid = grid16
    f = _bimodal(vgrid)
    q = _q(f, grid16)
    rho_q = cell_moments(q, vgrid)[0]
    assert abs(rho_q) <= 1e-8 * cell_moments(f, vgrid)[0]


def test_collision_invariant_errors_shrink_with_resolution(grid8, grid16):
    def relative(setup):
        vgrid = setup[2]
        f = _bimodal(vgrid)
        q = _q(f, setup)
        rho_q, mom, E = cell_moments(q, vgrid)
        size = np.sum(np.abs(q)) * vgrid.dv ** 3
        return abs(rho_q) / cell_moments(f, vgrid)[0], np.linalg.norm(mom) / size, abs(E) / size

    coarse, fine = relative(grid8), relative(grid16)
    # the mass moment cancels exactly, so only rounding separates the two grids
    assert fine[0] <= max(coarse[0], 1e-12)
    assert fine[1] < coarse[1]
    assert fine[2] < coarse[2]


def test_maxwellian_is_nearly_annihilated(grid8, grid16):
    def ratio(setup):
        vgrid = setup[2]
        f = discrete_maxwellian(Primitive(1.0, np.zeros(3), 0.09), vgrid)
        return np.max(np.abs(_q(f, setup))) / np.max(f)

    assert ratio(grid16) < ratio(grid8)


def test_step_is_forward_euler(grid8, rng):
    config, kernel, vgrid = grid8
    f = _bimodal(vgrid)
    q = _q(f, grid8)
    dt = 1e-3 * np.max(f) / np.max(np.abs(q))

    def step(m, h):
        return boltzmann_step(m, kernel, config, vgrid, h)

    np.testing.assert_allclose(step(f, dt), f + dt * q, rtol=1e-14, atol=1e-14 * np.max(f))

    def splitting_gap(h):
        return np.max(np.abs(step(f, h) - step(step(f, h / 2), h / 2)))

    assert 3.5 < splitting_gap(dt) / splitting_gap(dt / 2) < 4.5


def test_step_edge_cases(grid8, rng):
    config, kernel, vgrid = grid8
    f = rng.random(vgrid.n_points)
    out = boltzmann_step(f, kernel, config, vgrid, 0.0)
    np.testing.assert_array_equal(out, f)
    assert out is not f
    with pytest.raises(ConfigError):
        boltzmann_step(f, kernel, config, vgrid, -1.0)


def test_step_block_matches_per_cell(grid8, rng):
    config, kernel, vgrid = grid8
    block = rng.random((2, 1, 2, vgrid.n_points))
    expected = np.array([boltzmann_step(m, kernel, config, vgrid, 0.01) for m in block.reshape(4, -1)])
    FastSpectralCollision(kernel, vgrid).step_block(block, 0.01)
    np.testing.assert_allclose(block.reshape(4, -1), expected, rtol=1e-14, atol=0)


def test_direct_cost_guard():
    config, kernel, vgrid = _setup(18, a1=2, a2=1)
    with pytest.raises(CostGuardError):
        q_boltzmann_direct(np.ones(vgrid.n_points), kernel, config, vgrid)


def test_mismatched_kernel_is_rejected(grid8):
    config, kernel, vgrid = grid8
    with pytest.raises(ConfigError):
        q_boltzmann_fast(np.ones(vgrid.n_points), kernel, SpectralConfig(8, a1=2), vgrid)
    with pytest.raises(ConfigError):
        q_boltzmann_fast(np.ones(27), kernel, config, build_velocity_grid(3, -1.0, 1.0))


def test_physical_scaling(rng):
    config = SpectralConfig(8)
    kernel = precompute_kernel(config)
    unit = build_velocity_grid(8, -np.pi, np.pi)
    wide = build_velocity_grid(8, -2.0 * np.pi, 2.0 * np.pi)
    f = rng.random(unit.n_points)
    np.testing.assert_allclose(q_boltzmann_fast(f, kernel, config, wide),
                               16.0 * q_boltzmann_fast(f, kernel, config, unit), rtol=1e-13)


def test_support_check(grid8, caplog):
    config, _, vgrid = grid8
    narrow = discrete_maxwellian(Primitive(1.0, np.zeros(3), 0.02), vgrid)
    assert support_leak_fraction(narrow, vgrid, config) < 1e-8
    with caplog.at_level(logging.WARNING):
        fraction = check_support(np.ones((3, vgrid.n_points)), vgrid, config)
    assert fraction > 0.5
    assert 'outside the spectral ball' in caplog.text
