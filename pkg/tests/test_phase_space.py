import numpy as np
import pytest
from scipy import integrate

from errors import ConfigError, InvalidStateError
from phase_space import (Primitive, build_spatial_grid, build_velocity_grid, cell_moments,
                         conserved_from_primitive, discrete_maxwellian, maxwellian, primitive_from_conserved,
                         primitives_of)


def test_velocity_grid_is_cell_centered():
    vgrid = build_velocity_grid(2, -1.0, 1.0)
    assert vgrid.dv == 1.0
    assert vgrid.axis.tolist() == [-0.5, 0.5]
    assert vgrid.points.shape == (8, 3)


@pytest.mark.parametrize("n, dv, n_points", [(32, 0.9375, 32768), (16, 1.875, 4096)])
def test_velocity_grid_sizes(n, dv, n_points):
    vgrid = build_velocity_grid(n, -15.0, 15.0)
    assert vgrid.dv == dv
    assert vgrid.n_points == n_points


def test_velocity_index_order():
    vgrid = build_velocity_grid(4, -2.0, 2.0)
    ix, iy, iz = 1, 2, 3
    k = (ix * 4 + iy) * 4 + iz
    assert vgrid.points[k].tolist() == [vgrid.axis[ix], vgrid.axis[iy], vgrid.axis[iz]]


@pytest.mark.parametrize("args", [(1, -1.0, 1.0), (4, 1.0, 1.0), (4, 2.0, -2.0)])
def test_bad_velocity_grid(args):
    with pytest.raises(ConfigError):
        build_velocity_grid(*args)


def test_spatial_grid():
    sgrid = build_spatial_grid(64, 0.0, 2.0)
    assert sgrid.dx == 2.0 / 64
    assert sgrid.n_cells == 64 ** 3
    assert sgrid.centers[0] == pytest.approx(1.0 / 64)
    with pytest.raises(ConfigError):
        build_spatial_grid(0, 0.0, 2.0)


def test_cell_moments_of_zero_and_single_mass():
    vgrid = build_velocity_grid(4, -2.0, 2.0)
    rho, mom, E = cell_moments(np.zeros(vgrid.n_points), vgrid)
    assert (rho, E) == (0.0, 0.0)
    assert mom.tolist() == [0.0, 0.0, 0.0]

    masses = np.zeros(vgrid.n_points)
    k = 37
    masses[k] = 2.5
    rho, mom, E = cell_moments(masses, vgrid)
    w = 2.5 * vgrid.dv ** 3
    v = vgrid.points[k]
    assert rho == pytest.approx(w, rel=1e-15)
    np.testing.assert_allclose(mom, v * w, rtol=1e-15)
    assert E == pytest.approx(0.5 * v @ v * w, rel=1e-15)


def test_cell_moments_are_linear(rng):
    vgrid = build_velocity_grid(4, -2.0, 2.0)
    m1 = rng.random(vgrid.n_points)
    m2 = rng.random(vgrid.n_points)
    lhs = np.array(cell_moments(2.0 * m1 + 3.0 * m2, vgrid)[2])
    rhs = 2.0 * cell_moments(m1, vgrid)[2] + 3.0 * cell_moments(m2, vgrid)[2]
    assert lhs == pytest.approx(rhs, rel=1e-13)


def _quadrature_moments(prim):
    """Continuous Maxwellian moments by adaptive quadrature of the isotropic radial profile."""

    def radial(r, power):
        return 4.0 * np.pi * r ** (2 + power) * maxwellian(prim, np.array([r, 0.0, 0.0]))

    mass = integrate.quad(radial, 0.0, np.inf, args=(0,), epsabs=1e-14)[0]
    energy = 0.5 * integrate.quad(radial, 0.0, np.inf, args=(2,), epsabs=1e-14)[0]
    return mass, energy


def test_discrete_maxwellian_moments_match_quadrature():
    vgrid = build_velocity_grid(32, -15.0, 15.0)
    prim = Primitive(1.0, np.zeros(3), 5.0)
    mass, energy = _quadrature_moments(prim)
    assert mass == pytest.approx(1.0, rel=1e-10)
    assert energy == pytest.approx(7.5, rel=1e-10)

    rho, mom, E = cell_moments(discrete_maxwellian(prim, vgrid), vgrid)
    assert rho == pytest.approx(mass, rel=1e-6)
    assert E == pytest.approx(energy, rel=1e-6)
    assert np.max(np.abs(mom)) < 1e-14


def test_discrete_maxwellian_symmetry():
    vgrid = build_velocity_grid(8, -3.0, 3.0)
    masses = discrete_maxwellian(Primitive(1.0, np.zeros(3), 1.0), vgrid)
    mirrored = masses.reshape(8, 8, 8)[::-1, ::-1, ::-1].ravel()
    np.testing.assert_array_equal(masses, mirrored)


def test_discrete_maxwellian_flat_limit():
    vgrid = build_velocity_grid(4, -0.01, 0.01)
    prim = Primitive(2.0, np.zeros(3), 1e6)
    np.testing.assert_allclose(discrete_maxwellian(prim, vgrid), 2.0 / (2.0 * np.pi * 1e6) ** 1.5, rtol=1e-9)


def test_maxwellian_values():
    unit = Primitive(1.0, np.zeros(3), 1.0)
    assert maxwellian(unit, np.zeros(3)) == pytest.approx((2 * np.pi) ** -1.5, rel=1e-15)
    assert maxwellian(Primitive(1.0, np.zeros(3), 5.0), np.zeros(3)) == pytest.approx((10 * np.pi) ** -1.5,
                                                                                       rel=1e-15)
    v = np.array([0.3, -1.0, 2.0])
    assert maxwellian(Primitive(2.0, np.zeros(3), 1.0), v) == pytest.approx(2 * maxwellian(unit, v), rel=1e-15)


def test_primitive_from_conserved_examples():
    prim = primitive_from_conserved(1.0, np.zeros(3), 1.5)
    assert (prim.rho, prim.T) == (1.0, pytest.approx(1.0))
    prim = primitive_from_conserved(1.0, np.array([1.0, 0.0, 0.0]), 2.0)
    assert prim.u.tolist() == [1.0, 0.0, 0.0]
    assert prim.T == pytest.approx(1.0, rel=1e-15)
    E = conserved_from_primitive(Primitive(1.0, np.zeros(3), 5.0))[4]
    assert E == pytest.approx(7.5, rel=1e-15)


def test_conserved_primitive_round_trip(rng):
    rho = 0.1 + rng.random((3, 4))
    u = rng.normal(size=(3, 4, 3))
    T = 0.5 + rng.random((3, 4))
    U = conserved_from_primitive(Primitive(rho, u, T))
    back = conserved_from_primitive(primitives_of(U))
    np.testing.assert_allclose(back, U, rtol=1e-14, atol=0)


def test_invalid_state_names_the_cell():
    U = conserved_from_primitive(Primitive(np.ones((2, 2)), np.zeros((2, 2, 3)), np.ones((2, 2))))
    U[1, 0, 4] = 0.0
    with pytest.raises(InvalidStateError) as info:
        primitives_of(U)
    assert info.value.cell == (1, 0)
    with pytest.raises(InvalidStateError):
        primitive_from_conserved(-1.0, np.zeros(3), 1.0)
