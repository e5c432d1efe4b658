"""Phase-space grids, moments and Maxwellians.

Velocity index k enumerates the velocity cube in C order
(k = (ix * n + iy) * n + iz); spatial fields are stored as
(nx, ny, nz, ...) arrays.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple, Union

import numpy as np

from errors import ConfigError, InvalidStateError
from logger import get_logger

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centered velocity grid, identical on the three axes."""
    n_per_axis: int
    v_min: float
    v_max: float

    @property
    def dv(self) -> float:
        return (self.v_max - self.v_min) / self.n_per_axis

    @property
    def n_points(self) -> int:
        return self.n_per_axis ** 3

    @property
    def bound(self) -> float:
        """Largest velocity magnitude admitted on any axis."""
        return max(abs(self.v_min), abs(self.v_max))

    @cached_property
    def axis(self) -> np.ndarray:
        return self.v_min + (np.arange(self.n_per_axis) + 0.5) * self.dv

    @cached_property
    def points(self) -> np.ndarray:
        """(N_v, 3) array of the velocity vectors v_k."""
        vx, vy, vz = np.meshgrid(self.axis, self.axis, self.axis, indexing='ij')
        pts = np.stack([vx.ravel(), vy.ravel(), vz.ravel()], axis=-1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def collision_invariants(self) -> np.ndarray:
        """(N_v, 5) weights phi(v_k) * dv^3 for (1, vx, vy, vz, |v|^2/2)."""
        v = self.points
        phi = np.empty((self.n_points, 5))
        phi[:, 0] = 1.0
        phi[:, 1:4] = v
        phi[:, 4] = 0.5 * np.einsum('ij,ij->i', v, v)
        phi *= self.dv ** 3
        phi.setflags(write=False)
        return phi


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform cell-centered spatial grid on the cube [x_min, x_max]^3."""
    n_per_axis: int
    x_min: float
    x_max: float

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_per_axis

    @property
    def n_cells(self) -> int:
        return self.n_per_axis ** 3

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n_per_axis,) * 3

    @cached_property
    def centers(self) -> np.ndarray:
        """1D cell-center coordinates along any axis."""
        return self.x_min + (np.arange(self.n_per_axis) + 0.5) * self.dx


@dataclass
class Primitive:
    """Density, mean velocity and temperature; scalars or per-cell arrays."""
    rho: ArrayLike
    u: np.ndarray
    T: ArrayLike


def build_velocity_grid(n_per_axis: int, v_min: float, v_max: float) -> VelocityGrid:
    if int(n_per_axis) != n_per_axis or n_per_axis < 2:
        raise ConfigError(f"velocity grid needs at least 2 points per axis, got {n_per_axis}")
    if not (np.isfinite(v_min) and np.isfinite(v_max)) or v_max <= v_min:
        raise ConfigError(f"velocity bounds must satisfy v_max > v_min, got [{v_min}, {v_max}]")
    return VelocityGrid(int(n_per_axis), float(v_min), float(v_max))


def build_spatial_grid(n_per_axis: int, x_min: float, x_max: float) -> SpatialGrid:
    if int(n_per_axis) != n_per_axis or n_per_axis < 1:
        raise ConfigError(f"spatial grid needs at least 1 cell per axis, got {n_per_axis}")
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or x_max <= x_min:
        raise ConfigError(f"domain bounds must satisfy x_max > x_min, got [{x_min}, {x_max}]")
    return SpatialGrid(int(n_per_axis), float(x_min), float(x_max))


def field_moments(masses: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """Moments of a (..., N_v) mass array as a (..., 5) array."""
    if masses.shape[-1] != vgrid.n_points:
        raise ConfigError(f"mass array has {masses.shape[-1]} velocity slots, grid has {vgrid.n_points}")
    return masses @ vgrid.collision_invariants


def cell_moments(masses_for_cell: np.ndarray, vgrid: VelocityGrid) -> Tuple[float, np.ndarray, float]:
    """(rho, mom, E) of one cell: sums of phi(v_k) m_k dv^3."""
    u = field_moments(np.asarray(masses_for_cell, dtype=float), vgrid)
    return float(u[0]), u[1:4].copy(), float(u[4])


def conserved_from_primitive(prim: Primitive) -> np.ndarray:
    """(..., 5) conserved vector for scalar or per-cell primitives."""
    rho = np.asarray(prim.rho, dtype=float)
    u = np.asarray(prim.u, dtype=float)
    T = np.asarray(prim.T, dtype=float)
    out = np.empty(rho.shape + (5,))
    out[..., 0] = rho
    out[..., 1:4] = rho[..., None] * u
    out[..., 4] = 0.5 * rho * np.sum(u * u, axis=-1) + 1.5 * rho * T
    return out


def primitive_from_conserved(rho: ArrayLike, mom: np.ndarray, E: ArrayLike) -> Primitive:
    """Invert (rho, mom, E) to (rho, u, T); arrays are validated cell by cell."""
    rho = np.asarray(rho, dtype=float)
    mom = np.asarray(mom, dtype=float)
    E = np.asarray(E, dtype=float)

    bad_rho = ~(rho > 0)
    if np.any(bad_rho):
        cell = np.argwhere(bad_rho)[0] if rho.ndim else None
        raise InvalidStateError(f"non-positive density {rho[tuple(cell)] if cell is not None else rho}", cell)

    u = mom / rho[..., None]
    T = (E - 0.5 * rho * np.sum(u * u, axis=-1)) * 2.0 / (3.0 * rho)
    bad_T = ~(T > 0)
    if np.any(bad_T):
        cell = np.argwhere(bad_T)[0] if T.ndim else None
        raise InvalidStateError(f"non-positive temperature {T[tuple(cell)] if cell is not None else T}", cell)

    if rho.ndim == 0:
        return Primitive(float(rho), u, float(T))
    return Primitive(rho, u, T)


def primitives_of(conserved: np.ndarray) -> Primitive:
    """Primitive variables of a (..., 5) conserved array."""
    return primitive_from_conserved(conserved[..., 0], conserved[..., 1:4], conserved[..., 4])


def maxwellian(prim: Primitive, v: np.ndarray) -> ArrayLike:
    """M[f](v) = rho / (2 pi T)^(3/2) exp(-|u - v|^2 / (2 T))."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(prim.u, dtype=float)
    d2 = np.sum((v - u) ** 2, axis=-1)
    value = prim.rho / (2.0 * np.pi * prim.T) ** 1.5 * np.exp(-d2 / (2.0 * prim.T))
    return float(value) if np.ndim(value) == 0 else value


def discrete_maxwellian(prim: Primitive, vgrid: VelocityGrid) -> np.ndarray:
    """Pointwise Maxwellian on the grid; per-cell primitives give (..., N_v)."""
    rho = np.asarray(prim.rho, dtype=float)
    T = np.asarray(prim.T, dtype=float)
    u = np.asarray(prim.u, dtype=float)
    v = vgrid.points
    # |v - u|^2 expanded per axis keeps the (..., N_v) temporaries to one
    d2 = np.zeros(rho.shape + (vgrid.n_points,))
    for axis in range(3):
        d2 += (v[:, axis] - u[..., axis, None]) ** 2
    coef = rho / (2.0 * np.pi * T) ** 1.5
    return coef[..., None] * np.exp(-d2 / (2.0 * T[..., None]))
