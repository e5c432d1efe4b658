"""Initial states: the Sod 3D explosion and test fields."""
from typing import Tuple

import numpy as np

from config import RunConfig
from errors import ConfigError
from logger import get_logger
from phase_space import Primitive, SpatialGrid, VelocityGrid, discrete_maxwellian, field_moments

logger = get_logger(__name__)

SOD_LEFT = Primitive(1.0, np.zeros(3), 5.0)
SOD_RIGHT = Primitive(0.125, np.zeros(3), 4.0)
SOD_CENTER = (1.0, 1.0, 1.0)
SOD_RADIUS = 0.2


def ball_mask(sgrid: SpatialGrid, center=SOD_CENTER, radius: float = SOD_RADIUS) -> np.ndarray:
    """Cells whose center lies strictly inside the ball."""
    c = sgrid.centers
    d2 = ((c[:, None, None] - center[0]) ** 2
          + (c[None, :, None] - center[1]) ** 2
          + (c[None, None, :] - center[2]) ** 2)
    return d2 < radius * radius


def _two_state_field(mask: np.ndarray, inside: Primitive, outside: Primitive,
                     vgrid: VelocityGrid) -> np.ndarray:
    masses = np.empty(mask.shape + (vgrid.n_points,))
    masses[mask] = discrete_maxwellian(inside, vgrid)
    masses[~mask] = discrete_maxwellian(outside, vgrid)
    return masses


def init_sod_explosion(sgrid: SpatialGrid, vgrid: VelocityGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Equilibrium masses of the left state inside the ball, right state elsewhere, and their moments."""
    mask = ball_mask(sgrid)
    logger.info(f"Sod explosion: {int(mask.sum())} of {sgrid.n_cells} cells in the high-pressure ball")
    masses = _two_state_field(mask, SOD_LEFT, SOD_RIGHT, vgrid)
    return masses, field_moments(masses, vgrid)


def init_uniform(sgrid: SpatialGrid, vgrid: VelocityGrid, prim: Primitive = SOD_RIGHT) -> Tuple[np.ndarray, np.ndarray]:
    masses = np.empty(sgrid.shape + (vgrid.n_points,))
    masses[...] = discrete_maxwellian(prim, vgrid)
    return masses, field_moments(masses, vgrid)


def init_random(sgrid: SpatialGrid, vgrid: VelocityGrid, seed: int,
                prim: Primitive = SOD_RIGHT, amplitude: float = 0.5) -> Tuple[np.ndarray, np.ndarray]:
    """Equilibrium masses times a seeded factor in [1, 1 + amplitude)."""
    rng = np.random.default_rng(seed)
    masses = np.empty(sgrid.shape + (vgrid.n_points,))
    masses[...] = discrete_maxwellian(prim, vgrid)
    masses *= 1.0 + amplitude * rng.random(masses.shape)
    return masses, field_moments(masses, vgrid)


def build_initial_state(config: RunConfig, sgrid: SpatialGrid, vgrid: VelocityGrid) -> Tuple[np.ndarray, np.ndarray]:
    if config.initial == 'sod':
        return init_sod_explosion(sgrid, vgrid)
    if config.initial == 'uniform':
        return init_uniform(sgrid, vgrid)
    if config.initial == 'random':
        return init_random(sgrid, vgrid, config.seed)
    raise ConfigError(f"unknown initial state {config.initial!r}")
