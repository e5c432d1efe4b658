"""BGK relaxation collision step."""
import warnings
from dataclasses import dataclass

import numpy as np

from errors import ConfigError, StabilityWarning
from phase_space import Primitive, VelocityGrid, discrete_maxwellian


@dataclass(frozen=True)
class BgkParams:
    """Relaxation time tau; the collision frequency is constant, nu = 1 / tau."""
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"BGK relaxation time must be positive, got {self.tau}")

    @property
    def nu(self) -> float:
        return 1.0 / self.tau


def relaxation_factor(params: BgkParams, dt: float) -> float:
    """dt * nu, warning when the explicit Euler update overshoots."""
    if not dt > 0:
        raise ConfigError(f"time step must be positive, got {dt}")
    factor = dt * params.nu
    if factor > 1.0:
        warnings.warn(f"BGK step overshoots equilibrium: dt*nu = {factor:.6g} > 1", StabilityWarning, stacklevel=3)
    return factor


def bgk_step(masses_for_cell: np.ndarray, prim: Primitive, params: BgkParams, dt: float,
             vgrid: VelocityGrid) -> np.ndarray:
    """m_k + dt*nu*(E_k - m_k) with E the discrete Maxwellian of prim.

    prim comes from the conserved field after transport, never from the
    masses, and may hold per-cell arrays matching the leading axes of
    masses_for_cell.
    """
    factor = relaxation_factor(params, dt)
    equilibrium = discrete_maxwellian(prim, vgrid)
    return (1.0 - factor) * masses_for_cell + factor * equilibrium


def bgk_relax_inplace(masses: np.ndarray, prim: Primitive, factor: float, vgrid: VelocityGrid) -> None:
    """Block form of bgk_step used by the solver; factor = dt*nu already checked."""
    equilibrium = discrete_maxwellian(prim, vgrid)
    equilibrium *= factor
    masses *= 1.0 - factor
    masses += equilibrium
