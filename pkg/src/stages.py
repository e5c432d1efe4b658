"""Collision stages applied per cell to a worker's block.

A stage updates masses in place and never touches the conserved field.
With collision_threads > 1 the block is cut into x-plane chunks that a
thread pool relaxes independently; each cell is still computed by the
same arithmetic, so results do not depend on the chunking.
"""
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional

import numpy as np

from collision_bgk import BgkParams, bgk_relax_inplace, relaxation_factor
from config import RunConfig
from errors import ConfigError
from logger import get_logger
from phase_space import Primitive, VelocityGrid
from spectral_boltzmann import FastSpectralCollision, SpectralConfig, precompute_kernel

logger = get_logger(__name__)


class CollisionStage(ABC):
    name = 'collision'
    needs_primitive = False

    def __init__(self):
        self.stats: Dict[str, float] = {}

    @abstractmethod
    def apply(self, masses: np.ndarray, prim: Optional[Primitive], dt: float) -> None:
        """Update a (..., N_v) block of masses in place."""

    def apply_threaded(self, masses: np.ndarray, prim: Optional[Primitive], dt: float,
                       pool: Optional[ThreadPoolExecutor] = None, n_chunks: int = 1) -> None:
        """apply() over x-plane chunks on the pool (inline when there is none)."""
        n_planes = masses.shape[0]
        if pool is None or n_chunks < 2 or n_planes < 2:
            self.apply(masses, prim, dt)
            return
        chunks = np.array_split(np.arange(n_planes), min(n_chunks, n_planes))
        # chunks are disjoint x-ranges, so threads never write the same cell
        futures = []
        for chunk in chunks:
            if not len(chunk):
                continue
            lo, hi = int(chunk[0]), int(chunk[-1]) + 1
            part = None if prim is None else Primitive(prim.rho[lo:hi], prim.u[lo:hi], prim.T[lo:hi])
            futures.append(pool.submit(self.apply, masses[lo:hi], part, dt))
        for future in futures:
            future.result()


class NoCollision(CollisionStage):
    name = 'none'

    def apply(self, masses, prim, dt):
        pass

    def apply_threaded(self, masses, prim, dt, pool=None, n_chunks=1):
        pass


class BgkCollision(CollisionStage):
    name = 'bgk'
    needs_primitive = True

    def __init__(self, params: BgkParams, vgrid: VelocityGrid):
        super().__init__()
        self.params = params
        self.vgrid = vgrid

    def apply(self, masses, prim, dt):
        bgk_relax_inplace(masses, prim, relaxation_factor(self.params, dt), self.vgrid)


class BoltzmannCollision(CollisionStage):
    name = 'boltzmann'

    def __init__(self, evaluator: FastSpectralCollision):
        super().__init__()
        self.evaluator = evaluator
        kernel = evaluator.kernel
        self.stats = {
            'kernel_precompute_seconds': kernel.precompute_seconds,
            'kernel_active_directions': float(kernel.n_active),
            'transforms_per_cell': float(kernel.transforms_per_cell),
        }

    @property
    def spectral_config(self) -> SpectralConfig:
        return self.evaluator.kernel.config

    def apply(self, masses, prim, dt):
        self.evaluator.step_block(masses, dt)


def make_collision_stage(config: RunConfig, vgrid: VelocityGrid) -> CollisionStage:
    """Stage for config.collision; the spectral kernel is precomputed once and shared."""
    if config.collision == 'none':
        return NoCollision()
    if config.collision == 'bgk':
        return BgkCollision(BgkParams(config.tau), vgrid)
    if config.collision == 'boltzmann':
        spectral = SpectralConfig(config.velocity_n, config.a1, config.a2, config.alpha_const)
        # one kernel for all workers
        return BoltzmannCollision(FastSpectralCollision(precompute_kernel(spectral), vgrid))
    raise ConfigError(f"unknown collision kind {config.collision!r}")
