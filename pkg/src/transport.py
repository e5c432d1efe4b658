"""Exact semi-Lagrangian transport with the generic-cell representation.

Only the particles of one representative cell are moved; every other
cell sees the same relative motion.  A particle leaving the generic cell
through a face, edge or corner is recorded with its velocity slot k and
cell offset delta, and the mass of slot k is then shifted by delta in
every cell of the block.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import CflError, ConfigError, ProtocolError
from logger import get_logger
from phase_space import SpatialGrid, VelocityGrid

logger = get_logger(__name__)

Delta = Tuple[int, int, int]


@dataclass
class GenericCell:
    """Offsets of the N_v particles relative to the cell center, in [-dx/2, dx/2)."""
    offsets: np.ndarray
    velocities: np.ndarray


@dataclass(frozen=True, eq=False)
class EscapeList:
    """Velocity slots that left the generic cell this step and their cell offsets."""
    slots: np.ndarray
    deltas: np.ndarray

    @classmethod
    def empty(cls) -> 'EscapeList':
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 3), dtype=np.int8))

    def __len__(self) -> int:
        return len(self.slots)

    def groups(self) -> List[Tuple[Delta, np.ndarray]]:
        """(delta, slots) pairs in ascending delta order, slots in list order."""
        return self._groups

    @cached_property
    def _groups(self) -> List[Tuple[Delta, np.ndarray]]:
        if not len(self):
            return []
        # base-3 digits of delta + 1 sort like the delta tuples
        keys = ((self.deltas[:, 0].astype(np.int64) + 1) * 3 + self.deltas[:, 1] + 1) * 3 + self.deltas[:, 2] + 1
        order = np.argsort(keys, kind='stable')
        uniq, starts = np.unique(keys[order], return_index=True)
        bounds = list(starts[1:]) + [len(order)]
        out = []
        for key, lo, hi in zip(uniq, starts, bounds):
            delta = (int(key) // 9 - 1, int(key) // 3 % 3 - 1, int(key) % 3 - 1)
            out.append((delta, self.slots[order[lo:hi]].astype(np.int64)))
        return out


def new_generic_cell(vgrid: VelocityGrid) -> GenericCell:
    """Generic cell with every particle at the cell center."""
    return GenericCell(np.zeros((vgrid.n_points, 3)), vgrid.points)


def advance_generic_cell(cell: GenericCell, dt: float, dx: float) -> EscapeList:
    """Move the generic-cell particles by v*dt and wrap those that left the cell."""
    if not dt > 0:
        raise ConfigError(f"time step must be positive, got {dt}")
    displacement = cell.velocities * dt
    worst = float(np.max(np.abs(displacement))) if displacement.size else 0.0
    if worst > dx:
        raise CflError(f"displacement {worst:.6g} exceeds one cell ({dx:.6g}); reduce dt or cfl")

    half = 0.5 * dx
    moved = cell.offsets + displacement
    delta = np.zeros(moved.shape, dtype=np.int8)
    delta[moved >= half] = 1
    delta[moved < -half] = -1
    moved -= delta * dx
    # rounding in the wrap may land a hair outside the half-open interval
    moved[moved >= half] = np.nextafter(half, 0.0)
    moved[moved < -half] = -half
    cell.offsets[:] = moved

    escaped = np.flatnonzero(np.any(delta != 0, axis=1))
    return EscapeList(escaped.astype(np.int64), delta[escaped])


def select_dt(vgrid: VelocityGrid, sgrid: SpatialGrid, cfl: float) -> float:
    """dt = cfl * dx / max|v|, with max|v| the velocity bound of the grid."""
    if not 0 < cfl <= 1:
        raise ConfigError(f"cfl must lie in (0, 1], got {cfl}")
    return cfl * sgrid.dx / vgrid.bound


class MassBlock:
    """Masses of one spatial block with a one-cell ghost shell on every axis.

    Storage is velocity-major, (N_v, bx + 2, by + 2, bz + 2), so the
    spatial field of one velocity slot is a contiguous slab.  Ghost
    slices along axes that are not split between workers are the
    periodic images of the block itself; along split axes they hold the
    neighbors' boundary layers.  ghost_step records, per velocity slot,
    the step at which its ghost data was last refreshed.
    """

    def __init__(self, interior_shape: Sequence[int], n_velocities: int):
        bx, by, bz = (int(b) for b in interior_shape)
        self.interior_shape = (bx, by, bz)
        self.n_velocities = int(n_velocities)
        self.data = np.zeros((self.n_velocities, bx + 2, by + 2, bz + 2))
        self.ghost_step = np.full(self.n_velocities, -1, dtype=np.int64)

    @classmethod
    def from_interior(cls, masses: np.ndarray) -> 'MassBlock':
        """Block holding a cell-major (bx, by, bz, N_v) mass array."""
        block = cls(masses.shape[:3], masses.shape[3])
        block.cells[...] = masses
        return block

    @property
    def interior(self) -> np.ndarray:
        """Velocity-major view (N_v, bx, by, bz) of the owned cells."""
        return self.data[:, 1:-1, 1:-1, 1:-1]

    @property
    def cells(self) -> np.ndarray:
        """Cell-major view (bx, by, bz, N_v) of the owned cells."""
        return np.moveaxis(self.interior, 0, -1)

    def region(self, sides: Delta, layer: str) -> Tuple[slice, slice, slice]:
        """Spatial slices of the interior boundary layer ('send') or ghost layer ('ghost') on the given sides.

        For each axis, side +1 means the high end, -1 the low end and 0 the
        whole interior range.
        """
        out = []
        for side, b in zip(sides, self.interior_shape):
            if side == 0:
                out.append(slice(1, b + 1))
            elif layer == 'send':
                out.append(slice(b, b + 1) if side > 0 else slice(1, 2))
            else:
                out.append(slice(b + 1, b + 2) if side > 0 else slice(0, 1))
        return tuple(out)

    def source(self, delta: Delta, slots: np.ndarray) -> np.ndarray:
        """Masses of cells j - delta for every interior cell j, as a (len(slots), bx, by, bz) copy."""
        sl = tuple(slice(1 - d, 1 - d + b) for d, b in zip(delta, self.interior_shape))
        return self.data[(slots,) + sl]

    def owned(self, slots: np.ndarray) -> np.ndarray:
        """Interior masses of the given slots, as a (len(slots), bx, by, bz) copy."""
        return self.data[(slots, slice(1, -1), slice(1, -1), slice(1, -1))]

    def wrap_periodic(self, axes: Iterable[int], slots: np.ndarray) -> None:
        """Fill the ghost slices of the given axes with the block's own periodic images."""
        for axis in axes:
            b = self.interior_shape[axis]
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo_src = [slice(None)] * 3
            hi_src = [slice(None)] * 3
            lo[axis], lo_src[axis] = 0, b
            hi[axis], hi_src[axis] = b + 1, 1
            self.data[(slots,) + tuple(lo)] = self.data[(slots,) + tuple(lo_src)]
            self.data[(slots,) + tuple(hi)] = self.data[(slots,) + tuple(hi_src)]

    def mark_ghosts(self, slots: np.ndarray, step: int) -> None:
        self.ghost_step[slots] = step

    def require_ghosts(self, slots: np.ndarray, step: int) -> None:
        stale = slots[self.ghost_step[slots] != step]
        if len(stale):
            raise ProtocolError(f"missing ghost data at step {step} for velocity slots {stale[:8].tolist()}"
                                f"{' ...' if len(stale) > 8 else ''}")


def shift_masses(block: MassBlock, escape_list: EscapeList, step: int) -> MassBlock:
    """New mass(j, k) = old mass(j - delta, k) for every escaped slot k."""
    if not len(escape_list):
        return block
    block.require_ghosts(escape_list.slots, step)
    inner = (slice(1, -1),) * 3
    for delta, slots in escape_list.groups():
        # source() copies, so overlapping slabs are safe
        block.data[(slots,) + inner] = block.source(delta, slots)
    return block


def update_conserved(conserved: np.ndarray, block: MassBlock, escape_list: EscapeList,
                     vgrid: VelocityGrid, step: int) -> np.ndarray:
    """U_j += sum over escaped k of (m_{j-delta,k} - m_{j,k}) phi(v_k) dv^3, on pre-shift masses."""
    if not len(escape_list):
        return conserved
    block.require_ghosts(escape_list.slots, step)
    phi = vgrid.collision_invariants
    n_cells = int(np.prod(block.interior_shape))
    for delta, slots in escape_list.groups():
        incoming = block.source(delta, slots)
        incoming -= block.owned(slots)
        conserved += (incoming.reshape(len(slots), n_cells).T @ phi[slots]).reshape(conserved.shape)
    return conserved


def plan_time_steps(dt: float, t_final: Optional[float] = None, n_cycles: Optional[int] = None) -> List[float]:
    """Step sizes for a run: n_cycles steps of dt, or steps of dt up to t_final with the last one truncated."""
    if not dt > 0:
        raise ConfigError(f"time step must be positive, got {dt}")
    if (t_final is None) == (n_cycles is None):
        raise ConfigError("exactly one of t_final and n_cycles must be given")
    if n_cycles is not None:
        if n_cycles < 1:
            raise ConfigError(f"n_cycles must be at least 1, got {n_cycles}")
        return [dt] * int(n_cycles)
    if not t_final > 0:
        raise ConfigError(f"t_final must be positive, got {t_final}")
    steps = max(int(math.ceil(t_final / dt * (1.0 - 1e-12))), 1)
    last = t_final - (steps - 1) * dt
    return [dt] * (steps - 1) + [last]
