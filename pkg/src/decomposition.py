"""Cartesian block decomposition of the periodic spatial grid.

Workers are laid out on a (Px, Py, Pz) grid and ranked in C order,
rank = (cx * Py + cy) * Pz + cz.  Every block is padded by one ghost
layer on each axis; only axes with more than one worker need remote
data, the others are filled locally by periodic wrap.
"""
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np

from errors import ConfigError
from logger import get_logger
from phase_space import SpatialGrid

logger = get_logger(__name__)

Delta = Tuple[int, int, int]
Dims = Tuple[int, int, int]
AXIS_NAMES = ('x', 'y', 'z')


@dataclass(frozen=True)
class HaloSpec:
    """Ghost-shell layout shared by every block of a decomposition.

    directions lists the ghost regions that are filled from other
    workers, in the fixed order used by both ends of the exchange.  A
    direction s has s_i = 0 on unsplit axes; region_shapes gives the
    (rx, ry, rz) extent of the matching interior/ghost layer.
    """
    block_shape: Tuple[int, int, int]
    split_axes: Tuple[int, ...]
    directions: Tuple[Delta, ...]
    region_shapes: Dict[Delta, Tuple[int, int, int]]

    @property
    def ghost_count(self) -> int:
        """Ghost cells of the one-layer shell restricted to split axes."""
        padded = 1
        interior = 1
        for axis, b in enumerate(self.block_shape):
            padded *= b + 2 if axis in self.split_axes else b
            interior *= b
        return padded - interior

    @property
    def unsplit_axes(self) -> Tuple[int, ...]:
        return tuple(a for a in range(3) if a not in self.split_axes)

    def region_size(self, direction: Delta) -> int:
        rx, ry, rz = self.region_shapes[direction]
        return rx * ry * rz

    def needs_slot(self, direction: Delta, delta: Delta) -> bool:
        """True when the ghost region on side `direction` is read by a shift of `delta`."""
        return all(s == 0 or s == -d for s, d in zip(direction, delta))

    def values_per_step(self, escape_groups) -> int:
        """Values one worker sends (and receives) for the given (delta, slots) groups."""
        total = 0
        for direction in self.directions:
            for delta, slots in escape_groups:
                if self.needs_slot(direction, delta):
                    total += self.region_size(direction) * len(slots)
        return total


def _halo_spec(block_shape: Tuple[int, int, int], split_axes: Tuple[int, ...]) -> HaloSpec:
    # only split axes have remote neighbors
    options = [(-1, 0, 1) if axis in split_axes else (0,) for axis in range(3)]
    directions = tuple(d for d in itertools.product(*options) if any(d))
    # one layer thick across each nonzero component, full block length along the rest
    shapes = {d: tuple(1 if s else b for s, b in zip(d, block_shape)) for d in directions}
    return HaloSpec(block_shape, split_axes, directions, shapes)


@dataclass(frozen=True)
class Decomposition:
    """Equal cuboid blocks of a periodic grid over Px x Py x Pz workers."""
    sgrid: SpatialGrid
    dims: Dims
    block_shape: Tuple[int, int, int]
    halo: HaloSpec

    @property
    def worker_count(self) -> int:
        px, py, pz = self.dims
        return px * py * pz

    @property
    def split_axes(self) -> Tuple[int, ...]:
        return self.halo.split_axes

    @property
    def cells_per_block(self) -> int:
        bx, by, bz = self.block_shape
        return bx * by * bz

    @property
    def neighbor_count(self) -> int:
        return 3 ** len(self.split_axes) - 1

    @property
    def ghost_count(self) -> int:
        return self.halo.ghost_count

    @property
    def kind(self) -> str:
        return ('single', 'slabs', 'pencils', 'cuboids')[len(self.split_axes)]

    def coords(self, rank: int) -> Tuple[int, int, int]:
        if not 0 <= rank < self.worker_count:
            raise ConfigError(f"rank {rank} outside 0..{self.worker_count - 1}")
        _, py, pz = self.dims
        return rank // (py * pz), (rank // pz) % py, rank % pz

    def rank_of(self, coords) -> int:
        px, py, pz = self.dims
        cx, cy, cz = (int(c) % p for c, p in zip(coords, self.dims))
        return (cx * py + cy) * pz + cz

    def neighbor(self, rank: int, direction: Delta) -> int:
        """Rank of the block at coords(rank) + direction, with periodic wrap."""
        c = self.coords(rank)
        return self.rank_of(tuple(ci + di for ci, di in zip(c, direction)))

    @cached_property
    def neighbor_table(self) -> Tuple[Tuple[Tuple[Delta, int], ...], ...]:
        """Per rank, (direction, neighbor rank) for every adjacent block incl. diagonals."""
        return tuple(tuple((d, self.neighbor(rank, d)) for d in self.halo.directions)
                     for rank in range(self.worker_count))

    def block_slices(self, rank: int) -> Tuple[slice, slice, slice]:
        """Global index slices of the block owned by rank."""
        return tuple(slice(c * b, (c + 1) * b) for c, b in zip(self.coords(rank), self.block_shape))

    def scatter(self, field: np.ndarray, rank: int) -> np.ndarray:
        return np.array(field[self.block_slices(rank)], copy=True)

    def gather(self, blocks: List[np.ndarray]) -> np.ndarray:
        """Assemble per-rank (bx, by, bz, ...) blocks into the global field."""
        if len(blocks) != self.worker_count:
            raise ConfigError(f"gather expects {self.worker_count} blocks, got {len(blocks)}")
        first = blocks[0]
        out = np.empty(self.sgrid.shape + first.shape[3:], dtype=first.dtype)
        for rank, block in enumerate(blocks):
            out[self.block_slices(rank)] = block
        return out

    def memory_bytes(self, n_velocities: int) -> int:
        """Per-worker mass storage N_v * (cells + ghosts) * 8 bytes."""
        return 8 * n_velocities * (self.cells_per_block + self.ghost_count)


def build_decomposition(sgrid: SpatialGrid, dims) -> Decomposition:
    try:
        dims = tuple(int(d) for d in dims)
    except (TypeError, ValueError):
        raise ConfigError(f"dims must be three integers, got {dims!r}") from None
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ConfigError(f"dims must be three positive integers, got {dims}")
    n = sgrid.n_per_axis
    for axis, p in enumerate(dims):
        if n % p:
            raise ConfigError(f"axis {AXIS_NAMES[axis]}: {n} cells are not divisible by {p} workers")
    block_shape = tuple(n // p for p in dims)
    # an axis with one worker wraps onto itself
    split_axes = tuple(axis for axis, p in enumerate(dims) if p > 1)
    decomposition = Decomposition(sgrid, dims, block_shape, _halo_spec(block_shape, split_axes))
    logger.info(f"Decomposition {dims[0]}x{dims[1]}x{dims[2]} ({decomposition.kind}): "
                f"block {block_shape}, {decomposition.neighbor_count} neighbors, "
                f"{decomposition.ghost_count} ghost cells")
    return decomposition


@dataclass(frozen=True)
class DecompositionSummary:
    dims: Dims
    cells_per_block: int
    neighbor_count: int
    ghost_count: int
    memory_bytes: int


def enumerate_decompositions(sgrid: SpatialGrid, workers: int, n_velocities: int = 0) -> List[DecompositionSummary]:
    """Every Px >= Py >= Pz factorization of `workers` that divides the grid."""
    if workers < 1:
        raise ConfigError(f"worker count must be positive, got {workers}")
    rows = []
    for px in range(workers, 0, -1):
        if workers % px:
            continue
        for py in range(min(px, workers // px), 0, -1):
            if (workers // px) % py:
                continue
            pz = workers // (px * py)
            if pz > py:
                continue
            # blocks must tile the grid exactly
            n = sgrid.n_per_axis
            if n % px or n % py or n % pz:
                continue
            d = build_decomposition(sgrid, (px, py, pz))
            rows.append(DecompositionSummary(d.dims, d.cells_per_block, d.neighbor_count,
                                             d.ghost_count, d.memory_bytes(n_velocities)))
    return rows


def min_ghost_dims(sgrid: SpatialGrid, workers: int) -> Dims:
    """The valid decomposition with the fewest ghost cells per worker."""
    rows = enumerate_decompositions(sgrid, workers)
    if not rows:
        raise ConfigError(f"no decomposition of {sgrid.n_per_axis}^3 cells over {workers} workers")
    return min(rows, key=lambda r: (r.ghost_count, -r.dims[0])).dims


def format_decompositions(rows: List[DecompositionSummary], workers: int) -> str:
    lines = [f"{'workers':>8} {'Px':>4} {'Py':>4} {'Pz':>4} {'cells/block':>12} "
             f"{'neighbors':>10} {'ghosts':>8} {'memory':>12}"]
    for r in rows:
        lines.append(f"{workers:>8} {r.dims[0]:>4} {r.dims[1]:>4} {r.dims[2]:>4} {r.cells_per_block:>12} "
                     f"{r.neighbor_count:>10} {r.ghost_count:>8} {_format_bytes(r.memory_bytes):>12}")
    return '\n'.join(lines)


def _format_bytes(n: int) -> str:
    for unit in ('B', 'KiB', 'MiB', 'GiB'):
        if n < 1024 or unit == 'GiB':
            return f"{n:.0f} {unit}" if unit == 'B' else f"{n:.1f} {unit}"
        n /= 1024.0
