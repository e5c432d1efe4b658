"""Strong-scaling benchmark: one problem, several worker counts."""
import os
import platform
from dataclasses import dataclass
from typing import Iterable, List, Tuple

from config import RunConfig
from decomposition import enumerate_decompositions, min_ghost_dims
from errors import ConfigError
from logger import get_logger
from phase_space import build_spatial_grid
from simulation import run_simulation

logger = get_logger(__name__)


@dataclass
class ScalingRow:
    workers: int
    dims: Tuple[int, int, int]
    cycles: int
    seconds: float
    t_cycle: float
    t_cell: float
    t_cell_worker: float
    collision_percent: float
    speedup: float = 1.0
    efficiency: float = 1.0


def parse_worker_counts(text: str) -> List[int]:
    try:
        counts = [int(p) for p in str(text).replace(' ', '').split(',') if p]
    except ValueError:
        raise ConfigError(f"worker counts must be a comma separated list of integers, got {text!r}") from None
    if not counts or any(c < 1 for c in counts):
        raise ConfigError(f"worker counts must be positive, got {text!r}")
    return counts


def choose_dims(config: RunConfig, workers: int) -> Tuple[int, int, int]:
    """Slabs along x when they divide the grid, otherwise the first valid layout."""
    sgrid = build_spatial_grid(config.spatial_n, config.x_min, config.x_max)
    if config.bench_layout == 'min_ghost':
        return min_ghost_dims(sgrid, workers)
    if sgrid.n_per_axis % workers == 0:
        return (workers, 1, 1)
    rows = enumerate_decompositions(sgrid, workers)
    if not rows:
        raise ConfigError(f"no decomposition of {sgrid.n_per_axis}^3 cells over {workers} workers")
    return rows[0].dims


def scaling_benchmark(config: RunConfig, worker_counts: Iterable[int]) -> List[ScalingRow]:
    """Run the same problem at each worker count; speedup and efficiency are relative to the smallest count."""
    counts = sorted(set(int(c) for c in worker_counts))
    if not counts:
        raise ConfigError("scaling benchmark needs at least one worker count")
    rows = []
    for workers in counts:
        dims = choose_dims(config, workers)
        result = run_simulation(config.with_workers(workers, dims), keep_masses=False)
        report = result.report
        rows.append(ScalingRow(workers, dims, report.cycles, report.total_seconds, report.t_cycle,
                               report.t_cell, report.t_cell_worker, report.percentages()['Collision']))
        logger.info(f"Benchmark {workers} worker(s) {dims}: {report.total_seconds:.3f}s")

    base = rows[0]
    for row in rows:
        row.speedup = base.seconds / row.seconds if row.seconds > 0 else 0.0
        row.efficiency = row.speedup / (row.workers / base.workers)
    return rows


def hardware_summary() -> str:
    return f"{platform.platform()} | {platform.processor() or platform.machine()} | cpus={os.cpu_count()}"


def format_scaling_table(rows: List[ScalingRow]) -> str:
    lines = [f"# {hardware_summary()}",
             f"{'workers':>7} {'dims':>8} {'cycles':>6} {'T[s]':>10} {'T_cycle[s]':>11} {'T_cell[s]':>11} "
             f"{'T_cell*w[s]':>11} {'coll%':>6} {'speedup':>8} {'eff':>6}"]
    for r in rows:
        dims = 'x'.join(str(d) for d in r.dims)
        lines.append(f"{r.workers:>7} {dims:>8} {r.cycles:>6} {r.seconds:>10.4f} {r.t_cycle:>11.4e} "
                     f"{r.t_cell:>11.4e} {r.t_cell_worker:>11.4e} {r.collision_percent:>6.1f} "
                     f"{r.speedup:>8.3f} {r.efficiency:>6.3f}")
    return '\n'.join(lines)
