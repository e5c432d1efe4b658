"""Wall-clock accounting per solver routine."""
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional

ROUTINES = ('Transport', 'ToConservative', 'ToPrimitive', 'Collision', 'Communication')
UNATTRIBUTED = 'Unattributed'


class Profiler:
    """Accumulates seconds per routine label for one worker."""

    def __init__(self):
        self.seconds: Dict[str, float] = dict.fromkeys(ROUTINES, 0.0)
        self.calls: Dict[str, int] = dict.fromkeys(ROUTINES, 0)
        self._wall_start: Optional[float] = None
        self.wall_seconds = 0.0

    @contextmanager
    def section(self, name: str):
        if name not in self.seconds:
            raise KeyError(f"unknown profiler routine {name!r}")
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] += time.perf_counter() - start
            self.calls[name] += 1

    def start(self) -> None:
        self._wall_start = time.perf_counter()

    def stop(self) -> None:
        if self._wall_start is not None:
            self.wall_seconds += time.perf_counter() - self._wall_start
            self._wall_start = None

    @property
    def attributed_seconds(self) -> float:
        return sum(self.seconds.values())


@dataclass
class ProfileReport:
    """Per-routine times averaged over workers, with the derived per-cycle/per-cell figures."""
    routine_seconds: Dict[str, float]
    total_seconds: float
    cycles: int
    n_cells: int
    workers: int
    extras: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_profilers(cls, profilers: List[Profiler], cycles: int, n_cells: int,
                       extras: Optional[Dict[str, float]] = None) -> 'ProfileReport':
        count = max(len(profilers), 1)
        routine = {name: sum(p.seconds[name] for p in profilers) / count for name in ROUTINES}
        total = sum(p.wall_seconds for p in profilers) / count
        # a worker's sections never overlap, so its wall time bounds their sum
        total = max(total, sum(routine.values()))
        return cls(routine, total, cycles, n_cells, len(profilers), dict(extras or {}))

    @property
    def unattributed_seconds(self) -> float:
        return max(self.total_seconds - sum(self.routine_seconds.values()), 0.0)

    def percentages(self) -> Dict[str, float]:
        """Share of total time per routine, Unattributed included; sums to 100."""
        total = self.total_seconds
        rows = dict(self.routine_seconds)
        rows[UNATTRIBUTED] = self.unattributed_seconds
        if total <= 0:
            return {name: 0.0 for name in rows}
        return {name: 100.0 * seconds / total for name, seconds in rows.items()}

    @property
    def t_cycle(self) -> float:
        return self.total_seconds / self.cycles if self.cycles else 0.0

    @property
    def t_cell(self) -> float:
        return self.t_cycle / self.n_cells if self.n_cells else 0.0

    @property
    def t_cell_worker(self) -> float:
        return self.t_cell * self.workers

    def dominant_routine(self) -> str:
        return max(self.routine_seconds, key=self.routine_seconds.get)

    def to_table(self) -> str:
        pct = self.percentages()
        lines = [f"{'Routine':<16} {'Seconds':>12} {'Percent':>8}"]
        for name in ROUTINES + (UNATTRIBUTED,):
            seconds = self.routine_seconds.get(name, self.unattributed_seconds)
            lines.append(f"{name:<16} {seconds:>12.4f} {pct[name]:>7.1f}%")
        lines.append(f"{'Total':<16} {self.total_seconds:>12.4f} {100.0:>7.1f}%")
        lines.append(f"cycles={self.cycles} workers={self.workers} cells={self.n_cells} "
                     f"T_cycle={self.t_cycle:.6g}s T_cell={self.t_cell:.6g}s "
                     f"T_cell*workers={self.t_cell_worker:.6g}s")
        return '\n'.join(lines)

    def to_key_values(self) -> str:
        pct = self.percentages()
        lines = [f"cycles={self.cycles}", f"workers={self.workers}", f"cells={self.n_cells}",
                 f"total_seconds={self.total_seconds!r}"]
        for name in ROUTINES:
            lines.append(f"{name}.seconds={self.routine_seconds[name]!r}")
            lines.append(f"{name}.percent={pct[name]!r}")
        lines.append(f"{UNATTRIBUTED}.seconds={self.unattributed_seconds!r}")
        lines.append(f"{UNATTRIBUTED}.percent={pct[UNATTRIBUTED]!r}")
        lines.append(f"t_cycle={self.t_cycle!r}")
        lines.append(f"t_cell={self.t_cell!r}")
        lines.append(f"t_cell_worker={self.t_cell_worker!r}")
        for key, value in sorted(self.extras.items()):
            lines.append(f"{key}={value!r}")
        return '\n'.join(lines) + '\n'


def parse_key_values(text: str) -> Dict[str, str]:
    out = {}
    for line in text.splitlines():
        if '=' in line:
            key, value = line.split('=', 1)
            out[key.strip()] = value.strip()
    return out
