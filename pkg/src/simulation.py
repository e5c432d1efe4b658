"""Top-level run driver: the worker harness plus profiling and diagnostics."""
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import RunConfig
from errors import StabilityWarning
from logger import get_logger
from messaging import MessageTransport
from parallel import HarnessResult, run_workers
from profiler import ProfileReport

logger = get_logger(__name__)


@dataclass
class SimulationResult:
    harness: HarnessResult
    report: ProfileReport
    elapsed_seconds: float

    @property
    def conserved(self) -> np.ndarray:
        return self.harness.conserved

    @property
    def masses(self) -> Optional[np.ndarray]:
        return self.harness.masses

    @property
    def config(self) -> RunConfig:
        return self.harness.config

    @property
    def cycles(self) -> int:
        return self.harness.cycles

    @property
    def time(self) -> float:
        return self.harness.time


def run_simulation(config: RunConfig, transport: Optional[MessageTransport] = None,
                   keep_masses: bool = True) -> SimulationResult:
    """Run config to completion and build the profile report."""
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always', StabilityWarning)
        harness = run_workers(config, transport=transport, keep_masses=keep_masses)
    elapsed = time.perf_counter() - start

    seen = set()
    for w in caught:
        if issubclass(w.category, StabilityWarning):
            if str(w.message) not in seen:
                seen.add(str(w.message))
                logger.warning(str(w.message))
        else:
            warnings.warn(w.message, w.category, stacklevel=2)

    report = ProfileReport.from_profilers(harness.profilers, harness.cycles, harness.sgrid.n_cells,
                                          extras=harness.stage_stats)
    logger.info(f"Finished {harness.cycles} cycles to t={harness.time:.6g} in {elapsed:.3f}s "
                f"({report.dominant_routine()} dominates)")
    return SimulationResult(harness, report, elapsed)
