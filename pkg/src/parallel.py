"""Multi-worker execution of the FKS time loop.

Each worker owns one block of the decomposition, its ghost shell and its
own copy of the generic cell.  A step runs as two phases:

    send phase     ToPrimitive, Collision, generic-cell advance, post halo
    receive phase  collect halo, ToConservative, mass shift

Workers only talk through a MessageTransport.  The threads scheduler runs
every worker on its own OS thread; round_robin runs all send phases and
then all receive phases on the calling thread.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from threading import Lock, Thread
from typing import Dict, List, Optional

import numpy as np

from config import RunConfig
from decomposition import Decomposition, Delta, build_decomposition
from errors import InvalidStateError, NumericError, ProtocolError, TransportError, WorkerFailure
from initial_state import build_initial_state
from logger import get_logger
from messaging import ExchangeMessage, InProcessTransport, MessageTransport, SlotPayload
from phase_space import SpatialGrid, VelocityGrid, build_spatial_grid, build_velocity_grid, primitives_of
from profiler import Profiler
from spectral_boltzmann import check_support
from stages import BoltzmannCollision, CollisionStage, make_collision_stage
from transport import (EscapeList, MassBlock, advance_generic_cell, new_generic_cell, plan_time_steps,
                       select_dt, shift_masses, update_conserved)

logger = get_logger(__name__)


class Worker:
    """State and step phases of one block."""

    def __init__(self, rank: int, decomposition: Decomposition, masses: np.ndarray, conserved: np.ndarray,
                 vgrid: VelocityGrid, stage: CollisionStage, transport: MessageTransport,
                 collision_threads: int = 1):
        self.rank = rank
        self.decomposition = decomposition
        self.vgrid = vgrid
        self.stage = stage
        self.transport = transport
        self.block = MassBlock.from_interior(masses)
        self.conserved = conserved
        self.dx = decomposition.sgrid.dx
        self.cell = new_generic_cell(vgrid)
        self.profiler = Profiler()
        self.origin = tuple(s.start for s in decomposition.block_slices(rank))
        self.collision_threads = collision_threads
        self._pool = ThreadPoolExecutor(collision_threads, thread_name_prefix=f'fks-collide-{rank}') \
            if collision_threads > 1 else None
        self._escape: Optional[EscapeList] = None
        self.values_sent = 0
        self.values_received = 0
        self.sent_per_step: List[int] = []

    def neighbor(self, direction: Delta) -> int:
        return self.decomposition.neighbor(self.rank, direction)

    def collide(self, dt: float) -> None:
        prim = None
        if self.stage.needs_primitive:
            with self.profiler.section('ToPrimitive'):
                try:
                    prim = primitives_of(self.conserved)
                except InvalidStateError as e:
                    cell = None if e.cell is None else tuple(o + c for o, c in zip(self.origin, e.cell))
                    raise InvalidStateError(e.reason, cell) from e
        with self.profiler.section('Collision'):
            self.stage.apply_threaded(self.block.cells, prim, dt, self._pool, self.collision_threads)

    def send_phase(self, step: int, dt: float) -> None:
        # collide on the masses left by the previous shift, then move the generic cell
        self.collide(dt)
        with self.profiler.section('Transport'):
            self._escape = advance_generic_cell(self.cell, dt, self.dx)
        with self.profiler.section('Communication'):
            post_halo(self, self._escape, step)

    def receive_phase(self, step: int) -> None:
        escape = self._escape
        if escape is None:
            raise ProtocolError(f"worker {self.rank} entered the receive phase of step {step} before sending")
        with self.profiler.section('Communication'):
            collect_halo(self, escape, step)
        # moments are updated from the pre-shift masses and the fresh ghosts
        with self.profiler.section('ToConservative'):
            update_conserved(self.conserved, self.block, escape, self.vgrid, step)
        with self.profiler.section('Transport'):
            shift_masses(self.block, escape, step)
        self._escape = None

    def run_step(self, step: int, dt: float) -> None:
        self.send_phase(step, dt)
        self.receive_phase(step)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None


def _needed_groups(decomposition: Decomposition, direction: Delta, escape: EscapeList):
    halo = decomposition.halo
    return [(delta, slots) for delta, slots in escape.groups() if halo.needs_slot(direction, delta)]


def build_halo_message(worker: Worker, direction: Delta, escape: EscapeList, step: int) -> ExchangeMessage:
    """Boundary layer facing the neighbor whose ghost region `direction` we fill."""
    region = worker.block.region(tuple(-s for s in direction), 'send')
    message = ExchangeMessage(step)
    for delta, slots in _needed_groups(worker.decomposition, direction, escape):
        values = worker.block.data[(slots,) + region]
        # one C-ordered boundary slab per slot
        for i, slot in enumerate(slots):
            message.slots.append(SlotPayload(int(slot), delta, values[i].ravel()))
    return message


def post_halo(worker: Worker, escape: EscapeList, step: int) -> None:
    """Send one message, possibly without slots, to the owner of every remote ghost region."""
    sent = 0
    # fixed direction order keeps every sender-receiver pair in FIFO step
    for direction in worker.decomposition.halo.directions:
        message = build_halo_message(worker, direction, escape, step)
        worker.transport.send(worker.rank, worker.neighbor(tuple(-s for s in direction)), message.encode())
        sent += message.value_count
    worker.values_sent += sent
    worker.sent_per_step.append(sent)


def _check_message(message: ExchangeMessage, expected, region_size: int, step: int, sender: int, receiver: int):
    if message.step != step:
        raise ProtocolError(f"worker {receiver} expected step {step} from worker {sender}, got step {message.step}")
    expected_slots = [(int(slot), delta) for delta, slots in expected for slot in slots]
    got_slots = [(p.slot, tuple(p.delta)) for p in message.slots]
    if got_slots != expected_slots:
        raise ProtocolError(f"worker {receiver} got an unexpected slot list from worker {sender} at step {step}: "
                            f"{len(got_slots)} slots, expected {len(expected_slots)}")
    for p in message.slots:
        if len(p.values) != region_size:
            raise ProtocolError(f"slot {p.slot} from worker {sender} carries {len(p.values)} values, "
                                f"expected {region_size}")


def collect_halo(worker: Worker, escape: EscapeList, step: int) -> None:
    """Receive every remote ghost region, then wrap unsplit axes locally."""
    decomposition = worker.decomposition
    halo = decomposition.halo
    for direction in halo.directions:
        sender = worker.neighbor(direction)
        message = ExchangeMessage.decode(worker.transport.recv(worker.rank, sender))
        expected = _needed_groups(decomposition, direction, escape)
        _check_message(message, expected, halo.region_size(direction), step, sender, worker.rank)
        region = worker.block.region(direction, 'ghost')
        shape = halo.region_shapes[direction]
        for p in message.slots:
            worker.block.data[(p.slot,) + region] = p.values.reshape(shape)
        worker.values_received += message.value_count
    # unsplit axes never leave the block; their ghosts are local copies
    worker.block.wrap_periodic(halo.unsplit_axes, escape.slots)
    worker.block.mark_ghosts(escape.slots, step)


def halo_exchange(worker: Worker, escape_list: EscapeList, step: int) -> MassBlock:
    """Fill the ghost shell for the escaped slots; peers must post the same step concurrently."""
    post_halo(worker, escape_list, step)
    collect_halo(worker, escape_list, step)
    return worker.block


@dataclass
class HarnessResult:
    config: RunConfig
    decomposition: Decomposition
    sgrid: SpatialGrid
    vgrid: VelocityGrid
    conserved: np.ndarray
    masses: Optional[np.ndarray]
    profilers: List[Profiler]
    steps: List[float]
    values_sent: List[int]
    values_received: List[int]
    sent_per_step: List[List[int]] = field(default_factory=list)
    stage_stats: Dict[str, float] = field(default_factory=dict)

    @property
    def cycles(self) -> int:
        return len(self.steps)

    @property
    def time(self) -> float:
        return float(sum(self.steps))


def _primary_failure(failures: List[WorkerFailure]) -> WorkerFailure:
    """The root-cause failure; workers woken by the abort come last."""
    def secondary(f: WorkerFailure) -> bool:
        return isinstance(f.cause, TransportError) and 'aborted' in str(f.cause)
    return sorted(failures, key=lambda f: (secondary(f), f.rank))[0]


def run_threads(workers: List[Worker], steps: List[float], transport: MessageTransport) -> None:
    failures: List[WorkerFailure] = []
    lock = Lock()

    def body(worker: Worker):
        step = 0
        worker.profiler.start()
        try:
            for step, dt in enumerate(steps):
                worker.run_step(step, dt)
        except Exception as e:
            logger.error(f"Worker {worker.rank} failed at step {step}: {e}")
            with lock:
                failures.append(WorkerFailure(worker.rank, step, e))
            # wake peers blocked on a receive from this worker
            transport.abort()
        finally:
            worker.profiler.stop()

    threads = [Thread(target=body, args=(w,), name=f'fks-worker-{w.rank}', daemon=True) for w in workers]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failures:
        failure = _primary_failure(failures)
        raise failure from failure.cause


def run_round_robin(workers: List[Worker], steps: List[float], transport: MessageTransport) -> None:
    for step, dt in enumerate(steps):
        # every worker posts its halo before any worker blocks on a receive
        for phase in ('send', 'receive'):
            for worker in workers:
                worker.profiler.start()
                try:
                    if phase == 'send':
                        worker.send_phase(step, dt)
                    else:
                        worker.receive_phase(step)
                except Exception as e:
                    logger.error(f"Worker {worker.rank} failed at step {step}: {e}")
                    transport.abort()
                    raise WorkerFailure(worker.rank, step, e) from e
                finally:
                    worker.profiler.stop()


SCHEDULERS = {'threads': run_threads, 'round_robin': run_round_robin}


def run_workers(config: RunConfig, worker_count: Optional[int] = None,
                transport: Optional[MessageTransport] = None, keep_masses: bool = True) -> HarnessResult:
    """Run the configured problem on a decomposition of worker_count blocks and gather the fields."""
    if worker_count is not None and worker_count != config.workers:
        dims = config.dims if config.dims is not None and np.prod(config.dims) == worker_count else None
        config = config.with_workers(worker_count, dims)
    vgrid = build_velocity_grid(config.velocity_n, config.v_min, config.v_max)
    sgrid = build_spatial_grid(config.spatial_n, config.x_min, config.x_max)
    decomposition = build_decomposition(sgrid, config.resolved_dims)

    masses, conserved = build_initial_state(config, sgrid, vgrid)
    stage = make_collision_stage(config, vgrid)
    if isinstance(stage, BoltzmannCollision):
        check_support(masses, vgrid, stage.spectral_config)
    steps = plan_time_steps(select_dt(vgrid, sgrid, config.cfl), config.t_final, config.n_cycles)
    transport = transport if transport is not None else InProcessTransport()

    workers = [Worker(rank, decomposition, decomposition.scatter(masses, rank), decomposition.scatter(conserved, rank),
                      vgrid, stage, transport, config.collision_threads)
               for rank in range(decomposition.worker_count)]
    del masses, conserved
    logger.info(f"Running {len(steps)} steps of {config.collision} on {decomposition.worker_count} worker(s), "
                f"scheduler {config.scheduler}")

    try:
        SCHEDULERS[config.scheduler](workers, steps, transport)
    finally:
        for worker in workers:
            worker.close()

    conserved = decomposition.gather([w.conserved for w in workers])
    if not np.all(np.isfinite(conserved)):
        bad = tuple(int(c) for c in np.argwhere(~np.isfinite(conserved))[0][:3])
        raise NumericError(f"non-finite conserved values after {len(steps)} steps at cell {bad}")
    gathered = decomposition.gather([w.block.cells for w in workers]) if keep_masses else None
    return HarnessResult(config, decomposition, sgrid, vgrid, conserved, gathered,
                         [w.profiler for w in workers], steps,
                         [w.values_sent for w in workers], [w.values_received for w in workers],
                         [w.sent_per_step for w in workers], dict(stage.stats))
