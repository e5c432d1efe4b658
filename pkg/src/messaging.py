"""Halo-exchange messages and the worker-to-worker transport seam.

Wire format (little-endian):

    header   u64 step, u32 slot count
    per slot u32 velocity index, 3 x i8 delta, u32 payload length,
             payload length x f64

Transports deliver bytes between worker pairs reliably, in order and
exactly once.  InProcessTransport does that with one queue per ordered
pair; a network transport only has to honour the same contract.
"""
import queue
import random
import struct
import threading
import time
from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import ProtocolError, TransportError
from logger import get_logger

logger = get_logger(__name__)

HEADER = struct.Struct('<QI')
SLOT_HEADER = struct.Struct('<I3bI')
VALUE_DTYPE = np.dtype('<f8')

DEFAULT_TIMEOUT = 60.0
POLL_INTERVAL = 0.05


@dataclass
class SlotPayload:
    slot: int
    delta: Tuple[int, int, int]
    values: np.ndarray


@dataclass
class ExchangeMessage:
    """Boundary masses of the escaped velocity slots for one neighbor and one step."""
    step: int
    slots: List[SlotPayload] = field(default_factory=list)

    @property
    def value_count(self) -> int:
        return sum(len(p.values) for p in self.slots)

    def encode(self) -> bytes:
        parts = [HEADER.pack(self.step, len(self.slots))]
        for p in self.slots:
            values = np.ascontiguousarray(p.values, dtype=VALUE_DTYPE).ravel()
            parts.append(SLOT_HEADER.pack(p.slot, *p.delta, len(values)))
            parts.append(values.tobytes())
        return b''.join(parts)

    @classmethod
    def decode(cls, data: bytes) -> 'ExchangeMessage':
        if len(data) < HEADER.size:
            raise ProtocolError(f"message of {len(data)} bytes is shorter than its header")
        step, count = HEADER.unpack_from(data, 0)
        # walk the slot records, checking each declared length against the buffer
        offset = HEADER.size
        slots = []
        for _ in range(count):
            if offset + SLOT_HEADER.size > len(data):
                raise ProtocolError(f"message truncated inside slot header at byte {offset}")
            slot, dx, dy, dz, length = SLOT_HEADER.unpack_from(data, offset)
            offset += SLOT_HEADER.size
            end = offset + length * VALUE_DTYPE.itemsize
            if end > len(data):
                raise ProtocolError(f"slot {slot} declares {length} values but the message ends at byte {len(data)}")
            # read-only view into the payload
            values = np.frombuffer(data, dtype=VALUE_DTYPE, count=length, offset=offset)
            slots.append(SlotPayload(slot, (dx, dy, dz), values))
            offset = end
        if offset != len(data):
            raise ProtocolError(f"{len(data) - offset} trailing bytes after {count} slots")
        return cls(step, slots)


class MessageTransport(ABC):
    """Pairwise ordered, reliable byte streams between workers."""

    def __init__(self):
        self.abort_event = threading.Event()
        self._lock = threading.Lock()
        self.bytes_sent: Dict[Tuple[int, int], int] = defaultdict(int)
        self.messages_sent: Dict[Tuple[int, int], int] = defaultdict(int)

    @abstractmethod
    def send(self, sender: int, receiver: int, payload: bytes) -> None:
        ...

    @abstractmethod
    def recv(self, receiver: int, sender: int, timeout: Optional[float] = None) -> bytes:
        ...

    def abort(self) -> None:
        """Wake every blocked receiver; subsequent receives fail."""
        self.abort_event.set()

    def _count(self, sender: int, receiver: int, payload: bytes) -> None:
        with self._lock:
            self.bytes_sent[(sender, receiver)] += len(payload)
            self.messages_sent[(sender, receiver)] += 1


class InProcessTransport(MessageTransport):
    """One FIFO queue per ordered worker pair."""

    def __init__(self, timeout: float = DEFAULT_TIMEOUT):
        super().__init__()
        self.timeout = timeout
        self._queues: Dict[Tuple[int, int], queue.Queue] = {}
        self._disconnected = set()

    def _queue(self, sender: int, receiver: int) -> queue.Queue:
        with self._lock:
            q = self._queues.get((sender, receiver))
            if q is None:
                q = self._queues[(sender, receiver)] = queue.Queue()
            return q

    def disconnect(self, rank: int) -> None:
        """Simulate a lost worker: traffic to or from it fails."""
        with self._lock:
            self._disconnected.add(rank)

    def _check_link(self, sender: int, receiver: int) -> None:
        if sender in self._disconnected or receiver in self._disconnected:
            raise TransportError("neighbor disconnected", sender, receiver)

    def send(self, sender: int, receiver: int, payload: bytes) -> None:
        self._check_link(sender, receiver)
        self._queue(sender, receiver).put(payload)
        self._count(sender, receiver, payload)

    def recv(self, receiver: int, sender: int, timeout: Optional[float] = None) -> bytes:
        timeout = self.timeout if timeout is None else timeout
        q = self._queue(sender, receiver)
        deadline = time.monotonic() + timeout
        while True:
            # short polls so an abort or disconnect is noticed promptly
            self._check_link(sender, receiver)
            if self.abort_event.is_set():
                raise TransportError("exchange aborted", sender, receiver)
            try:
                return q.get(timeout=POLL_INTERVAL)
            except queue.Empty:
                if time.monotonic() >= deadline:
                    raise TransportError(f"no message within {timeout:.1f}s", sender, receiver) from None

    def pending(self) -> int:
        """Messages sent but not yet received, over all pairs."""
        with self._lock:
            return sum(q.qsize() for q in self._queues.values())


class DelayedTransport(InProcessTransport):
    """InProcessTransport with seeded random delays before every send and receive."""

    def __init__(self, max_delay: float = 0.002, seed: int = 0, timeout: float = DEFAULT_TIMEOUT):
        super().__init__(timeout=timeout)
        self.max_delay = max_delay
        self._rng = random.Random(seed)
        self._rng_lock = threading.Lock()

    def _pause(self) -> None:
        with self._rng_lock:
            delay = self._rng.uniform(0.0, self.max_delay)
        time.sleep(delay)

    def send(self, sender: int, receiver: int, payload: bytes) -> None:
        self._pause()
        super().send(sender, receiver, payload)

    def recv(self, receiver: int, sender: int, timeout: Optional[float] = None) -> bytes:
        self._pause()
        return super().recv(receiver, sender, timeout)
