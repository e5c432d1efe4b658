import struct
import threading

import numpy as np
import pytest

from errors import ProtocolError, TransportError
from messaging import DelayedTransport, ExchangeMessage, InProcessTransport, SlotPayload


def test_wire_format_is_bit_exact():
    message = ExchangeMessage(7, [SlotPayload(3, (1, -1, 0), np.array([1.5, -2.0]))])
    expected = (struct.pack('<QI', 7, 1) + struct.pack('<I3bI', 3, 1, -1, 0, 2)
                + struct.pack('<2d', 1.5, -2.0))
    assert message.encode() == expected
    assert len(expected) == 12 + 11 + 16


def test_empty_message_is_header_only():
    data = ExchangeMessage(2 ** 40).encode()
    assert data == struct.pack('<QI', 2 ** 40, 0)
    decoded = ExchangeMessage.decode(data)
    assert decoded.step == 2 ** 40
    assert decoded.slots == []


def test_decode_restores_slots():
    values = np.arange(6, dtype=float)
    message = ExchangeMessage(1, [SlotPayload(9, (0, 0, -1), values), SlotPayload(2, (1, 1, 1), values[:1])])
    decoded = ExchangeMessage.decode(message.encode())
    assert [(p.slot, p.delta) for p in decoded.slots] == [(9, (0, 0, -1)), (2, (1, 1, 1))]
    np.testing.assert_array_equal(decoded.slots[0].values, values)
    assert decoded.value_count == 7


@pytest.mark.parametrize("cut", [5, 12 + 4, 12 + 11 + 8])
def test_truncated_message(cut):
    data = ExchangeMessage(1, [SlotPayload(0, (1, 0, 0), np.ones(2))]).encode()
    with pytest.raises(ProtocolError):
        ExchangeMessage.decode(data[:cut])


def test_trailing_bytes():
    data = ExchangeMessage(1).encode() + b'\x00'
    with pytest.raises(ProtocolError, match='trailing'):
        ExchangeMessage.decode(data)


def test_pairs_are_fifo_and_independent():
    transport = InProcessTransport(timeout=1.0)
    transport.send(0, 1, b'a')
    transport.send(2, 1, b'x')
    transport.send(0, 1, b'b')
    assert transport.pending() == 3
    assert transport.recv(1, 2) == b'x'
    assert transport.recv(1, 0) == b'a'
    assert transport.recv(1, 0) == b'b'
    assert transport.messages_sent[(0, 1)] == 2
    assert transport.bytes_sent[(0, 1)] == 2


def test_disconnect_names_both_workers():
    transport = InProcessTransport(timeout=1.0)
    transport.disconnect(3)
    with pytest.raises(TransportError) as info:
        transport.send(1, 3, b'')
    assert (info.value.sender, info.value.receiver) == (1, 3)
    with pytest.raises(TransportError):
        transport.recv(1, 3)


def test_receive_timeout():
    transport = InProcessTransport()
    with pytest.raises(TransportError, match='no message'):
        transport.recv(0, 1, timeout=0.1)


def test_abort_wakes_blocked_receivers():
    transport = InProcessTransport(timeout=30.0)
    errors = []

    def wait():
        try:
            transport.recv(0, 1)
        except TransportError as e:
            errors.append(e)

    thread = threading.Thread(target=wait)
    thread.start()
    transport.abort()
    thread.join(timeout=5.0)
    assert not thread.is_alive()
    assert 'aborted' in str(errors[0])


def test_delayed_transport_keeps_order():
    transport = DelayedTransport(max_delay=0.001, seed=3)
    for i in range(20):
        transport.send(0, 1, bytes([i]))
    assert [transport.recv(1, 0)[0] for _ in range(20)] == list(range(20))
