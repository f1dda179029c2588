import math
import socket
import struct
import threading

import pytest

from crxstream.emulator import CrxEmulator, EmulatorConfig
from crxstream.regproto import (
    BadIndexError, BadOpcodeError, Frame, LocalLink, MalformedError, Opcode, RegisterClient,
    RegisterFile, Status, TransportError, decode_response, encode_frame, serve,
)


def connect(server, timeout=1.0):
    return RegisterClient(*server.address, timeout=timeout)


def test_write_then_read(served):
    server, _ = served
    with connect(server) as client:
        client.write_r(1, 1)
        assert client.read_r(1) == 1
        pose = (1.5, -2.25, 3.0, 0.0, 45.0, -90.0)
        client.write_pr(1, pose)
        assert client.read_pr(1) == pose
        client.write_di(7, True)
        assert client.read_di(7) is True


def test_fresh_registers_read_zero(served):
    server, _ = served
    with connect(server) as client:
        assert client.read_r(5) == 0
        assert client.read_di(1) is False


def test_read_state_payload(served):
    server, emulator = served
    emulator.step(25)
    with socket.create_connection(server.address) as sock:
        sock.sendall(encode_frame(Frame(Opcode.READ_STATE, 0)))
        data = b""
        while len(data) < 7 + 104:
            data += sock.recv(4096)
    response, used = decode_response(data)
    assert response.status == Status.OK
    assert len(response.payload) == 104
    values = struct.unpack("<13d", response.payload)
    assert values[0] == pytest.approx(0.1)
    with connect(server) as client:
        state = client.read_state()
    assert state.t == emulator.feedback().t
    assert state.q == emulator.feedback().q


def test_bad_index_keeps_session(served):
    server, _ = served
    with connect(server) as client:
        with pytest.raises(BadIndexError):
            client.write_r(0, 1)
        with pytest.raises(BadIndexError):
            client.read_pr(101)
        client.write_r(3, 9)
        assert client.read_r(3) == 9


def test_nan_pose_rejected(served):
    server, emulator = served
    with connect(server) as client:
        with pytest.raises(MalformedError):
            client.write_pr(1, (math.nan, 0, 0, 0, 0, 0))
        with pytest.raises(MalformedError):
            client.write_pr(1, (0, 0, math.inf, 0, 0, 0))
        assert client.read_pr(1) == emulator.config.home_pose


def test_bad_di_value(served):
    server, _ = served
    with socket.create_connection(server.address) as sock:
        sock.sendall(encode_frame(Frame(Opcode.WRITE_DI, 1, b"\x02")))
        response, _ = decode_response(sock.recv(64))
    assert response.status == Status.MALFORMED


def test_unknown_opcode_answers_and_continues(served):
    server, _ = served
    raw = struct.pack("<HBBHH", 0xFA2C, 1, 0x42, 1, 0)
    with socket.create_connection(server.address) as sock:
        sock.sendall(raw + encode_frame(Frame(Opcode.READ_R, 1)))
        data = b""
        while len(data) < 7 + 11:
            data += sock.recv(64)
    first, used = decode_response(data)
    second, _ = decode_response(data[used:])
    assert first.opcode == 0x42 and first.status == Status.BAD_OPCODE
    assert second.opcode == Opcode.READ_R and second.status == Status.OK


def test_bad_magic_closes_session(served):
    server, _ = served
    with socket.create_connection(server.address, timeout=1.0) as sock:
        sock.sendall(b"\x00\x00\x01\x01\x01\x00\x00\x00")
        response, _ = decode_response(sock.recv(64))
        assert response.status == Status.MALFORMED
        assert sock.recv(64) == b""


def test_pipelined_requests_answered_in_order(served):
    server, _ = served
    requests = []
    for i in range(1, 51):
        requests.append(Frame(Opcode.WRITE_R, i, struct.pack("<i", i * 3)))
        requests.append(Frame(Opcode.READ_R, i))
    with socket.create_connection(server.address) as sock:
        sock.sendall(b"".join(encode_frame(f) for f in requests))
        buf = b""
        responses = []
        while len(responses) < len(requests):
            buf += sock.recv(4096)
            while True:
                decoded = decode_response(buf)
                if decoded is None:
                    break
                responses.append(decoded[0])
                buf = buf[decoded[1]:]
    assert [r.opcode for r in responses] == [f.opcode for f in requests]
    reads = [struct.unpack("<i", r.payload)[0] for r in responses[1::2]]
    assert reads == [i * 3 for i in range(1, 51)]


def test_concurrent_sessions(served):
    server, _ = served
    errors = []

    def worker(base):
        try:
            with connect(server) as client:
                for i in range(200):
                    pose = (base, i, 0, 0, 0, -base)
                    client.write_pr(base, pose)
                    assert client.read_pr(base) == pose
        except Exception as exc:  # pragma: no cover - surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(b,)) for b in (2, 3, 4, 5)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []


def test_pr_writes_are_not_torn(served):
    server, _ = served
    a, b = (1.0,) * 6, (2.0,) * 6
    stop = threading.Event()

    def writer():
        with connect(server) as client:
            while not stop.is_set():
                client.write_pr(9, a)
                client.write_pr(9, b)

    thread = threading.Thread(target=writer)
    thread.start()
    try:
        with connect(server) as client:
            seen = {client.read_pr(9) for _ in range(300)}
    finally:
        stop.set()
        thread.join()
    assert seen <= {a, b, (0.0,) * 6}


def test_idempotent_reads(served):
    server, _ = served
    with connect(server) as client:
        client.write_pr(2, (1, 2, 3, 4, 5, 6))
        assert client.read_pr(2) == client.read_pr(2)
        assert client.read_state() == client.read_state()


def test_home_pose_in_pr1_after_start():
    home = (10.0, -20.0, 30.0, 0.0, 15.0, 5.0)
    emulator = CrxEmulator(EmulatorConfig(home_pose=home)).run("virtual")
    with serve(emulator.registers, emulator.feedback, ("127.0.0.1", 0)) as server:
        with connect(server) as client:
            assert client.read_pr(1) == home
            assert client.read_state().q == home
            assert client.read_r(1) == 0


def test_connection_refused():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    with pytest.raises(TransportError):
        RegisterClient("127.0.0.1", port, timeout=0.5)


def test_timeout_is_transport_error():
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen()
    try:
        client = RegisterClient(*listener.getsockname(), timeout=0.2)
        with pytest.raises(TransportError):
            client.read_r(1)
        with pytest.raises(TransportError):
            client.read_r(1)
    finally:
        listener.close()


def test_local_link_matches_wire_errors():
    regs = RegisterFile()
    link = LocalLink(regs, lambda: None)
    link.write_r(4, 12)
    assert link.read_r(4) == 12
    with pytest.raises(BadIndexError):
        link.read_di(0)
    with pytest.raises(MalformedError):
        link.write_pr(1, (math.nan,) * 6)


def test_bad_opcode_error_type():
    link = LocalLink(RegisterFile(), lambda: None)
    assert issubclass(BadOpcodeError, Exception)
    with pytest.raises(TransportError):
        link._request(0x42)
