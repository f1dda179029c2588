"""Blocking register clients: over TCP, or bound in-process to a register file."""

from __future__ import annotations

import socket

from .codec import (
    BOOL, DEFAULT_PORT, INT32, POSE, EncodeError, Frame, Opcode, ProtocolError, Response,
    Status, decode_response, encode_frame, unpack_state,
)
from .registers import N_JOINTS, JointState, RegisterFile
from .server import StateProvider, dispatch


class TransportError(ConnectionError):
    pass


class StatusError(Exception):
    status = Status.OK

    def __init__(self, opcode: int, index: int):
        self.opcode = opcode
        self.index = index
        name = Opcode(opcode).name if opcode in Opcode._value2member_map_ else hex(opcode)
        super().__init__(f"{name} index {index}: {self.status.name}")


class BadIndexError(StatusError):
    status = Status.BAD_INDEX


class BadOpcodeError(StatusError):
    status = Status.BAD_OPCODE


class MalformedError(StatusError):
    status = Status.MALFORMED


_STATUS_ERRORS = {cls.status: cls for cls in (BadIndexError, BadOpcodeError, MalformedError)}


class _RegisterAccess:
    """Typed register operations on top of a request/response primitive."""

    def _call(self, frame: Frame) -> Response:
        raise NotImplementedError

    def _request(self, opcode: Opcode, index: int = 0, payload: bytes = b"") -> bytes:
        frame = Frame(opcode, index, payload)
        response = self._call(frame)
        if response.opcode != opcode:
            raise TransportError(f"response to {opcode.name} echoed opcode {response.opcode}")
        if response.status != Status.OK:
            raise _STATUS_ERRORS[Status(response.status)](opcode, index)
        return response.payload

    def read_r(self, index: int) -> int:
        return INT32.unpack(self._request(Opcode.READ_R, index))[0]

    def write_r(self, index: int, value: int) -> None:
        self._request(Opcode.WRITE_R, index, INT32.pack(value))

    def read_pr(self, index: int) -> tuple:
        return POSE.unpack(self._request(Opcode.READ_PR, index))

    def write_pr(self, index: int, pose) -> None:
        pose = tuple(pose)
        if len(pose) != N_JOINTS:
            raise ValueError(f"joint pose needs {N_JOINTS} values, got {len(pose)}")
        self._request(Opcode.WRITE_PR, index, POSE.pack(*pose))

    def read_di(self, index: int) -> bool:
        return bool(BOOL.unpack(self._request(Opcode.READ_DI, index))[0])

    def write_di(self, index: int, value: bool) -> None:
        self._request(Opcode.WRITE_DI, index, BOOL.pack(1 if value else 0))

    def read_state(self) -> JointState:
        t, q, qd = unpack_state(self._request(Opcode.READ_STATE))
        return JointState(t, q, qd)


class RegisterClient(_RegisterAccess):
    """One TCP session to a register server.

    Calls block until the response arrives or ``timeout`` seconds pass, in
    which case :class:`TransportError` is raised and the session is closed.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
                 timeout: float = 1.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._buf = bytearray()

    def _call(self, frame: Frame) -> Response:
        if self._sock is None:
            raise TransportError("session closed")
        try:
            self._sock.sendall(encode_frame(frame))
            while True:
                decoded = decode_response(bytes(self._buf))
                if decoded is not None:
                    response, used = decoded
                    del self._buf[:used]
                    return response
                chunk = self._sock.recv(4096)
                if not chunk:
                    raise TransportError("connection closed by server")
                self._buf += chunk
        except (OSError, ProtocolError) as exc:
            self.close()
            if isinstance(exc, TransportError):
                raise
            raise TransportError(str(exc) or type(exc).__name__) from exc

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class LocalLink(_RegisterAccess):
    """Same surface as :class:`RegisterClient`, dispatched without a socket.

    Requests still go through frame validation and the server's dispatch,
    so error behavior matches the wire exactly.
    """

    def __init__(self, registers: RegisterFile, state_source: StateProvider):
        self.registers = registers
        self.state_source = state_source

    def _call(self, frame: Frame) -> Response:
        try:
            encode_frame(frame)
        except EncodeError as exc:
            raise TransportError(str(exc)) from exc
        return dispatch(frame, self.registers, self.state_source)

    def close(self) -> None:
        pass
