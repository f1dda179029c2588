"""TCP server exposing a :class:`RegisterFile` and a state provider."""

from __future__ import annotations

import logging
import math
import socketserver
import threading
from typing import Callable

from .codec import (
    BOOL, DEFAULT_PORT, INT32, POSE, Frame, Opcode, ProtocolError, Response, Status,
    decode_frame, encode_response, pack_state,
)
from .registers import JointState, RegisterFile, RegisterIndexError

log = logging.getLogger(__name__)

StateProvider = Callable[[], JointState]


def dispatch(frame: Frame, registers: RegisterFile, state_source: StateProvider) -> Response:
    """Apply one decoded request and build its response."""
    op = Opcode(frame.opcode)
    try:
        if op is Opcode.READ_R:
            return Response(op, Status.OK, INT32.pack(registers.get_r(frame.index)))
        if op is Opcode.WRITE_R:
            (value,) = INT32.unpack(frame.payload)
            registers.set_r(frame.index, value)
        elif op is Opcode.READ_PR:
            return Response(op, Status.OK, POSE.pack(*registers.get_pr(frame.index)))
        elif op is Opcode.WRITE_PR:
            pose = POSE.unpack(frame.payload)
            if not all(math.isfinite(v) for v in pose):
                return Response(op, Status.MALFORMED)
            registers.set_pr(frame.index, pose)
        elif op is Opcode.READ_DI:
            return Response(op, Status.OK, BOOL.pack(registers.get_di(frame.index)))
        elif op is Opcode.WRITE_DI:
            (value,) = BOOL.unpack(frame.payload)
            if value not in (0, 1):
                return Response(op, Status.MALFORMED)
            registers.set_di(frame.index, value)
        elif op is Opcode.READ_STATE:
            state = state_source()
            return Response(op, Status.OK, pack_state(state.t, state.q, state.qd))
    except RegisterIndexError:
        return Response(op, Status.BAD_INDEX)
    return Response(op, Status.OK)


class _SessionHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: RegisterServer = self.server  # type: ignore[assignment]
        sock = self.request
        buf = bytearray()
        while True:
            try:
                chunk = sock.recv(4096)
            except OSError:
                return
            if not chunk:
                return
            buf += chunk
            while buf:
                try:
                    decoded = decode_frame(bytes(buf))
                except ProtocolError as exc:
                    opcode = buf[3] & 0x7F if len(buf) > 3 else 0
                    log.debug("session %s: %s", self.client_address, exc)
                    sock.sendall(encode_response(Response(opcode, exc.status)))
                    if exc.consumed is None:
                        return
                    del buf[:exc.consumed]
                    continue
                if decoded is None:
                    break
                frame, used = decoded
                del buf[:used]
                response = dispatch(frame, server.registers, server.state_source)
                sock.sendall(encode_response(response))


class RegisterServer(socketserver.ThreadingTCPServer):
    """Threaded server; one thread per session, requests answered in order."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, registers: RegisterFile, state_source: StateProvider,
                 endpoint: tuple[str, int] = ("127.0.0.1", DEFAULT_PORT)):
        self.registers = registers
        self.state_source = state_source
        super().__init__(endpoint, _SessionHandler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> "RegisterServer":
        self._thread = threading.Thread(target=self.serve_forever, name="regproto-server",
                                        daemon=True)
        self._thread.start()
        return self

    def close(self) -> None:
        if self._thread is not None:
            self.shutdown()
            self._thread.join()
            self._thread = None
        self.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(registers: RegisterFile, state_source: StateProvider,
          endpoint: tuple[str, int] = ("127.0.0.1", DEFAULT_PORT)) -> RegisterServer:
    """Bind ``endpoint`` and serve in a background thread."""
    return RegisterServer(registers, state_source, endpoint).start()
