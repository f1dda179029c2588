"""Bit-exact framing for the register-exchange protocol.

Request::

    magic u16 | version u8 | opcode u8 | index u16 | payload_len u16 | payload

Response::

    magic u16 | version u8 | opcode|0x80 u8 | status u8 | payload_len u16 | payload

All multi-byte fields are little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

MAGIC = 0xFA2C
VERSION = 0x01
RESPONSE_BIT = 0x80

REQUEST_HEADER = struct.Struct("<HBBHH")
RESPONSE_HEADER = struct.Struct("<HBBBH")

INT32 = struct.Struct("<i")
POSE = struct.Struct("<6d")
STATE = struct.Struct("<13d")
BOOL = struct.Struct("<B")

DEFAULT_PORT = 44818


class Opcode(IntEnum):
    READ_R = 0x01
    WRITE_R = 0x02
    READ_PR = 0x03
    WRITE_PR = 0x04
    READ_DI = 0x05
    WRITE_DI = 0x06
    READ_STATE = 0x07


class Status(IntEnum):
    OK = 0
    BAD_INDEX = 1
    BAD_OPCODE = 2
    MALFORMED = 3


REQUEST_PAYLOAD = {
    Opcode.READ_R: 0,
    Opcode.WRITE_R: INT32.size,
    Opcode.READ_PR: 0,
    Opcode.WRITE_PR: POSE.size,
    Opcode.READ_DI: 0,
    Opcode.WRITE_DI: BOOL.size,
    Opcode.READ_STATE: 0,
}

# payload sizes of OK responses; error responses carry no payload
RESPONSE_PAYLOAD = {
    Opcode.READ_R: INT32.size,
    Opcode.WRITE_R: 0,
    Opcode.READ_PR: POSE.size,
    Opcode.WRITE_PR: 0,
    Opcode.READ_DI: BOOL.size,
    Opcode.WRITE_DI: 0,
    Opcode.READ_STATE: STATE.size,
}


class EncodeError(ValueError):
    pass


class ProtocolError(Exception):
    """A decoded byte stream violates the frame layout.

    ``consumed`` is the number of bytes making up the offending frame when
    the stream is still in sync (so a server can skip it and carry on), or
    ``None`` when framing is lost.
    """

    def __init__(self, status: Status, message: str, consumed: int | None = None):
        self.status = Status(status)
        self.consumed = consumed
        super().__init__(message)


@dataclass(frozen=True)
class Frame:
    opcode: int
    index: int
    payload: bytes = b""

    @property
    def payload_len(self) -> int:
        return len(self.payload)


@dataclass(frozen=True)
class Response:
    opcode: int
    status: int
    payload: bytes = b""


def encode_frame(frame: Frame) -> bytes:
    try:
        opcode = Opcode(frame.opcode)
    except ValueError:
        raise EncodeError(f"unknown opcode 0x{frame.opcode:02x}") from None
    if not 0 <= frame.index <= 0xFFFF:
        raise EncodeError(f"index {frame.index} does not fit in u16")
    expected = REQUEST_PAYLOAD[opcode]
    if len(frame.payload) != expected:
        raise EncodeError(
            f"{opcode.name} payload must be {expected} bytes, got {len(frame.payload)}"
        )
    header = REQUEST_HEADER.pack(MAGIC, VERSION, opcode, frame.index, len(frame.payload))
    return header + bytes(frame.payload)


def _check_preamble(buf: bytes) -> None:
    if len(buf) >= 2 and int.from_bytes(buf[:2], "little") != MAGIC:
        raise ProtocolError(Status.MALFORMED, f"bad magic {bytes(buf[:2]).hex()}")
    if len(buf) >= 3 and buf[2] != VERSION:
        raise ProtocolError(Status.MALFORMED, f"unsupported version {buf[2]}")


def decode_frame(buf: bytes) -> tuple[Frame, int] | None:
    """Decode one request frame from the front of ``buf``.

    Returns ``(frame, consumed)``, or ``None`` if more bytes are needed.
    """
    _check_preamble(buf)
    if len(buf) < REQUEST_HEADER.size:
        return None
    _, _, opcode, index, plen = REQUEST_HEADER.unpack_from(buf)
    total = REQUEST_HEADER.size + plen
    if len(buf) < total:
        return None
    payload = bytes(buf[REQUEST_HEADER.size:total])
    try:
        op = Opcode(opcode)
    except ValueError:
        raise ProtocolError(Status.BAD_OPCODE, f"unknown opcode 0x{opcode:02x}", total) from None
    if plen != REQUEST_PAYLOAD[op]:
        raise ProtocolError(
            Status.MALFORMED, f"{op.name} payload must be {REQUEST_PAYLOAD[op]} bytes", total
        )
    return Frame(op, index, payload), total


def encode_response(response: Response) -> bytes:
    if not 0 <= response.opcode <= 0x7F:
        raise EncodeError(f"opcode 0x{response.opcode:02x} does not fit in 7 bits")
    status = Status(response.status)
    if status is Status.OK and response.opcode in RESPONSE_PAYLOAD:
        expected = RESPONSE_PAYLOAD[Opcode(response.opcode)]
        if len(response.payload) != expected:
            raise EncodeError(f"response payload must be {expected} bytes")
    header = RESPONSE_HEADER.pack(
        MAGIC, VERSION, response.opcode | RESPONSE_BIT, status, len(response.payload)
    )
    return header + bytes(response.payload)


def decode_response(buf: bytes) -> tuple[Response, int] | None:
    _check_preamble(buf)
    if len(buf) < RESPONSE_HEADER.size:
        return None
    _, _, opcode, status, plen = RESPONSE_HEADER.unpack_from(buf)
    total = RESPONSE_HEADER.size + plen
    if len(buf) < total:
        return None
    if not opcode & RESPONSE_BIT:
        raise ProtocolError(Status.MALFORMED, "response opcode lacks the 0x80 bit", total)
    try:
        status = Status(status)
    except ValueError:
        raise ProtocolError(Status.MALFORMED, f"unknown status {status}", total) from None
    return Response(opcode & ~RESPONSE_BIT, status, bytes(buf[RESPONSE_HEADER.size:total])), total


def pack_state(t: float, q, qd) -> bytes:
    return STATE.pack(t, *q, *qd)


def unpack_state(payload: bytes):
    values = STATE.unpack(payload)
    return values[0], tuple(values[1:7]), tuple(values[7:13])
