"""Register data model and the framed TCP protocol that carries it."""

from .client import (
    BadIndexError, BadOpcodeError, LocalLink, MalformedError, RegisterClient, StatusError,
    TransportError,
)
from .codec import (
    DEFAULT_PORT, MAGIC, VERSION, EncodeError, Frame, Opcode, ProtocolError, Response, Status,
    decode_frame, decode_response, encode_frame, encode_response,
)
from .registers import (
    N_JOINTS, ZERO_POSE, JointPose, JointState, RegisterFile, RegisterIndexError, make_pose,
)
from .server import RegisterServer, StateProvider, dispatch, serve

__all__ = [
    "BadIndexError", "BadOpcodeError", "DEFAULT_PORT", "EncodeError", "Frame", "JointPose",
    "JointState", "LocalLink", "MAGIC", "MalformedError", "N_JOINTS", "Opcode", "ProtocolError",
    "RegisterClient", "RegisterFile", "RegisterIndexError", "RegisterServer", "Response",
    "StateProvider", "Status", "StatusError", "TransportError", "VERSION", "ZERO_POSE",
    "decode_frame", "decode_response", "dispatch", "encode_frame", "encode_response",
    "make_pose", "serve",
]
