"""Register-streaming control of an emulated Fanuc CRX controller, with analysis tools."""

from .clock import RealClock, VirtualClock
from .emulator import ConfigError, CrxEmulator, EmulatorConfig, LatencyQueue, TpPhase
from .explog import ExperimentLog, LogRow
from .stream import HandshakeError, PreconditionError, StreamClient
from .trajectory import OverrideSchedule, ScaledClock, Trajectory, sample_trajectory

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "CrxEmulator", "EmulatorConfig", "ExperimentLog", "HandshakeError",
    "LatencyQueue", "LogRow", "OverrideSchedule", "PreconditionError", "RealClock",
    "ScaledClock", "StreamClient", "TpPhase", "Trajectory", "VirtualClock",
    "sample_trajectory",
]
