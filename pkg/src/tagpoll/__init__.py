"""Event-driven long-poll gateway for SCADA-style tag data."""

from .clock import Clock, ManualClock, ScaledClock
from .hub import (
    ChangeNotice,
    GroupConfig,
    Snapshot,
    TagHub,
    TagRecord,
    WaitResult,
    GOOD_QUALITY,
    BAD_QUALITY,
)
from .security import Action, SecurityPolicy
from .service import GatewayConfig, build_app, serve
from .sim import ChangeLogEntry, Fixed, PlantSim, Random, SimConfig

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BAD_QUALITY",
    "ChangeLogEntry",
    "ChangeNotice",
    "Clock",
    "Fixed",
    "GOOD_QUALITY",
    "GatewayConfig",
    "GroupConfig",
    "ManualClock",
    "PlantSim",
    "Random",
    "ScaledClock",
    "SecurityPolicy",
    "SimConfig",
    "Snapshot",
    "TagHub",
    "TagRecord",
    "WaitResult",
    "build_app",
    "serve",
]
