"""HTTP session service exposing the optimization loop to a live
decision-maker, with event-sourced durable sessions."""

from .app import create_app
from .engine import ConflictError, PhaseError, SessionEngine, UnknownSessionError
from .store import EventStore

__all__ = [
    "create_app",
    "SessionEngine",
    "EventStore",
    "PhaseError",
    "ConflictError",
    "UnknownSessionError",
]
