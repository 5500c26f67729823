"""Append-only JSON-lines event storage, one file per session."""

from __future__ import annotations

import json
from pathlib import Path


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


class EventStore:
    """Durable event log for one session.

    Events are single JSON lines ``{"seq": i, "type": ..., "data": ...}``.
    ``append`` returns the event as re-parsed from its serialized form, so
    in-memory state folds over exactly what a later replay will see.
    """

    def __init__(self, path):
        self.path = Path(path)

    def exists(self) -> bool:
        return self.path.exists()

    def append(self, event_type: str, data: dict, seq: int) -> dict:
        line = canonical_json({"seq": seq, "type": event_type, "data": data})
        with open(self.path, "a") as fh:
            fh.write(line + "\n")
            fh.flush()
        return json.loads(line)

    def read_all(self) -> list[dict]:
        if not self.path.exists():
            return []
        with open(self.path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        events = []
        for i, line in enumerate(lines):
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                # a torn final line can be an append in flight; anything
                # earlier is real corruption
                if i == len(lines) - 1:
                    break
                raise
        return events


def list_session_ids(data_dir) -> list[str]:
    root = Path(data_dir)
    if not root.exists():
        return []
    return sorted(p.stem for p in root.glob("*.jsonl"))


def store_for(data_dir, session_id: str) -> EventStore:
    return EventStore(Path(data_dir) / f"{session_id}.jsonl")
