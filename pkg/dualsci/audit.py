from __future__ import annotations

from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
import json
from pathlib import Path
from typing import Any, Optional

from .utils import jsonable


@dataclass(frozen=True)
class AuditEvent:
    ts: str
    command: str
    ok: bool
    config_hash: str
    payload: dict[str, Any] = field(default_factory=dict)


class AuditLog:
    """`audit.jsonl` under the config root: one line per CLI command, newest last."""

    def __init__(self, root: Path):
        self.path = root / "audit.jsonl"

    def write(self, command: str, payload: dict[str, Any]) -> AuditEvent:
        body = dict(payload)
        evt = AuditEvent(
            ts=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            command=command,
            ok=bool(body.pop("ok", True)),
            config_hash=str(body.pop("config_hash", "") or ""),
            payload=jsonable(body),
        )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(asdict(evt), ensure_ascii=False, default=str) + "\n")
        return evt

    def read(self, command: Optional[str] = None, last: Optional[int] = None) -> list[AuditEvent]:
        """Parsed events, optionally one command only; unreadable lines are skipped."""
        if not self.path.exists():
            return []
        events: list[AuditEvent] = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            try:
                row = json.loads(line)
                evt = AuditEvent(
                    ts=row["ts"],
                    command=row["command"],
                    ok=bool(row.get("ok", True)),
                    config_hash=row.get("config_hash", ""),
                    payload=row.get("payload", {}),
                )
            except (json.JSONDecodeError, KeyError, TypeError):
                continue
            if command is None or evt.command == command:
                events.append(evt)
        return events[-last:] if last else events

    def failures(self) -> list[AuditEvent]:
        return [e for e in self.read() if not e.ok]
