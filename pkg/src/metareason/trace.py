"""Append-only trace of reasoning threads, serialized as JSON lines.

Each line is one event::

    {"v": 1, "gseq": 7, "thread_id": "root.2", "seq": 0, "kind": "thread-start",
     "payload": {...}, "usage": {"prompt_tokens": 0, ...}, "ts": 1700000000.0}

``gseq`` is the global order, ``seq`` is dense per thread, ``usage`` is the
thread's cumulative usage when the event was written, and ``ts`` is the only
wall-clock field.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .formal import HostHandle

SCHEMA_VERSION = 1
EVENT_KINDS = (
    "thread-start",
    "model-turn",
    "execution",
    "observation",
    "child-spawn",
    "batch-dispatch",
    "final-answer",
    "error",
    "budget-exhausted",
)
TERMINAL_KINDS = ("final-answer", "error", "budget-exhausted")


@dataclass(frozen=True)
class TraceEvent:
    gseq: int
    thread_id: str
    seq: int
    kind: str
    payload: dict
    usage: dict
    ts: float
    v: int = SCHEMA_VERSION

    def as_record(self, include_ts: bool = True) -> dict:
        record = {
            "v": self.v,
            "gseq": self.gseq,
            "thread_id": self.thread_id,
            "seq": self.seq,
            "kind": self.kind,
            "payload": self.payload,
            "usage": self.usage,
        }
        if include_ts:
            record["ts"] = self.ts
        return record

    def to_json(self, include_ts: bool = True) -> str:
        return json.dumps(self.as_record(include_ts), sort_keys=True, default=_fallback)

    @classmethod
    def from_record(cls, r: dict) -> "TraceEvent":
        return cls(r["gseq"], r["thread_id"], r["seq"], r["kind"], r["payload"], r.get("usage") or {}, r.get("ts", 0.0), r.get("v", SCHEMA_VERSION))


def _fallback(value: Any):
    if isinstance(value, HostHandle):
        return repr(value)
    return repr(value)


def to_jsonable(value: Any) -> Any:
    """Make a runtime value JSON-friendly: tuples become lists, odd values become their repr."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k if isinstance(k, str) else repr(k): to_jsonable(v) for k, v in value.items()}
    return repr(value)


class TraceSink:
    """Thread-safe event collector with a global total order."""

    def __init__(self, clock: Callable[[], float] = time.time):
        self._lock = threading.Lock()
        self._events: list[TraceEvent] = []
        self._seq: dict[str, int] = {}
        self._clock = clock

    def emit(self, thread_id: str, kind: str, payload: dict | None = None, usage: dict | None = None) -> TraceEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown trace event kind {kind!r}")
        with self._lock:
            seq = self._seq.get(thread_id, 0)
            self._seq[thread_id] = seq + 1
            event = TraceEvent(len(self._events), thread_id, seq, kind, dict(payload or {}), dict(usage or {}), self._clock())
            self._events.append(event)
        return event

    @property
    def events(self) -> list[TraceEvent]:
        with self._lock:
            return list(self._events)


def dumps(events: Iterable[TraceEvent], include_ts: bool = True) -> str:
    return "".join(e.to_json(include_ts) + "\n" for e in events)


def loads(text: str) -> list[TraceEvent]:
    events = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(TraceEvent.from_record(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"trace line {lineno}: {exc}") from None
    return events


def thread_tree(events: Iterable[TraceEvent]) -> dict[str, dict]:
    """thread id -> {parent, depth, namespace, status} from thread-start and terminal events."""
    threads: dict[str, dict] = {}
    for e in events:
        if e.kind == "thread-start":
            threads[e.thread_id] = {
                "parent": e.payload.get("parent_id"),
                "depth": e.payload.get("depth", 0),
                "namespace": e.payload.get("namespace"),
                "status": "running",
            }
        elif e.kind in TERMINAL_KINDS and e.thread_id in threads:
            threads[e.thread_id]["status"] = {
                "final-answer": "finished",
                "error": "failed",
                "budget-exhausted": "budget-exhausted",
            }[e.kind]
    return threads


def check_well_formed(events: list[TraceEvent]) -> list[str]:
    """Return a list of violations (empty when the trace is a well-formed tree)."""
    problems: list[str] = []
    ordered = sorted(events, key=lambda e: e.gseq)
    if [e.gseq for e in ordered] != list(range(len(ordered))):
        problems.append("global sequence numbers are not dense")
    by_thread: dict[str, list[TraceEvent]] = {}
    for e in ordered:
        by_thread.setdefault(e.thread_id, []).append(e)
    spawned_at: dict[str, int] = {}
    spawn_parent: dict[str, str] = {}
    for e in ordered:
        if e.kind == "child-spawn":
            child = e.payload.get("child_id")
            spawned_at[child] = e.gseq
            spawn_parent[child] = e.thread_id
    roots = []
    for tid, evs in by_thread.items():
        if [e.seq for e in evs] != list(range(len(evs))):
            problems.append(f"{tid}: per-thread sequence numbers are not dense")
        if evs[0].kind != "thread-start":
            problems.append(f"{tid}: first event is {evs[0].kind}, not thread-start")
        terminals = [e for e in evs if e.kind in TERMINAL_KINDS]
        if len(terminals) != 1:
            problems.append(f"{tid}: {len(terminals)} terminal events")
        elif terminals[0] is not evs[-1]:
            problems.append(f"{tid}: events after the terminal event")
        parent = evs[0].payload.get("parent_id")
        if parent is None:
            roots.append(tid)
            continue
        if parent not in by_thread:
            problems.append(f"{tid}: parent {parent} has no events")
        if spawn_parent.get(tid) != parent:
            problems.append(f"{tid}: no child-spawn event from parent {parent}")
        elif spawned_at[tid] > evs[0].gseq:
            problems.append(f"{tid}: thread-start precedes its child-spawn")
    if by_thread and len(roots) != 1:
        problems.append(f"expected exactly one root thread, found {len(roots)}")
    for child, parent in spawn_parent.items():
        if parent not in by_thread:
            problems.append(f"child-spawn from unknown thread {parent}")
    return problems


def filter_events(
    events: Iterable[TraceEvent],
    thread: str | None = None,
    kind: str | None = None,
    depth: int | None = None,
) -> list[TraceEvent]:
    events = list(events)
    depths = {tid: info["depth"] for tid, info in thread_tree(events).items()}
    out = []
    for e in events:
        if thread is not None and e.thread_id != thread:
            continue
        if kind is not None and e.kind != kind:
            continue
        if depth is not None and depths.get(e.thread_id) != depth:
            continue
        out.append(e)
    return out
