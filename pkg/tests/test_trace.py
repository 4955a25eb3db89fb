import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from metareason.decompositions import ExampleLibrary
from metareason.gateway import Rule
from metareason.kernel import Budgets, TaskSpec, run
from metareason.trace import (
    TraceEvent,
    TraceSink,
    check_well_formed,
    dumps,
    filter_events,
    loads,
    thread_tree,
    to_jsonable,
)

from support import mock_gateway, turn


def nested_run():
    return run(TaskSpec("t"), ExampleLibrary.of(()), Budgets(max_parallel_children=2), mock_gateway(
        Rule(turn('add_task("a")\nadd_task("b")\nv = run_all()'), label="root", turn=1),
        Rule(turn("FinalAnswer(v)"), label="root", turn=2),
        Rule(turn('FinalAnswer(dolores("deeper"))'), label="root.1"),
        Rule(turn("FinalAnswer('leaf')"), label="root.1.1"),
        Rule(turn("FinalAnswer('b')"), label="root.2"),
    ))


def test_run_trace_is_well_formed():
    result = nested_run()
    assert result.answer == ["leaf", "b"]
    assert check_well_formed(result.trace) == []
    tree = thread_tree(result.trace)
    assert tree["root.1.1"] == {"parent": "root.1", "depth": 2, "namespace": "", "status": "finished"}
    assert {t: info["status"] for t, info in tree.items()} == dict.fromkeys(["root", "root.1", "root.2", "root.1.1"], "finished")


def test_dumps_loads_round_trip():
    events = nested_run().trace
    assert loads(dumps(events)) == events
    no_ts = loads(dumps(events, include_ts=False))
    assert [dataclasses.replace(e, ts=0.0) for e in events] == no_ts
    with pytest.raises(ValueError, match="trace line 2"):
        loads(dumps(events[:1]) + "{not json\n")


def test_filters():
    events = nested_run().trace
    assert {e.thread_id for e in filter_events(events, depth=1)} == {"root.1", "root.2"}
    assert all(e.kind == "final-answer" for e in filter_events(events, kind="final-answer"))
    assert len(filter_events(events, kind="final-answer")) == 4
    assert [e.seq for e in filter_events(events, thread="root.2")] == list(range(len(filter_events(events, thread="root.2"))))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_tampering_is_detected(data):
    events = nested_run().trace
    i = data.draw(st.integers(0, len(events) - 1))
    mode = data.draw(st.sampled_from(["drop", "duplicate-terminal", "orphan"]))
    if mode == "drop":
        broken = events[:i] + events[i + 1:]
    elif mode == "duplicate-terminal":
        last = next(e for e in reversed(events) if e.thread_id == events[i].thread_id)
        broken = events + [dataclasses.replace(last, gseq=len(events), seq=last.seq + 1)]
    else:
        start = next(e for e in events if e.thread_id == "root.2" and e.kind == "thread-start")
        payload = dict(start.payload, parent_id="root.9")
        broken = [dataclasses.replace(e, payload=payload) if e is start else e for e in events]
    assert check_well_formed(broken)


def test_sink_orders_and_validates():
    clock = iter(range(100))
    sink = TraceSink(clock=lambda: float(next(clock)))
    sink.emit("root", "thread-start", {"parent_id": None})
    sink.emit("root", "final-answer", {"answer": 1})
    assert [(e.gseq, e.seq, e.ts) for e in sink.events] == [(0, 0, 0.0), (1, 1, 1.0)]
    with pytest.raises(ValueError):
        sink.emit("root", "gossip")


def test_to_jsonable():
    assert to_jsonable({"a": (1, [2]), 3: None}) == {"a": [1, [2]], "3": None}
    assert to_jsonable({1, 2}).startswith("{")


def test_event_record_has_schema_version():
    e = TraceEvent(0, "root", 0, "thread-start", {}, {}, 1.5)
    assert e.as_record()["v"] == 1 and "ts" not in e.as_record(include_ts=False)
