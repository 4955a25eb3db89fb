"""Shared helpers for the test suite: mock scripts, stubs, and an independent world oracle."""

from __future__ import annotations

import ast
import contextlib
import io
import re
import threading
from collections import defaultdict
from itertools import chain

from metareason.formal import (
    Environment,
    HostFunction,
    HostHandle,
    HostRegistry,
    render_observation,
    run_source,
)
from metareason.gateway import Gateway, MockBackend, MockScript, RetryPolicy, Rule

REPL = "<repl>\n{code}\n</repl>"


def turn(code: str, thought: str = "") -> str:
    body = REPL.format(code=code.strip("\n"))
    return f"{thought}\n{body}" if thought else body


def script(*rules: Rule) -> MockScript:
    return MockScript(tuple(rules))


def mock_gateway(*rules: Rule, **kwargs) -> Gateway:
    kwargs.setdefault("retry", RetryPolicy(attempts=1, backoff=()))
    return Gateway(MockBackend(script(*rules)), **kwargs)


class Recording:
    """Backend wrapper that keeps every request it saw."""

    def __init__(self, inner):
        self.inner = inner
        self.requests = []
        self.approximate_tokens = getattr(inner, "approximate_tokens", False)
        self._lock = threading.Lock()

    def complete(self, request):
        with self._lock:
            self.requests.append(request)
        return self.inner.complete(request)


def ws(text: str) -> str:
    return " ".join(text.split())


# -- stubs usable from both the formal language and CPython ----------------------


class _Final(Exception):
    def __init__(self, value):
        self.value = value


class PyDolores:
    """CPython stand-in for the recursive-call handle."""

    def __init__(self, call, run_all=None):
        self._call = call
        self._run_all = run_all
        self.queue = []

    def __call__(self, task, namespace=None, **variables):
        return self._call(task, namespace=namespace, **variables)

    def add_task(self, task, namespace=None, **variables):
        self.queue.append((task, namespace, variables))

    def run_all(self):
        batch, self.queue = self.queue, []
        return self._run_all(batch)


def formal_hosts(plain: dict, dolores: tuple | None = None) -> HostRegistry:
    """Registry from plain callables; ``dolores`` is (call, run_all)."""
    reg = HostRegistry()
    for name, fn in plain.items():
        reg.register(HostFunction(name, fn, "tool-call"))
    reg.register(HostFunction("Var", lambda value, description="": HostHandle("var", (value, description)), "pure"))
    if dolores is not None:
        call, run_all = dolores
        queue = []

        def add_task(task, namespace=None, **variables):
            queue.append((task, namespace, {k: _unvar(v) for k, v in variables.items()}))

        def run():
            batch = list(queue)
            queue.clear()
            return run_all(batch)

        handle = HostHandle(
            "dolores",
            methods={"add_task": HostFunction("add_task", add_task, "recursive-call"),
                     "run_all": HostFunction("run_all", run, "recursive-call")},
            call=HostFunction("dolores", call, "recursive-call"),
        )
        reg.bind_value("dolores", handle)
        reg.bind_value("DoLoReS", handle)
    reg.register(HostFunction("FinalAnswer", lambda value: value, "terminal"))
    return reg


def _unvar(v):
    return v.payload[0] if isinstance(v, HostHandle) and v.kind == "var" else v


def run_formal(code: str, seeds: dict, plain: dict, dolores: tuple | None = None):
    """Returns (rendered observation, terminal value or None, outcome)."""
    env = Environment(dict(seeds))
    outcome = run_source(code, env, formal_hosts(plain, dolores))
    text = render_observation(outcome) if outcome.terminal is None else "\n".join(outcome.printed)
    return text, (outcome.terminal.value if outcome.terminal else None), outcome


def run_cpython(code: str, seeds: dict, plain: dict, dolores: tuple | None = None):
    """Same contract as ``run_formal`` but executed by CPython, echoing a trailing
    expression the way an interactive prompt would."""

    def final(value):
        raise _Final(value)

    g = {"__builtins__": __builtins__, **seeds, **plain, "FinalAnswer": final,
         "Var": lambda value, description="": value}
    if dolores is not None:
        handle = PyDolores(*dolores)
        g["dolores"] = g["DoLoReS"] = handle
    tree = ast.parse(code)
    last = tree.body.pop() if tree.body and isinstance(tree.body[-1], ast.Expr) else None
    buf = io.StringIO()
    terminal = None
    with contextlib.redirect_stdout(buf):
        try:
            exec(compile(tree, "<block>", "exec"), g)
            if last is not None:
                value = eval(compile(ast.Expression(last.value), "<block>", "eval"), g)
                if value is not None:
                    print(repr(value))
        except _Final as f:
            terminal = f.value
    out = buf.getvalue()
    return (out[:-1] if out.endswith("\n") else out), terminal


# -- independent world oracle ----------------------------------------------------
# Reads the rendered articles as text and enumerates hop paths explicitly; it
# shares nothing with the production traversal except the article wording.

_DERIVED = {"daughter-in-law": ("son", "wife"), "son-in-law": ("daughter", "husband")}


def parse_articles(documents) -> tuple[dict, dict]:
    relations: dict[str, dict[str, list[str]]] = defaultdict(lambda: defaultdict(list))
    attributes: dict[str, dict[str, str]] = defaultdict(dict)
    for doc in documents:
        section = None
        fact = re.compile(r"^The (.+) of " + re.escape(doc.title) + r" is (.+)\.$")
        for line in doc.body.splitlines():
            if line.startswith("## "):
                section = line[3:]
                continue
            m = fact.match(line)
            if not m:
                continue
            key, value = m.groups()
            subject = doc.title
            if section == "Family":
                relations[subject][key].append(value)
            else:
                attributes[subject][key.replace(" ", "_")] = value
    return relations, attributes


def _paths(relations, origin: str, steps: list[list[str]]):
    """Yield end points of every path; each step is a list of primitive roles and
    the origin may appear only strictly inside a derived step."""

    def walk(person, i):
        if i == len(steps):
            yield person
            return
        frontier = [person]
        for role in steps[i]:
            frontier = list(chain.from_iterable(relations[p][role] for p in frontier))
        for nxt in frontier:
            if nxt != origin:
                yield from walk(nxt, i + 1)

    yield from walk(origin, 0)


def independent_answer(documents, anchor: dict, hops: list[str]) -> set[str]:
    relations, attributes = parse_articles(documents)
    if anchor["kind"] == "name":
        origins = [anchor["value"]] if anchor["value"] in attributes else []
    else:
        origins = [p for p, attrs in attributes.items() if attrs.get(anchor["key"]) == anchor["value"]]
    last = hops[-1]
    terminal = last == "count" or last.startswith("attr:")
    roles = hops[:-1] if terminal else hops
    steps = [list(_DERIVED.get(r, (r,))) for r in roles]
    ends = set()
    for origin in origins:
        ends |= set(_paths(relations, origin, steps))
    if last == "count":
        return {str(len(ends))}
    if last.startswith("attr:"):
        return {attributes[p][last[5:]] for p in ends}
    return ends
