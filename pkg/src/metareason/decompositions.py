"""Namespaced decomposition examples: file format, selection, and prompt rendering.

Library files (extension ``.dex``) hold a sequence of blocks::

    [EXAMPLE namespace="lookup"]
    [TASK]
    List all past tournament match scores for ...
    [THOUGHT]
    I'll search first, then extract the scores.
    [CODE]
    results = search("...")
    print(results)
    [OBSERVATION]
    ...
    [CODE]
    FinalAnswer(scores)
    [/EXAMPLE]

Markers sit alone on their line. A ``[THOUGHT]`` or a ``[CODE]`` that follows a
completed turn opens a new turn. Content lines that would read as a marker, or
that begin with a backslash, are written with one extra leading backslash.
Blank lines and ``#`` comment lines are allowed between examples.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

from .formal import FormalError, parse
from .protocol import OBSERVATION_PREFIX, REPL_CLOSE, REPL_OPEN

FILE_EXTENSION = ".dex"
PROMPT_MODES = ("examples", "no-examples", "principles")

_EXAMPLE_RE = re.compile(r'^\[EXAMPLE\s+namespace="([^"]*)"\]\s*$')
_MARKER_RE = re.compile(r"^\[/?[A-Z]+(\s[^\]]*)?\]\s*$")
_SECTIONS = ("[TASK]", "[THOUGHT]", "[CODE]", "[OBSERVATION]")


class FormatError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class Turn:
    thought: str
    code: str
    observation: str | None = None


@dataclass(frozen=True)
class DecompositionExample:
    namespace: str
    task: str
    turns: tuple[Turn, ...]


@dataclass(frozen=True)
class ExampleLibrary:
    examples: tuple[DecompositionExample, ...] = ()
    index: dict[str, tuple[int, ...]] = field(default_factory=dict, compare=False)

    @classmethod
    def of(cls, examples: Iterable[DecompositionExample]) -> "ExampleLibrary":
        examples = tuple(examples)
        index: dict[str, list[int]] = {}
        for pos, ex in enumerate(examples):
            index.setdefault(ex.namespace, []).append(pos)
        return cls(examples, {ns: tuple(p) for ns, p in index.items()})

    @property
    def namespaces(self) -> list[str]:
        return list(self.index)

    @property
    def default_namespace(self) -> str | None:
        return self.namespaces[0] if self.index else None

    def __len__(self) -> int:
        return len(self.examples)


@dataclass(frozen=True)
class VariableDoc:
    name: str
    description: str
    type_summary: str = ""


def _normalize_block(lines: list[str]) -> str:
    while lines and not lines[0].strip():
        lines = lines[1:]
    return "\n".join(lines).rstrip()


def load_library(document: str) -> ExampleLibrary:
    """Parse and validate a library document."""
    examples: list[DecompositionExample] = []
    current: dict | None = None
    section: str | None = None
    buffer: list[str] = []
    start_line = section_line = 0

    def flush(lineno: int) -> None:
        nonlocal buffer
        if current is None or section is None:
            buffer = []
            return
        lead = next((i for i, line in enumerate(buffer) if line.strip()), len(buffer))
        first = section_line + 1 + lead  # file line of the block's first non-blank line
        text = _normalize_block(buffer)
        buffer = []
        if section == "[TASK]":
            current["task"] = text.strip()
        elif section == "[THOUGHT]":
            current["pending_thought"] = text.strip()
        elif section == "[CODE]":
            if not text.strip():
                raise FormatError(section_line, "empty code block")
            for offset, line in enumerate(text.splitlines()):
                if line.strip() in (REPL_OPEN, REPL_CLOSE):
                    raise FormatError(first + offset, "code block contains a prompt delimiter line")
            try:
                parse(text)
            except FormalError as exc:
                raise FormatError(first + exc.span.line - 1, f"code does not parse: {exc.render()}") from None
            current["turns"].append([current.pop("pending_thought", ""), text, None])
        elif section == "[OBSERVATION]":
            current["turns"][-1][2] = text

    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = raw.rstrip("\r")
        stripped = line.strip()
        if current is None:
            if not stripped or stripped.startswith("#"):
                continue
            m = _EXAMPLE_RE.match(stripped)
            if m:
                current = {"namespace": m.group(1).strip(), "task": None, "turns": []}
                section = None
                start_line = lineno
                if not current["namespace"]:
                    raise FormatError(lineno, "empty namespace")
                continue
            if stripped == "[/EXAMPLE]" or _MARKER_RE.match(stripped):
                raise FormatError(lineno, f"unbalanced block marker {stripped}")
            raise FormatError(lineno, "text outside an example block")

        if _MARKER_RE.match(stripped) and not line.startswith("\\"):
            flush(lineno)
            if stripped == "[/EXAMPLE]":
                examples.append(_finish(current, start_line, lineno))
                current, section = None, None
                continue
            if _EXAMPLE_RE.match(stripped):
                raise FormatError(lineno, "unbalanced block markers: example opened before the previous one closed")
            if stripped not in _SECTIONS:
                raise FormatError(lineno, f"unknown block kind {stripped}")
            _check_order(current, section, stripped, lineno)
            section, section_line = stripped, lineno
            continue
        if section is None:
            if stripped:
                raise FormatError(lineno, "content before the first block marker")
            continue
        buffer.append(line[1:] if line.startswith("\\") else line)

    if current is not None:
        raise FormatError(start_line, "unbalanced block markers: missing [/EXAMPLE]")
    return ExampleLibrary.of(examples)


def _check_order(current: dict, section: str | None, new: str, lineno: int) -> None:
    if new == "[TASK]":
        if current["task"] is not None or section is not None:
            raise FormatError(lineno, "[TASK] must come first and appear once")
        return
    if current["task"] is None and section != "[TASK]":
        raise FormatError(lineno, "missing task: [TASK] must come first")
    if new == "[THOUGHT]" and section == "[THOUGHT]":
        raise FormatError(lineno, "thought without code")
    if new == "[OBSERVATION]" and section != "[CODE]":
        raise FormatError(lineno, "observation must follow a code block")


def _finish(current: dict, start_line: int, lineno: int) -> DecompositionExample:
    if not current.get("task"):
        raise FormatError(start_line, "missing task")
    if "pending_thought" in current:
        raise FormatError(lineno, "thought without code")
    turns = current["turns"]
    if not turns:
        raise FormatError(start_line, "example has no turns")
    for i, (_, _, obs) in enumerate(turns[:-1]):
        if obs is None:
            raise FormatError(start_line, f"turn {i + 1} has no observation")
    if "FinalAnswer(" not in turns[-1][1]:
        raise FormatError(lineno, "final turn does not call FinalAnswer")
    return DecompositionExample(
        current["namespace"], current["task"], tuple(Turn(t, c, o) for t, c, o in turns)
    )


def _escape(text: str) -> list[str]:
    out = []
    for line in text.split("\n"):
        if line.startswith("\\") or _MARKER_RE.match(line.strip()):
            line = "\\" + line
        out.append(line)
    return out


def render_library(library: ExampleLibrary | Sequence[DecompositionExample]) -> str:
    """Serialize back to the library file format (inverse of ``load_library``)."""
    examples = library.examples if isinstance(library, ExampleLibrary) else library
    lines: list[str] = []
    for ex in examples:
        if '"' in ex.namespace or "]" in ex.namespace:
            raise ValueError(f"namespace {ex.namespace!r} cannot be serialized")
        lines.append(f'[EXAMPLE namespace="{ex.namespace}"]')
        lines += ["[TASK]", *_escape(ex.task)]
        for turn in ex.turns:
            if turn.thought:
                lines += ["[THOUGHT]", *_escape(turn.thought)]
            lines += ["[CODE]", *_escape(turn.code)]
            if turn.observation is not None:
                lines += ["[OBSERVATION]", *_escape(turn.observation)]
        lines += ["[/EXAMPLE]", ""]
    return "\n".join(lines)


def select(
    library: ExampleLibrary, namespace: str, default_namespace: str | None = None
) -> list[DecompositionExample]:
    """Examples tagged ``namespace`` in file order, else those of the default namespace."""
    positions = library.index.get(namespace)
    if positions is None:
        fallback = default_namespace or library.default_namespace
        positions = library.index.get(fallback, ()) if fallback is not None else ()
    return [library.examples[p] for p in positions]


def principles_text() -> str:
    return resources.files("metareason.data").joinpath("principles.txt").read_text(encoding="utf-8").strip()


PREAMBLE = """\
You solve tasks by writing small programs in a Python-like REPL. Split the work three ways: \
formal code for anything that can be computed exactly, `llm(...)` for judgments that need \
world knowledge or reading, and recursive calls for subtasks that deserve their own reasoning \
thread. Each reply is a short thought followed by exactly one code block, opened by a line \
containing only {open} and closed by a line containing only {close}. After each block you \
receive its printed output as an observation. Variables persist between your blocks. When \
you know the answer, call FinalAnswer(value).""".format(open=REPL_OPEN, close=REPL_CLOSE)


def _render_example(i: int, ex: DecompositionExample) -> list[str]:
    out = [f"### Example {i} (namespace: {ex.namespace})", f"Task: {ex.task}", ""]
    for turn in ex.turns:
        if turn.thought:
            out.append(turn.thought)
        out += [REPL_OPEN, turn.code, REPL_CLOSE]
        if turn.observation is not None:
            out += [OBSERVATION_PREFIX, turn.observation]
        out.append("")
    return out


def render_system_prompt(
    examples: Sequence[DecompositionExample],
    hosts: Sequence = (),
    variables: Sequence[VariableDoc] = (),
    mode: str = "examples",
    principles: str | None = None,
) -> str:
    """Assemble the modeling prompt: preamble, functions, variables, then guidance.

    ``hosts`` items need ``name``, ``signature`` and ``doc`` attributes.
    """
    if mode not in PROMPT_MODES:
        raise ValueError(f"unknown prompt mode {mode!r}; expected one of {PROMPT_MODES}")
    out = [PREAMBLE, ""]
    if hosts:
        out.append("## Functions")
        for h in hosts:
            sig = h.signature or "(...)"
            out.append(f"- `{h.name}{sig}`: {h.doc}" if h.doc else f"- `{h.name}{sig}`")
        out.append("")
    if variables:
        out.append("## Variables")
        for v in variables:
            out.append(f"Variable `{v.name}`: {v.description or '(no description)'}")
            if v.type_summary:
                out.append(f"  type: {v.type_summary}")
        out.append("")
    if mode == "examples" and examples:
        out.append("## Decomposition examples")
        out.append("")
        for i, ex in enumerate(examples, start=1):
            out += _render_example(i, ex)
    elif mode == "principles":
        out += ["## Decomposition principles", principles if principles is not None else principles_text(), ""]
    return "\n".join(out).rstrip() + "\n"


def count_code_blocks(prompt: str) -> int:
    return sum(1 for line in prompt.splitlines() if line == REPL_OPEN)
