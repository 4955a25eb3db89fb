"""Completion gateway: request types, mock and HTTP backends, retries, usage ledger.

Mock script format (one file, rules tried top to bottom, first match wins)::

    # comment lines are allowed before the first rule
    === rule label="root" turn=1
    I'll start by resolving the city.
    <repl>
    city = llm("What city ...")
    </repl>
    === # a comment line, allowed anywhere
    === rule kind=llm contains="City by the Bay"
    San Francisco

A header line starts with ``=== rule`` and carries shell-quoted ``key=value``
pairs: ``label`` (glob over the thread label), ``kind`` (``turn`` or ``llm``),
``turn`` (1-based model turn within the thread), ``contains`` (substring of the
last user message) and ``task`` (substring of the first user message). Omitted
keys match anything. The response is every line up to the next header with
outer blank lines trimmed; a response line that itself starts with ``===`` is
written with a leading backslash, as is any line starting with a backslash.
"""

from __future__ import annotations

import fnmatch
import json
import os
import re
import shlex
import threading
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .protocol import REASONING_CLOSE, REASONING_OPEN

ROLES = ("system", "user", "assistant")
REQUEST_KINDS = ("turn", "llm")
CREDENTIAL_ENV = "METAREASON_API_KEY"


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    """Transient failures persisted through every retry."""


class BackendRefusal(GatewayError):
    """The backend answered with a non-retryable error."""


class MockMiss(GatewayError):
    def __init__(self, label: str, turn: int, kind: str, excerpt: str = ""):
        detail = f" (last user message starts {excerpt!r})" if excerpt else ""
        super().__init__(f"no mock rule matched {kind} request from thread {label!r}, turn {turn}{detail}")
        self.label = label
        self.turn = turn
        self.kind = kind


class TransientError(GatewayError):
    """Raised by backends for failures worth retrying (timeouts, 429, 5xx)."""


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.content is None:
            raise ValueError("message content must not be None")


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[Message, ...]
    thread_label: str
    temperature: float = 0.0
    max_new_tokens: int = 1024
    stop_sequences: tuple[str, ...] = ()
    kind: str = "turn"

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))
        if not self.messages or self.messages[0].role != "system":
            raise ValueError("the first message of a request must be the system message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.kind not in REQUEST_KINDS:
            raise ValueError(f"unknown request kind {self.kind!r}")

    @property
    def turn(self) -> int:
        """1-based model turn: assistant messages already in the history, plus one."""
        return 1 + sum(m.role == "assistant" for m in self.messages)

    def last_user(self) -> str:
        for m in reversed(self.messages):
            if m.role == "user":
                return m.content
        return ""

    def first_user(self) -> str:
        for m in self.messages:
            if m.role == "user":
                return m.content
        return ""


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    reasoning_tokens: int = 0

    def __post_init__(self):
        if min(self.prompt_tokens, self.completion_tokens, self.reasoning_tokens) < 0:
            raise ValueError("token counts must be >= 0")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
            self.reasoning_tokens + other.reasoning_tokens,
        )

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: Usage
    finish: str = "stop"  # stop | length | error


class Backend(Protocol):
    approximate_tokens: bool

    def complete(self, request: CompletionRequest) -> CompletionResult: ...


_REASONING_RE_CACHE: dict[tuple[str, str], re.Pattern] = {}


def count_reasoning_words(text: str, open_tag: str = REASONING_OPEN, close_tag: str = REASONING_CLOSE) -> int:
    key = (open_tag, close_tag)
    pattern = _REASONING_RE_CACHE.get(key)
    if pattern is None:
        pattern = re.compile(re.escape(open_tag) + r"(.*?)(?:" + re.escape(close_tag) + r"|\Z)", re.S)
        _REASONING_RE_CACHE[key] = pattern
    return sum(len(m.group(1).split()) for m in pattern.finditer(text))


# -- mock -------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    response: str
    label: str = "*"
    kind: str | None = None
    turn: int | None = None
    contains: str | None = None
    task: str | None = None
    line: int = 0

    def matches(self, request: CompletionRequest) -> bool:
        if not fnmatch.fnmatchcase(request.thread_label, self.label):
            return False
        if self.kind is not None and self.kind != request.kind:
            return False
        if self.turn is not None and self.turn != request.turn:
            return False
        if self.contains is not None and self.contains not in request.last_user():
            return False
        if self.task is not None and self.task not in request.first_user():
            return False
        return True


_RULE_KEYS = {"label", "kind", "turn", "contains", "task"}


class MockScriptError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"mock script line {line}: {reason}")
        self.line = line


@dataclass(frozen=True)
class MockScript:
    rules: tuple[Rule, ...]

    @classmethod
    def parse(cls, text: str) -> "MockScript":
        rules: list[Rule] = []
        header: dict | None = None
        body: list[str] = []

        def close():
            if header is not None:
                while body and not body[-1].strip():
                    body.pop()
                while body and not body[0].strip():
                    body.pop(0)
                rules.append(Rule(response="\n".join(body), **header))

        for lineno, line in enumerate(text.splitlines(), start=1):
            if line.startswith("=== #"):
                continue
            if line.startswith("=== rule"):
                close()
                header, body = _parse_header(line[len("=== rule"):], lineno), []
                continue
            if line.startswith("==="):
                raise MockScriptError(lineno, "malformed rule header")
            if header is None:
                if line.strip() and not line.lstrip().startswith("#"):
                    raise MockScriptError(lineno, "text before the first rule")
                continue
            body.append(line[1:] if line.startswith("\\") else line)
        close()
        return cls(tuple(rules))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "MockScript":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def find(self, request: CompletionRequest) -> Rule:
        for rule in self.rules:
            if rule.matches(request):
                return rule
        raise MockMiss(request.thread_label, request.turn, request.kind, request.last_user()[:60])


def _parse_header(rest: str, lineno: int) -> dict:
    try:
        parts = shlex.split(rest)
    except ValueError as exc:
        raise MockScriptError(lineno, str(exc)) from None
    header: dict = {"line": lineno}
    for part in parts:
        key, sep, value = part.partition("=")
        if not sep or key not in _RULE_KEYS:
            raise MockScriptError(lineno, f"bad rule field {part!r}")
        if key == "turn":
            try:
                header[key] = int(value)
            except ValueError:
                raise MockScriptError(lineno, f"turn must be an integer, got {value!r}") from None
        elif key == "kind" and value not in REQUEST_KINDS:
            raise MockScriptError(lineno, f"kind must be one of {REQUEST_KINDS}")
        else:
            header[key] = value
    return header


def render_mock_script(script: MockScript) -> str:
    out = []
    for r in script.rules:
        fields = [f"label={shlex.quote(r.label)}"]
        for key in ("kind", "turn", "contains", "task"):
            value = getattr(r, key)
            if value is not None:
                fields.append(f"{key}={shlex.quote(str(value))}")
        out.append("=== rule " + " ".join(fields))
        for line in r.response.split("\n"):
            out.append("\\" + line if line.startswith(("===", "\\")) else line)
    return "\n".join(out) + "\n"


def _word_count(text: str) -> int:
    return len(text.split())


def _truncate_words(text: str, n: int) -> str:
    """Prefix of ``text`` ending after its ``n``-th whitespace-delimited word."""
    seen = 0
    for m in re.finditer(r"\S+", text):
        seen += 1
        if seen == n:
            return text[: m.end()]
    return text


class MockBackend:
    """Deterministic scripted backend; token counts are whitespace word counts."""

    approximate_tokens = True

    def __init__(self, script: MockScript, reasoning_delimiters=(REASONING_OPEN, REASONING_CLOSE)):
        self.script = script
        self.reasoning_delimiters = reasoning_delimiters

    def complete(self, request: CompletionRequest) -> CompletionResult:
        text = self.script.find(request).response
        finish = "stop"
        cut = [i for i in (text.find(s) for s in request.stop_sequences if s) if i >= 0]
        if cut:
            text = text[: min(cut)]
        if _word_count(text) > request.max_new_tokens:
            text = _truncate_words(text, request.max_new_tokens)
            finish = "length"
        completion = _word_count(text)
        reasoning = min(completion, count_reasoning_words(text, *self.reasoning_delimiters))
        prompt = sum(_word_count(m.content) for m in request.messages)
        return CompletionResult(text, Usage(prompt, completion, reasoning), finish)


# -- HTTP -------------------------------------------------------------------


class HTTPBackend:
    """OpenAI-compatible chat-completions client.

    Raises ``TransientError`` for timeouts, connection failures, 429 and 5xx;
    ``BackendRefusal`` for any other non-success status.
    """

    approximate_tokens = False

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 120.0,
        client=None,
        reasoning_delimiters=(REASONING_OPEN, REASONING_CLOSE),
    ):
        import httpx

        self._httpx = httpx
        self.url = endpoint.rstrip("/") + "/chat/completions"
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(CREDENTIAL_ENV)
        self.client = client or httpx.Client(timeout=timeout)
        self.reasoning_delimiters = reasoning_delimiters

    def complete(self, request: CompletionRequest) -> CompletionResult:
        httpx = self._httpx
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_new_tokens,
        }
        if request.stop_sequences:
            body["stop"] = list(request.stop_sequences)
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            response = self.client.post(self.url, json=body, headers=headers)
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise TransientError(f"{type(exc).__name__}: {exc}") from exc
        status = response.status_code
        if status == 429 or status >= 500:
            raise TransientError(f"HTTP {status}")
        if status >= 400:
            raise BackendRefusal(f"HTTP {status}: {response.text[:300]}")
        try:
            return self._parse(response.json())
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendRefusal(f"malformed completion payload: {exc}") from None

    def _parse(self, data: dict) -> CompletionResult:
        choice = data["choices"][0]
        message = choice["message"]
        text = message.get("content") or ""
        usage = data.get("usage") or {}
        completion = int(usage.get("completion_tokens", 0))
        details = usage.get("completion_tokens_details") or {}
        if details.get("reasoning_tokens") is not None:
            reasoning = int(details["reasoning_tokens"])
        else:
            reasoning = count_reasoning_words(text, *self.reasoning_delimiters)
        reasoning = min(reasoning, completion)
        finish = {"length": "length", "stop": "stop"}.get(choice.get("finish_reason"), "stop")
        return CompletionResult(text, Usage(int(usage.get("prompt_tokens", 0)), completion, reasoning), finish)


# -- ledger -----------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    thread_label: str
    usage: Usage
    timestamp: float
    kind: str = "turn"

    def as_record(self) -> dict:
        return {"thread_label": self.thread_label, "kind": self.kind, **self.usage.as_dict(), "timestamp": self.timestamp}


class UsageLedger:
    """Append-only, thread-safe usage record."""

    def __init__(self, approximate: bool = False, clock: Callable[[], float] = time.time):
        self._entries: list[LedgerEntry] = []
        self._lock = threading.Lock()
        self.approximate = approximate
        self._clock = clock

    def record(self, thread_label: str, usage: Usage, kind: str = "turn") -> LedgerEntry:
        entry = LedgerEntry(thread_label, usage, self._clock(), kind)
        with self._lock:
            self._entries.append(entry)
        return entry

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def total(self) -> Usage:
        return sum((e.usage for e in self.entries), Usage())

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.as_record(), sort_keys=True) + "\n" for e in self.entries)

    @classmethod
    def from_jsonl(cls, text: str) -> "UsageLedger":
        ledger = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            r = json.loads(line)
            usage = Usage(r["prompt_tokens"], r["completion_tokens"], r["reasoning_tokens"])
            ledger._entries.append(LedgerEntry(r["thread_label"], usage, r["timestamp"], r.get("kind", "turn")))
        return ledger


@dataclass(frozen=True)
class UsageReport:
    per_thread: dict[str, Usage]
    total: Usage
    thread_count: int
    mean_completion: Fraction
    mean_reasoning: Fraction
    approximate: bool = False

    @staticmethod
    def fmt(value: Fraction) -> str:
        return f"{float(value):.2f}" if value.denominator != 1 else f"{value.numerator}.00"

    @property
    def max_thread_completion(self) -> int:
        return max((u.completion_tokens for u in self.per_thread.values()), default=0)

    def as_dict(self) -> dict:
        return {
            "per_thread": {k: v.as_dict() for k, v in self.per_thread.items()},
            "total": self.total.as_dict(),
            "thread_count": self.thread_count,
            "mean_completion_per_thread": self.fmt(self.mean_completion),
            "mean_reasoning_per_thread": self.fmt(self.mean_reasoning),
            "approximate_tokens": self.approximate,
        }

    def table(self) -> str:
        rows = [("thread", "prompt", "completion", "reasoning")]
        for label, u in self.per_thread.items():
            rows.append((label, str(u.prompt_tokens), str(u.completion_tokens), str(u.reasoning_tokens)))
        t = self.total
        rows.append(("TOTAL", str(t.prompt_tokens), str(t.completion_tokens), str(t.reasoning_tokens)))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in rows]
        lines.append(f"threads: {self.thread_count}  mean completion/thread: {self.fmt(self.mean_completion)}"
                     f"  mean reasoning/thread: {self.fmt(self.mean_reasoning)}")
        if self.approximate:
            lines.append("(token counts are approximate: mock word counts)")
        return "\n".join(lines)


def usage_report(ledger: UsageLedger | Iterable[LedgerEntry]) -> UsageReport:
    entries = ledger.entries if isinstance(ledger, UsageLedger) else tuple(ledger)
    per_thread: dict[str, Usage] = {}
    for e in entries:
        per_thread[e.thread_label] = per_thread.get(e.thread_label, Usage()) + e.usage
    total = sum(per_thread.values(), Usage())
    n = len(per_thread)
    mean_c = Fraction(total.completion_tokens, n) if n else Fraction(0)
    mean_r = Fraction(total.reasoning_tokens, n) if n else Fraction(0)
    approximate = ledger.approximate if isinstance(ledger, UsageLedger) else False
    return UsageReport(per_thread, total, n, mean_c, mean_r, approximate)


# -- gateway ----------------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff: tuple[float, ...] = (1.0, 2.0, 4.0)

    def delay(self, failure_index: int) -> float:
        if not self.backoff:
            return 0.0
        return self.backoff[min(failure_index, len(self.backoff) - 1)]


@dataclass
class Gateway:
    """Routes requests to a backend with retries, an in-flight cap and a ledger."""

    backend: Backend
    ledger: UsageLedger | None = None
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    max_in_flight: int = 16
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        if self.ledger is None:
            self.ledger = UsageLedger(approximate=getattr(self.backend, "approximate_tokens", False))
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self._slots = threading.BoundedSemaphore(self.max_in_flight)
        self.attempt_log: list[int] = []

    def complete(self, request: CompletionRequest) -> CompletionResult:
        result, attempts = self._with_retries(request)
        self.attempt_log.append(attempts)
        self.ledger.record(request.thread_label, result.usage, request.kind)
        return result

    def _with_retries(self, request: CompletionRequest) -> tuple[CompletionResult, int]:
        last: Exception | None = None
        for attempt in range(1, self.retry.attempts + 1):
            try:
                with self._slots:
                    return self.backend.complete(request), attempt
            except TransientError as exc:
                last = exc
                if attempt < self.retry.attempts:
                    self.sleep(self.retry.delay(attempt - 1))
        raise TransportError(f"gave up after {self.retry.attempts} attempts: {last}") from last


def complete(request: CompletionRequest, backend: Backend | Gateway) -> CompletionResult:
    gateway = backend if isinstance(backend, Gateway) else Gateway(backend)
    return gateway.complete(request)


def system_user(system: str, user: str) -> tuple[Message, Message]:
    return (Message("system", system), Message("user", user))


__all__: Sequence[str] = [
    "Backend",
    "BackendRefusal",
    "CREDENTIAL_ENV",
    "CompletionRequest",
    "CompletionResult",
    "Gateway",
    "GatewayError",
    "HTTPBackend",
    "LedgerEntry",
    "Message",
    "MockBackend",
    "MockMiss",
    "MockScript",
    "MockScriptError",
    "RetryPolicy",
    "Rule",
    "TransientError",
    "TransportError",
    "Usage",
    "UsageLedger",
    "UsageReport",
    "complete",
    "count_reasoning_words",
    "render_mock_script",
    "usage_report",
]
