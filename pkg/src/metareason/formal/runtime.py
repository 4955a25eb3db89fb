"""Runtime values, environments, and host-function registries."""

from __future__ import annotations

import inspect
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .errors import FormalError

EFFECTS = ("pure", "associative-call", "recursive-call", "tool-call", "terminal")
TERMINAL_NAME = "FinalAnswer"

_handle_ids = itertools.count(1)


class HostHandle:
    """Opaque value handed out by a host function.

    Handles compare by identity. A handle may expose callable attributes
    (``methods``) and may itself be callable (``call``).
    """

    def __init__(
        self,
        kind: str,
        payload: Any = None,
        *,
        methods: dict[str, "HostFunction"] | None = None,
        call: "HostFunction | None" = None,
        label: str | None = None,
    ):
        self.kind = kind
        self.payload = payload
        self.methods = dict(methods or {})
        self.call = call
        self.id = next(_handle_ids)
        self.label = label or f"{kind}#{self.id}"

    def __repr__(self) -> str:
        return f"<{self.label}>"


@dataclass(frozen=True)
class HostFunction:
    """A function the formal language can call but not define.

    ``signature`` is the human-readable call form rendered into prompts;
    ``may_block`` marks functions that wait on other threads or the network.
    """

    name: str
    fn: Callable[..., Any]
    effect: str = "pure"
    signature: str = ""
    doc: str = ""
    may_block: bool = False

    def __post_init__(self):
        if self.effect not in EFFECTS:
            raise ValueError(f"unknown effect class {self.effect!r}")
        if self.effect == "terminal" and self.name != TERMINAL_NAME:
            raise ValueError(f"only {TERMINAL_NAME} may be terminal, not {self.name!r}")

    def check_arguments(self, args: tuple, kwargs: dict) -> None:
        try:
            inspect.signature(self.fn).bind(*args, **kwargs)
        except TypeError as exc:
            raise TypeError(f"{self.name}{self.signature or '(...)'}: {exc}") from None

    def __repr__(self) -> str:
        return f"<host {self.name}>"


class HostRegistry:
    """Name → HostFunction mapping with unique names."""

    def __init__(self, functions: Iterable[HostFunction] = ()):
        self._functions: dict[str, HostFunction] = {}
        self._values: dict[str, Any] = {}
        for f in functions:
            self.register(f)

    def register(self, function: HostFunction) -> HostFunction:
        if function.name in self._functions or function.name in self._values:
            raise ValueError(f"host function {function.name!r} is already registered")
        self._functions[function.name] = function
        return function

    def bind_value(self, name: str, value: Any) -> None:
        """Expose a non-function host value (such as a callable handle) under ``name``."""
        if name in self._functions or name in self._values:
            raise ValueError(f"host name {name!r} is already registered")
        self._values[name] = value

    def lookup(self, name: str) -> Any:
        if name in self._functions:
            return self._functions[name]
        return self._values.get(name, _MISSING)

    def __contains__(self, name: str) -> bool:
        return name in self._functions or name in self._values

    def __iter__(self):
        return iter(self._functions.values())

    def __len__(self) -> int:
        return len(self._functions) + len(self._values)

    def names(self) -> list[str]:
        return list(self._functions) + list(self._values)


_MISSING = object()


class Environment:
    """Variable bindings with an optional enclosing scope."""

    def __init__(self, bindings: dict[str, Any] | None = None, parent: "Environment | None" = None):
        self.bindings: dict[str, Any] = dict(bindings or {})
        self.parent = parent

    def lookup(self, name: str) -> Any:
        env: Environment | None = self
        while env is not None:
            if name in env.bindings:
                return env.bindings[name]
            env = env.parent
        return _MISSING

    def assign(self, name: str, value: Any) -> None:
        self.bindings[name] = value

    def child(self) -> "Environment":
        return Environment(parent=self)

    def snapshot(self) -> dict[str, Any]:
        return dict(self.bindings)


@dataclass(frozen=True)
class Limits:
    max_steps: int = 100_000
    max_sequence: int = 10_000_000  # cap on list/string repetition results


@dataclass(frozen=True)
class Terminal:
    """Payload of a FinalAnswer call."""

    value: Any


@dataclass
class EvalOutcome:
    result: Any = None
    printed: list[str] = field(default_factory=list)
    terminal: Terminal | None = None
    error: FormalError | None = None
    steps: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None
