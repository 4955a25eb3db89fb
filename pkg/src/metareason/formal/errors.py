from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class FormalError(Exception):
    """Base for every error raised while handling a code block."""

    kind = "error"

    def __init__(self, message: str, span: Span | None = None, kind: str | None = None):
        super().__init__(message)
        self.message = message
        self.span = span or Span(1, 1)
        if kind is not None:
            self.kind = kind

    def render(self) -> str:
        return f"Error({self.kind}): {self.message} @ {self.span}"


class LexError(FormalError):
    kind = "lex"


class ParseError(FormalError):
    kind = "syntax"


EVAL_ERROR_KINDS = (
    "name-unbound",
    "type-mismatch",
    "index-out-of-range",
    "key-missing",
    "value-error",
    "host-failure",
    "budget-exceeded",
)


class EvalError(FormalError):
    kind = "type-mismatch"

    def __init__(self, kind: str, message: str, span: Span | None = None):
        if kind not in EVAL_ERROR_KINDS:
            raise ValueError(f"unknown evaluation error kind {kind!r}")
        super().__init__(message, span, kind)


class HostError(Exception):
    """Raised by host functions to signal a failure the calling code should see."""


class HostAbort(BaseException):
    """Raised by a host to stop evaluation outright.

    Deliberately outside ``Exception`` so the evaluator never turns it into an
    in-language error; the embedding runtime catches it.
    """
