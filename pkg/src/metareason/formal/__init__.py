"""The formal language: tokenizer, parser, evaluator, and observation rendering."""

from .errors import EVAL_ERROR_KINDS, EvalError, FormalError, HostAbort, HostError, LexError, ParseError, Span
from .evaluator import BUILTINS, evaluate, round_half_away, run_source
from .lexer import Token, tokenize
from .observe import NO_OUTPUT, elision_marker, render_observation
from .runtime import (
    Environment,
    EvalOutcome,
    HostFunction,
    HostHandle,
    HostRegistry,
    Limits,
    Terminal,
)
from .syntax import Program, parse, unparse

__all__ = [
    "BUILTINS",
    "EVAL_ERROR_KINDS",
    "Environment",
    "EvalError",
    "EvalOutcome",
    "FormalError",
    "HostAbort",
    "HostError",
    "HostFunction",
    "HostHandle",
    "HostRegistry",
    "LexError",
    "Limits",
    "NO_OUTPUT",
    "ParseError",
    "Program",
    "Span",
    "Terminal",
    "Token",
    "elision_marker",
    "evaluate",
    "parse",
    "render_observation",
    "round_half_away",
    "run_source",
    "tokenize",
    "unparse",
]
