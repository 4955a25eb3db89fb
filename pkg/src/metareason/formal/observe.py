"""Rendering of evaluation outcomes into observation text."""

from __future__ import annotations

from .runtime import EvalOutcome

NO_OUTPUT = "(no output)"
ELISION = "\n[... {n} characters omitted ...]"
MIN_BUDGET = 64


def elision_marker(omitted: int) -> str:
    return ELISION.format(n=omitted)


def render_observation(outcome: EvalOutcome, char_budget: int = 4000) -> str:
    """Printed lines, then the last expression's value or the error line.

    Output longer than ``char_budget`` is cut (at a line boundary when one is
    close enough) and ends with an elision marker giving the omitted count.
    """
    if char_budget < MIN_BUDGET:
        raise ValueError(f"char_budget must be at least {MIN_BUDGET}")
    lines = list(outcome.printed)
    if outcome.error is not None:
        lines.append(outcome.error.render())
    elif outcome.terminal is None and outcome.result is not None:
        lines.append(repr(outcome.result))
    text = "\n".join(lines)
    if not text:
        return NO_OUTPUT
    return truncate(text, char_budget)


def truncate(text: str, char_budget: int) -> str:
    if len(text) <= char_budget:
        return text
    marker = elision_marker(len(text))
    keep = char_budget - len(marker)
    # the marker shrinks as fewer characters are omitted; settle the width
    for _ in range(4):
        marker = elision_marker(len(text) - keep)
        new_keep = char_budget - len(marker)
        if new_keep == keep:
            break
        keep = new_keep
    keep = max(keep, 0)
    cut = text.rfind("\n", 0, keep + 1)
    if cut >= keep // 2:
        keep = cut
    return text[:keep] + elision_marker(len(text) - keep)
