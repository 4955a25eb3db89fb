"""Answer metrics: set F1, bag-of-tokens F1, and relaxed numeric accuracy."""

from __future__ import annotations

from collections import Counter
from typing import Any, Iterable


def _f1(overlap: int, n_pred: int, n_gold: int) -> float:
    if n_pred == 0 and n_gold == 0:
        return 1.0
    if overlap == 0:
        return 0.0
    precision = overlap / n_pred
    recall = overlap / n_gold
    return 2 * precision * recall / (precision + recall)


def score_set_f1(predicted: Iterable[str], gold: Iterable[str]) -> float:
    pred, ref = set(predicted), set(gold)
    return _f1(len(pred & ref), len(pred), len(ref))


def score_token_f1(predicted: str, gold: str) -> float:
    pred = Counter(str(predicted).lower().split())
    ref = Counter(str(gold).lower().split())
    return _f1(sum((pred & ref).values()), sum(pred.values()), sum(ref.values()))


def as_number(value: Any) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.strip().rstrip("%"))
        except ValueError:
            return None
    return None


def score_relaxed_numeric(predicted: Any, gold: float, tolerance: float = 0.05) -> bool:
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    p = as_number(predicted)
    if p is None:
        return False
    if gold == 0:
        return p == 0
    return abs(p - gold) <= tolerance * abs(gold)


def as_answer_set(answer: Any) -> set[str]:
    if answer is None:
        return set()
    if isinstance(answer, str):
        return {answer.strip()} if answer.strip() else set()
    if isinstance(answer, (list, tuple, set, frozenset)):
        return {str(a).strip() for a in answer if str(a).strip()}
    return {str(answer)}


def as_answer_text(answer: Any) -> str:
    if answer is None:
        return ""
    if isinstance(answer, (list, tuple)) and len(answer) == 1:
        return str(answer[0])
    if isinstance(answer, (list, tuple, set, frozenset)):
        return " ".join(str(a) for a in answer)
    return str(answer)


def score_answer(answer_type: str, answer: Any, gold: Iterable[str]) -> float:
    """Score one prediction with the metric for its question type."""
    gold = sorted(gold)
    if answer_type == "set":
        return score_set_f1(as_answer_set(answer), gold)
    if answer_type == "attribute":
        return max((score_token_f1(as_answer_text(answer), g) for g in gold), default=0.0)
    if answer_type == "numeric":
        if isinstance(answer, (list, tuple)) and len(answer) == 1:
            answer = answer[0]
        return 1.0 if any(score_relaxed_numeric(answer, float(g)) for g in gold) else 0.0
    raise ValueError(f"unknown answer type {answer_type!r}")
