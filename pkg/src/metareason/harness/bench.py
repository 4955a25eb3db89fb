"""Benchmark sweeps over a question set, with score and token reports."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from ..corpus import CorpusIndex
from ..decompositions import ExampleLibrary
from ..gateway import Gateway, GatewayError, LedgerEntry, UsageLedger, UsageReport, usage_report
from ..kernel import Budgets, KernelOptions, RunResult
from ..trace import to_jsonable
from .baselines import run_codeact_baseline, run_react_baseline, run_recursive
from .scoring import score_answer
from .world import QuestionSpec

SCAFFOLDS = ("recursive", "react", "codeact")


@dataclass(frozen=True)
class QuestionResult:
    index: int
    id: str
    question: str
    answer_type: str
    gold: tuple[str, ...]
    prediction: Any
    score: float
    status: str
    threads: int
    completion_tokens: int
    error: str = ""

    def as_record(self) -> dict:
        return {
            "index": self.index,
            "id": self.id,
            "question": self.question,
            "answer_type": self.answer_type,
            "gold": list(self.gold),
            "prediction": to_jsonable(self.prediction),
            "score": self.score,
            "status": self.status,
            "threads": self.threads,
            "completion_tokens": self.completion_tokens,
            "error": self.error,
        }


@dataclass(frozen=True)
class ScoreReport:
    scaffold: str
    questions: tuple[QuestionResult, ...]
    aggregate: float | None
    by_type: dict[str, float]
    usage: UsageReport
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "scaffold": self.scaffold,
            "aggregate": self.aggregate if self.aggregate is not None else "undefined",
            "by_type": self.by_type,
            "count": len(self.questions),
            "usage": self.usage.as_dict(),
            "config": self.config,
        }

    def records(self) -> str:
        return "".join(json.dumps(q.as_record(), sort_keys=True, ensure_ascii=False) + "\n" for q in self.questions)

    def table(self) -> str:
        lines = [f"scaffold: {self.scaffold}", f"{'id':<6} {'type':<9} {'score':>6}  status  prediction"]
        for q in self.questions:
            lines.append(f"{q.id:<6} {q.answer_type:<9} {q.score:>6.3f}  {q.status:<7} {q.prediction!r}")
        agg = "undefined" if self.aggregate is None else f"{self.aggregate:.4f}"
        lines.append(f"aggregate: {agg} over {len(self.questions)} questions")
        for t, v in self.by_type.items():
            lines.append(f"  {t}: {v:.4f}")
        u = self.usage
        lines.append(
            f"threads: {u.thread_count}  completion tokens: {u.total.completion_tokens}  "
            f"mean completion/thread: {u.fmt(u.mean_completion)}  max thread: {u.max_thread_completion}"
        )
        if u.approximate:
            lines.append("(token counts are approximate: mock word counts)")
        return "\n".join(lines)

    def write(self, directory: str | Path) -> tuple[Path, Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        summary, records, table = directory / "report.json", directory / "questions.jsonl", directory / "report.txt"
        summary.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        records.write_text(self.records(), encoding="utf-8")
        table.write_text(self.table() + "\n", encoding="utf-8")
        return summary, records, table


def _run_one(scaffold, question, index, library, backend, budgets, options) -> RunResult:
    gateway = Gateway(backend)
    if scaffold == "recursive":
        return run_recursive(question.surface, index, library, gateway, budgets, options)
    if scaffold == "react":
        return run_react_baseline(question.surface, index, gateway, budgets)
    return run_codeact_baseline(question.surface, index, gateway, budgets)


def benchmark(
    scaffold: str,
    questions: Sequence[QuestionSpec],
    index: CorpusIndex,
    library: ExampleLibrary,
    backend,
    budgets: Budgets | None = None,
    options: KernelOptions | None = None,
    concurrency: int = 1,
    config: dict | None = None,
) -> ScoreReport:
    """Run every question; failures score 0 and never stop the sweep.

    Each question gets its own ledger; thread labels are prefixed ``q<index>/``
    when merged so per-thread statistics stay distinct across questions.
    """
    if scaffold not in SCAFFOLDS:
        raise ValueError(f"scaffold must be one of {SCAFFOLDS}")
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    if isinstance(backend, Gateway):
        backend = backend.backend

    def task(item):
        i, q = item
        try:
            result = _run_one(scaffold, q, index, library, backend, budgets, options)
        except (GatewayError, ValueError) as exc:
            return i, None, f"{type(exc).__name__}: {exc}"
        return i, result, ""

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        outcomes = list(pool.map(task, enumerate(questions)))

    rows: list[QuestionResult] = []
    merged: list[LedgerEntry] = []
    for i, result, error in outcomes:
        q = questions[i]
        if result is None:
            rows.append(QuestionResult(i, q.id, q.surface, q.answer_type, tuple(sorted(q.gold)), None, 0.0, "failed", 0, 0, error))
            continue
        prediction = result.answer if result.status == "finished" else None
        score = score_answer(q.answer_type, prediction, q.gold) if result.status == "finished" else 0.0
        for e in result.ledger.entries:
            merged.append(LedgerEntry(f"q{i}/{e.thread_label}", e.usage, e.timestamp, e.kind))
        if result.backend_error and not error:
            error = f"{type(result.backend_error).__name__}: {result.backend_error}"
        rows.append(QuestionResult(
            i, q.id, q.surface, q.answer_type, tuple(sorted(q.gold)), prediction, score, result.status,
            len(result.threads), result.usage.total.completion_tokens, error,
        ))

    ledger = UsageLedger(approximate=getattr(backend, "approximate_tokens", False))
    for e in merged:
        ledger.record(e.thread_label, e.usage, e.kind)
    aggregate = sum(r.score for r in rows) / len(rows) if rows else None
    by_type: dict[str, float] = {}
    for t in sorted({r.answer_type for r in rows}):
        scores = [r.score for r in rows if r.answer_type == t]
        by_type[t] = sum(scores) / len(scores)
    return ScoreReport(scaffold, tuple(rows), aggregate, by_type, usage_report(ledger), dict(config or {}))
