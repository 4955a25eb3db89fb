"""Synthetic worlds, metrics, baselines and benchmark sweeps."""

from .baselines import parse_action, run_codeact_baseline, run_react_baseline, run_recursive
from .bench import SCAFFOLDS, QuestionResult, ScoreReport, benchmark
from .scoring import score_answer, score_relaxed_numeric, score_set_f1, score_token_f1
from .world import (
    Anchor,
    Chain,
    InfeasibleChain,
    Person,
    QuestionSpec,
    WorldGraph,
    WorldSpec,
    generate_questions,
    generate_world,
    load_questions,
    load_world,
    make_question,
    oracle_answer,
    render_articles,
    save_questions,
    save_world,
    validate_world,
)
