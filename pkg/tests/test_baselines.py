import json

import pytest

from metareason.gateway import MockBackend, Rule
from metareason.harness.baselines import (
    REACT_CORRECTIVE,
    MalformedAction,
    answer_of,
    parse_action,
    run_codeact_baseline,
    run_react_baseline,
)
from metareason.harness.scoring import score_answer
from metareason.kernel import Budgets
from metareason.scenarios import phantom_index, phantom_questions

from support import Recording, mock_gateway, script, turn


def act(name, **arguments):
    return "Action: " + json.dumps({"name": name, "arguments": arguments})


def test_react_full_chain_scores_one():
    q = phantom_questions()[0]
    steps = [
        act("search", attribute="0984-05-03"),
        act("retrieve_article", entity="Earle Coe"),
        act("retrieve_article", entity="Reggie Coe"),
        act("retrieve_article", entity="Lissa Coe"),
        act("final_answer", answer=["Bobbie Luu"]),
    ]
    gw = mock_gateway(*[Rule(f"Step {i}.\n{a}", label="root", turn=i) for i, a in enumerate(steps, start=1)])
    result = run_react_baseline(q.surface, phantom_index(), gw)
    assert result.status == "finished"
    assert score_answer(q.answer_type, answer_of(result), q.gold) == 1.0
    obs = [e.payload["text"] for e in result.trace if e.kind == "observation"]
    assert obs[0].startswith("(1) Earle Coe")
    assert "The friend of Lissa Coe is Bobbie Luu." in obs[3]


def test_react_tool_errors_are_observations():
    gw = mock_gateway(
        Rule(act("retrieve_article", entity="Earl Coe"), label="root", turn=1),
        Rule(act("search", nope=1), label="root", turn=2),
        Rule(act("final_answer", answer="x"), label="root", turn=3),
    )
    result = run_react_baseline("q", phantom_index(), gw)
    first, second = [e.payload["text"] for e in result.trace if e.kind == "observation"]
    assert first.startswith("Error:") and "Earle Coe" in first
    assert second.startswith("Error: bad arguments for search")
    assert result.answer == "x"


def test_react_malformed_actions():
    rec = Recording(MockBackend(script(
        Rule("I think the answer is obvious.", label="root", turn=1),
        Rule(act("final_answer", answer="y"), label="root", turn=2),
    )))
    ok = run_react_baseline("q", phantom_index(), rec)
    assert ok.answer == "y"
    assert rec.requests[1].messages[-1].content == REACT_CORRECTIVE
    bad = run_react_baseline("q", phantom_index(), mock_gateway(Rule("Action: {broken")), Budgets(malformed_retries=1))
    assert bad.status == "failed"
    assert bad.trace[-1].payload["kind"] == "malformed-turn"


@pytest.mark.parametrize("text", ["no action", "Action: [1]", 'Action: {"name": 3}', 'Action: {"name": "shell"}',
                                  'Action: {"name": "search", "arguments": []}'])
def test_parse_action_rejects(text):
    with pytest.raises(MalformedAction):
        parse_action(text)


def test_parse_action_accepts_trailing_text():
    assert parse_action('x\nAction: {"name": "search", "arguments": {"query": "a"}} done') == ("search", {"query": "a"})


ONE_SEARCH = """
hits = search("Reggie Coe occupation", k=1)
line = [l for l in hits.split("\\n") if l.startswith("The occupation of")][0]
FinalAnswer(line.split(" is ")[1].rstrip("."))
"""

TWO_SEARCHES = """
first = search("Reggie Coe", k=1)
wife = [l for l in first.split("\\n") if l.startswith("The wife of")][0].split(" is ")[1].rstrip(".")
second = search(wife, k=1)
line = [l for l in second.split("\\n") if l.startswith("The occupation of")][0]
FinalAnswer(line.split(" is ")[1].rstrip("."))
"""


@pytest.mark.parametrize("code, score", [(ONE_SEARCH, 0.0), (TWO_SEARCHES, 1.0)])
def test_codeact_search_depth(code, score):
    q = phantom_questions()[2]
    assert q.gold == {"translator"}
    result = run_codeact_baseline(q.surface, phantom_index(), mock_gateway(Rule(turn(code))))
    assert result.status == "finished"
    assert score_answer(q.answer_type, answer_of(result), q.gold) == score


def test_codeact_has_no_recursion():
    result = run_codeact_baseline("q", phantom_index(), mock_gateway(
        Rule(turn('dolores("sub")'), label="root", turn=1),
        Rule(turn("add_task('sub')"), label="root", turn=2),
        Rule(turn("FinalAnswer(1)"), label="root", turn=3),
    ))
    errors = [e.payload["error"] for e in result.trace if e.kind == "observation"]
    assert errors == ["name-unbound", "name-unbound"]
    assert list(result.threads) == ["root"]
