"""Acceptance gate. Each test carries a ``criterion`` marker; conftest prints one
PASS/FAIL line per criterion at the end of the session."""

import json
import random
import re
import time
from collections import Counter
from contextlib import contextmanager

import pytest

from golden_blocks import ALL_BLOCKS
from metareason.cli import main
from metareason.decompositions import count_code_blocks, principles_text
from metareason.formal import parse
from metareason.gateway import CompletionResult, Gateway, MockBackend, MockScript, RetryPolicy, Usage
from metareason.harness.baselines import run_codeact_baseline, run_recursive
from metareason.harness.bench import benchmark
from metareason.harness.scoring import score_relaxed_numeric, score_set_f1, score_token_f1
from metareason.harness.world import WorldSpec, generate_questions, generate_world, question_to_record, render_articles
from metareason.kernel import Budgets, Kernel, KernelOptions, TaskSpec
from metareason.scenarios import (
    PHANTOM,
    VOLLEYBALL,
    VOLLEYBALL_NAMESPACE,
    bundled_library,
    phantom_index,
    phantom_questions,
    volleyball_index,
    volleyball_task,
)
from metareason.trace import check_well_formed, loads, thread_tree

from support import Recording, independent_answer, run_cpython, run_formal, ws


@contextmanager
def within(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, limit {seconds}s"


def conserved(report):
    assert sum(report.per_thread.values(), Usage()) == report.total


def volleyball_backend():
    return MockBackend(MockScript.load(VOLLEYBALL.mock("recursive")))


def volleyball_run(backend=None, budgets=None, options=None):
    result = run_recursive(volleyball_task(), volleyball_index(), bundled_library(), Gateway(backend or volleyball_backend()),
                           budgets, options, namespace=VOLLEYBALL_NAMESPACE)
    conserved(result.usage)
    return result


# -- 1 ------------------------------------------------------------------------------


@pytest.mark.criterion(1, "interpreter golden suite")
def test_criterion_1_golden_suite():
    with within(1.0):
        for block in ALL_BLOCKS:
            parse(block.code)
            text, terminal, outcome = run_formal(block.code, block.seeds, block.hosts, block.dolores)
            assert outcome.error is None, (block.name, outcome.error.render())
            if block.python_agrees_with_trace:
                if block.observation is not None:
                    assert ws(text) == ws(block.observation), block.name
                assert terminal == block.terminal, block.name
            else:
                # the recorded output is not what this code computes; CPython is the reference
                py_text, py_terminal = run_cpython(block.code, block.seeds, block.hosts, block.dolores)
                assert (ws(text), terminal) == (ws(py_text), py_terminal), block.name
        scores = {"scores": ["3-2", "3-0", "3-1", "3-2", "2-3"]}
        assert run_formal("sum(1 for s in scores if s in ('3-2','2-3'))", scores, {})[0] == "3"
        tb = {"tiebreaks": {"East Beach": 14, "Crissy Field Beach": 8, "Marina Green Courts": 5, "South End Zone Courts": 11}}
        assert run_formal("FinalAnswer(max(tiebreaks, key=tiebreaks.get))", tb, {})[1] == "East Beach"
        oolong = next(b for b in ALL_BLOCKS if b.name == "oolong/2")
        text = run_formal(oolong.code, oolong.seeds, oolong.hosts, oolong.dolores)[0]
        assert text == "Total rolls: 1188, Total fours: 26, Percentage: 2%"


# -- 2 ------------------------------------------------------------------------------


@pytest.mark.criterion(2, "end-to-end volleyball run")
def test_criterion_2_volleyball(tmp_path, capsys):
    with within(5.0):
        assert main(["run", "--scenario", "volleyball", "--out", str(tmp_path)]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "East Beach"
        events = loads((tmp_path / "trace.jsonl").read_text())
        tree = thread_tree(events)
        assert tree["root"]["namespace"] == "sequential reasoning"
        namespaces = Counter(t["namespace"] for t in tree.values())
        assert namespaces == Counter({"sequential reasoning": 1, "lookup": 5, "formal": 4})
        assert namespaces["lookup"] >= 4 and namespaces["formal"] >= 4
        assert check_well_formed(events) == []
        result = volleyball_run()
        assert result.answer == "East Beach"


# -- 3 ------------------------------------------------------------------------------


@pytest.mark.criterion(3, "end-to-end phantom run and ReAct contrast")
def test_criterion_3_phantom():
    with within(5.0):
        q = phantom_questions()[0]
        assert q.gold == {"Bobbie Luu"}
        reports = {}
        for scaffold in ("recursive", "react"):
            backend = MockBackend(MockScript.load(PHANTOM.mock(scaffold)))
            reports[scaffold] = benchmark(scaffold, [q], phantom_index(), bundled_library(), backend)
            conserved(reports[scaffold].usage)
        rec = reports["recursive"].questions[0]
        assert rec.status == "finished" and set(rec.prediction) == {"Bobbie Luu"}
        assert score_set_f1(rec.prediction, q.gold) == 1.0 == rec.score
        react = reports["react"].questions[0]
        assert react.status == "finished" and react.score == 0.0


# -- 4 ------------------------------------------------------------------------------


@pytest.mark.criterion(4, "oracle equivalence on 1000 generated questions")
def test_criterion_4_oracle_equivalence():
    with within(30.0):
        checked, seed = 0, 0
        while checked < 1000:
            world = generate_world(WorldSpec(50, seed))
            docs = render_articles(world)
            for q in generate_questions(world, min(10, 1000 - checked), seed=seed, max_hops=5):
                rec = question_to_record(q)
                assert set(rec["gold"]) == independent_answer(docs, rec["anchor"], rec["hops"]), rec
                checked += 1
            seed += 1
        assert checked == 1000


# -- 5 ------------------------------------------------------------------------------


@pytest.mark.criterion(5, "scoring fixtures")
def test_criterion_5_scoring():
    with within(1.0):
        assert score_relaxed_numeric(9985, 10000) is True
        assert score_relaxed_numeric(1, 10) is False
        assert abs(score_token_f1("San Francisco", "San Francisco CA") - 0.8) <= 1e-12
        assert score_set_f1(set(), set()) == 1.0
        assert score_set_f1(set(), {"a"}) == 0.0


# -- 6 ------------------------------------------------------------------------------

MODES = ("always-recurse", "never-finalize", "always-malformed", "mixed")
_WORD = re.compile(r"\S+")


class Adversary:
    """Scripted hostile model; every reply is a pure function of (seed, thread, turn, kind)."""

    approximate_tokens = False

    def __init__(self, seed, mode):
        self.seed, self.mode = seed, mode

    def _text(self, rng, mode):
        pad = " ".join(["hmm"] * rng.randint(0, 6))
        if mode == "always-recurse":
            code = rng.choice([
                'v = dolores("again")\nprint(v)',
                'add_task("left")\nadd_task("right")\nprint(run_all())',
                'v = dolores("again", namespace="lookup", x=Var([1, 2], "pair"))',
            ])
        elif mode == "never-finalize":
            code = rng.choice(["x = 1", "print(llm('say something'))", "y = [i * i for i in range(50)]", "undefined_name"])
        else:
            return f"I would rather just talk about it. {pad}"
        return f"{pad}\n<repl>\n{code}\n</repl>"

    def complete(self, request):
        rng = random.Random(f"{self.seed}:{request.thread_label}:{request.turn}:{request.kind}")
        if request.kind == "llm":
            text = " ".join(["sure"] * rng.randint(1, 8))
        else:
            mode = self.mode if self.mode != "mixed" else rng.choice(MODES[:3])
            text = self._text(rng, mode)
        words = list(_WORD.finditer(text))
        finish = "stop"
        if len(words) > request.max_new_tokens:
            text, finish = text[: words[request.max_new_tokens - 1].end()], "length"
        return CompletionResult(text, Usage(len(request.messages), min(len(words), request.max_new_tokens), 0), finish)


def adversarial_scenario(seed):
    rng = random.Random(seed)
    budgets = Budgets(
        max_depth=rng.randint(0, 3),
        max_turns_per_thread=rng.randint(1, 4),
        max_total_tokens=rng.randint(20, 400),
        max_new_tokens=rng.randint(3, 40),
        max_parallel_children=rng.randint(1, 4),
        malformed_retries=rng.randint(0, 2),
    )
    return Adversary(seed, MODES[seed % len(MODES)]), budgets


@pytest.mark.criterion(6, "budget and tree properties under 200 adversarial scenarios")
def test_criterion_6_adversarial():
    with within(60.0):
        statuses, reached = Counter(), Counter()
        for seed in range(200):
            backend, b = adversarial_scenario(seed)
            gateway = Gateway(backend, retry=RetryPolicy(1, ()))
            kernel = Kernel(gateway, bundled_library(), b)
            result = kernel.run(TaskSpec("Do the hostile task.", namespace="sequential reasoning"))
            statuses[result.status] += 1
            events = result.trace
            assert check_well_formed(events) == [], seed
            for tid, ctx in result.threads.items():
                assert ctx.depth <= b.max_depth, seed
                assert sum(e.kind == "model-turn" and e.thread_id == tid for e in events) <= b.max_turns_per_thread, seed
                assert sum(e.kind in ("final-answer", "error", "budget-exhausted") and e.thread_id == tid for e in events) == 1
            assert kernel.tokens_used <= b.max_total_tokens + b.max_new_tokens - 1, seed
            reached["depth"] += b.max_depth > 0 and max(c.depth for c in result.threads.values()) == b.max_depth
            reached["tokens"] += kernel.tokens_used >= b.max_total_tokens
            assert result.usage.total.completion_tokens == kernel.tokens_used
            conserved(result.usage)
        assert statuses["finished"] == 0
        assert statuses["budget-exhausted"] > 0 and statuses["failed"] > 0
        # the limits are actually exercised, not trivially respected
        assert reached["depth"] > 0 and reached["tokens"] > 0


# -- 7 ------------------------------------------------------------------------------


def _trace_without_ts(path):
    rows = []
    for line in path.read_text().splitlines():
        record = json.loads(line)
        record.pop("ts")
        rows.append(json.dumps(record, sort_keys=True))
    return "\n".join(rows).encode()


@pytest.mark.criterion(7, "determinism across runs and concurrency caps")
def test_criterion_7_determinism(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["run", "--scenario", "volleyball", "--max-parallel", "1", "--out", str(tmp_path / name)]) == 0
    assert _trace_without_ts(tmp_path / "a" / "trace.jsonl") == _trace_without_ts(tmp_path / "b" / "trace.jsonl")

    def per_thread(result):
        # pool size is the one field that legitimately follows the cap
        out = {}
        for e in result.trace:
            payload = {k: v for k, v in e.payload.items() if k != "workers"}
            out.setdefault(e.thread_id, []).append((e.seq, e.kind, json.dumps(payload, sort_keys=True, default=repr)))
        return out

    runs = {cap: volleyball_run(budgets=Budgets(max_parallel_children=cap)) for cap in (1, 2, 8)}
    assert {r.answer for r in runs.values()} == {"East Beach"}
    reference = per_thread(runs[1])
    for cap in (2, 8):
        assert per_thread(runs[cap]) == reference
    root_obs = [p for _, k, p in reference["root"] if k == "observation"]
    assert any("East Beach" in p for p in root_obs)


# -- 8 ------------------------------------------------------------------------------


@pytest.mark.criterion(8, "token conservation and per-thread direction")
def test_criterion_8_tokens():
    recursive = volleyball_run()
    codeact = run_codeact_baseline(volleyball_task(), volleyball_index(),
                                   MockBackend(MockScript.load(VOLLEYBALL.mock("codeact"))))
    for result in (recursive, codeact):
        conserved(result.usage)
        assert result.usage.total == result.ledger.total()
    assert recursive.usage.thread_count == 10
    assert recursive.usage.max_thread_completion < codeact.usage.total.completion_tokens


# -- 9 ------------------------------------------------------------------------------


@pytest.mark.criterion(9, "ablation prompt modes")
def test_criterion_9_ablation():
    prompts = {}
    for mode in ("examples", "no-examples", "principles"):
        rec = Recording(volleyball_backend())
        volleyball_run(rec, options=KernelOptions(prompt_mode=mode))
        prompts[mode] = [r.messages[0].content for r in rec.requests if r.kind == "turn"]
        assert prompts[mode]
    assert all(count_code_blocks(p) > 0 for p in prompts["examples"])
    assert all(count_code_blocks(p) == 0 for p in prompts["no-examples"])
    assert all(count_code_blocks(p) == 0 and principles_text() in p for p in prompts["principles"])
    assert not any(principles_text() in p for p in prompts["no-examples"] + prompts["examples"])
