import warnings

import pytest
from hypothesis import given, settings, strategies as st

from metareason.formal import (
    Environment,
    EvalError,
    HostAbort,
    HostError,
    HostFunction,
    HostRegistry,
    LexError,
    Limits,
    NO_OUTPUT,
    ParseError,
    parse,
    render_observation,
    round_half_away,
    run_source,
    tokenize,
    unparse,
)


def run(code, env=None, hosts=None, **limits):
    env = env if env is not None else Environment()
    return run_source(code, env, hosts, Limits(**limits) if limits else None)


def observe(code, env=None, hosts=None, budget=4000):
    return render_observation(run(code, env, hosts), budget)


# -- basics -------------------------------------------------------------------------


def test_environment_persists_between_blocks():
    env = Environment()
    assert observe("x = [1, 2]\nx.append(3)", env) == NO_OUTPUT
    assert observe("print(sum(x))", env) == "6"
    assert observe("x", env) == "[1, 2, 3]"


def test_last_expression_is_echoed_but_not_none():
    assert observe("1 + 1") == "2"
    assert observe("print('a')") == "a"
    assert observe("'s'") == "'s'"


def test_fstrings_and_conversions():
    env = Environment({"p": 26 / 1188 * 100, "name": "Lissa"})
    assert observe('f"{name!r} {p:.1f}% {{x}}"', env) == "\"'Lissa' 2.2% {x}\""


def test_tuple_unpacking_and_comprehensions():
    code = "pairs = [(a, b) for a in range(3) for b in range(3) if a < b]\nd = {a: b for a, b in pairs}\nprint(pairs, d)"
    assert observe(code) == "[(0, 1), (0, 2), (1, 2)] {0: 2, 1: 2}"


def test_for_break_continue_else_free():
    code = """
total = 0
for i in range(10):
    if i % 2 == 0:
        continue
    if i > 7:
        break
    total += i
print(total)
"""
    assert observe(code) == "16"


def test_round_is_half_away_from_zero():
    assert [round_half_away(v) for v in (0.5, 1.5, 2.5, -2.5)] == [1, 2, 3, -3]
    assert round_half_away(2.675, 2) == 2.68
    assert observe("round(2.5)") == "3"


def test_max_key_and_first_of_ties():
    env = Environment({"d": {"a": 2, "b": 5, "c": 5}})
    assert observe("max(d, key=d.get)", env) == "'b'"
    assert observe("min([3, 1, 2])") == "1"


@pytest.mark.parametrize(
    "code, kind",
    [
        ("y", "name-unbound"),
        ("[1][3]", "index-out-of-range"),
        ("{'a': 1}['b']", "key-missing"),
        ("1 + 'a'", "type-mismatch"),
        ("1 / 0", "value-error"),
        ("int('x')", "value-error"),
        ("len(5)", "type-mismatch"),
    ],
)
def test_error_kinds(code, kind):
    outcome = run(code)
    assert isinstance(outcome.error, EvalError)
    assert outcome.error.kind == kind
    assert render_observation(outcome).startswith(f"Error({kind}):")


def test_output_before_error_is_kept():
    text = observe("print('before')\nundefined_name")
    assert text.split("\n")[0] == "before"
    assert "name-unbound" in text


@pytest.mark.parametrize("code, word", [
    ("import re", "imports"),
    ("def f():\n    pass", "function definitions"),
    ("while True:\n    pass", "while loops"),
    ("f = lambda x: x", "lambda"),
    ("try:\n    x = 1\nexcept:\n    pass", "exception handling"),
])
def test_unsupported_constructs(code, word):
    with pytest.raises(ParseError) as exc:
        parse(code)
    assert word in str(exc.value)


def test_lex_errors():
    with pytest.raises(LexError):
        tokenize("x = 'unterminated")
    outcome = run("x = 'unterminated")
    assert outcome.error is not None and outcome.error.kind == "lex"


def test_step_budget():
    outcome = run("for i in range(10000000):\n    pass", max_steps=1000)
    assert outcome.error.kind == "budget-exceeded"
    assert outcome.steps <= 1001


def test_repetition_cap():
    assert run("'ab' * 10", max_sequence=100).error is None
    assert run("'ab' * 1000", max_sequence=100).error.kind == "value-error"


# -- hosts --------------------------------------------------------------------------


def test_final_answer_stops_execution():
    hosts = HostRegistry([HostFunction("FinalAnswer", lambda v: v, "terminal")])
    env = Environment()
    outcome = run("print('a')\nFinalAnswer([1, 2])\nprint('never')\nx = 1", env, hosts)
    assert outcome.terminal.value == [1, 2]
    assert outcome.printed == ["a"]
    assert "x" not in env.bindings


def test_only_final_answer_may_be_terminal():
    with pytest.raises(ValueError):
        HostFunction("stop", lambda: None, "terminal")


def test_host_failures_become_errors():
    def boom(x):
        raise HostError("no such article")

    hosts = HostRegistry([HostFunction("fetch", boom, "tool-call")])
    outcome = run("fetch('a')", hosts=hosts)
    assert outcome.error.kind == "host-failure"
    assert "no such article" in outcome.error.message
    assert run("fetch()", hosts=hosts).error.kind == "type-mismatch"


def test_host_abort_passes_through():
    def stop():
        raise HostAbort("out of tokens")

    hosts = HostRegistry([HostFunction("stop", stop, "tool-call")])
    with pytest.raises(HostAbort):
        run("stop()", hosts=hosts)


def test_host_names_cannot_be_rebound_silently():
    hosts = HostRegistry([HostFunction("search", lambda q: q, "tool-call")])
    with pytest.raises(ValueError):
        hosts.register(HostFunction("search", lambda q: q, "tool-call"))


# -- observation rendering -------------------------------------------------------------


@given(st.integers(min_value=64, max_value=600), st.integers(min_value=0, max_value=3000))
def test_truncation_respects_budget(budget, n):
    env = Environment({"s": "\n".join("line %d" % i for i in range(n))})
    text = render_observation(run("print(s)", env), budget)
    assert len(text) <= budget
    if len(env.bindings["s"]) > budget:
        assert "characters omitted" in text


def test_small_budget_rejected():
    with pytest.raises(ValueError):
        render_observation(run("1"), 10)


# -- properties -----------------------------------------------------------------------

NAMES = st.sampled_from(["a", "b", "xs", "total"])
INTS = st.integers(min_value=-20, max_value=20)
STRS = st.text(alphabet="abc -'\"\\", max_size=6)


def _atoms():
    return st.one_of(
        INTS.map(repr),
        STRS.map(repr),
        st.sampled_from(["True", "False", "None"]),
        st.lists(INTS, max_size=4).map(repr),
    )


def _exprs():
    return st.recursive(
        _atoms(),
        lambda inner: st.one_of(
            st.tuples(inner, st.sampled_from(["+", "-", "*", "//", "%", "==", "<", "!=", "and", "or", "in"]), inner)
            .map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            inner.map(lambda e: f"(not {e})"),
            inner.map(lambda e: f"(-{e})"),
            st.tuples(inner, inner, inner).map(lambda t: f"({t[0]} if {t[1]} else {t[2]})"),
            st.tuples(inner, INTS).map(lambda t: f"{t[0]}[{t[1]}]"),
            st.tuples(inner, INTS, INTS).map(lambda t: f"{t[0]}[{t[1]}:{t[2]}]"),
            inner.map(lambda e: f"len({e})"),
            inner.map(lambda e: f"[v for v in {e}]"),
            st.lists(inner, max_size=3).map(lambda es: "[" + ", ".join(es) + "]"),
            st.lists(inner, min_size=2, max_size=3).map(lambda es: "(" + ", ".join(es) + ")"),
        ),
        max_leaves=8,
    )


def _python_eval(src):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SyntaxWarning)
        try:
            return ("ok", eval(src, {"__builtins__": {"len": len}}))
        except Exception:
            return ("error", None)


@settings(max_examples=400, deadline=None)
@given(_exprs())
def test_expressions_agree_with_cpython(src):
    expected = _python_eval(src)
    if expected[0] == "ok" and isinstance(expected[1], (str, list, tuple)) and len(expected[1]) > 10_000:
        return
    outcome = run(src)
    if expected[0] == "error":
        assert outcome.error is not None, src
    else:
        assert outcome.error is None, (src, outcome.error and outcome.error.render())
        assert outcome.result == expected[1] and type(outcome.result) is type(expected[1]), src


def _statements():
    simple = st.one_of(
        st.tuples(NAMES, _exprs()).map(lambda t: f"{t[0]} = {t[1]}"),
        st.tuples(NAMES, st.sampled_from(["+=", "-=", "*="]), _atoms()).map(lambda t: f"{t[0]} {t[1]} {t[2]}"),
        _exprs().map(lambda e: f"print({e})"),
        st.just("pass"),
    )

    def compound(inner):
        body = st.lists(inner, min_size=1, max_size=3)
        return st.one_of(
            st.tuples(NAMES, _exprs(), body).map(lambda t: (f"for {t[0]} in {t[1]}:", t[2])),
            st.tuples(_exprs(), body, st.one_of(st.none(), body)).map(
                lambda t: (f"if {t[0]}:", t[1]) if t[2] is None else (f"if {t[0]}:", t[1], "else:", t[2])
            ),
        )

    return st.recursive(simple, compound, max_leaves=6)


def _render(stmt, indent=0):
    pad = "    " * indent
    if isinstance(stmt, str):
        return [pad + stmt]
    lines = [pad + stmt[0]]
    for s in stmt[1]:
        lines += _render(s, indent + 1)
    if len(stmt) == 4:
        lines.append(pad + stmt[2])
        for s in stmt[3]:
            lines += _render(s, indent + 1)
    return lines


@settings(max_examples=300, deadline=None)
@given(st.lists(_statements(), min_size=1, max_size=4))
def test_parse_unparse_round_trip(stmts):
    source = "\n".join(line for s in stmts for line in _render(s))
    program = parse(source)
    text = unparse(program)
    assert parse(text) == program
    assert unparse(parse(text)) == text
