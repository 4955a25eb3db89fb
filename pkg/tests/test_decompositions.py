import pytest
from hypothesis import given, settings, strategies as st

from metareason.decompositions import (
    DecompositionExample,
    ExampleLibrary,
    FormatError,
    Turn,
    VariableDoc,
    count_code_blocks,
    load_library,
    principles_text,
    render_library,
    render_system_prompt,
    select,
)
from metareason.formal import HostFunction
from metareason.protocol import REPL_CLOSE, REPL_OPEN
from metareason.scenarios import bundled_library

HOSTS = [
    HostFunction("llm", lambda prompt: prompt, "associative-call", "(prompt)", "one associative call"),
    HostFunction("dolores", lambda task: task, "recursive-call", "(task, namespace=None, **variables)", "sub-task"),
    HostFunction("search", lambda query: query, "tool-call", "(query, k=5)", "search"),
    HostFunction("retrieve_article", lambda entity: entity, "tool-call", "(entity)", "fetch"),
    HostFunction("FinalAnswer", lambda v: v, "terminal", "(value)", "finish"),
]


def test_bundled_library_shape():
    lib = bundled_library()
    assert lib.namespaces == ["sequential reasoning", "lookup", "formal"]
    assert [len(ex.turns) for ex in lib.examples] == [4, 3, 3]
    assert lib.default_namespace == "sequential reasoning"


def test_full_library_prompt_counts():
    lib = bundled_library()
    prompt = render_system_prompt(lib.examples, HOSTS, (), "examples")
    # 4 + 3 + 3 blocks across the three worked examples
    assert count_code_blocks(prompt) == 10
    assert sum(line.startswith("Task: ") for line in prompt.splitlines()) == 3
    lines = prompt.splitlines()
    assert lines.count(REPL_OPEN) == lines.count(REPL_CLOSE) == 10


def test_prompt_sections_in_order():
    lib = bundled_library()
    prompt = render_system_prompt(select(lib, "formal"), HOSTS, [VariableDoc("scores", "list of match result strings", "list of 5 str")])
    a, b, c = prompt.index("## Functions"), prompt.index("## Variables"), prompt.index("## Decomposition examples")
    assert a < b < c
    assert "Variable `scores`: list of match result strings" in prompt
    assert "  type: list of 5 str" in prompt
    assert "- `retrieve_article(entity)`: fetch" in prompt


def test_ablation_modes():
    lib = bundled_library()
    none = render_system_prompt(lib.examples, HOSTS, (), "no-examples")
    assert count_code_blocks(none) == 0
    assert REPL_OPEN not in none.splitlines()
    principled = render_system_prompt(lib.examples, HOSTS, (), "principles")
    assert principles_text() in principled
    assert count_code_blocks(principled) == 0
    with pytest.raises(ValueError):
        render_system_prompt(lib.examples, HOSTS, (), "few-shot")


def test_select_falls_back_to_default():
    lib = bundled_library()
    assert [e.namespace for e in select(lib, "lookup")] == ["lookup"]
    assert [e.namespace for e in select(lib, "unknown")] == ["sequential reasoning"]
    assert [e.namespace for e in select(lib, "unknown", "formal")] == ["formal"]
    assert select(ExampleLibrary.of(()), "anything") == []


GOOD = """\
# comment before examples
[EXAMPLE namespace="n"]
[TASK]
Do it.
[CODE]
x = 1
print(x)
[OBSERVATION]
1
[THOUGHT]
Done.
[CODE]
FinalAnswer(x)
[/EXAMPLE]
"""


def test_minimal_library():
    lib = load_library(GOOD)
    (ex,) = lib.examples
    assert ex.task == "Do it."
    assert ex.turns == (Turn("", "x = 1\nprint(x)", "1"), Turn("Done.", "FinalAnswer(x)", None))


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        (GOOD.replace("[/EXAMPLE]\n", ""), 2, "missing [/EXAMPLE]"),
        (GOOD.replace("[TASK]\nDo it.\n", ""), 3, "missing task"),
        (GOOD.replace("FinalAnswer(x)", "print(x)"), 14, "FinalAnswer"),
        (GOOD.replace("print(x)\n[OBS", "print(x) +\n[OBS"), 7, "does not parse"),
        (GOOD.replace("[OBSERVATION]\n1\n", ""), 2, "no observation"),
        (GOOD.replace("[CODE]\nx = 1", "[CODE]\n\n<repl>\nx = 1"), 7, "delimiter"),
        (GOOD.replace("[THOUGHT]", "[NOTE]"), 10, "unknown block kind"),
        ("stray text\n" + GOOD, 1, "outside an example"),
        (GOOD.replace('namespace="n"', 'namespace=""'), 2, "empty namespace"),
    ],
)
def test_format_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(FormatError) as exc:
        load_library(text)
    assert exc.value.line == line
    assert fragment in exc.value.reason


# -- properties -------------------------------------------------------------------

_LINE = st.text(alphabet="ab [/]\\#=TASKCODE\t", max_size=12).filter(lambda s: s.strip() not in (REPL_OPEN, REPL_CLOSE))


def _text(min_lines=0):
    return st.lists(_LINE, min_size=min_lines, max_size=3).map("\n".join)


def _norm_block(s):
    lines = s.split("\n")
    while lines and not lines[0].strip():
        lines = lines[1:]
    return "\n".join(lines).rstrip()


_CODE = st.sampled_from(["x = 1", "print('[TASK]')", "y = [1, 2]\nprint(y)", "s = '\\\\x'", "# [CODE]\nz = 3"])


@st.composite
def examples(draw):
    ns = draw(st.text(alphabet="abc xyz-", min_size=1, max_size=8).filter(lambda s: s.strip()))
    task = draw(_text(1).map(str.strip).filter(bool))
    n = draw(st.integers(min_value=1, max_value=3))
    turns = []
    for i in range(n):
        thought = draw(_text()).strip()
        last = i == n - 1
        code = "FinalAnswer(1)" if last else draw(_CODE)
        obs = None if last else _norm_block(draw(_text()))
        turns.append(Turn(thought, code, obs))
    return DecompositionExample(ns.strip(), task, tuple(turns))


@settings(max_examples=200, deadline=None)
@given(st.lists(examples(), max_size=4))
def test_library_round_trip(exs):
    lib = ExampleLibrary.of(exs)
    again = load_library(render_library(lib))
    assert again.examples == lib.examples
    assert again.namespaces == lib.namespaces


@settings(max_examples=200, deadline=None)
@given(st.lists(examples(), min_size=1, max_size=4), st.text(max_size=10))
def test_selection_is_total(exs, namespace):
    lib = ExampleLibrary.of(exs)
    chosen = select(lib, namespace)
    assert chosen
    expected = namespace if namespace in lib.namespaces else lib.default_namespace
    assert {e.namespace for e in chosen} == {expected}
    assert chosen == [e for e in lib.examples if e.namespace == expected]
