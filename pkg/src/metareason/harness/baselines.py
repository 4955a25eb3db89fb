"""Single-thread baselines sharing the kernel's gateway, budgets and trace format.

ReAct turns carry one JSON tool call after an ``Action:`` label::

    Action: {"name": "search", "arguments": {"attribute": "0984-05-03"}}

CodeAct is the kernel loop with recursion disabled: code blocks may use
``search``, ``retrieve_article``, ``llm`` and ``FinalAnswer`` only.
"""

from __future__ import annotations

import json
from typing import Any, Sequence

from ..corpus import CorpusIndex, corpus_tools
from ..decompositions import ExampleLibrary
from ..formal import HostFunction
from ..gateway import Gateway, Message
from ..kernel import Budgets, Kernel, KernelOptions, RunResult, TaskSpec, ThreadContext, _BudgetStop
from ..protocol import OBSERVATION_PREFIX
from ..trace import to_jsonable

ACTION_LABEL = "Action:"
REACT_TOOLS = ("search", "retrieve_article", "final_answer")
REACT_CORRECTIVE = (
    "Your reply did not contain a valid action. End your reply with one line of the form "
    'Action: {"name": <tool>, "arguments": {...}} using one of: ' + ", ".join(REACT_TOOLS) + "."
)
REACT_SYSTEM = """\
Answer the question by calling tools. Each reply is a short thought followed by exactly one \
action line: Action: {"name": <tool>, "arguments": {...}}. The result comes back as an \
observation.

Tools:
- search: arguments {"query": text} or {"attribute": text}; returns numbered hits.
- retrieve_article: arguments {"entity": title}; returns the full article.
- final_answer: arguments {"answer": value}; ends the episode with value as the answer."""


class MalformedAction(ValueError):
    pass


def parse_action(text: str) -> tuple[str, dict]:
    pos = text.find(ACTION_LABEL)
    if pos < 0:
        raise MalformedAction("no Action: line")
    rest = text[pos + len(ACTION_LABEL):].lstrip()
    try:
        record, _ = json.JSONDecoder().raw_decode(rest)
    except ValueError as exc:
        raise MalformedAction(f"action is not valid JSON: {exc}") from None
    if not isinstance(record, dict) or not isinstance(record.get("name"), str):
        raise MalformedAction("action needs a string 'name'")
    arguments = record.get("arguments", {})
    if not isinstance(arguments, dict):
        raise MalformedAction("'arguments' must be an object")
    if record["name"] not in REACT_TOOLS:
        raise MalformedAction(f"unknown tool {record['name']!r}")
    return record["name"], arguments


class ReActKernel(Kernel):
    def __init__(self, gateway: Gateway, index: CorpusIndex, budgets: Budgets | None = None):
        super().__init__(gateway, ExampleLibrary.of(()), budgets, corpus_tools(index), KernelOptions(prompt_mode="no-examples"))
        self.tool_fns = {t.name: t.fn for t in self.tools}

    def _call_tool(self, name: str, arguments: dict) -> str:
        try:
            return str(self.tool_fns[name](**arguments))
        except TypeError as exc:
            return f"Error: bad arguments for {name}: {exc}"
        except Exception as exc:
            return f"Error: {exc}"

    def _loop(self, ctx: ThreadContext) -> None:
        ctx.messages = [Message("system", REACT_SYSTEM), Message("user", ctx.task)]
        turns = malformed = 0
        while True:
            if turns >= self.budgets.max_turns_per_thread:
                raise _BudgetStop(f"turn budget exhausted after {turns} model turns")
            result = self._request(ctx, ctx.messages, "turn")
            turns += 1
            self.emit(ctx, "model-turn", {"turn": turns, "text": result.text, "finish": result.finish})
            ctx.messages.append(Message("assistant", result.text))
            try:
                name, arguments = parse_action(result.text)
            except MalformedAction as exc:
                malformed += 1
                if malformed > self.budgets.malformed_retries:
                    ctx.finish("failed", message=f"malformed action: {exc}")
                    self.emit(ctx, "error", {"kind": "malformed-turn", "message": str(exc), "attempts": malformed})
                    return
                ctx.messages.append(Message("user", REACT_CORRECTIVE))
                continue
            self.emit(ctx, "execution", {"tool": name, "arguments": to_jsonable(arguments)})
            if name == "final_answer":
                answer = arguments.get("answer", "")
                ctx.finish("finished", answer=answer)
                self.emit(ctx, "final-answer", {"answer": to_jsonable(answer), "repr": repr(answer)})
                return
            observation = self._call_tool(name, arguments)
            self.emit(ctx, "observation", {"text": observation, "error": None})
            ctx.messages.append(Message("user", f"{OBSERVATION_PREFIX}\n{observation}"))


def _gateway(backend) -> Gateway:
    return backend if isinstance(backend, Gateway) else Gateway(backend)


def run_react_baseline(question: str, index: CorpusIndex, backend, budgets: Budgets | None = None) -> RunResult:
    return ReActKernel(_gateway(backend), index, budgets).run(TaskSpec(question, namespace="react"))


def run_codeact_baseline(
    question: str,
    index: CorpusIndex,
    backend,
    budgets: Budgets | None = None,
    extra_tools: Sequence[HostFunction] = (),
) -> RunResult:
    options = KernelOptions(prompt_mode="no-examples", recursion=False)
    kernel = Kernel(_gateway(backend), ExampleLibrary.of(()), budgets, [*corpus_tools(index), *extra_tools], options)
    return kernel.run(TaskSpec(question, namespace="codeact"))


def run_recursive(
    question: str,
    index: CorpusIndex,
    library: ExampleLibrary,
    backend,
    budgets: Budgets | None = None,
    options: KernelOptions | None = None,
    namespace: str | None = None,
) -> RunResult:
    options = options or KernelOptions()
    ns = namespace or options.default_namespace or library.default_namespace or "default"
    kernel = Kernel(_gateway(backend), library, budgets, corpus_tools(index), options)
    return kernel.run(TaskSpec(question, namespace=ns))


def answer_of(result: RunResult) -> Any:
    return result.answer if result.status == "finished" else None
