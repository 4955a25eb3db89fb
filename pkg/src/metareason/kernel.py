"""The reasoning loop: model turn, parse, execute, observe, repeat; with recursion.

A thread keeps its own message history and interpreter environment. Recursive
calls (``dolores``) run a child thread to completion and hand back only its
final value. ``add_task`` queues children on the calling thread; ``run_all``
runs the queue on a pool sized ``min(max_parallel_children, len(queue))`` and
returns values in queue order. Each batch gets its own pool, so a parent that
blocks on its children never holds a worker the children need.
"""

from __future__ import annotations

import keyword
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

from .decompositions import (
    ExampleLibrary,
    PROMPT_MODES,
    VariableDoc,
    render_system_prompt,
    select,
)
from .formal import (
    Environment,
    HostAbort,
    HostError,
    HostFunction,
    HostHandle,
    HostRegistry,
    Limits,
    render_observation,
    run_source,
)
from .gateway import (
    CompletionRequest,
    Gateway,
    GatewayError,
    Message,
    Usage,
    UsageLedger,
    UsageReport,
    usage_report,
)
from .protocol import OBSERVATION_PREFIX, REPL_CLOSE, REPL_OPEN
from .trace import TraceEvent, TraceSink, to_jsonable

CORRECTIVE_MESSAGE = (
    "Your reply did not contain a code block. Reply with a short thought, then one code "
    f"block between a line {REPL_OPEN} and a line {REPL_CLOSE}. Call FinalAnswer(value) "
    "when you are done."
)
ASSOCIATIVE_SYSTEM = "Answer the request directly. Reply with the answer only, without code or commentary."


class ConfigError(ValueError):
    pass


class MalformedTurn(ValueError):
    pass


@dataclass(frozen=True)
class Budgets:
    max_depth: int = 4
    max_turns_per_thread: int = 12
    max_total_tokens: int = 200_000
    observation_char_budget: int = 4_000
    max_parallel_children: int = 8
    max_new_tokens: int = 1_024
    malformed_retries: int = 2
    max_steps: int = 100_000

    def __post_init__(self):
        for name in ("max_turns_per_thread", "max_total_tokens", "max_parallel_children", "max_new_tokens", "max_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_depth < 0 or self.malformed_retries < 0:
            raise ConfigError("max_depth and malformed_retries must be >= 0")
        if self.observation_char_budget < 64:
            raise ConfigError("observation_char_budget must be >= 64")


@dataclass(frozen=True)
class BoundVar:
    name: str
    value: Any
    description: str = ""


@dataclass(frozen=True)
class TaskSpec:
    task: str
    variables: tuple[BoundVar, ...] = ()
    namespace: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not isinstance(self.task, str) or not self.task.strip():
            raise ConfigError("task must be a non-empty string")
        names = [v.name for v in self.variables]
        for n in names:
            if not n.isidentifier() or keyword.iskeyword(n):
                raise ConfigError(f"variable name {n!r} is not a valid identifier")
        if len(set(names)) != len(names):
            raise ConfigError("variable names must be unique")


@dataclass(frozen=True)
class KernelOptions:
    prompt_mode: str = "examples"
    default_namespace: str | None = None
    temperature: float = 0.0
    recursion: bool = True  # False gives the single-thread CodeAct-style host set
    principles: str | None = None

    def __post_init__(self):
        if self.prompt_mode not in PROMPT_MODES:
            raise ConfigError(f"prompt mode must be one of {PROMPT_MODES}, got {self.prompt_mode!r}")


@dataclass(frozen=True)
class ParsedTurn:
    thought: str
    code: str
    discarded_blocks: int = 0
    trailing_text: str = ""
    unterminated: bool = False


def parse_turn(text: str) -> ParsedTurn:
    """Split model output into the leading thought and the first code block."""
    lines = text.split("\n")
    opens = [i for i, line in enumerate(lines) if line.strip() == REPL_OPEN]
    if not opens:
        raise MalformedTurn("no code block found")
    start = opens[0]
    end = next((i for i in range(start + 1, len(lines)) if lines[i].strip() == REPL_CLOSE), None)
    body = lines[start + 1 : end if end is not None else len(lines)]
    code = "\n".join(body).strip("\n")
    if not code.strip():
        raise MalformedTurn("the code block is empty")
    trailing = "\n".join(lines[end + 1 :]) if end is not None else ""
    discarded = sum(1 for line in trailing.split("\n") if line.strip() == REPL_OPEN)
    return ParsedTurn(
        thought="\n".join(lines[:start]).strip(),
        code=code,
        discarded_blocks=discarded,
        trailing_text=trailing.strip(),
        unterminated=end is None,
    )


def type_summary(value: Any) -> str:
    if isinstance(value, str):
        return f"str ({len(value)} chars)"
    if isinstance(value, bool) or value is None:
        return type(value).__name__ if value is not None else "None"
    if isinstance(value, (list, tuple)):
        kinds = sorted({type(v).__name__ for v in value})
        inner = kinds[0] if len(kinds) == 1 else "mixed"
        return f"{type(value).__name__} of {len(value)} {inner}" if value else f"empty {type(value).__name__}"
    if isinstance(value, dict):
        return f"dict with {len(value)} keys"
    return type(value).__name__


def render_value(value: Any) -> str:
    return value if isinstance(value, str) else repr(value)


class _BudgetStop(HostAbort):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class ThreadContext:
    id: str
    parent_id: str | None
    depth: int
    namespace: str
    task: str
    env: Environment
    variables: tuple[BoundVar, ...]
    budgets: Budgets
    messages: list[Message] = field(default_factory=list)
    status: str = "running"
    answer: Any = None
    message: str = ""
    usage: Usage = field(default_factory=Usage)
    queue: list[tuple[str, "TaskSpec"]] = field(default_factory=list)
    children: int = 0

    def next_child_id(self) -> str:
        self.children += 1
        return f"{self.id}.{self.children}"

    def finish(self, status: str, answer: Any = None, message: str = "") -> None:
        if self.status != "running":
            raise RuntimeError(f"thread {self.id} already {self.status}")
        self.status, self.answer, self.message = status, answer, message


@dataclass
class RunResult:
    answer: Any
    status: str
    trace: list[TraceEvent]
    usage: UsageReport
    threads: dict[str, ThreadContext]
    ledger: UsageLedger
    backend_error: GatewayError | None = None

    @property
    def root(self) -> ThreadContext:
        return self.threads["root"]


class Kernel:
    """One run: shared gateway, trace, token counter and thread table."""

    def __init__(
        self,
        gateway: Gateway,
        library: ExampleLibrary,
        budgets: Budgets | None = None,
        tools: Sequence[HostFunction] = (),
        options: KernelOptions | None = None,
    ):
        self.gateway = gateway
        self.library = library
        self.budgets = budgets or Budgets()
        self.tools = list(tools)
        self.options = options or KernelOptions()
        self.trace = TraceSink()
        self.threads: dict[str, ThreadContext] = {}
        self.backend_errors: list[GatewayError] = []
        self._lock = threading.Lock()
        self._used = 0
        self._reserved = 0
        reserved = {"llm", "dolores", "DoLoReS", "add_task", "run_all", "FinalAnswer", "Var"}
        clash = reserved & {t.name for t in self.tools}
        if clash:
            raise ConfigError(f"tool names clash with built-in hosts: {sorted(clash)}")

    # -- token budget ----------------------------------------------------

    def _reserve(self) -> bool:
        with self._lock:
            if self._used + self._reserved >= self.budgets.max_total_tokens:
                return False
            self._reserved += self.budgets.max_new_tokens
            return True

    def _settle(self, completion_tokens: int) -> None:
        with self._lock:
            self._reserved -= self.budgets.max_new_tokens
            self._used += completion_tokens

    @property
    def tokens_used(self) -> int:
        return self._used

    def _request(self, ctx: ThreadContext, messages: Sequence[Message], kind: str):
        if not self._reserve():
            raise _BudgetStop("token budget exhausted")
        stops = (REPL_CLOSE,) if kind == "turn" else ()
        request = CompletionRequest(
            tuple(messages), ctx.id, self.options.temperature, self.budgets.max_new_tokens, stops, kind
        )
        used = 0
        try:
            result = self.gateway.complete(request)
            used = result.usage.completion_tokens
        except GatewayError as exc:
            with self._lock:
                self.backend_errors.append(exc)
            raise
        finally:
            self._settle(used)
        ctx.usage = ctx.usage + result.usage
        return result

    # -- events ------------------------------------------------------------

    def emit(self, ctx: ThreadContext, kind: str, payload: dict) -> TraceEvent:
        return self.trace.emit(ctx.id, kind, payload, ctx.usage.as_dict())

    # -- hosts -------------------------------------------------------------

    def hosts_for(self, ctx: ThreadContext) -> HostRegistry:
        kernel = self

        def llm(prompt, **variables):
            if not isinstance(prompt, str) or not prompt.strip():
                raise HostError("llm() needs a non-empty prompt string")
            text = prompt
            for name, value in variables.items():
                value, _ = _unwrap(value)
                text += f"\n\n{name}:\n{render_value(value)}"
            messages = (Message("system", ASSOCIATIVE_SYSTEM), Message("user", text))
            return kernel._request(ctx, messages, "llm").text

        def dolores(task, namespace=None, **variables):
            child_id, spec = kernel._child_spec(ctx, task, namespace, variables)
            kernel.emit(ctx, "child-spawn", {"child_id": child_id, "mode": "call", "namespace": spec.namespace, "task": spec.task})
            child = kernel._run_thread(spec, child_id, ctx)
            if child.status != "finished":
                raise HostError(f"child thread {child_id} ended {child.status}: {child.message}")
            return child.answer

        def add_task(task, namespace=None, **variables):
            child_id, spec = kernel._child_spec(ctx, task, namespace, variables)
            kernel.emit(ctx, "child-spawn", {"child_id": child_id, "mode": "batch", "namespace": spec.namespace, "task": spec.task})
            ctx.queue.append((child_id, spec))
            return HostHandle("task", child_id, label=f"task {child_id}")

        def run_all():
            if not ctx.queue:
                raise HostError("empty batch")
            batch, ctx.queue = ctx.queue, []
            workers = min(kernel.budgets.max_parallel_children, len(batch))
            kernel.emit(ctx, "batch-dispatch", {"children": [cid for cid, _ in batch], "workers": workers})
            with ThreadPoolExecutor(max_workers=workers) as pool:
                children = list(pool.map(lambda item: kernel._run_thread(item[1], item[0], ctx), batch))
            return [
                c.answer if c.status == "finished" else {"error": c.status, "message": c.message}
                for c in children
            ]

        def var(value, description=""):
            return HostHandle("var", (value, str(description)), label=f"Var {description!r}" if description else "Var")

        def final_answer(value):
            value, _ = _unwrap(value)
            return value

        registry = HostRegistry()
        registry.register(HostFunction("llm", llm, "associative-call", "(prompt, **variables)",
                                       "one associative model call; keyword variables are appended to the prompt; returns text", may_block=True))
        if self.options.recursion:
            call = HostFunction("dolores", dolores, "recursive-call", "(task, namespace=None, **variables)",
                                "run a sub-task in a fresh reasoning thread and return its FinalAnswer value", may_block=True)
            add = HostFunction("add_task", add_task, "recursive-call", "(task, namespace=None, **variables)",
                               "queue a sub-task for run_all(); returns a handle")
            run = HostFunction("run_all", run_all, "recursive-call", "()",
                               "run every queued sub-task in parallel; returns their values in queue order", may_block=True)
            handle = HostHandle("dolores", methods={"add_task": add, "run_all": run}, call=call, label="dolores")
            registry.bind_value("dolores", handle)
            registry.bind_value("DoLoReS", handle)
            registry.register(add)
            registry.register(run)
        registry.register(HostFunction("Var", var, "pure", "(value, description)",
                                       "wrap a value with a description before passing it to a sub-task"))
        for tool in self.tools:
            registry.register(tool)
        registry.register(HostFunction("FinalAnswer", final_answer, "terminal", "(value)",
                                       "finish this thread and return value to the caller"))
        return registry

    def host_docs(self, registry: HostRegistry) -> list[HostFunction]:
        docs = []
        for name in registry.names():
            h = registry.lookup(name)
            if isinstance(h, HostHandle):
                if name == "dolores":
                    docs.append(h.call)
                continue
            docs.append(h)
        order = {"llm": 0, "dolores": 1, "add_task": 2, "run_all": 3, "Var": 4}
        return sorted(docs, key=lambda h: (order.get(h.name, 5), h.name == "FinalAnswer"))

    def _child_spec(self, ctx: ThreadContext, task, namespace, variables) -> tuple[str, TaskSpec]:
        if not isinstance(task, str) or not task.strip():
            raise HostError("a sub-task needs a non-empty task string")
        if namespace is not None and not isinstance(namespace, str):
            raise HostError("namespace must be a string")
        if ctx.depth + 1 > self.budgets.max_depth:
            raise HostError(f"depth limit reached: max_depth is {self.budgets.max_depth}, this thread is at depth {ctx.depth}")
        bound = []
        for name, value in variables.items():
            value, description = _unwrap(value)
            bound.append(BoundVar(name, value, description))
        spec = TaskSpec(task, tuple(bound), namespace or ctx.namespace)
        return ctx.next_child_id(), spec

    # -- loop --------------------------------------------------------------

    def system_prompt(self, ctx: ThreadContext, registry: HostRegistry) -> str:
        examples = select(self.library, ctx.namespace, self.options.default_namespace)
        variables = [VariableDoc(v.name, v.description, type_summary(v.value)) for v in ctx.variables]
        return render_system_prompt(
            examples, self.host_docs(registry), variables, self.options.prompt_mode, self.options.principles
        )

    def _run_thread(self, spec: TaskSpec, thread_id: str, parent: ThreadContext | None) -> ThreadContext:
        ctx = ThreadContext(
            id=thread_id,
            parent_id=parent.id if parent else None,
            depth=parent.depth + 1 if parent else 0,
            namespace=spec.namespace,
            task=spec.task,
            env=Environment({v.name: v.value for v in spec.variables}),
            variables=spec.variables,
            budgets=self.budgets,
        )
        with self._lock:
            self.threads[thread_id] = ctx
        self.emit(ctx, "thread-start", {
            "parent_id": ctx.parent_id,
            "depth": ctx.depth,
            "namespace": ctx.namespace,
            "task": ctx.task,
            "variables": [v.name for v in spec.variables],
        })
        try:
            self._loop(ctx)
        except _BudgetStop as stop:
            ctx.finish("budget-exhausted", message=stop.reason)
            self.emit(ctx, "budget-exhausted", {"reason": stop.reason})
        except GatewayError as exc:
            ctx.finish("failed", message=f"{type(exc).__name__}: {exc}")
            self.emit(ctx, "error", {"kind": "backend", "error": type(exc).__name__, "message": str(exc)})
        return ctx

    def _loop(self, ctx: ThreadContext) -> None:
        registry = self.hosts_for(ctx)
        ctx.messages = [Message("system", self.system_prompt(ctx, registry)), Message("user", ctx.task)]
        limits = Limits(max_steps=self.budgets.max_steps)
        turns = malformed = 0
        while True:
            if turns >= self.budgets.max_turns_per_thread:
                raise _BudgetStop(f"turn budget exhausted after {turns} model turns")
            result = self._request(ctx, ctx.messages, "turn")
            turns += 1
            self.emit(ctx, "model-turn", {"turn": turns, "text": result.text, "finish": result.finish})
            try:
                parsed = parse_turn(result.text)
            except MalformedTurn as exc:
                ctx.messages.append(Message("assistant", result.text))
                malformed += 1
                if malformed > self.budgets.malformed_retries:
                    ctx.finish("failed", message=f"malformed turn: {exc}")
                    self.emit(ctx, "error", {"kind": "malformed-turn", "message": str(exc), "attempts": malformed})
                    return
                ctx.messages.append(Message("user", CORRECTIVE_MESSAGE))
                continue
            text = result.text if not parsed.unterminated else result.text.rstrip("\n") + "\n" + REPL_CLOSE
            ctx.messages.append(Message("assistant", text))
            self.emit(ctx, "execution", {
                "code": parsed.code,
                "discarded_blocks": parsed.discarded_blocks,
                "trailing_text": parsed.trailing_text,
            })
            outcome = run_source(parsed.code, ctx.env, registry, limits)
            if outcome.terminal is not None:
                if outcome.printed:
                    self.emit(ctx, "observation", {"text": "\n".join(outcome.printed), "error": None})
                answer = outcome.terminal.value
                ctx.finish("finished", answer=answer)
                self.emit(ctx, "final-answer", {"answer": to_jsonable(answer), "repr": repr(answer)})
                return
            observation = render_observation(outcome, self.budgets.observation_char_budget)
            self.emit(ctx, "observation", {
                "text": observation,
                "error": outcome.error.kind if outcome.error is not None else None,
                "steps": outcome.steps,
            })
            ctx.messages.append(Message("user", f"{OBSERVATION_PREFIX}\n{observation}"))

    def run(self, spec: TaskSpec) -> RunResult:
        root = self._run_thread(spec, "root", None)
        return RunResult(
            answer=root.answer if root.status == "finished" else None,
            status=root.status,
            trace=self.trace.events,
            usage=usage_report(self.gateway.ledger),
            threads=dict(self.threads),
            ledger=self.gateway.ledger,
            backend_error=self.backend_errors[0] if self.backend_errors else None,
        )


def _unwrap(value: Any) -> tuple[Any, str]:
    if isinstance(value, HostHandle) and value.kind == "var":
        return value.payload
    return value, ""


def run(
    spec: TaskSpec,
    library: ExampleLibrary,
    budgets: Budgets | None,
    backend,
    tools: Sequence[HostFunction] = (),
    options: KernelOptions | None = None,
) -> RunResult:
    """Run one task to completion. ``backend`` may be a Gateway or a bare backend."""
    if not isinstance(spec, TaskSpec):
        raise ConfigError("spec must be a TaskSpec")
    if not isinstance(library, ExampleLibrary):
        raise ConfigError("library must be an ExampleLibrary")
    gateway = backend if isinstance(backend, Gateway) else Gateway(backend)
    namespace = spec.namespace or (options.default_namespace if options else None) or library.default_namespace or ""
    if namespace != spec.namespace:
        spec = TaskSpec(spec.task, spec.variables, namespace)
    return Kernel(gateway, library, budgets, tools, options).run(spec)
