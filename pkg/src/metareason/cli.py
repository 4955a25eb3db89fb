"""Command line: run | bench | world gen | examples lint | trace show.

Exit codes: 0 success, 1 task failed or ran out of budget, 2 configuration or
input error, 3 backend error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from . import scenarios
from .config import RunConfig, load_config, with_overrides
from .corpus import CorpusError, build_index, load_corpus, save_corpus
from .decompositions import FILE_EXTENSION, FormatError, load_library
from .gateway import CREDENTIAL_ENV, Gateway, GatewayError, HTTPBackend, MockBackend, MockScript, MockScriptError
from .gateway import LedgerEntry, Usage, usage_report
from .kernel import ConfigError, TaskSpec, run as kernel_run
from .trace import dumps as dump_trace
from .trace import filter_events, loads as load_trace_text, thread_tree

EXIT_OK, EXIT_TASK_FAILED, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse already exits 2; keep the message short
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _backend(config: RunConfig):
    if config.mock is not None:
        return MockBackend(MockScript.load(config.mock))
    return HTTPBackend(config.endpoint, config.model)


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file (flags override it)")
    p.add_argument("--mock", help="mock script path (selects the mock backend)")
    p.add_argument("--endpoint", help=f"OpenAI-compatible base URL; the key comes from ${CREDENTIAL_ENV}")
    p.add_argument("--model", help="model name sent to the endpoint")
    p.add_argument("--library", help=f"example library ({FILE_EXTENSION}); default: the bundled library")
    p.add_argument("--prompt-mode", choices=("examples", "no-examples", "principles"))
    p.add_argument("--default-namespace")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--max-turns", type=int, dest="max_turns_per_thread")
    p.add_argument("--max-total-tokens", type=int)
    p.add_argument("--max-parallel", type=int, dest="max_parallel_children")
    p.add_argument("--max-new-tokens", type=int)


def _config(args, **extra) -> RunConfig:
    config = load_config(args.config)
    overrides = dict(
        mock=args.mock,
        endpoint=args.endpoint,
        model=args.model,
        library=args.library,
        prompt_mode=args.prompt_mode,
        default_namespace=args.default_namespace,
        output=args.out,
        seed=args.seed,
        max_depth=args.max_depth,
        max_turns_per_thread=args.max_turns_per_thread,
        max_total_tokens=args.max_total_tokens,
        max_parallel_children=args.max_parallel_children,
        max_new_tokens=args.max_new_tokens,
    )
    for key, value in extra.items():
        if overrides.get(key) is None:
            overrides[key] = value
    return with_overrides(config, **overrides)


def _library(config: RunConfig):
    path = config.library or scenarios.bundled_library_path()
    return load_library(Path(path).read_text(encoding="utf-8"))


def _format_answer(answer) -> str:
    return answer if isinstance(answer, str) else repr(answer)


# -- run ----------------------------------------------------------------------


def cmd_run(args) -> int:
    task = args.task
    namespace = args.namespace
    extra = {"corpus": args.corpus}
    if args.scenario:
        if args.scenario != "volleyball":
            raise ConfigError("run --scenario supports: volleyball")
        task = task or scenarios.volleyball_task()
        namespace = namespace or scenarios.VOLLEYBALL_NAMESPACE
        extra["corpus"] = extra["corpus"] or scenarios.VOLLEYBALL.path("corpus.jsonl")
        if not (args.mock or args.endpoint or args.config):
            extra["mock"] = scenarios.VOLLEYBALL.mock("recursive")
    if args.task_file:
        task = Path(args.task_file).read_text(encoding="utf-8").strip() if Path(args.task_file).is_file() else None
        if task is None:
            raise ConfigError(f"task file not found: {args.task_file}")
    if not task:
        raise ConfigError("no task given (pass TASK, --task-file or --scenario)")
    config = _config(args, namespace=namespace, **extra).validate()
    library = _library(config)
    tools = []
    if config.corpus is not None:
        from .corpus import corpus_tools

        tools = corpus_tools(build_index(load_corpus(config.corpus)))
    out = config.output or Path("runs") / ("run-" + hashlib.sha1((task + config.to_ini()).encode()).hexdigest()[:10])
    gateway = Gateway(_backend(config), max_in_flight=config.max_in_flight)
    spec = TaskSpec(task, (), config.namespace or config.default_namespace or library.default_namespace or "default")
    result = kernel_run(spec, library, config.budgets, gateway, tools, config.options())

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.jsonl"
    trace_path.write_text(dump_trace(result.trace), encoding="utf-8")
    (out / "answer.txt").write_text((_format_answer(result.answer) if result.status == "finished" else "") + "\n", encoding="utf-8")
    (out / "config.ini").write_text(config.to_ini(), encoding="utf-8")
    (out / "usage.json").write_text(json.dumps(result.usage.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "status.txt").write_text(result.status + "\n", encoding="utf-8")

    if result.status == "finished":
        print(_format_answer(result.answer))
        print(f"trace: {trace_path}")
        return EXIT_OK
    if result.backend_error is not None:
        print(f"backend error: {result.backend_error}", file=sys.stderr)
        print(f"trace: {trace_path}", file=sys.stderr)
        return EXIT_BACKEND
    print(f"run ended {result.status}: {result.root.message}", file=sys.stderr)
    print(f"trace: {trace_path}", file=sys.stderr)
    return EXIT_TASK_FAILED


# -- bench --------------------------------------------------------------------


def cmd_bench(args) -> int:
    from .harness.bench import benchmark
    from .harness.world import load_questions, load_world, render_articles

    questions_path, world_path = args.questions, args.world
    extra = {}
    if args.scenario:
        if args.scenario != "phantom":
            raise ConfigError("bench --scenario supports: phantom")
        questions_path = questions_path or scenarios.PHANTOM.path("questions.jsonl")
        world_path = world_path or scenarios.PHANTOM.path("world.jsonl")
        if not (args.mock or args.endpoint or args.config):
            extra["mock"] = scenarios.PHANTOM.mock(args.scaffold)
    for label, path in (("question file", questions_path), ("world file", world_path)):
        if path is None or not Path(path).is_file():
            raise ConfigError(f"{label} not found: {path}")
    config = _config(args, **extra).validate()
    try:
        questions = load_questions(questions_path)
        world = load_world(world_path)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read benchmark inputs: {exc}") from None
    index = build_index(render_articles(world))
    report = benchmark(
        args.scaffold, questions, index, _library(config), _backend(config), config.budgets, config.options(),
        concurrency=args.concurrency, config={"scaffold": args.scaffold, "questions": str(questions_path), "world": str(world_path)},
    )
    out = config.output or Path("runs") / f"bench-{args.scaffold}"
    paths = report.write(out)
    print(report.table())
    print(f"report: {paths[0]}")
    return EXIT_OK


# -- world gen ----------------------------------------------------------------


def cmd_world_gen(args) -> int:
    from .harness.world import WorldSpec, generate_questions, generate_world, render_articles, save_questions, save_world

    try:
        spec = WorldSpec(args.size, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not 1 <= args.max_hops <= 5:
        raise ConfigError("--max-hops must be in [1, 5]")
    world = generate_world(spec)
    out = Path(args.out)
    save_world(world, out / "world.jsonl")
    save_corpus(render_articles(world), out / "corpus.jsonl")
    questions = generate_questions(world, args.questions, args.seed, args.max_hops)
    save_questions(questions, out / "questions.jsonl")
    print(f"{len(world)} persons, {len(questions)} questions -> {out}")
    return EXIT_OK


# -- examples lint ------------------------------------------------------------


def cmd_examples_lint(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise ConfigError(f"library not found: {path}")
    try:
        library = load_library(path.read_text(encoding="utf-8"))
    except FormatError as exc:
        print(f"{path}:{exc.line}: {exc.reason}", file=sys.stderr)
        return EXIT_CONFIG
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not valid UTF-8 ({exc})") from None
    print(f"{len(library)} examples, {len(library.namespaces)} namespaces")
    for ns in library.namespaces:
        print(f"  {ns}: {len(library.index[ns])}")
    return EXIT_OK


# -- trace show ---------------------------------------------------------------


def _summary(event) -> str:
    p = event.payload
    if event.kind == "thread-start":
        return f"[{p.get('namespace')}] depth={p.get('depth')} parent={p.get('parent_id')} task={p.get('task', '')[:70]!r}"
    if event.kind == "model-turn":
        return f"turn {p.get('turn')} ({p.get('finish')}): {p.get('text', '')[:70]!r}"
    if event.kind == "execution":
        return repr((p.get("code") or json.dumps({"tool": p.get("tool"), "arguments": p.get("arguments")}))[:80])
    if event.kind == "observation":
        return repr(p.get("text", "")[:80])
    if event.kind == "child-spawn":
        return f"{p.get('child_id')} ({p.get('mode')}) [{p.get('namespace')}]"
    if event.kind == "batch-dispatch":
        return f"{len(p.get('children', []))} children on {p.get('workers')} workers"
    if event.kind == "final-answer":
        return p.get("repr", "")
    return json.dumps(p, sort_keys=True)[:100]


def cmd_trace_show(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise ConfigError(f"trace file not found: {path}")
    try:
        events = load_trace_text(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for e in filter_events(events, args.thread, args.kind, args.depth):
        print(f"{e.gseq:>5} {e.thread_id:<12} {e.kind:<16} {_summary(e)}")
    last: dict[str, dict] = {}
    for e in events:
        last[e.thread_id] = e.usage
    entries = [
        LedgerEntry(tid, Usage(u.get("prompt_tokens", 0), u.get("completion_tokens", 0), u.get("reasoning_tokens", 0)), 0.0)
        for tid, u in last.items()
    ]
    print()
    print(usage_report(entries).table())
    tree = thread_tree(events)
    print(f"threads by status: " + ", ".join(f"{s}={sum(t['status'] == s for t in tree.values())}"
                                             for s in sorted({t['status'] for t in tree.values()})))
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metareason", description="Recursive reasoning runtime and benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one task")
    p.add_argument("task", nargs="?", help="task text")
    p.add_argument("--task-file")
    p.add_argument("--scenario", choices=("volleyball",), help="use a bundled scenario's task, corpus and mock")
    p.add_argument("--namespace", help="root namespace (default: the library's first)")
    p.add_argument("--corpus", help="corpus (.jsonl or directory) exposed through search/retrieve_article")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="score a scaffold on a question set")
    p.add_argument("--scaffold", choices=("recursive", "react", "codeact"), default="recursive")
    p.add_argument("--questions")
    p.add_argument("--world")
    p.add_argument("--scenario", choices=("phantom",), help="use the bundled fixture world, questions and mock")
    p.add_argument("--concurrency", type=int, default=1)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_bench)

    world = sub.add_parser("world", help="synthetic worlds")
    wsub = world.add_subparsers(dest="world_command", required=True, parser_class=_Parser)
    p = wsub.add_parser("gen", help="generate a world, its corpus and questions")
    p.add_argument("--size", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--questions", type=int, default=100)
    p.add_argument("--max-hops", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_world_gen)

    ex = sub.add_parser("examples", help="example libraries")
    esub = ex.add_subparsers(dest="examples_command", required=True, parser_class=_Parser)
    p = esub.add_parser("lint", help="validate a library file")
    p.add_argument("path")
    p.set_defaults(func=cmd_examples_lint)

    tr = sub.add_parser("trace", help="trace files")
    tsub = tr.add_subparsers(dest="trace_command", required=True, parser_class=_Parser)
    p = tsub.add_parser("show", help="print a trace, optionally filtered")
    p.add_argument("path")
    p.add_argument("--thread")
    p.add_argument("--kind")
    p.add_argument("--depth", type=int)
    p.set_defaults(func=cmd_trace_show)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, FormatError, MockScriptError, CorpusError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GatewayError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except Exception as exc:  # last resort: report as a failed task, never a traceback exit
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TASK_FAILED


if __name__ == "__main__":
    sys.exit(main())
