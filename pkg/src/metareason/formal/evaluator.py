"""Tree-walking evaluator for parsed programs."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from typing import Any, Callable, Iterator

from . import syntax as ast
from .errors import EvalError, FormalError, ParseError, Span
from .runtime import (
    _MISSING,
    Environment,
    EvalOutcome,
    HostFunction,
    HostHandle,
    HostRegistry,
    Limits,
    Terminal,
)


class _TerminalSignal(Exception):
    def __init__(self, terminal: Terminal):
        self.terminal = terminal


class _Break(Exception):
    pass


class _Continue(Exception):
    pass


class Builtin:
    def __init__(self, name: str, fn: Callable[..., Any]):
        self.name = name
        self.fn = fn

    def __repr__(self) -> str:
        return f"<built-in function {self.name}>"


class BoundMethod:
    def __init__(self, obj: Any, name: str, fn: Callable[..., Any]):
        self.obj = obj
        self.name = name
        self.fn = fn

    def __repr__(self) -> str:
        return f"<method {type_name(self.obj)}.{self.name}>"


class GeneratorValue:
    """A lazily evaluated generator expression."""

    def __init__(self, it: Iterator[Any]):
        self._it = it

    def __iter__(self):
        return self

    def __next__(self):
        return next(self._it)

    def __repr__(self) -> str:
        return "<generator>"


def type_name(value: Any) -> str:
    if value is None:
        return "None"
    if isinstance(value, HostHandle):
        return "handle"
    if isinstance(value, (Builtin, BoundMethod, HostFunction)):
        return "function"
    if isinstance(value, GeneratorValue):
        return "generator"
    return type(value).__name__


def evaluate(
    program: ast.Program,
    env: Environment,
    hosts: HostRegistry | None = None,
    limits: Limits | None = None,
) -> EvalOutcome:
    """Execute ``program`` in ``env``; assignments persist in ``env``."""
    return _Evaluator(env, hosts or HostRegistry(), limits or Limits()).run(program)


def run_source(
    source: str,
    env: Environment,
    hosts: HostRegistry | None = None,
    limits: Limits | None = None,
) -> EvalOutcome:
    """Parse and evaluate ``source``; lex and syntax errors land in ``outcome.error``."""
    try:
        program = ast.parse(source)
    except FormalError as exc:
        return EvalOutcome(error=exc)
    except RecursionError:
        return EvalOutcome(error=ParseError("expression is nested too deeply"))
    return evaluate(program, env, hosts, limits)


class _Evaluator:
    def __init__(self, env: Environment, hosts: HostRegistry, limits: Limits):
        self.env = env
        self.hosts = hosts
        self.limits = limits
        self.steps = 0
        self._out: list[str] = []

    # -- driver --------------------------------------------------------------

    def run(self, program: ast.Program) -> EvalOutcome:
        outcome = EvalOutcome()
        try:
            for stmt in program.statements:
                value = self.exec_stmt(stmt, self.env)
                outcome.result = value if isinstance(stmt, ast.ExprStmt) else None
        except _TerminalSignal as sig:
            outcome.result = None
            outcome.terminal = sig.terminal
        except EvalError as exc:
            outcome.result = None
            outcome.error = exc
        except RecursionError:
            outcome.result = None
            outcome.error = EvalError("value-error", "evaluation nested too deeply")
        text = "".join(self._out)
        if text.endswith("\n"):
            text = text[:-1]
        outcome.printed = text.split("\n") if self._out else []
        outcome.steps = self.steps
        return outcome

    def step(self, span: Span) -> None:
        if self.steps >= self.limits.max_steps:
            raise EvalError("budget-exceeded", f"step budget of {self.limits.max_steps} exhausted", span)
        self.steps += 1

    # -- statements ----------------------------------------------------------

    def exec_block(self, body: list, env: Environment) -> None:
        for stmt in body:
            self.exec_stmt(stmt, env)

    def exec_stmt(self, stmt, env: Environment):
        self.step(stmt.span)
        if isinstance(stmt, ast.ExprStmt):
            return self.eval(stmt.value, env)
        if isinstance(stmt, ast.Assign):
            value = self.eval(stmt.value, env)
            for target in stmt.targets:
                self.assign(target, value, env)
        elif isinstance(stmt, ast.AugAssign):
            self.aug_assign(stmt, env)
        elif isinstance(stmt, ast.For):
            iterable = self.eval(stmt.iter, env)
            for item in self.iterate(iterable, stmt.span):
                self.assign(stmt.target, item, env)
                try:
                    self.exec_block(stmt.body, env)
                except _Break:
                    break
                except _Continue:
                    continue
        elif isinstance(stmt, ast.If):
            if self.truthy(self.eval(stmt.test, env)):
                self.exec_block(stmt.body, env)
            else:
                self.exec_block(stmt.orelse, env)
        elif isinstance(stmt, ast.Break):
            raise _Break()
        elif isinstance(stmt, ast.Continue):
            raise _Continue()
        elif isinstance(stmt, ast.Pass):
            pass
        else:  # pragma: no cover
            raise EvalError("type-mismatch", f"unsupported statement {type(stmt).__name__}", stmt.span)
        return None

    def assign(self, target, value, env: Environment) -> None:
        if isinstance(target, ast.Name):
            env.assign(target.id, value)
        elif isinstance(target, ast.Subscript):
            container = self.eval(target.value, env)
            index = self.eval(target.index, env)
            self.set_item(container, index, value, target.span)
        elif isinstance(target, (ast.TupleExpr, ast.ListExpr)):
            items = list(self.iterate(value, target.span))
            if len(items) != len(target.elts):
                raise EvalError(
                    "value-error",
                    f"cannot unpack {len(items)} values into {len(target.elts)} names",
                    target.span,
                )
            for sub, item in zip(target.elts, items):
                self.assign(sub, item, env)
        else:  # pragma: no cover
            raise EvalError("type-mismatch", "cannot assign to expression", target.span)

    def aug_assign(self, stmt: ast.AugAssign, env: Environment) -> None:
        target = stmt.target
        if isinstance(target, ast.Name):
            current = self.eval(target, env)
            env.assign(target.id, self.binop(stmt.op, current, self.eval(stmt.value, env), stmt.span))
            return
        container = self.eval(target.value, env)
        index = self.eval(target.index, env)
        current = self.get_item(container, index, target.span)
        updated = self.binop(stmt.op, current, self.eval(stmt.value, env), stmt.span)
        self.set_item(container, index, updated, target.span)

    # -- expressions ---------------------------------------------------------

    def eval(self, node, env: Environment):
        method = getattr(self, "eval_" + type(node).__name__)
        return method(node, env)

    def eval_Const(self, node: ast.Const, env):
        return node.value

    def eval_Name(self, node: ast.Name, env: Environment):
        value = env.lookup(node.id)
        if value is not _MISSING:
            return value
        value = self.hosts.lookup(node.id)
        if value is not _MISSING:
            return value
        if node.id in BUILTINS:
            return BUILTINS[node.id]
        raise EvalError("name-unbound", f"name '{node.id}' is not defined", node.span)

    def eval_JoinedStr(self, node: ast.JoinedStr, env):
        out = []
        for part in node.parts:
            if isinstance(part, str):
                out.append(part)
                continue
            value = self.eval(part.value, env)
            if part.conversion == "r":
                value = repr(value)
            elif part.conversion == "a":
                value = ascii(value)
            elif part.conversion == "s":
                value = str(value)
            try:
                out.append(format(value, part.spec))
            except (TypeError, ValueError) as exc:
                raise EvalError("type-mismatch", f"cannot format {type_name(value)} with {part.spec!r}: {exc}", part.span)
        return "".join(out)

    def eval_ListExpr(self, node: ast.ListExpr, env):
        return [self.eval(e, env) for e in node.elts]

    def eval_TupleExpr(self, node: ast.TupleExpr, env):
        return tuple(self.eval(e, env) for e in node.elts)

    def eval_DictExpr(self, node: ast.DictExpr, env):
        out = {}
        for k, v in zip(node.keys, node.values):
            key = self.eval(k, env)
            self.check_key(key, k.span)
            out[key] = self.eval(v, env)
        return out

    def eval_BinOp(self, node: ast.BinOp, env):
        left = self.eval(node.left, env)
        right = self.eval(node.right, env)
        return self.binop(node.op, left, right, node.span)

    def eval_UnaryOp(self, node: ast.UnaryOp, env):
        value = self.eval(node.operand, env)
        if node.op == "not":
            return not self.truthy(value)
        if not _is_number(value):
            raise EvalError("type-mismatch", f"bad operand type for unary {node.op}: '{type_name(value)}'", node.span)
        return -value if node.op == "-" else +value

    def eval_BoolOp(self, node: ast.BoolOp, env):
        value = None
        for sub in node.values:
            value = self.eval(sub, env)
            if (node.op == "and") != self.truthy(value):
                return value
        return value

    def eval_Compare(self, node: ast.Compare, env):
        left = self.eval(node.left, env)
        for op, right_node in zip(node.ops, node.comparators):
            right = self.eval(right_node, env)
            if not self.compare(op, left, right, node.span):
                return False
            left = right
        return True

    def eval_IfExp(self, node: ast.IfExp, env):
        if self.truthy(self.eval(node.test, env)):
            return self.eval(node.body, env)
        return self.eval(node.orelse, env)

    def eval_Call(self, node: ast.Call, env):
        func = self.eval(node.func, env)
        args = [self.eval(a, env) for a in node.args]
        kwargs = {k.name: self.eval(k.value, env) for k in node.keywords}
        return self.call(func, args, kwargs, node.span)

    def eval_Attribute(self, node: ast.Attribute, env):
        obj = self.eval(node.value, env)
        return self.get_attr(obj, node.attr, node.span)

    def eval_Subscript(self, node: ast.Subscript, env):
        container = self.eval(node.value, env)
        index = self.eval(node.index, env)
        return self.get_item(container, index, node.span)

    def eval_Slice(self, node: ast.Slice, env):
        parts = []
        for sub in (node.lower, node.upper, node.step):
            value = None if sub is None else self.eval(sub, env)
            if value is not None and not isinstance(value, int):
                raise EvalError("type-mismatch", f"slice indices must be integers or None, not {type_name(value)}", node.span)
            parts.append(value)
        if parts[2] == 0:
            raise EvalError("value-error", "slice step cannot be zero", node.span)
        return slice(*parts)

    def eval_Comprehension(self, node: ast.Comprehension, env: Environment):
        scope = env.child()
        if node.kind == "gen":
            return GeneratorValue(self._comp_items(node, node.generators, scope))
        if node.kind == "list":
            return list(self._comp_items(node, node.generators, scope))
        out = {}
        for key, value in self._comp_items(node, node.generators, scope):
            self.check_key(key, node.span)
            out[key] = value
        return out

    def _comp_items(self, node: ast.Comprehension, gens: list, scope: Environment):
        gen, rest = gens[0], gens[1:]
        iterable = self.eval(gen.iter, scope)
        for item in self.iterate(iterable, gen.span):
            self.assign(gen.target, item, scope)
            if not all(self.truthy(self.eval(cond, scope)) for cond in gen.ifs):
                continue
            if rest:
                yield from self._comp_items(node, rest, scope)
            elif node.kind == "dict":
                yield self.eval(node.key, scope), self.eval(node.elt, scope)
            else:
                yield self.eval(node.elt, scope)

    # -- operations ----------------------------------------------------------

    def truthy(self, value) -> bool:
        if isinstance(value, GeneratorValue):
            return True
        return bool(value)

    def binop(self, op: str, left, right, span: Span):
        if op in ("*",):
            self._check_repeat(left, right, span)
        if op == "**" and isinstance(left, int) and isinstance(right, int) and right > 0:
            if abs(left) > 1 and right * max(1, abs(left).bit_length()) > 4_000_000:
                raise EvalError("value-error", "integer power result is too large", span)
        if isinstance(left, (HostHandle, GeneratorValue, Builtin, BoundMethod, HostFunction)) or isinstance(
            right, (HostHandle, GeneratorValue, Builtin, BoundMethod, HostFunction)
        ):
            raise EvalError(
                "type-mismatch",
                f"unsupported operand types for {op}: '{type_name(left)}' and '{type_name(right)}'",
                span,
            )
        try:
            return _BINOPS[op](left, right)
        except TypeError:
            raise EvalError(
                "type-mismatch",
                f"unsupported operand types for {op}: '{type_name(left)}' and '{type_name(right)}'",
                span,
            ) from None
        except ZeroDivisionError:
            raise EvalError("value-error", "division by zero", span) from None
        except (OverflowError, ValueError) as exc:
            raise EvalError("value-error", str(exc), span) from None

    def _check_repeat(self, left, right, span: Span) -> None:
        for seq, n in ((left, right), (right, left)):
            if isinstance(seq, (str, list, tuple)) and isinstance(n, int):
                if len(seq) * max(n, 0) > self.limits.max_sequence:
                    raise EvalError("value-error", "repetition result is too large", span)

    def compare(self, op: str, left, right, span: Span) -> bool:
        try:
            if op == "in" or op == "not in":
                if isinstance(right, GeneratorValue):
                    found = any(item == left for item in self.iterate(right, span))
                elif isinstance(right, (str, list, tuple, dict, range)):
                    found = left in right
                else:
                    raise TypeError
                return found if op == "in" else not found
            return _COMPARATORS[op](left, right)
        except TypeError:
            if op in ("in", "not in"):
                msg = f"argument of type '{type_name(right)}' is not a container"
                if isinstance(right, str):
                    msg = f"'in <string>' requires string as left operand, not {type_name(left)}"
            else:
                msg = f"'{op}' not supported between '{type_name(left)}' and '{type_name(right)}'"
            raise EvalError("type-mismatch", msg, span) from None

    def iterate(self, value, span: Span) -> Iterator[Any]:
        if isinstance(value, list):
            i = 0
            while i < len(value):
                self.step(span)
                yield value[i]
                i += 1
            return
        if isinstance(value, dict):
            value = list(value)
        elif not isinstance(value, (str, tuple, range, GeneratorValue)):
            raise EvalError("type-mismatch", f"'{type_name(value)}' object is not iterable", span)
        for item in value:
            self.step(span)
            yield item

    def check_key(self, key, span: Span) -> None:
        try:
            hash(key)
        except TypeError:
            raise EvalError("type-mismatch", f"unhashable type: '{type_name(key)}'", span) from None

    def get_item(self, container, index, span: Span):
        if isinstance(container, dict):
            self.check_key(index, span)
            if index not in container:
                keys = ", ".join(repr(k) for k in list(container)[:8])
                more = ", ..." if len(container) > 8 else ""
                raise EvalError("key-missing", f"key {index!r} not found; available keys: [{keys}{more}]", span)
            return container[index]
        if isinstance(container, (list, tuple, str, range)):
            if isinstance(index, slice):
                return container[index]
            if not isinstance(index, int):
                raise EvalError(
                    "type-mismatch", f"{type_name(container)} indices must be integers or slices, not {type_name(index)}", span
                )
            if not -len(container) <= index < len(container):
                raise EvalError(
                    "index-out-of-range",
                    f"{type_name(container)} index {index} out of range for length {len(container)}",
                    span,
                )
            return container[index]
        raise EvalError("type-mismatch", f"'{type_name(container)}' object is not subscriptable", span)

    def set_item(self, container, index, value, span: Span) -> None:
        if isinstance(container, dict):
            self.check_key(index, span)
            container[index] = value
            return
        if isinstance(container, list):
            if isinstance(index, slice):
                container[index] = list(self.iterate(value, span))
                return
            if not isinstance(index, int):
                raise EvalError("type-mismatch", f"list indices must be integers, not {type_name(index)}", span)
            if not -len(container) <= index < len(container):
                raise EvalError(
                    "index-out-of-range", f"list assignment index {index} out of range for length {len(container)}", span
                )
            container[index] = value
            return
        raise EvalError("type-mismatch", f"'{type_name(container)}' object does not support item assignment", span)

    def get_attr(self, obj, name: str, span: Span):
        if isinstance(obj, HostHandle):
            if name in obj.methods:
                return obj.methods[name]
            available = ", ".join(sorted(obj.methods)) or "none"
            raise EvalError("type-mismatch", f"handle has no attribute '{name}'; available: {available}", span)
        table = _method_table(obj)
        if name in table:
            return BoundMethod(obj, name, table[name])
        available = ", ".join(sorted(table)) or "none"
        raise EvalError(
            "type-mismatch", f"'{type_name(obj)}' object has no attribute '{name}'; available methods: {available}", span
        )

    def call(self, func, args: list, kwargs: dict, span: Span):
        if isinstance(func, HostHandle):
            if func.call is None:
                raise EvalError("type-mismatch", f"{func!r} is not callable", span)
            func = func.call
        if isinstance(func, HostFunction):
            return self.call_host(func, args, kwargs, span)
        if isinstance(func, Builtin):
            return self._guarded(func.name, lambda: func.fn(self, span, *args, **kwargs), span)
        if isinstance(func, BoundMethod):
            return self._guarded(func.name, lambda: func.fn(self, span, func.obj, *args, **kwargs), span)
        raise EvalError("type-mismatch", f"'{type_name(func)}' object is not callable", span)

    def call_host(self, func: HostFunction, args: list, kwargs: dict, span: Span):
        try:
            func.check_arguments(tuple(args), kwargs)
        except TypeError as exc:
            raise EvalError("type-mismatch", str(exc), span) from None
        if func.effect == "terminal":
            try:
                value = func.fn(*args, **kwargs)
            except Exception as exc:
                raise EvalError("host-failure", f"{func.name}: {exc}", span) from None
            raise _TerminalSignal(Terminal(value))
        try:
            return func.fn(*args, **kwargs)
        except (_TerminalSignal, _Break, _Continue):  # pragma: no cover
            raise
        except FormalError as exc:
            raise EvalError("host-failure", f"{func.name}: {exc.render()}", span) from None
        except Exception as exc:
            raise EvalError("host-failure", f"{func.name}: {exc}", span) from None

    def _guarded(self, name: str, thunk: Callable[[], Any], span: Span):
        try:
            return thunk()
        except (EvalError, _TerminalSignal):
            raise
        except TypeError as exc:
            raise EvalError("type-mismatch", f"{name}(): {exc}", span) from None
        except IndexError as exc:
            raise EvalError("index-out-of-range", f"{name}(): {exc}", span) from None
        except KeyError as exc:
            raise EvalError("key-missing", f"{name}(): key {exc} not found", span) from None
        except (ValueError, ZeroDivisionError, OverflowError, InvalidOperation) as exc:
            raise EvalError("value-error", f"{name}(): {exc}", span) from None

    def call_key(self, key, item, span: Span):
        return item if key is None else self.call(key, [item], {}, span)


def _is_number(value) -> bool:
    return isinstance(value, (int, float))


def _div(a, b):
    if not (_is_number(a) and _is_number(b)):
        raise TypeError
    return a / b


_BINOPS: dict[str, Callable[[Any, Any], Any]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "//": lambda a, b: a // b,
    "%": lambda a, b: a % b,
    "**": lambda a, b: a**b,
}

_COMPARATORS: dict[str, Callable[[Any, Any], bool]] = {
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "is": lambda a, b: a is b,
    "is not": lambda a, b: a is not b,
}


# -- builtins ------------------------------------------------------------------


def _print(ev: _Evaluator, span, *args, sep=" ", end="\n"):
    if not isinstance(sep, str) or not isinstance(end, str):
        raise TypeError("sep and end must be strings")
    ev._out.append(sep.join(str(a) for a in args) + end)


def _len(ev, span, value):
    if isinstance(value, (str, list, tuple, dict, range)):
        return len(value)
    raise TypeError(f"object of type '{type_name(value)}' has no len()")


def _sum(ev, span, iterable, start=0):
    total = start
    for item in ev.iterate(iterable, span):
        total = ev.binop("+", total, item, span)
    return total


def _extreme(better: Callable[[Any, Any], bool], name: str):
    def impl(ev: _Evaluator, span, *args, key=None, default=_MISSING):
        if not args:
            raise TypeError(f"{name} expected at least 1 argument, got 0")
        items = ev.iterate(args[0], span) if len(args) == 1 else iter(args)
        best = best_key = _MISSING
        for item in items:
            k = ev.call_key(key, item, span)
            # strict comparison: the first of several equal maxima wins
            if best is _MISSING or better(k, best_key):
                best, best_key = item, k
        if best is _MISSING:
            if default is not _MISSING:
                return default
            raise ValueError(f"{name}() arg is an empty sequence")
        return best

    return impl


def _sorted(ev: _Evaluator, span, iterable, key=None, reverse=False):
    items = list(ev.iterate(iterable, span))
    keys = [ev.call_key(key, item, span) for item in items]
    order = sorted(range(len(items)), key=lambda i: keys[i], reverse=bool(reverse))
    return [items[i] for i in order]


def round_half_away(value, ndigits=None):
    """Round with ties away from zero (not Python's banker's rounding)."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"type {type_name(value)} doesn't define rounding")
    if ndigits is not None and (isinstance(ndigits, bool) or not isinstance(ndigits, int)):
        raise TypeError("ndigits must be an integer")
    exact = Decimal(value) if isinstance(value, int) else Decimal(repr(value))
    quantum = Decimal(1).scaleb(-(ndigits or 0))
    rounded = exact.quantize(quantum, rounding=ROUND_HALF_UP) if (ndigits or 0) >= 0 else (
        (exact / quantum).quantize(Decimal(1), rounding=ROUND_HALF_UP) * quantum
    )
    if ndigits is None or isinstance(value, int):
        return int(rounded)
    return float(rounded)


def _round(ev, span, value, ndigits=None):
    return round_half_away(value, ndigits)


def _range(ev, span, *args):
    if not 1 <= len(args) <= 3 or any(isinstance(a, bool) or not isinstance(a, int) for a in args):
        raise TypeError("range() takes 1 to 3 integer arguments")
    return range(*args)


def _zip(ev: _Evaluator, span, *iterables):
    iters = [ev.iterate(it, span) for it in iterables]
    out = []
    if not iters:
        return out
    while True:
        row = []
        for it in iters:
            try:
                row.append(next(it))
            except StopIteration:
                return out
        out.append(tuple(row))


def _dict(ev: _Evaluator, span, source=_MISSING, **kwargs):
    out: dict = {}
    if source is not _MISSING:
        if isinstance(source, dict):
            out.update(source)
        else:
            for pair in ev.iterate(source, span):
                pair = list(ev.iterate(pair, span)) if not isinstance(pair, str) else None
                if pair is None or len(pair) != 2:
                    raise ValueError("dictionary update sequence element has wrong length; 2 is required")
                ev.check_key(pair[0], span)
                out[pair[0]] = pair[1]
    out.update(kwargs)
    return out


def _list(ev, span, iterable=()):
    return list(ev.iterate(iterable, span))


def _tuple(ev, span, iterable=()):
    return tuple(ev.iterate(iterable, span))


def _str(ev, span, value=""):
    return str(value)


def _int(ev, span, value=0):
    if isinstance(value, str):
        return int(value.strip())
    if isinstance(value, (int, float)):
        return int(value)
    raise TypeError(f"int() argument must be a string or a number, not '{type_name(value)}'")


def _float(ev, span, value=0.0):
    if isinstance(value, (str, int, float)):
        return float(value)
    raise TypeError(f"float() argument must be a string or a number, not '{type_name(value)}'")


def _bool(ev, span, value=False):
    return ev.truthy(value)


def _abs(ev, span, value):
    if not _is_number(value):
        raise TypeError(f"bad operand type for abs(): '{type_name(value)}'")
    return abs(value)


def _enumerate(ev, span, iterable, start=0):
    return [(start + i, item) for i, item in enumerate(ev.iterate(iterable, span))]


def _any(ev, span, iterable):
    return any(ev.truthy(x) for x in ev.iterate(iterable, span))


def _all(ev, span, iterable):
    return all(ev.truthy(x) for x in ev.iterate(iterable, span))


BUILTINS: dict[str, Builtin] = {
    name: Builtin(name, fn)
    for name, fn in {
        "print": _print,
        "len": _len,
        "sum": _sum,
        "max": _extreme(lambda a, b: a > b, "max"),
        "min": _extreme(lambda a, b: a < b, "min"),
        "sorted": _sorted,
        "round": _round,
        "range": _range,
        "zip": _zip,
        "dict": _dict,
        "list": _list,
        "str": _str,
        "int": _int,
        "float": _float,
        # additive: small conveniences with unambiguous semantics
        "tuple": _tuple,
        "bool": _bool,
        "abs": _abs,
        "enumerate": _enumerate,
        "any": _any,
        "all": _all,
    }.items()
}


# -- methods -------------------------------------------------------------------


def _plain(name: str):
    def impl(ev, span, obj, *args):
        return getattr(obj, name)(*args)

    return impl


def _join(ev: _Evaluator, span, sep: str, iterable):
    items = list(ev.iterate(iterable, span))
    for i, item in enumerate(items):
        if not isinstance(item, str):
            raise TypeError(f"sequence item {i}: expected str instance, {type_name(item)} found")
    return sep.join(items)


def _split(ev, span, s: str, sep=None, maxsplit=-1):
    return s.split(sep, maxsplit)


def _extend(ev: _Evaluator, span, lst: list, iterable):
    lst.extend(list(ev.iterate(iterable, span)))


def _update(ev: _Evaluator, span, d: dict, other=_MISSING, **kwargs):
    d.update(_dict(ev, span, other, **kwargs))


def _as_list(name: str):
    def impl(ev, span, d: dict):
        return list(getattr(d, name)())

    return impl


def _items(ev, span, d: dict):
    return [tuple(kv) for kv in d.items()]


def _dict_get(ev: _Evaluator, span, d: dict, key, default=None):
    ev.check_key(key, span)
    return d.get(key, default)


def _list_pop(ev, span, lst: list, *args):
    if not lst:
        raise IndexError("pop from empty list")
    return lst.pop(*args)


STR_METHODS = {
    "count": _plain("count"),
    "join": _join,
    "split": _split,
    "strip": _plain("strip"),
    "lower": _plain("lower"),
    "upper": _plain("upper"),
    "startswith": _plain("startswith"),
    "endswith": _plain("endswith"),
    "replace": _plain("replace"),
    "lstrip": _plain("lstrip"),
    "rstrip": _plain("rstrip"),
    "splitlines": _plain("splitlines"),
    "find": _plain("find"),
}
LIST_METHODS = {
    "append": _plain("append"),
    "extend": _extend,
    "count": _plain("count"),
    "index": _plain("index"),
    "pop": _list_pop,
    "insert": _plain("insert"),
    "copy": _plain("copy"),
}
TUPLE_METHODS = {"count": _plain("count"), "index": _plain("index")}
DICT_METHODS = {
    "get": _dict_get,
    "keys": _as_list("keys"),
    "values": _as_list("values"),
    "items": _items,
    "pop": _plain("pop"),
    "update": _update,
    "setdefault": _plain("setdefault"),
    "copy": _plain("copy"),
}


def _method_table(obj) -> dict:
    if isinstance(obj, str):
        return STR_METHODS
    if isinstance(obj, list):
        return LIST_METHODS
    if isinstance(obj, tuple):
        return TUPLE_METHODS
    if isinstance(obj, dict):
        return DICT_METHODS
    return {}
