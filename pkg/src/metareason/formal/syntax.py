"""AST node types, the recursive-descent parser, and an unparser."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError, Span
from .lexer import Field, Token, tokenize

_NOSPAN = Span(0, 0)


def _span() -> Span:
    return field(default=_NOSPAN, compare=False, repr=False)


# -- expressions -------------------------------------------------------------


@dataclass
class Const:
    value: object
    span: Span = _span()


@dataclass
class Name:
    id: str
    span: Span = _span()


@dataclass
class FormattedValue:
    value: object
    conversion: str | None
    spec: str
    span: Span = _span()


@dataclass
class JoinedStr:
    parts: list  # of str | FormattedValue
    span: Span = _span()


@dataclass
class ListExpr:
    elts: list
    span: Span = _span()


@dataclass
class TupleExpr:
    elts: list
    span: Span = _span()


@dataclass
class DictExpr:
    keys: list
    values: list
    span: Span = _span()


@dataclass
class BinOp:
    left: object
    op: str
    right: object
    span: Span = _span()


@dataclass
class UnaryOp:
    op: str  # "-", "+", "not"
    operand: object
    span: Span = _span()


@dataclass
class BoolOp:
    op: str  # "and" | "or"
    values: list
    span: Span = _span()


@dataclass
class Compare:
    left: object
    ops: list  # "<", "in", "not in", "is not", ...
    comparators: list
    span: Span = _span()


@dataclass
class IfExp:
    test: object
    body: object
    orelse: object
    span: Span = _span()


@dataclass
class Keyword:
    name: str
    value: object
    span: Span = _span()


@dataclass
class Call:
    func: object
    args: list
    keywords: list
    span: Span = _span()


@dataclass
class Attribute:
    value: object
    attr: str
    span: Span = _span()


@dataclass
class Slice:
    lower: object | None
    upper: object | None
    step: object | None
    span: Span = _span()


@dataclass
class Subscript:
    value: object
    index: object
    span: Span = _span()


@dataclass
class CompFor:
    target: object
    iter: object
    ifs: list
    span: Span = _span()


@dataclass
class Comprehension:
    kind: str  # "list" | "gen" | "dict"
    elt: object
    key: object | None  # dict comprehensions only
    generators: list
    span: Span = _span()


# -- statements --------------------------------------------------------------


@dataclass
class Assign:
    targets: list
    value: object
    span: Span = _span()


@dataclass
class AugAssign:
    target: object
    op: str
    value: object
    span: Span = _span()


@dataclass
class ExprStmt:
    value: object
    span: Span = _span()


@dataclass
class For:
    target: object
    iter: object
    body: list
    span: Span = _span()


@dataclass
class If:
    test: object
    body: list
    orelse: list
    span: Span = _span()


@dataclass
class Pass:
    span: Span = _span()


@dataclass
class Break:
    span: Span = _span()


@dataclass
class Continue:
    span: Span = _span()


@dataclass
class Program:
    statements: list


# -- parser ------------------------------------------------------------------

_COMPARE_OPS = ("<", ">", "==", "!=", "<=", ">=")
_AUG_OPS = ("+=", "-=", "*=", "/=", "//=", "%=", "**=")
_UNSUPPORTED = {
    "def": "function definitions",
    "class": "class definitions",
    "import": "imports",
    "from": "imports",
    "while": "while loops",
    "try": "exception handling",
    "except": "exception handling",
    "lambda": "lambda expressions",
    "return": "return statements",
    "with": "with statements",
    "yield": "generators functions",
    "global": "global declarations",
    "del": "del statements",
    "raise": "raise statements",
    "async": "async code",
    "await": "async code",
}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.loops = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.span)

    def expect_op(self, op: str) -> Token:
        if not self.tok.is_op(op):
            raise self.error(f"expected {op!r}, found {_describe(self.tok)}")
        return self.next()

    def expect_kw(self, kw: str) -> Token:
        if not self.tok.is_kw(kw):
            raise self.error(f"expected {kw!r}, found {_describe(self.tok)}")
        return self.next()

    def expect(self, kind: str) -> Token:
        if self.tok.kind != kind:
            raise self.error(f"expected {kind.lower()}, found {_describe(self.tok)}")
        return self.next()

    # statements

    def program(self) -> Program:
        body = []
        while self.tok.kind != "EOF":
            if self.tok.kind == "NEWLINE":
                self.next()
                continue
            if self.tok.kind == "INDENT":
                raise self.error("unexpected indent")
            body.extend(self.statement())
        return Program(body)

    def statement(self) -> list:
        tok = self.tok
        if tok.is_kw("for"):
            return [self.for_stmt()]
        if tok.is_kw("if"):
            return [self.if_stmt()]
        if tok.kind == "KW" and tok.value in _UNSUPPORTED:
            raise self.error(f"{_UNSUPPORTED[tok.value]} are not supported")
        return self.simple_statements()

    def simple_statements(self) -> list:
        stmts = [self.small_statement()]
        while self.tok.is_op(";"):
            self.next()
            if self.tok.kind == "NEWLINE":
                break
            stmts.append(self.small_statement())
        if self.tok.kind != "EOF":
            self.expect("NEWLINE")
        return stmts

    def small_statement(self):
        tok = self.tok
        if tok.is_kw("pass"):
            self.next()
            return Pass(tok.span)
        if tok.is_kw("break", "continue"):
            if not self.loops:
                raise self.error(f"'{tok.value}' outside loop")
            self.next()
            return Break(tok.span) if tok.value == "break" else Continue(tok.span)
        if tok.kind == "KW" and tok.value in _UNSUPPORTED:
            raise self.error(f"{_UNSUPPORTED[tok.value]} are not supported")
        first = self.testlist()
        if self.tok.kind == "OP" and self.tok.value in _AUG_OPS:
            op_tok = self.next()
            self.check_target(first, op_tok, augmented=True)
            return AugAssign(first, op_tok.value[:-1], self.testlist(), tok.span)
        if self.tok.is_op("="):
            targets = [first]
            while self.tok.is_op("="):
                eq = self.next()
                self.check_target(targets[-1], eq)
                targets.append(self.testlist())
            value = targets.pop()
            return Assign(targets, value, tok.span)
        return ExprStmt(first, tok.span)

    def check_target(self, node, tok: Token, augmented: bool = False) -> None:
        if isinstance(node, (Name, Subscript)):
            return
        if not augmented and isinstance(node, (TupleExpr, ListExpr)):
            for elt in node.elts:
                self.check_target(elt, tok)
            return
        raise ParseError("cannot assign to expression", tok.span)

    def suite(self) -> list:
        if self.tok.kind != "NEWLINE":
            return self.simple_statements()
        self.next()
        self.expect("INDENT")
        body = []
        while self.tok.kind not in ("DEDENT", "EOF"):
            if self.tok.kind == "NEWLINE":
                self.next()
                continue
            body.extend(self.statement())
        if self.tok.kind == "DEDENT":
            self.next()
        return body

    def for_stmt(self) -> For:
        tok = self.expect_kw("for")
        target = self.target_list()
        self.expect_kw("in")
        iterable = self.testlist()
        self.expect_op(":")
        self.loops += 1
        try:
            body = self.suite()
        finally:
            self.loops -= 1
        return For(target, iterable, body, tok.span)

    def if_stmt(self) -> If:
        tok = self.next()  # if / elif
        test = self.test()
        self.expect_op(":")
        body = self.suite()
        orelse: list = []
        if self.tok.is_kw("elif"):
            orelse = [self.if_stmt()]
        elif self.tok.is_kw("else"):
            self.next()
            self.expect_op(":")
            orelse = self.suite()
        return If(test, body, orelse, tok.span)

    def target_list(self):
        span = self.tok.span
        items = [self.target()]
        trailing = False
        while self.tok.is_op(","):
            self.next()
            trailing = True
            if self.tok.is_kw("in"):
                break
            items.append(self.target())
            trailing = False
        if len(items) == 1 and not trailing:
            return items[0]
        return TupleExpr(items, span)

    def target(self):
        tok = self.tok
        node = self.atom_expr()
        self.check_target(node, tok)
        return node

    # expressions

    def testlist(self):
        """Comma-separated expressions; more than one (or a trailing comma) forms a tuple."""
        span = self.tok.span
        first = self.test()
        if not self.tok.is_op(","):
            return first
        items = [first]
        while self.tok.is_op(","):
            self.next()
            if not self._starts_expression():
                break
            items.append(self.test())
        return TupleExpr(items, span)

    def _starts_expression(self) -> bool:
        t = self.tok
        if t.kind in ("NAME", "NUMBER", "STRING", "FSTRING"):
            return True
        if t.kind == "KW" and t.value in ("not", "None", "True", "False"):
            return True
        return t.kind == "OP" and t.value in ("(", "[", "{", "-", "+")

    def test(self):
        span = self.tok.span
        body = self.or_test()
        if self.tok.is_kw("if") :
            self.next()
            cond = self.or_test()
            self.expect_kw("else")
            return IfExp(cond, body, self.test(), span)
        return body

    def or_test(self):
        span = self.tok.span
        values = [self.and_test()]
        while self.tok.is_kw("or"):
            self.next()
            values.append(self.and_test())
        return values[0] if len(values) == 1 else BoolOp("or", values, span)

    def and_test(self):
        span = self.tok.span
        values = [self.not_test()]
        while self.tok.is_kw("and"):
            self.next()
            values.append(self.not_test())
        return values[0] if len(values) == 1 else BoolOp("and", values, span)

    def not_test(self):
        if self.tok.is_kw("not"):
            tok = self.next()
            return UnaryOp("not", self.not_test(), tok.span)
        return self.comparison()

    def comparison(self):
        span = self.tok.span
        left = self.arith()
        ops, comparators = [], []
        while True:
            t = self.tok
            if t.kind == "OP" and t.value in _COMPARE_OPS:
                self.next()
                ops.append(t.value)
            elif t.is_kw("in"):
                self.next()
                ops.append("in")
            elif t.is_kw("not") and self.tokens[self.i + 1].is_kw("in"):
                self.next()
                self.next()
                ops.append("not in")
            elif t.is_kw("is"):
                self.next()
                if self.tok.is_kw("not"):
                    self.next()
                    ops.append("is not")
                else:
                    ops.append("is")
            else:
                break
            comparators.append(self.arith())
        if not ops:
            return left
        return Compare(left, ops, comparators, span)

    def arith(self):
        node = self.term()
        while self.tok.kind == "OP" and self.tok.value in ("+", "-"):
            op = self.next()
            node = BinOp(node, op.value, self.term(), op.span)
        return node

    def term(self):
        node = self.factor()
        while self.tok.kind == "OP" and self.tok.value in ("*", "/", "//", "%"):
            op = self.next()
            node = BinOp(node, op.value, self.factor(), op.span)
        return node

    def factor(self):
        if self.tok.kind == "OP" and self.tok.value in ("-", "+"):
            op = self.next()
            return UnaryOp(op.value, self.factor(), op.span)
        return self.power()

    def power(self):
        node = self.atom_expr()
        if self.tok.is_op("**"):
            op = self.next()
            return BinOp(node, "**", self.factor(), op.span)
        return node

    def atom_expr(self):
        node = self.atom()
        while True:
            t = self.tok
            if t.is_op("("):
                node = self.call(node)
            elif t.is_op("["):
                self.next()
                index = self.subscript()
                self.expect_op("]")
                node = Subscript(node, index, t.span)
            elif t.is_op("."):
                self.next()
                name = self.tok
                if name.kind not in ("NAME", "KW"):
                    raise self.error(f"expected attribute name, found {_describe(name)}")
                self.next()
                node = Attribute(node, name.value, name.span)
            else:
                return node

    def call(self, func) -> Call:
        open_tok = self.expect_op("(")
        args: list = []
        keywords: list = []
        while not self.tok.is_op(")"):
            t = self.tok
            if t.kind == "NAME" and self.tokens[self.i + 1].is_op("="):
                self.next()
                self.next()
                if any(k.name == t.value for k in keywords):
                    raise ParseError(f"keyword argument repeated: {t.value}", t.span)
                keywords.append(Keyword(t.value, self.test(), t.span))
            else:
                if keywords:
                    raise self.error("positional argument follows keyword argument")
                value = self.test()
                if self.tok.is_kw("for"):
                    value = Comprehension("gen", value, None, self.comp_for(), t.span)
                args.append(value)
            if not self.tok.is_op(","):
                break
            self.next()
        self.expect_op(")")
        return Call(func, args, keywords, open_tok.span)

    def subscript(self):
        span = self.tok.span
        lower = upper = step = None
        if not self.tok.is_op(":"):
            lower = self.test()
            if not self.tok.is_op(":"):
                if self.tok.is_op(","):
                    raise self.error("tuple subscripts are not supported")
                return lower
        self.expect_op(":")
        if not self.tok.is_op(":", "]"):
            upper = self.test()
        if self.tok.is_op(":"):
            self.next()
            if not self.tok.is_op("]"):
                step = self.test()
        return Slice(lower, upper, step, span)

    def comp_for(self) -> list:
        generators = []
        while self.tok.is_kw("for"):
            tok = self.next()
            target = self.target_list()
            self.expect_kw("in")
            iterable = self.or_test()
            ifs = []
            while self.tok.is_kw("if"):
                self.next()
                ifs.append(self.or_test())
            generators.append(CompFor(target, iterable, ifs, tok.span))
        return generators

    def atom(self):
        t = self.tok
        if t.kind == "NAME":
            self.next()
            return Name(t.value, t.span)
        if t.kind == "NUMBER":
            self.next()
            return Const(t.value, t.span)
        if t.kind in ("STRING", "FSTRING"):
            return self.strings()
        if t.kind == "KW" and t.value in ("None", "True", "False"):
            self.next()
            return Const({"None": None, "True": True, "False": False}[t.value], t.span)
        if t.is_op("("):
            self.next()
            if self.tok.is_op(")"):
                self.next()
                return TupleExpr([], t.span)
            first = self.test()
            if self.tok.is_kw("for"):
                node = Comprehension("gen", first, None, self.comp_for(), t.span)
                self.expect_op(")")
                return node
            if self.tok.is_op(")"):
                self.next()
                return first
            items = [first]
            while self.tok.is_op(","):
                self.next()
                if self.tok.is_op(")"):
                    break
                items.append(self.test())
            self.expect_op(")")
            return TupleExpr(items, t.span)
        if t.is_op("["):
            self.next()
            if self.tok.is_op("]"):
                self.next()
                return ListExpr([], t.span)
            first = self.test()
            if self.tok.is_kw("for"):
                node = Comprehension("list", first, None, self.comp_for(), t.span)
                self.expect_op("]")
                return node
            items = [first]
            while self.tok.is_op(","):
                self.next()
                if self.tok.is_op("]"):
                    break
                items.append(self.test())
            self.expect_op("]")
            return ListExpr(items, t.span)
        if t.is_op("{"):
            self.next()
            if self.tok.is_op("}"):
                self.next()
                return DictExpr([], [], t.span)
            key = self.test()
            if not self.tok.is_op(":"):
                raise self.error("set literals are not supported")
            self.next()
            value = self.test()
            if self.tok.is_kw("for"):
                node = Comprehension("dict", value, key, self.comp_for(), t.span)
                self.expect_op("}")
                return node
            keys, values = [key], [value]
            while self.tok.is_op(","):
                self.next()
                if self.tok.is_op("}"):
                    break
                keys.append(self.test())
                self.expect_op(":")
                values.append(self.test())
            self.expect_op("}")
            return DictExpr(keys, values, t.span)
        if t.kind == "KW" and t.value in _UNSUPPORTED:
            raise self.error(f"{_UNSUPPORTED[t.value]} are not supported")
        raise self.error(f"unexpected {_describe(t)}")

    def strings(self):
        span = self.tok.span
        parts: list = []
        formatted = False
        while self.tok.kind in ("STRING", "FSTRING"):
            t = self.next()
            if t.kind == "STRING":
                parts.append(t.value)
                continue
            formatted = True
            for part in t.value:
                if isinstance(part, Field):
                    parts.append(self.field(part))
                else:
                    parts.append(part)
        if not formatted:
            return Const("".join(parts), span)
        merged: list = []
        for p in parts:
            if isinstance(p, str) and merged and isinstance(merged[-1], str):
                merged[-1] += p
            elif p != "":
                merged.append(p)
        return JoinedStr(merged, span)

    def field(self, f: Field) -> FormattedValue:
        tokens = tokenize(f.source, f.span, inline=True)
        sub = _Parser(tokens)
        value = sub.testlist()
        if sub.tok.kind != "EOF":
            raise sub.error(f"unexpected {_describe(sub.tok)} in interpolated string")
        return FormattedValue(value, f.conversion, f.spec, f.span)


def _describe(tok: Token) -> str:
    if tok.kind == "EOF":
        return "end of input"
    if tok.kind == "NEWLINE":
        return "end of line"
    if tok.kind in ("INDENT", "DEDENT"):
        return "indentation change"
    if tok.kind in ("STRING", "FSTRING"):
        return "string literal"
    return repr(tok.value)


def parse(source: str) -> Program:
    """Parse a code block. Raises LexError or ParseError."""
    parser = _Parser(tokenize(source))
    return parser.program()


# -- unparser ----------------------------------------------------------------

_PREC = {"or": 1, "and": 2, "not": 3, "cmp": 4, "+": 5, "-": 5, "*": 6, "/": 6, "//": 6, "%": 6, "unary": 7, "**": 8}


def unparse(program: Program) -> str:
    """Render a Program back to source. ``parse(unparse(p)) == p`` structurally."""
    lines: list[str] = []
    for stmt in program.statements:
        _unparse_stmt(stmt, 0, lines)
    return "\n".join(lines) + "\n"


def _unparse_stmt(stmt, indent: int, out: list[str]) -> None:
    pad = "    " * indent
    if isinstance(stmt, Assign):
        out.append(pad + " = ".join(_expr(t) for t in stmt.targets) + " = " + _expr(stmt.value))
    elif isinstance(stmt, AugAssign):
        out.append(f"{pad}{_expr(stmt.target)} {stmt.op}= {_expr(stmt.value)}")
    elif isinstance(stmt, ExprStmt):
        out.append(pad + _expr(stmt.value))
    elif isinstance(stmt, Pass):
        out.append(pad + "pass")
    elif isinstance(stmt, Break):
        out.append(pad + "break")
    elif isinstance(stmt, Continue):
        out.append(pad + "continue")
    elif isinstance(stmt, For):
        out.append(f"{pad}for {_expr(stmt.target)} in {_expr(stmt.iter)}:")
        _unparse_body(stmt.body, indent + 1, out)
    elif isinstance(stmt, If):
        out.append(f"{pad}if {_expr(stmt.test)}:")
        _unparse_body(stmt.body, indent + 1, out)
        if stmt.orelse:
            out.append(f"{pad}else:")
            _unparse_body(stmt.orelse, indent + 1, out)
    else:  # pragma: no cover
        raise TypeError(f"cannot unparse {stmt!r}")


def _unparse_body(body: list, indent: int, out: list[str]) -> None:
    if not body:
        out.append("    " * indent + "pass")
    for s in body:
        _unparse_stmt(s, indent, out)


def _wrap(node, parent_prec: int) -> str:
    text = _expr(node)
    if _prec(node) < parent_prec:
        return f"({text})"
    return text


def _prec(node) -> int:
    if isinstance(node, BoolOp):
        return _PREC[node.op]
    if isinstance(node, UnaryOp):
        return _PREC["not"] if node.op == "not" else _PREC["unary"]
    if isinstance(node, Compare):
        return _PREC["cmp"]
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, IfExp):
        return 0
    if isinstance(node, TupleExpr):
        return -1
    return 100


def _expr(node) -> str:
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Name):
        return node.id
    if isinstance(node, JoinedStr):
        return "(" + " ".join(_fstring_part(p) for p in node.parts) + ")" if node.parts else "f''"
    if isinstance(node, ListExpr):
        return "[" + ", ".join(_wrap(e, 1) for e in node.elts) + "]"
    if isinstance(node, TupleExpr):
        if len(node.elts) == 1:
            return "(" + _wrap(node.elts[0], 1) + ",)"
        return "(" + ", ".join(_wrap(e, 1) for e in node.elts) + ")"
    if isinstance(node, DictExpr):
        return "{" + ", ".join(f"{_wrap(k, 1)}: {_wrap(v, 1)}" for k, v in zip(node.keys, node.values)) + "}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        if node.op == "**":
            return f"{_wrap(node.left, p + 1)} ** {_wrap(node.right, p)}"
        return f"{_wrap(node.left, p)} {node.op} {_wrap(node.right, p + 1)}"
    if isinstance(node, UnaryOp):
        if node.op == "not":
            return "not " + _wrap(node.operand, _PREC["not"])
        return node.op + _wrap(node.operand, _PREC["unary"])
    if isinstance(node, BoolOp):
        p = _PREC[node.op]
        return f" {node.op} ".join(_wrap(v, p + 1) for v in node.values)
    if isinstance(node, Compare):
        p = _PREC["cmp"]
        text = _wrap(node.left, p + 1)
        for op, right in zip(node.ops, node.comparators):
            text += f" {op} {_wrap(right, p + 1)}"
        return text
    if isinstance(node, IfExp):
        return f"{_wrap(node.body, 1)} if {_wrap(node.test, 1)} else {_wrap(node.orelse, 0)}"
    if isinstance(node, Call):
        parts = [_wrap(a, 1) for a in node.args] + [f"{k.name}={_wrap(k.value, 1)}" for k in node.keywords]
        return f"{_wrap(node.func, 100)}(" + ", ".join(parts) + ")"
    if isinstance(node, Attribute):
        return f"{_wrap(node.value, 100)}.{node.attr}"
    if isinstance(node, Subscript):
        return f"{_wrap(node.value, 100)}[{_expr(node.index) if not isinstance(node.index, TupleExpr) else _wrap(node.index, 100)}]"
    if isinstance(node, Slice):
        lo = _wrap(node.lower, 1) if node.lower is not None else ""
        hi = _wrap(node.upper, 1) if node.upper is not None else ""
        text = f"{lo}:{hi}"
        if node.step is not None:
            text += ":" + _wrap(node.step, 1)
        return text
    if isinstance(node, Comprehension):
        gens = " ".join(
            f"for {_expr(g.target) if not isinstance(g.target, TupleExpr) else ', '.join(_expr(e) for e in g.target.elts) + (',' if len(g.target.elts) == 1 else '')} in {_wrap(g.iter, 1)}"
            + "".join(f" if {_wrap(c, 1)}" for c in g.ifs)
            for g in node.generators
        )
        if node.kind == "list":
            return f"[{_wrap(node.elt, 1)} {gens}]"
        if node.kind == "dict":
            return f"{{{_wrap(node.key, 1)}: {_wrap(node.elt, 1)} {gens}}}"
        return f"({_wrap(node.elt, 1)} {gens})"
    raise TypeError(f"cannot unparse {node!r}")  # pragma: no cover


def _fstring_part(part) -> str:
    if isinstance(part, str):
        return "f" + repr(part.replace("{", "{{").replace("}", "}}"))
    inner = _expr(part.value)
    if inner.startswith("{"):
        inner = " " + inner
    conv = f"!{part.conversion}" if part.conversion else ""
    spec = f":{part.spec}" if part.spec else ""
    for delim in ('"', "'", '"""', "'''"):
        if delim[0] not in inner:
            return f"f{delim}{{{inner}{conv}{spec}}}{delim}"
    raise ValueError("expression cannot be embedded in an interpolated string")  # pragma: no cover
