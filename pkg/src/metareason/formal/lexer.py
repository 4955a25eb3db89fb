"""Tokenizer for the formal language.

The surface syntax is a small, indentation-sensitive subset of Python. Interpolated
strings (``f"..."``) are split into literal chunks and embedded expression regions
here; the parser tokenizes each region again with its original source offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import LexError, Span

KEYWORDS = frozenset(
    {
        "and", "or", "not", "in", "is", "if", "elif", "else", "for",
        "None", "True", "False", "pass", "break", "continue",
        # reserved so that unsupported statements fail loudly in the parser
        "def", "class", "import", "from", "while", "try", "except", "lambda",
        "return", "with", "yield", "global", "del", "raise", "async", "await",
    }
)

# longest first
OPERATORS = (
    "**=", "//=", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "**", "//",
    "->", "+", "-", "*", "/", "%", "<", ">", "=", "(", ")", "[", "]", "{", "}",
    ",", ":", ".", ";",
)

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {")", "]", "}"}
_SIMPLE_ESCAPES = {
    "n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"',
    "0": "\0", "a": "\a", "b": "\b", "f": "\f", "v": "\v",
}


@dataclass(frozen=True)
class Field:
    """One ``{expr!conv:spec}`` region of an interpolated string."""

    source: str
    span: Span
    conversion: str | None = None
    spec: str = ""


@dataclass(frozen=True)
class Token:
    kind: str  # NAME KW NUMBER STRING FSTRING OP NEWLINE INDENT DEDENT EOF
    value: object
    span: Span

    def is_op(self, *ops: str) -> bool:
        return self.kind == "OP" and self.value in ops

    def is_kw(self, *words: str) -> bool:
        return self.kind == "KW" and self.value in words


@dataclass
class _Scanner:
    text: str
    line: int = 1
    col: int = 1
    pos: int = 0
    tokens: list[Token] = field(default_factory=list)

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def advance(self, n: int = 1) -> str:
        out = self.text[self.pos : self.pos + n]
        for ch in out:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n
        return out

    @property
    def span(self) -> Span:
        return Span(self.line, self.col)


def tokenize(source: str, start: Span | None = None, *, inline: bool = False) -> list[Token]:
    """Split ``source`` into tokens.

    ``inline`` tokenizes a single expression region (an f-string field): no
    indentation tracking and no trailing NEWLINE.
    """
    sc = _Scanner(source)
    if start is not None:
        sc.line, sc.col = start.line, start.col
    indents = [0]
    depth: list[str] = []
    at_line_start = not inline

    while sc.pos < len(sc.text):
        if at_line_start:
            at_line_start = False
            width = 0
            while sc.peek() in (" ", "\t"):
                width = (width // 8 + 1) * 8 if sc.peek() == "\t" else width + 1
                sc.advance()
            ch = sc.peek()
            if ch in ("\n", "#", "\r", ""):
                # blank or comment-only line: no indentation change
                while sc.peek() not in ("\n", ""):
                    sc.advance()
                if sc.peek() == "\n":
                    sc.advance()
                    at_line_start = True
                continue
            if width > indents[-1]:
                indents.append(width)
                sc.tokens.append(Token("INDENT", width, sc.span))
            else:
                while width < indents[-1]:
                    indents.pop()
                    sc.tokens.append(Token("DEDENT", width, sc.span))
                if width != indents[-1]:
                    raise LexError("unindent does not match any outer indentation level", sc.span)

        ch = sc.peek()
        if ch == "\n":
            if not depth and not inline:
                if sc.tokens and sc.tokens[-1].kind not in ("NEWLINE", "INDENT", "DEDENT"):
                    sc.tokens.append(Token("NEWLINE", None, sc.span))
                at_line_start = True
            sc.advance()
            continue
        if ch in (" ", "\t", "\r", "\f"):
            sc.advance()
            continue
        if ch == "#":
            while sc.peek() not in ("\n", ""):
                sc.advance()
            continue
        if ch == "\\" and sc.peek(1) == "\n":
            sc.advance(2)
            continue
        if ch.isalpha() or ch == "_" or ord(ch) > 127 and ch.isidentifier():
            if _string_prefix_at(sc) is not None:
                _lex_string(sc)
                continue
            span = sc.span
            start_pos = sc.pos
            while sc.peek() and (sc.peek().isalnum() or sc.peek() == "_" or ord(sc.peek()) > 127 and sc.peek().isidentifier()):
                sc.advance()
            word = sc.text[start_pos : sc.pos]
            sc.tokens.append(Token("KW" if word in KEYWORDS else "NAME", word, span))
            continue
        if ch.isdigit() or ch == "." and sc.peek(1).isdigit():
            _lex_number(sc)
            continue
        if ch in ("'", '"'):
            _lex_string(sc)
            continue
        for op in OPERATORS:
            if sc.text.startswith(op, sc.pos):
                span = sc.span
                sc.advance(len(op))
                if op in _OPEN:
                    depth.append(op)
                elif op in _CLOSE:
                    if depth and _OPEN[depth[-1]] == op:
                        depth.pop()
                    # an unbalanced closer is left to the parser to report
                sc.tokens.append(Token("OP", op, span))
                break
        else:
            raise LexError(f"illegal character {ch!r}", sc.span)

    if depth and not inline:
        # unclosed bracket: parser reports it at EOF
        pass
    if not inline:
        if sc.tokens and sc.tokens[-1].kind not in ("NEWLINE", "DEDENT", "INDENT"):
            sc.tokens.append(Token("NEWLINE", None, sc.span))
        while len(indents) > 1:
            indents.pop()
            sc.tokens.append(Token("DEDENT", 0, sc.span))
    sc.tokens.append(Token("EOF", None, sc.span))
    return sc.tokens


def _lex_number(sc: _Scanner) -> None:
    span = sc.span
    start = sc.pos
    is_float = False
    while sc.peek().isdigit() or sc.peek() == "_":
        sc.advance()
    if sc.peek() == "." and not sc.peek(1).isalpha() and sc.peek(1) != "_":
        is_float = True
        sc.advance()
        while sc.peek().isdigit() or sc.peek() == "_":
            sc.advance()
    if sc.peek() in ("e", "E") and (sc.peek(1).isdigit() or sc.peek(1) in "+-" and sc.peek(2).isdigit()):
        is_float = True
        sc.advance(2)
        while sc.peek().isdigit():
            sc.advance()
    raw = sc.text[start : sc.pos].replace("_", "")
    if sc.peek().isalpha() or sc.peek() == "_":
        raise LexError(f"invalid number literal {raw + sc.peek()!r}", span)
    sc.tokens.append(Token("NUMBER", float(raw) if is_float else int(raw), span))


def _string_prefix_at(sc: _Scanner) -> str | None:
    for length in (2, 1):
        prefix = sc.text[sc.pos : sc.pos + length]
        nxt = sc.peek(length)
        if nxt in ("'", '"') and prefix.lower() in ("f", "r", "fr", "rf", "b", "u"):
            return prefix.lower()
    return None


def _lex_string(sc: _Scanner) -> None:
    span = sc.span
    prefix = _string_prefix_at(sc) or ""
    sc.advance(len(prefix))
    if "b" in prefix:
        raise LexError("bytes literals are not supported", span)
    quote = sc.peek()
    triple = sc.peek(1) == quote and sc.peek(2) == quote
    delim = quote * 3 if triple else quote
    sc.advance(len(delim))
    raw = "r" in prefix
    body_start = sc.span
    chunks: list[str] = []
    while True:
        ch = sc.peek()
        if ch == "":
            raise LexError("unterminated string literal", span)
        if sc.text.startswith(delim, sc.pos):
            sc.advance(len(delim))
            break
        if ch == "\n" and not triple:
            raise LexError("unterminated string literal", span)
        if ch == "\\":
            nxt = sc.peek(1)
            if nxt == "":
                raise LexError("unterminated string literal", span)
            if raw:
                chunks.append(sc.advance(2))
                continue
            if "f" in prefix:
                # escapes are decoded per literal chunk after field splitting
                chunks.append(sc.advance(2))
                continue
            chunks.append(_decode_escape(sc, span))
            continue
        chunks.append(sc.advance())
    text = "".join(chunks)
    if "f" in prefix:
        parts = _split_fstring(text, body_start, raw, span)
        sc.tokens.append(Token("FSTRING", parts, span))
    else:
        sc.tokens.append(Token("STRING", text, span))


def _decode_escape(sc: _Scanner, span: Span) -> str:
    sc.advance()  # backslash
    ch = sc.advance()
    if ch == "\n":
        return ""
    if ch in _SIMPLE_ESCAPES:
        return _SIMPLE_ESCAPES[ch]
    if ch in ("x", "u", "U"):
        width = {"x": 2, "u": 4, "U": 8}[ch]
        digits = sc.text[sc.pos : sc.pos + width]
        if len(digits) != width or any(d not in "0123456789abcdefABCDEF" for d in digits):
            raise LexError(f"truncated \\{ch} escape", span)
        sc.advance(width)
        return chr(int(digits, 16))
    return "\\" + ch


def _decode_chunk(chunk: str, raw: bool, span: Span) -> str:
    if raw or "\\" not in chunk:
        return chunk
    sub = _Scanner(chunk)
    out: list[str] = []
    while sub.pos < len(sub.text):
        if sub.peek() == "\\" and sub.peek(1):
            out.append(_decode_escape(sub, span))
        else:
            out.append(sub.advance())
    return "".join(out)


def _split_fstring(text: str, start: Span, raw: bool, span: Span) -> list[str | Field]:
    """Split an f-string body into literal chunks and Field regions."""
    parts: list[str | Field] = []
    literal: list[str] = []
    i = 0
    line, col = start.line, start.col

    def bump(s: str) -> None:
        nonlocal line, col
        for c in s:
            if c == "\n":
                line += 1
                col = 1
            else:
                col += 1

    while i < len(text):
        ch = text[i]
        if ch == "{" and text.startswith("{{", i):
            literal.append("{")
            bump("{{")
            i += 2
            continue
        if ch == "}" and text.startswith("}}", i):
            literal.append("}")
            bump("}}")
            i += 2
            continue
        if ch == "}":
            raise LexError("single '}' is not allowed in an interpolated string", Span(line, col))
        if ch != "{":
            literal.append(ch)
            bump(ch)
            i += 1
            continue
        if literal:
            parts.append(_decode_chunk("".join(literal), raw, span))
            literal = []
        bump("{")
        i += 1
        expr_span = Span(line, col)
        j, conversion, spec_start = _scan_field(text, i, span)
        end = j
        expr_end = spec_start if spec_start is not None else end
        source = text[i:expr_end]
        spec = ""
        if conversion is not None:
            source = source[: source.rindex("!")]
        if spec_start is not None:
            spec = text[spec_start + 1 : end]
        if not source.strip():
            raise LexError("empty expression in interpolated string", expr_span)
        parts.append(Field(source, expr_span, conversion, spec))
        bump(text[i : end + 1])
        i = end + 1
    if literal:
        parts.append(_decode_chunk("".join(literal), raw, span))
    return parts


def _scan_field(text: str, i: int, span: Span) -> tuple[int, str | None, int | None]:
    """Find the closing brace of a field starting at ``i``.

    Returns (index of closing brace, conversion char or None, index of ':' or None).
    """
    nest = 0
    quote: str | None = None
    conversion = None
    spec_at = None
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if text.startswith(quote, i):
                i += len(quote)
                quote = None
                continue
            i += 1
            continue
        if ch in ("'", '"'):
            quote = ch * 3 if text.startswith(ch * 3, i) else ch
            i += len(quote)
            continue
        if ch in "([{":
            nest += 1
        elif ch in ")]" or ch == "}" and nest > 0:
            nest -= 1
        elif ch == "}" and nest == 0:
            return i, conversion, spec_at
        elif nest == 0 and spec_at is None:
            if ch == "!" and i + 1 < len(text) and text[i + 1] != "=":
                conv = text[i + 1 : i + 2]
                if conv not in ("r", "s", "a"):
                    raise LexError(f"invalid conversion {conv!r} in interpolated string", span)
                conversion = conv
            elif ch == ":":
                spec_at = i
                # the format spec runs to the matching brace
                depth = 0
                k = i + 1
                while k < len(text):
                    if text[k] == "{":
                        depth += 1
                    elif text[k] == "}":
                        if depth == 0:
                            return k, conversion, spec_at
                        depth -= 1
                    k += 1
                break
        i += 1
    raise LexError("unterminated field in interpolated string", span)
