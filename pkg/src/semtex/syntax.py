"""Lexer, parser and printer for the semantic TeX subset.

The lexer is lossless: concatenating the lexemes of the token stream
reproduces the input bytes exactly.  Like TeX, a control word swallows the
whitespace that follows it (the whitespace stays inside the token's lexeme),
which is what lets the printer round-trip ASTs.

The parser knows the arities of the declaration commands (``\\symdef``,
``\\keydef``, ``\\importmodule``, ``\\metalanguage``, ``\\definiendum``) and
of the ``module``/``definition``/``document`` environments; everything else
is kept as opaque presentation content.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum

from .errors import LexError, ParseError, SourceSpan

# ── Tokens ──────────────────────────────────────────────────────────


class TokenKind(Enum):
    COMMAND = "command-name"
    BEGIN_GROUP = "begin-group"
    END_GROUP = "end-group"
    BEGIN_OPT = "begin-opt"
    END_OPT = "end-opt"
    MATH_SHIFT = "math-shift"
    SUPERSCRIPT = "superscript"
    PARAMETER = "parameter"
    TEXT = "text-run"
    COMMENT = "comment"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    span: SourceSpan = field(compare=False, default=SourceSpan("<synthetic>", 0, 0))

    @property
    def name(self) -> str:
        """Command name without the backslash or gobbled whitespace."""
        assert self.kind is TokenKind.COMMAND
        return self.lexeme[1:].rstrip()

    @property
    def param_index(self) -> int:
        assert self.kind is TokenKind.PARAMETER
        return int(self.lexeme[1])

    def key(self) -> tuple[TokenKind, str]:
        """Identity modulo insignificant gobbled whitespace."""
        if self.kind is TokenKind.COMMAND:
            return (self.kind, self.name)
        return (self.kind, self.lexeme)


_COMMAND_WORD = re.compile(r"[A-Za-z]+")
_WHITESPACE = re.compile(r"[ \t\r\n]+")
_SPECIALS = "\\{}[]$^#%"


def tokenize(source: str, origin: str = "<string>") -> list[Token]:
    """Lex ``source`` into tokens. Raises :class:`LexError` on bad input."""
    line_starts = [0]
    for i, ch in enumerate(source):
        if ch == "\n":
            line_starts.append(i + 1)

    def span(start: int, end: int) -> SourceSpan:
        line = bisect_right(line_starts, start)
        col = start - line_starts[line - 1] + 1
        return SourceSpan(origin, start, end, line, col)

    tokens: list[Token] = []
    pos = 0
    n = len(source)
    while pos < n:
        ch = source[pos]
        if ch == "\\":
            if pos + 1 >= n:
                raise LexError("lone backslash at end of input", span(pos, pos + 1))
            m = _COMMAND_WORD.match(source, pos + 1)
            if m:
                end = m.end()
                ws = _WHITESPACE.match(source, end)
                if ws:
                    end = ws.end()
                tokens.append(Token(TokenKind.COMMAND, source[pos:end], span(pos, end)))
                pos = end
            else:
                tokens.append(Token(TokenKind.COMMAND, source[pos : pos + 2], span(pos, pos + 2)))
                pos += 2
        elif ch == "{":
            tokens.append(Token(TokenKind.BEGIN_GROUP, ch, span(pos, pos + 1)))
            pos += 1
        elif ch == "}":
            tokens.append(Token(TokenKind.END_GROUP, ch, span(pos, pos + 1)))
            pos += 1
        elif ch == "[":
            tokens.append(Token(TokenKind.BEGIN_OPT, ch, span(pos, pos + 1)))
            pos += 1
        elif ch == "]":
            tokens.append(Token(TokenKind.END_OPT, ch, span(pos, pos + 1)))
            pos += 1
        elif ch == "$":
            tokens.append(Token(TokenKind.MATH_SHIFT, ch, span(pos, pos + 1)))
            pos += 1
        elif ch == "^":
            tokens.append(Token(TokenKind.SUPERSCRIPT, ch, span(pos, pos + 1)))
            pos += 1
        elif ch == "#":
            nxt = source[pos + 1] if pos + 1 < n else ""
            if nxt.isdigit():
                if nxt == "0":
                    raise LexError("parameter index must be between 1 and 9", span(pos, pos + 2))
                tokens.append(Token(TokenKind.PARAMETER, source[pos : pos + 2], span(pos, pos + 2)))
                pos += 2
            else:
                tokens.append(Token(TokenKind.TEXT, ch, span(pos, pos + 1)))
                pos += 1
        elif ch == "%":
            end = source.find("\n", pos)
            end = n if end < 0 else end + 1
            tokens.append(Token(TokenKind.COMMENT, source[pos:end], span(pos, end)))
            pos = end
        else:
            end = pos
            while end < n and source[end] not in _SPECIALS:
                end += 1
            tokens.append(Token(TokenKind.TEXT, source[pos:end], span(pos, end)))
            pos = end
    return tokens


# ── AST nodes ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class Text:
    value: str
    span: SourceSpan | None = field(compare=False, default=None)


class MathGroup:
    """Inline math: the raw token sequence between two ``$`` shifts."""

    __slots__ = ("tokens", "span")

    def __init__(self, tokens, span: SourceSpan | None = None):
        self.tokens = tuple(tokens)
        self.span = span

    def source(self) -> str:
        return "".join(t.lexeme for t in self.tokens)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MathGroup):
            return NotImplemented
        return [t.key() for t in self.tokens] == [t.key() for t in other.tokens]

    def __hash__(self) -> int:
        return hash(tuple(t.key() for t in self.tokens))

    def __repr__(self) -> str:
        return f"MathGroup({self.source()!r})"


@dataclass(frozen=True)
class Group:
    children: tuple
    tokens: tuple = field(compare=False, default=())
    span: SourceSpan | None = field(compare=False, default=None)

    def text_content(self) -> str:
        parts = []
        for c in self.children:
            if isinstance(c, Text):
                parts.append(c.value)
            elif isinstance(c, Group):
                parts.append(c.text_content())
        return "".join(parts)


@dataclass(frozen=True)
class KeyValList:
    """Ordered key/value pairs; values are strings, math groups or absent."""

    pairs: tuple = ()

    def __post_init__(self):
        keys = [k for k, _ in self.pairs]
        if len(keys) != len(set(keys)):
            raise ValueError(f"duplicate key in option list: {keys}")

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def keys(self):
        return [k for k, _ in self.pairs]

    def has(self, key: str) -> bool:
        return any(k == key for k, _ in self.pairs)

    def get(self, key: str, default=None):
        for k, v in self.pairs:
            if k == key:
                return v
        return default

    def without(self, *names: str) -> "KeyValList":
        return KeyValList(tuple((k, v) for k, v in self.pairs if k not in names))


EMPTY_KEYVALS = KeyValList()


@dataclass(frozen=True)
class Command:
    name: str
    opts: KeyValList = EMPTY_KEYVALS
    args: tuple = ()
    span: SourceSpan | None = field(compare=False, default=None)


@dataclass(frozen=True)
class Environment:
    name: str
    opts: KeyValList = EMPTY_KEYVALS
    body: tuple = ()
    span: SourceSpan | None = field(compare=False, default=None)


@dataclass(frozen=True)
class DocumentAST:
    nodes: tuple
    origin: str = field(compare=False, default="<string>")


Node = Command | Environment | Group | MathGroup | Text

# Commands with fixed syntactic arity: name -> (index of the optional
# bracket among the mandatory args, number of mandatory brace groups).
# \symdef puts its option bracket after the first argument.
COMMAND_SYNTAX: dict[str, tuple[int, int]] = {
    "symdef": (1, 2),
    "keydef": (0, 2),
    "importmodule": (0, 1),
    "metalanguage": (0, 1),
    "definiendum": (0, 1),
}

KNOWN_ENVIRONMENTS = ("module", "definition", "document")

# Token kinds that, in text position, melt into a plain text run.
_TEXTUAL = (
    TokenKind.TEXT,
    TokenKind.BEGIN_OPT,
    TokenKind.END_OPT,
    TokenKind.SUPERSCRIPT,
    TokenKind.PARAMETER,
)


class _Parser:
    def __init__(self, tokens: list[Token], origin: str):
        self.tokens = tokens
        self.pos = 0
        self.origin = origin

    # -- token helpers ------------------------------------------------

    def _peek(self) -> Token | None:
        i = self.pos
        while i < len(self.tokens) and self.tokens[i].kind is TokenKind.COMMENT:
            i += 1
        return self.tokens[i] if i < len(self.tokens) else None

    def _next(self) -> Token:
        while self.tokens[self.pos].kind is TokenKind.COMMENT:
            self.pos += 1
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _eof_span(self) -> SourceSpan:
        if self.tokens:
            last = self.tokens[-1].span
            return SourceSpan(self.origin, last.end, last.end, last.line, last.col)
        return SourceSpan(self.origin, 0, 0)

    # -- node parsing -------------------------------------------------

    def parse_top(self) -> tuple:
        nodes = self._nodes(stop_group=False, env_name=None)
        if self.pos < len(self.tokens):
            tok = self.tokens[self.pos]
            raise ParseError(f"unexpected '{tok.lexeme}' at top level", tok.span)
        return tuple(nodes)

    def _nodes(self, stop_group: bool, env_name: str | None) -> list:
        out: list[Node] = []
        text_buf: list[str] = []
        text_span: SourceSpan | None = None

        def flush():
            nonlocal text_span
            if text_buf:
                out.append(Text("".join(text_buf), text_span))
                text_buf.clear()
                text_span = None

        while True:
            tok = self._peek()
            if tok is None:
                if stop_group:
                    raise ParseError("unbalanced '{': missing closing brace", self._eof_span())
                if env_name is not None:
                    raise ParseError(
                        f"environment '{env_name}' is never closed", self._eof_span()
                    )
                flush()
                return out
            if tok.kind in _TEXTUAL:
                self._next()
                if not text_buf:
                    text_span = tok.span
                text_buf.append(tok.lexeme)
                continue
            if tok.kind is TokenKind.END_GROUP:
                if stop_group:
                    flush()
                    return out
                raise ParseError("unbalanced '}'", tok.span)
            flush()
            if tok.kind is TokenKind.BEGIN_GROUP:
                out.append(self._group())
            elif tok.kind is TokenKind.MATH_SHIFT:
                out.append(self._math())
            elif tok.kind is TokenKind.COMMAND:
                name = tok.name
                if name == "begin":
                    out.append(self._environment())
                elif name == "end":
                    if env_name is None:
                        raise ParseError(f"\\end{{...}} without matching \\begin", tok.span)
                    return out  # caller consumes the \end
                else:
                    out.append(self._command())
            else:  # pragma: no cover - all kinds handled above
                raise ParseError(f"unexpected token '{tok.lexeme}'", tok.span)

    def _group(self) -> Group:
        open_tok = self._next()
        start = self.pos
        children = self._nodes(stop_group=True, env_name=None)
        inner = tuple(self.tokens[start : self.pos])
        close = self._next()  # the END_GROUP
        span = SourceSpan(
            self.origin, open_tok.span.start, close.span.end, open_tok.span.line, open_tok.span.col
        )
        return Group(tuple(children), inner, span)

    def _math(self) -> MathGroup:
        open_tok = self._next()
        collected: list[Token] = []
        depth = 0
        while True:
            if self.pos >= len(self.tokens):
                raise ParseError("unterminated math: missing closing '$'", open_tok.span)
            tok = self.tokens[self.pos]
            self.pos += 1
            if tok.kind is TokenKind.MATH_SHIFT:
                if depth != 0:
                    raise ParseError("unbalanced braces inside math", tok.span)
                break
            if tok.kind is TokenKind.BEGIN_GROUP:
                depth += 1
            elif tok.kind is TokenKind.END_GROUP:
                depth -= 1
                if depth < 0:
                    raise ParseError("unbalanced '}' inside math", tok.span)
            collected.append(tok)
        span = SourceSpan(
            self.origin, open_tok.span.start, tok.span.end, open_tok.span.line, open_tok.span.col
        )
        return MathGroup(tuple(collected), span)

    def _skip_blank_text(self):
        tok = self._peek()
        while tok is not None and tok.kind is TokenKind.TEXT and not tok.lexeme.strip():
            self._next()
            tok = self._peek()

    def _expect_group(self, what: str, ctx: SourceSpan) -> Group:
        tok = self._peek()
        if tok is None or tok.kind is not TokenKind.BEGIN_GROUP:
            at = tok.span if tok is not None else self._eof_span()
            raise ParseError(f"expected {what}", at)
        return self._group()

    def _command(self) -> Command:
        tok = self._next()
        name = tok.name
        syntax = COMMAND_SYNTAX.get(name)
        if syntax is None:
            return Command(name, EMPTY_KEYVALS, (), tok.span)
        opt_slot, arity = syntax
        opts = EMPTY_KEYVALS
        args: list[Group] = []
        for i in range(arity):
            self._skip_blank_text()
            if i == opt_slot:
                opts = self._maybe_opts()
                self._skip_blank_text()
            args.append(self._expect_group(f"argument {i + 1} of \\{name}", tok.span))
        if opt_slot >= arity:
            opts = self._maybe_opts()
        return Command(name, opts, tuple(args), tok.span)

    def _maybe_opts(self) -> KeyValList:
        tok = self._peek()
        if tok is None or tok.kind is not TokenKind.BEGIN_OPT:
            return EMPTY_KEYVALS
        open_tok = self._next()
        collected: list[Token] = []
        depth_brace = 0
        depth_opt = 0
        in_math = False
        while True:
            if self.pos >= len(self.tokens):
                raise ParseError("unterminated option list: missing ']'", open_tok.span)
            t = self.tokens[self.pos]
            self.pos += 1
            if t.kind is TokenKind.MATH_SHIFT:
                in_math = not in_math
            elif t.kind is TokenKind.BEGIN_GROUP:
                depth_brace += 1
            elif t.kind is TokenKind.END_GROUP:
                depth_brace -= 1
                if depth_brace < 0:
                    raise ParseError("unbalanced '}' in option list", t.span)
            elif t.kind is TokenKind.BEGIN_OPT and not in_math and depth_brace == 0:
                depth_opt += 1
            elif t.kind is TokenKind.END_OPT and not in_math and depth_brace == 0:
                if depth_opt == 0:
                    break
                depth_opt -= 1
            collected.append(t)
        end = t.span
        span = SourceSpan(
            self.origin, open_tok.span.start, end.end, open_tok.span.line, open_tok.span.col
        )
        return keyvals_from_tokens(collected, span)

    def _environment(self) -> Environment:
        begin_tok = self._next()  # \begin
        name_group = self._expect_group("environment name after \\begin", begin_tok.span)
        name = name_group.text_content().strip()
        if not name:
            raise ParseError("empty environment name", begin_tok.span)
        opts = self._maybe_opts()
        body = self._nodes(stop_group=False, env_name=name)
        end_tok = self._next()  # \end
        end_name_group = self._expect_group("environment name after \\end", end_tok.span)
        end_name = end_name_group.text_content().strip()
        if end_name != name:
            raise ParseError(
                f"environment '{name}' closed by \\end{{{end_name}}}", end_tok.span
            )
        span = SourceSpan(
            self.origin,
            begin_tok.span.start,
            end_name_group.span.end if end_name_group.span else begin_tok.span.end,
            begin_tok.span.line,
            begin_tok.span.col,
        )
        return Environment(name, opts, tuple(body), span)


def parse_document(source: str, origin: str = "<string>") -> DocumentAST:
    """Parse source text into a document AST."""
    tokens = tokenize(source, origin)
    nodes = _Parser(tokens, origin).parse_top()
    return DocumentAST(nodes, origin)


# ── KeyVal parsing ──────────────────────────────────────────────────


def parse_keyvals(raw: str, origin: str = "<options>") -> KeyValList:
    """Parse the text of an option list (without the surrounding brackets)."""
    tokens = tokenize(raw, origin)
    span = SourceSpan(origin, 0, len(raw))
    return keyvals_from_tokens(tokens, span)


def keyvals_from_tokens(tokens: list[Token], span: SourceSpan) -> KeyValList:
    raw = "".join(t.lexeme for t in tokens if t.kind is not TokenKind.COMMENT)
    origin = span.origin
    pairs: list[tuple[str, object]] = []
    seen: set[str] = set()

    for segment in _split_top_level(raw, ",", span):
        if not segment.strip():
            continue
        key_part, eq, value_part = _split_key_value(segment, span)
        key = key_part.strip()
        if not key:
            raise ParseError("empty key in option list", span)
        if key in seen:
            raise ParseError(f"duplicate key '{key}' in option list", span)
        seen.add(key)
        if not eq:
            pairs.append((key, None))
            continue
        value = value_part.strip()
        if value.startswith("$"):
            if len(value) < 2 or not value.endswith("$"):
                raise ParseError(f"unterminated math value for key '{key}'", span)
            inner = value[1:-1]
            if "$" in inner:
                raise ParseError(f"unterminated math value for key '{key}'", span)
            math_tokens = tokenize(inner, f"{origin}:{key}")
            pairs.append((key, MathGroup(tuple(math_tokens), span)))
        else:
            if "$" in value:
                raise ParseError(
                    f"math must span the whole value for key '{key}'", span
                )
            if value.startswith("{") and _brace_matches_whole(value):
                value = value[1:-1]
            pairs.append((key, value))
    return KeyValList(tuple(pairs))


def _split_top_level(raw: str, sep: str, span: SourceSpan) -> list[str]:
    parts: list[str] = []
    buf: list[str] = []
    depth = 0
    in_math = False
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "\\" and i + 1 < len(raw):
            buf.append(raw[i : i + 2])
            i += 2
            continue
        if ch == "$":
            in_math = not in_math
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced '}' in option list", span)
        elif ch == sep and depth == 0 and not in_math:
            parts.append("".join(buf))
            buf.clear()
            i += 1
            continue
        buf.append(ch)
        i += 1
    if depth != 0:
        raise ParseError("unbalanced '{' in option list", span)
    if in_math:
        raise ParseError("unterminated math in option list", span)
    parts.append("".join(buf))
    return parts


def _split_key_value(segment: str, span: SourceSpan) -> tuple[str, bool, str]:
    depth = 0
    in_math = False
    i = 0
    while i < len(segment):
        ch = segment[i]
        if ch == "\\" and i + 1 < len(segment):
            i += 2
            continue
        if ch == "$":
            in_math = not in_math
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        elif ch == "=" and depth == 0 and not in_math:
            return segment[:i], True, segment[i + 1 :]
        i += 1
    return segment, False, ""


def _brace_matches_whole(value: str) -> bool:
    depth = 0
    for i, ch in enumerate(value):
        if ch == "\\":
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i == len(value) - 1
    return False


# ── Printing ────────────────────────────────────────────────────────


def print_ast(ast: DocumentAST) -> str:
    """Render an AST back to source that re-parses to an equal AST."""
    return "".join(print_node(n) for n in ast.nodes)


def print_node(node: Node) -> str:
    if isinstance(node, Text):
        return node.value
    if isinstance(node, MathGroup):
        return "$" + node.source() + "$"
    if isinstance(node, Group):
        return "{" + "".join(print_node(c) for c in node.children) + "}"
    if isinstance(node, Command):
        return _print_command(node)
    if isinstance(node, Environment):
        head = "\\begin{" + node.name + "}" + _print_opts(node.opts)
        body = "".join(print_node(c) for c in node.body)
        return head + body + "\\end{" + node.name + "}"
    raise TypeError(f"not an AST node: {node!r}")


def _print_command(node: Command) -> str:
    syntax = COMMAND_SYNTAX.get(node.name)
    if syntax is None or (not node.args and not node.opts):
        sep = " " if node.name and node.name[-1].isalpha() else ""
        return "\\" + node.name + sep
    opt_slot, _ = syntax
    out = ["\\" + node.name]
    for i, arg in enumerate(node.args):
        if i == opt_slot and node.opts:
            out.append(_print_opts(node.opts))
        out.append(print_node(arg))
    if opt_slot >= len(node.args) and node.opts:
        out.append(_print_opts(node.opts))
    return "".join(out)


def _print_opts(opts: KeyValList) -> str:
    if not opts:
        return ""
    return "[" + ",".join(_print_pair(k, v) for k, v in opts) + "]"


def _print_pair(key: str, value) -> str:
    if value is None:
        return key
    if isinstance(value, MathGroup):
        return f"{key}=${value.source()}$"
    needs_braces = (
        value == ""
        or value != value.strip()
        or any(ch in value for ch in ",=[]$")
        or (value.startswith("{") and _brace_matches_whole(value))
    )
    if needs_braces:
        return f"{key}={{{value}}}"
    return f"{key}={value}"
