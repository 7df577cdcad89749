"""Expansion of math token sequences into OpenMath content trees.

Expansion only consults a macro's name and arity, never its notation
template, so content trees are independent of presentation choices.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ExpandError, SourceSpan
from .modsys import Scope, SymDef
from .syntax import Token, TokenKind

# Commands that may appear in notation templates but carry no content.
PRESENTATION_COMMANDS = frozenset({"mathbb", "text", "in", "mid"})


@dataclass(frozen=True)
class OMS:
    cd: str
    name: str


@dataclass(frozen=True)
class OMV:
    name: str


@dataclass(frozen=True)
class OMI:
    value: int


@dataclass(frozen=True)
class OMA:
    head: "OMObject"
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise ValueError("application needs at least one argument")


OMObject = OMS | OMV | OMI | OMA


def _normalize(tokens) -> list[Token]:
    """Split text runs into atoms: digit runs stay together, everything
    else becomes single-character tokens; whitespace and comments drop."""
    out: list[Token] = []
    for tok in tokens:
        if tok.kind is TokenKind.COMMENT:
            continue
        if tok.kind is not TokenKind.TEXT:
            out.append(tok)
            continue
        i = 0
        text = tok.lexeme
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit():
                j = i
                while j < len(text) and text[j].isdigit():
                    j += 1
                out.append(_slice_token(tok, i, j))
                i = j
            else:
                out.append(_slice_token(tok, i, i + 1))
                i += 1
    return out


def _slice_token(tok: Token, start: int, end: int) -> Token:
    base = tok.span
    span = SourceSpan(base.origin, base.start + start, base.start + end, base.line, base.col)
    return Token(TokenKind.TEXT, tok.lexeme[start:end], span)


def bind_args(macro: SymDef, following) -> tuple[dict[int, list[Token]], list[Token]]:
    """TeX-style argument grabbing: each argument is a braced group or a
    single token. Returns the bindings and the unconsumed tail."""
    items = _normalize(following)
    binding: dict[int, list[Token]] = {}
    pos = 0
    for index in range(1, macro.arity + 1):
        if pos >= len(items):
            raise ExpandError(
                f"\\{macro.command_alias} expects {macro.arity} argument(s), "
                f"got {index - 1}",
                items[-1].span if items else None,
            )
        tok = items[pos]
        if tok.kind is TokenKind.BEGIN_GROUP:
            depth = 0
            group: list[Token] = []
            while True:
                if pos >= len(items):
                    raise ExpandError("unbalanced '{' in math", tok.span)
                cur = items[pos]
                pos += 1
                if cur.kind is TokenKind.BEGIN_GROUP:
                    depth += 1
                    if depth == 1:
                        continue
                elif cur.kind is TokenKind.END_GROUP:
                    depth -= 1
                    if depth == 0:
                        break
                group.append(cur)
            binding[index] = group
        elif tok.kind is TokenKind.TEXT and len(tok.lexeme) > 1:
            binding[index] = [_slice_token(tok, 0, 1)]
            items[pos] = _slice_token(tok, 1, len(tok.lexeme))
        else:
            binding[index] = [tok]
            pos += 1
    return binding, items[pos:]


def expand_math(tokens, scope: Scope) -> OMObject:
    """Expand one math group into a content tree."""
    items = _normalize(tokens)
    if not items:
        raise ExpandError("empty math group")
    obj, rest = _expr(items, scope)
    if rest:
        raise ExpandError(
            f"unexpected trailing material '{rest[0].lexeme}' in math", rest[0].span
        )
    return obj


def _expand_all(items: list[Token], scope: Scope, ctx: SourceSpan | None) -> OMObject:
    if not items:
        raise ExpandError("empty argument in math", ctx)
    obj, rest = _expr(items, scope)
    if rest:
        raise ExpandError(
            f"unexpected trailing material '{rest[0].lexeme}' in math", rest[0].span
        )
    return obj


def _expr(items: list[Token], scope: Scope) -> tuple[OMObject, list[Token]]:
    tok = items[0]
    if tok.kind is TokenKind.COMMAND:
        sym = scope.resolve_macro(tok.name)
        if sym is None:
            if tok.name in PRESENTATION_COMMANDS:
                raise ExpandError(
                    f"presentation command \\{tok.name} is not allowed in "
                    f"content math (it may only appear in notation templates)",
                    tok.span,
                )
            raise ExpandError(f"unknown command \\{tok.name} in math", tok.span)
        head = OMS(sym.home, sym.name)
        if sym.arity == 0:
            return head, items[1:]
        binding, rest = bind_args(sym, items[1:])
        args = tuple(
            _expand_all(binding[i], scope, tok.span) for i in range(1, sym.arity + 1)
        )
        return OMA(head, args), rest
    if tok.kind is TokenKind.BEGIN_GROUP:
        depth = 0
        pos = 0
        inner: list[Token] = []
        while True:
            if pos >= len(items):
                raise ExpandError("unbalanced '{' in math", tok.span)
            cur = items[pos]
            pos += 1
            if cur.kind is TokenKind.BEGIN_GROUP:
                depth += 1
                if depth == 1:
                    continue
            elif cur.kind is TokenKind.END_GROUP:
                depth -= 1
                if depth == 0:
                    break
            inner.append(cur)
        return _expand_all(inner, scope, tok.span), items[pos:]
    if tok.kind is TokenKind.TEXT:
        text = tok.lexeme
        if text.isdigit():
            return OMI(int(text)), items[1:]
        if len(text) == 1 and text.isalpha():
            return OMV(text), items[1:]
        if text.isalpha():
            raise ExpandError(
                f"multi-letter identifier '{text}' in math; "
                f"only single-letter variables are allowed",
                tok.span,
            )
        raise ExpandError(f"character '{text}' has no content meaning", tok.span)
    raise ExpandError(f"'{tok.lexeme}' is not allowed in content math", tok.span)


def om_equal(a: OMObject, b: OMObject) -> bool:
    return a == b


def check_scoped(obj: OMObject, scope: Scope) -> bool:
    """True when every symbol reference in the tree is visible in scope."""
    if isinstance(obj, OMS):
        sym = scope.symbols.get(obj.name)
        return sym is not None and sym.home == obj.cd
    if isinstance(obj, OMA):
        return check_scoped(obj.head, scope) and all(
            check_scoped(a, scope) for a in obj.args
        )
    return True
