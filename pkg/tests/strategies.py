"""Shared hypothesis strategies for the property suites."""

from __future__ import annotations

import string

import hypothesis.strategies as st

from semtex.modsys import ModuleDef, SymDef
from semtex.syntax import (
    Command,
    DocumentAST,
    Environment,
    Group,
    KeyValList,
    MathGroup,
    Text,
    tokenize,
)

# ── AST generation (printable, round-trippable) ─────────────────────

_TEXT_ALPHABET = string.ascii_letters + string.digits + " .,;:'!?()-+*/<>"
_KEY_ALPHABET = string.ascii_lowercase
_VALUE_ALPHABET = string.ascii_letters + string.digits + " .-"

unknown_command_names = st.sampled_from(
    ["alpha", "beta", "ldots", "quad", "relax", "noop", "emph"]
)
env_names = st.sampled_from(["module", "definition", "document", "center", "remark"])


@st.composite
def texts(draw):
    body = draw(
        st.text(alphabet=_TEXT_ALPHABET, min_size=1, max_size=12).filter(
            lambda s: s.strip() and not s[0].isspace()
        )
    )
    return Text(body)


@st.composite
def keyval_lists(draw):
    n = draw(st.integers(min_value=0, max_value=3))
    keys = draw(
        st.lists(
            st.text(alphabet=_KEY_ALPHABET, min_size=1, max_size=6),
            min_size=n,
            max_size=n,
            unique=True,
        )
    )
    pairs = []
    for key in keys:
        kind = draw(st.integers(min_value=0, max_value=2))
        if kind == 0:
            pairs.append((key, None))
        elif kind == 1:
            value = draw(
                st.text(alphabet=_VALUE_ALPHABET, min_size=0, max_size=10).map(str.strip)
            )
            pairs.append((key, value))
        else:
            pairs.append((key, MathGroup(tuple(tokenize(draw(math_sources()))))))
    return KeyValList(tuple(pairs))


@st.composite
def math_sources(draw):
    """Sources for math token lists that re-lex identically."""
    pieces = draw(
        st.lists(
            st.one_of(
                st.sampled_from(["x", "y", "0", "42", "7"]),
                st.sampled_from(["\\foo", "\\bar"]),
                st.sampled_from(["#1", "#2", "^"]),
            ),
            min_size=1,
            max_size=4,
        )
    )
    out = []
    prev_cmd = False
    for piece in pieces:
        if prev_cmd and piece[0].isalnum():
            out.append("{" + piece + "}")
        else:
            out.append(piece)
        prev_cmd = piece.startswith("\\")
    return "".join(out)


def math_groups():
    return math_sources().map(lambda src: MathGroup(tuple(tokenize(src))))


def _group_of(children) -> Group:
    return Group(tuple(children))


@st.composite
def commands(draw, children):
    known = draw(st.booleans())
    if not known:
        return Command(draw(unknown_command_names))
    name = draw(st.sampled_from(["importmodule", "metalanguage", "definiendum", "keydef", "symdef"]))
    opts = draw(keyval_lists())
    if name in ("importmodule", "metalanguage", "definiendum"):
        args = (_group_of([draw(texts())]),)
    elif name == "keydef":
        args = (_group_of([draw(texts())]), _group_of([draw(texts())]))
    else:  # symdef
        args = (_group_of([draw(texts())]), _group_of([draw(children)]))
    return Command(name, opts, args)


def _no_adjacent_texts(nodes) -> bool:
    for a, b in zip(nodes, nodes[1:]):
        if isinstance(a, Text) and isinstance(b, Text):
            return False
    return True


def ast_nodes(depth: int = 2):
    if depth <= 0:
        return st.one_of(texts(), math_groups())
    child = ast_nodes(depth - 1)
    node = st.deferred(
        lambda: st.one_of(
            texts(),
            math_groups(),
            commands(child),
            st.lists(child, min_size=0, max_size=3)
            .filter(_no_adjacent_texts)
            .map(lambda ns: Group(tuple(ns))),
            st.tuples(env_names, keyval_lists(), st.lists(child, min_size=0, max_size=3).filter(_no_adjacent_texts)).map(
                lambda t: Environment(t[0], t[1], tuple(t[2]))
            ),
        )
    )
    return node


def documents():
    return (
        st.lists(ast_nodes(), min_size=0, max_size=5)
        .filter(_no_adjacent_texts)
        .map(lambda ns: DocumentAST(tuple(ns), "<generated>"))
    )


# ── Random DAGs of modules ──────────────────────────────────────────


@st.composite
def module_dags(draw, max_nodes: int = 8, unique_symbols: bool = True):
    """(graph, edge list) over modules m0..mN; edges only i -> j for i < j,
    so the graph is guaranteed acyclic."""
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    edges: list[tuple[str, str]] = []
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.booleans()):
                edges.append((f"m{i}", f"m{j}"))
    modules = []
    for i in range(n):
        count = draw(st.integers(min_value=0, max_value=3))
        if unique_symbols:
            names = [f"s{i}_{k}" for k in range(count)]
        else:
            pool = ["a", "b", "c", "d"]
            names = draw(
                st.lists(st.sampled_from(pool), min_size=count, max_size=count, unique=True)
            )
        symdefs = tuple(
            SymDef(name, 0, tuple(tokenize("z")), home=f"m{i}") for name in names
        )
        modules.append(ModuleDef(id=f"m{i}", origin=f"m{i}.tex", symdefs=symdefs))
    return modules, edges


def token_streams():
    """Arbitrary source text; many will fail to lex, which callers filter."""
    return st.text(
        alphabet=string.printable,
        min_size=0,
        max_size=60,
    )
