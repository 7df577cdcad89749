"""Module collection, import graph construction and scope resolution.

Modules declare semantic macros (``\\symdef``) and metadata keys
(``\\keydef``); both are inherited transitively over the import relation.
A module's own declarations shadow imported ones of the same name; two
*imported* declarations with the same name from different homes are an
ambiguity error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ModuleError, ParseError, ScopeError, SourceSpan
from .syntax import (
    Command,
    DocumentAST,
    Environment,
    KeyValList,
    Token,
    TokenKind,
    parse_document,
)

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_-]*$")

MODULE_BUILTIN_KEYS = ("id", "title")
DEFINITION_BUILTIN_KEYS = ("id", "for", "title")
DOCUMENT_BUILTIN_KEYS = ("id", "title")

BUILTIN_KEYS: dict[str, tuple[str, ...]] = {
    "module": MODULE_BUILTIN_KEYS,
    "definition": DEFINITION_BUILTIN_KEYS,
    "document": DOCUMENT_BUILTIN_KEYS,
}


@dataclass(frozen=True)
class SymDef:
    """A semantic macro: name, arity and its notation template tokens."""

    name: str
    arity: int
    body: tuple[Token, ...]
    home: str
    opts: KeyValList = KeyValList()
    span: SourceSpan | None = field(compare=False, default=None)

    @property
    def command_alias(self) -> str:
        """TeX command names cannot contain '-', so hyphens are dropped."""
        return self.name.replace("-", "")


@dataclass(frozen=True)
class KeyDef:
    env: str
    key: str
    home: str
    link: bool = False
    span: SourceSpan | None = field(compare=False, default=None)


@dataclass(frozen=True)
class ImportRef:
    path: str | None
    module: str
    meta: bool = False
    span: SourceSpan | None = field(compare=False, default=None)


@dataclass(frozen=True)
class DefinitionBlock:
    keyvals: KeyValList
    body: tuple
    home: str = ""
    span: SourceSpan | None = field(compare=False, default=None)

    @property
    def id(self) -> str | None:
        return self.keyvals.get("id")

    @property
    def target(self) -> str | None:
        return self.keyvals.get("for")

    @property
    def title(self) -> str | None:
        return self.keyvals.get("title")


@dataclass(frozen=True)
class ModuleDef:
    id: str
    origin: str
    imports: tuple[ImportRef, ...] = ()
    symdefs: tuple[SymDef, ...] = ()
    keydefs: tuple[KeyDef, ...] = ()
    definitions: tuple[DefinitionBlock, ...] = ()
    annotations: KeyValList = KeyValList()
    is_document: bool = False
    span: SourceSpan | None = field(compare=False, default=None)


# ── Collection ──────────────────────────────────────────────────────


def collect_modules(ast: DocumentAST, origin: str | Path | None = None) -> list[ModuleDef]:
    """Extract module definitions from a parsed document.

    A top-level ``document`` environment (or bare top-level imports)
    yields an anonymous document-module named after the file stem.
    """
    origin = str(origin if origin is not None else ast.origin)
    modules: list[ModuleDef] = []
    doc_imports: list[ImportRef] = []
    doc_env: Environment | None = None

    def walk_top(nodes):
        nonlocal doc_env
        for node in nodes:
            if isinstance(node, Environment):
                if node.name == "module":
                    modules.append(_collect_module(node, origin))
                elif node.name == "document":
                    if doc_env is not None:
                        raise ModuleError("multiple document environments", node.span)
                    doc_env = node
                    walk_top(node.body)
                elif node.name == "definition":
                    raise ModuleError("definition outside of a module", node.span)
            elif isinstance(node, Command) and node.name in ("importmodule", "metalanguage"):
                doc_imports.append(_import_ref(node))
            elif isinstance(node, Command) and node.name in ("symdef", "keydef"):
                raise ModuleError(f"\\{node.name} outside of a module", node.span)

    walk_top(ast.nodes)

    if doc_env is not None or doc_imports:
        stem = Path(origin).stem or "document"
        doc_id = re.sub(r"[^A-Za-z0-9_-]", "-", stem)
        if any(m.id == doc_id for m in modules):
            raise ModuleError(
                f"document-module id '{doc_id}' collides with a module in the same file"
            )
        annotations = doc_env.opts if doc_env is not None else KeyValList()
        modules.append(
            ModuleDef(
                id=doc_id,
                origin=origin,
                imports=tuple(doc_imports),
                annotations=annotations,
                is_document=True,
                span=doc_env.span if doc_env is not None else None,
            )
        )
    return modules


def _import_ref(node: Command) -> ImportRef:
    target = node.args[0].text_content().strip()
    if not target:
        raise ModuleError("import without a module name", node.span)
    path = None
    for key, value in node.opts:
        if value is None:
            path = key
            break
    return ImportRef(path, target, meta=(node.name == "metalanguage"), span=node.span)


def _collect_module(env: Environment, origin: str) -> ModuleDef:
    module_id = env.opts.get("id")
    if not module_id:
        raise ModuleError("module environment without an id= option", env.span)
    imports: list[ImportRef] = []
    symdefs: list[SymDef] = []
    keydefs: list[KeyDef] = []
    definitions: list[DefinitionBlock] = []

    for node in env.body:
        if isinstance(node, Environment):
            if node.name == "module":
                raise ModuleError("nested module environments are not allowed", node.span)
            if node.name == "document":
                raise ModuleError("document environment inside a module", node.span)
            if node.name == "definition":
                definitions.append(
                    DefinitionBlock(node.opts, node.body, home=module_id, span=node.span)
                )
            continue
        if not isinstance(node, Command):
            continue
        if node.name in ("importmodule", "metalanguage"):
            imports.append(_import_ref(node))
        elif node.name == "symdef":
            symdefs.append(_collect_symdef(node, module_id))
        elif node.name == "keydef":
            kd = KeyDef(
                env=node.args[0].text_content().strip(),
                key=node.args[1].text_content().strip(),
                home=module_id,
                link=node.opts.has("link"),
                span=node.span,
            )
            if not kd.env or not kd.key:
                raise ModuleError("\\keydef needs an environment and a key name", node.span)
            if any(k.env == kd.env and k.key == kd.key for k in keydefs):
                raise ModuleError(
                    f"duplicate key declaration ({kd.env}, {kd.key}) in module '{module_id}'",
                    node.span,
                )
            keydefs.append(kd)

    names = [s.name for s in symdefs]
    for name in names:
        if names.count(name) > 1:
            raise ModuleError(f"duplicate symbol '{name}' in module '{module_id}'", env.span)

    return ModuleDef(
        id=module_id,
        origin=origin,
        imports=tuple(imports),
        symdefs=tuple(symdefs),
        keydefs=tuple(keydefs),
        definitions=tuple(definitions),
        annotations=env.opts.without("id"),
        span=env.span,
    )


def _collect_symdef(node: Command, module_id: str) -> SymDef:
    name = node.args[0].text_content().strip()
    if not _IDENT.match(name):
        raise ModuleError(f"invalid symbol name '{name}'", node.span)
    arity = 0
    rest: list[tuple[str, object]] = []
    for key, value in node.opts:
        if value is None and key.isdigit():
            arity = int(key)
        else:
            rest.append((key, value))
    body = node.args[1].tokens
    max_param = 0
    for tok in _iter_params(body):
        max_param = max(max_param, tok.param_index)
    if max_param != arity:
        raise ModuleError(
            f"symbol '{name}' declares arity {arity} but its template uses "
            f"parameters up to #{max_param}",
            node.span,
        )
    return SymDef(name, arity, tuple(body), module_id, KeyValList(tuple(rest)), node.span)


def _iter_params(tokens):
    for tok in tokens:
        if tok.kind is TokenKind.PARAMETER:
            yield tok


# ── Graph ───────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    meta: bool = False


class ModuleGraph:
    """Immutable import graph over uniquely-named modules."""

    def __init__(
        self,
        modules: dict[str, ModuleDef],
        edges: list[Edge],
        file_order: list[str] | None = None,
        file_modules: dict[str, list[str]] | None = None,
        corpus_root: Path | None = None,
    ):
        self.modules = dict(modules)
        self.edges = list(edges)
        self._out: dict[str, list[Edge]] = {mid: [] for mid in modules}
        for e in edges:
            self._out[e.source].append(e)
        self.file_order = list(file_order or [])
        self.file_modules = dict(file_modules or {})
        self.corpus_root = corpus_root
        self._scopes: dict[str, Scope] = {}

    @classmethod
    def from_modules(cls, modules: list[ModuleDef], edges: list[tuple] | None = None) -> "ModuleGraph":
        """Build an in-memory graph. ``edges`` defaults to declared imports."""
        by_id = {m.id: m for m in modules}
        if edges is None:
            edge_objs = [
                Edge(m.id, ref.module, ref.meta) for m in modules for ref in m.imports
            ]
        else:
            edge_objs = [Edge(*((e + (False,))[:3])) for e in edges]
        graph = cls(by_id, edge_objs)
        graph.check_acyclic()
        return graph

    def imports_of(self, module_id: str) -> list[Edge]:
        return self._out[module_id]

    def doc_path(self, module_id: str) -> str:
        """Path of the module's source file relative to the corpus root,
        without extension; this names the compiled resource."""
        origin = Path(self.modules[module_id].origin)
        if self.corpus_root is not None:
            rel = origin.resolve().relative_to(self.corpus_root)
        else:
            rel = Path(origin.name)
        return rel.with_suffix("").as_posix()

    def reachable(self, module_id: str) -> set[str]:
        seen: set[str] = set()
        stack = [module_id]
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            for e in self._out[cur]:
                stack.append(e.target)
        return seen

    def check_acyclic(self) -> None:
        """Raise :class:`ModuleError` naming a cycle if one exists."""
        WHITE, GREY, BLACK = 0, 1, 2
        color = {mid: WHITE for mid in self.modules}
        parent: dict[str, str] = {}

        for start in sorted(self.modules):
            if color[start] != WHITE:
                continue
            stack: list[tuple[str, int]] = [(start, 0)]
            color[start] = GREY
            while stack:
                node, idx = stack[-1]
                outs = self._out[node]
                if idx < len(outs):
                    stack[-1] = (node, idx + 1)
                    nxt = outs[idx].target
                    if color[nxt] == GREY:
                        cycle = [nxt]
                        cur = node
                        while cur != nxt:
                            cycle.append(cur)
                            cur = parent[cur]
                        cycle.reverse()
                        raise ModuleError(
                            "import cycle: " + " -> ".join(cycle + [cycle[0]])
                        )
                    if color[nxt] == WHITE:
                        color[nxt] = GREY
                        parent[nxt] = node
                        stack.append((nxt, 0))
                else:
                    color[node] = BLACK
                    stack.pop()

    def topo_order(self) -> list[str]:
        """Dependencies-first order, deterministic."""
        order: list[str] = []
        seen: set[str] = set()

        def visit(mid: str):
            if mid in seen:
                return
            seen.add(mid)
            for e in self._out[mid]:
                visit(e.target)
            order.append(mid)

        for mid in self.modules:
            visit(mid)
        return order

    def scope(self, module_id: str) -> "Scope":
        cached = self._scopes.get(module_id)
        if cached is None:
            cached = visible_scope(self, module_id)
            self._scopes[module_id] = cached
        return cached

    def to_dot(self) -> str:
        lines = ["digraph imports {"]
        for mid in sorted(self.modules):
            lines.append(f'  "{mid}";')
        for e in sorted(self.edges, key=lambda e: (e.source, e.target, e.meta)):
            style = " [style=dashed]" if e.meta else ""
            lines.append(f'  "{e.source}" -> "{e.target}"{style};')
        lines.append("}")
        return "\n".join(lines) + "\n"


def default_loader(path: Path) -> DocumentAST:
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc})") from exc
    return parse_document(text, str(path))


def _resolve_import_path(importing_file: Path, ref: ImportRef) -> Path:
    assert ref.path is not None
    target = importing_file.parent / ref.path
    if target.suffix in (".tex", ".stex"):
        return target
    tex = target.with_name(target.name + ".tex")
    stex = target.with_name(target.name + ".stex")
    if not tex.exists() and stex.exists():
        return stex
    return tex


def build_graph(roots: list, loader=None) -> ModuleGraph:
    """Load ``roots`` and the transitive closure of their imports."""
    loader = loader or default_loader
    modules: dict[str, ModuleDef] = {}
    module_file: dict[str, Path] = {}
    file_modules: dict[Path, list[str]] = {}
    file_order: list[Path] = []
    pending_edges: list[tuple[str, ImportRef, Path]] = []

    def load_file(path: Path) -> list[str]:
        path = Path(path).resolve()
        if path in file_modules:
            return file_modules[path]
        try:
            ast = loader(path)
        except FileNotFoundError as exc:
            raise ModuleError(f"cannot read '{path}'") from exc
        file_modules[path] = []
        mods = collect_modules(ast, path)
        for m in mods:
            if m.id in modules:
                raise ModuleError(
                    f"module '{m.id}' defined in both '{modules[m.id].origin}' "
                    f"and '{m.origin}'",
                    m.span,
                )
            modules[m.id] = m
            module_file[m.id] = path
            file_modules[path].append(m.id)
        for m in mods:
            for ref in m.imports:
                if ref.path is None:
                    target_file = path
                else:
                    target_file = _resolve_import_path(path, ref).resolve()
                pending_edges.append((m.id, ref, target_file))
                if target_file != path:
                    load_file(target_file)
        file_order.append(path)
        return file_modules[path]

    for root in roots:
        load_file(Path(root))

    edges: list[Edge] = []
    for source, ref, target_file in pending_edges:
        ids_in_file = file_modules.get(target_file, [])
        if ref.module not in ids_in_file:
            raise ModuleError(
                f"module '{ref.module}' not found in '{target_file}'", ref.span
            )
        edges.append(Edge(source, ref.module, ref.meta))

    all_files = list(file_modules)
    corpus_root = None
    if all_files:
        import os.path

        corpus_root = Path(os.path.commonpath([str(f.parent) for f in all_files]))

    graph = ModuleGraph(
        modules,
        edges,
        file_order=[str(f) for f in file_order],
        file_modules={str(f): mods for f, mods in file_modules.items()},
        corpus_root=corpus_root,
    )
    graph.check_acyclic()
    return graph


# ── Scopes ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Scope:
    """Everything visible from one module: symbols, keys, command aliases."""

    module: str
    symbols: dict[str, SymDef]
    keys: dict[tuple[str, str], KeyDef]
    aliases: dict[str, SymDef]

    def resolve_macro(self, command_name: str) -> SymDef | None:
        sym = self.symbols.get(command_name)
        if sym is not None:
            return sym
        return self.aliases.get(command_name)

    def find_key(self, env: str, key: str) -> KeyDef | None:
        """Find the key declaration governing ``key`` on environment ``env``.

        An exact (env, key) declaration wins; otherwise a declaration of the
        same key for another environment applies, provided it is unambiguous.
        """
        exact = self.keys.get((env, key))
        if exact is not None:
            return exact
        candidates = {kd.home: kd for kd in self.keys.values() if kd.key == key}
        if not candidates:
            return None
        if len(candidates) > 1:
            homes = ", ".join(sorted(candidates))
            raise ScopeError(
                f"key '{key}' is declared by several modules ({homes}); "
                f"annotation on '{env}' is ambiguous"
            )
        return next(iter(candidates.values()))


def visible_scope(graph: ModuleGraph, module_id: str) -> Scope:
    """Reflexive-transitive closure of declarations over the import edges."""
    if module_id not in graph.modules:
        raise ScopeError(f"unknown module '{module_id}'")
    graph.check_acyclic()
    own = graph.modules[module_id]
    reach = graph.reachable(module_id)

    imported_syms: dict[str, SymDef] = {}
    sym_conflicts: dict[str, set[str]] = {}
    imported_keys: dict[tuple[str, str], KeyDef] = {}
    key_conflicts: dict[tuple[str, str], set[str]] = {}
    for rid in sorted(reach - {module_id}):
        mod = graph.modules[rid]
        for sd in mod.symdefs:
            prev = imported_syms.get(sd.name)
            if prev is not None and prev.home != sd.home:
                sym_conflicts.setdefault(sd.name, {prev.home}).add(sd.home)
            else:
                imported_syms[sd.name] = sd
        for kd in mod.keydefs:
            ident = (kd.env, kd.key)
            prev_k = imported_keys.get(ident)
            if prev_k is not None and prev_k.home != kd.home:
                key_conflicts.setdefault(ident, {prev_k.home}).add(kd.home)
            else:
                imported_keys[ident] = kd

    own_sym_names = {sd.name for sd in own.symdefs}
    for name, homes in sorted(sym_conflicts.items()):
        if name not in own_sym_names:
            raise ScopeError(
                f"symbol '{name}' visible from '{module_id}' is exported by "
                f"several modules: {', '.join(sorted(homes))}"
            )
    own_key_idents = {(kd.env, kd.key) for kd in own.keydefs}
    for ident, homes in sorted(key_conflicts.items()):
        if ident not in own_key_idents:
            raise ScopeError(
                f"key ({ident[0]}, {ident[1]}) visible from '{module_id}' is "
                f"exported by several modules: {', '.join(sorted(homes))}"
            )

    symbols = dict(imported_syms)
    symbols.update({sd.name: sd for sd in own.symdefs})
    keys = dict(imported_keys)
    keys.update({(kd.env, kd.key): kd for kd in own.keydefs})

    aliases: dict[str, SymDef] = {}
    for sd in symbols.values():
        alias = sd.command_alias
        if alias == sd.name:
            continue
        clash = symbols.get(alias) or aliases.get(alias)
        if clash is not None and clash is not sd:
            raise ScopeError(
                f"command alias '\\{alias}' is ambiguous between symbols "
                f"'{clash.name}' ({clash.home}) and '{sd.name}' ({sd.home})"
            )
        aliases[alias] = sd

    return Scope(module_id, symbols, keys, aliases)
