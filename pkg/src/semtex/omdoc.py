"""Emission of OMDoc XML: theories with imports, symbols, notations and
definitions, plus document-level metadata on the root element.

The element vocabulary is deliberately small (theory, imports, symbol,
notation with prototype/rendering, definition, meta, term, and OpenMath
objects); serialization is canonical and byte-stable.
"""

from __future__ import annotations

import posixpath
import xml.etree.ElementTree as ET

from .errors import EmitError
from .modsys import DefinitionBlock, ModuleDef, Scope
from .notation import (
    NotationRule,
    RSlot,
    RSup,
    RToken,
    _ACCENTS,
    _NAMED_GLYPHS,
    accent_char,
    compile_rules,
    linearize,
    render_object,
)
from .rdfa import PrefixMap, annotation_meta, resolve_annotations
from .syntax import Command, Environment, Group, MathGroup, Text, print_node
from .uris import default_base_uri, resource_uri, vocab_namespace
from .content import expand_math
from . import omxml
from .omxml import XML_ID, m as m_, omdoc as o_, omobj_element


def serialize(doc: ET.Element) -> bytes:
    """Canonical UTF-8 bytes: sorted attributes, fixed prefixes, stable
    indentation. Identical documents serialize identically."""
    return omxml.canonical_bytes(doc)


def emit_theory(
    m: ModuleDef,
    scope: Scope,
    *,
    rules=None,
    base_uri: str | None = None,
    doc_path: str | None = None,
    vocab_uri=None,
) -> ET.Element:
    """Emit one module as an OMDoc document (root element included)."""
    base_uri = base_uri or default_base_uri()
    doc_path = doc_path if doc_path is not None else posixpath.splitext(
        posixpath.basename(str(m.origin).replace("\\", "/"))
    )[0]
    if vocab_uri is None:
        vocab_uri = lambda mid: vocab_namespace(base_uri, doc_path if mid == m.id else mid)
    if rules is None:
        rules = compile_rules(scope)
    return emit_file(
        [m],
        lambda mid: scope,
        rules_for=lambda mid: rules,
        base_uri=base_uri,
        doc_path=doc_path,
        vocab_uri=vocab_uri,
    )


def emit_file(
    modules: list[ModuleDef],
    scope_for,
    *,
    rules_for,
    base_uri: str,
    doc_path: str,
    vocab_uri,
) -> ET.Element:
    """Emit all modules of one source file under a single omdoc root."""
    root = ET.Element(o_("omdoc"))
    root.set("about", resource_uri(base_uri, doc_path))
    prefixes = PrefixMap()
    doc_dir = posixpath.dirname(doc_path)
    used_ids: set[str] = set()

    ctx = _EmitContext(base_uri, doc_dir, vocab_uri, prefixes, used_ids)
    for m in modules:
        scope = scope_for(m.id)
        rules = rules_for(m.id)
        if m.is_document:
            title = m.annotations.get("title")
            if isinstance(title, str) and title:
                meta = ET.SubElement(root, o_("meta"), {"property": "dc:title"})
                meta.text = title
            for ann in resolve_annotations(
                m.annotations,
                scope,
                "document",
                vocab_uri=vocab_uri,
                rules=rules,
                prefixes=prefixes,
                base_uri=base_uri,
                doc_dir=doc_dir,
            ):
                root.append(annotation_meta(ann))
        else:
            root.append(_theory_element(m, scope, rules, ctx))
    root.set("prefix", prefixes.to_attr())
    return root


class _EmitContext:
    def __init__(self, base_uri, doc_dir, vocab_uri, prefixes, used_ids):
        self.base_uri = base_uri
        self.doc_dir = doc_dir
        self.vocab_uri = vocab_uri
        self.prefixes = prefixes
        self.used_ids = used_ids

    def claim_id(self, ident: str, what: str, span=None) -> str:
        if ident in self.used_ids:
            raise EmitError(f"xml:id collision on '{ident}' ({what})", span)
        self.used_ids.add(ident)
        return ident


def _theory_element(m: ModuleDef, scope: Scope, rules, ctx: _EmitContext) -> ET.Element:
    theory = ET.Element(o_("theory"))
    theory.set(XML_ID, ctx.claim_id(m.id, "theory", m.span))

    title = m.annotations.get("title")
    if isinstance(title, str) and title:
        meta = ET.SubElement(theory, o_("meta"), {"property": "dc:title"})
        meta.text = title
    annotations = resolve_annotations(
        m.annotations,
        scope,
        "module",
        vocab_uri=ctx.vocab_uri,
        rules=rules,
        prefixes=ctx.prefixes,
        base_uri=ctx.base_uri,
        doc_dir=ctx.doc_dir,
    )
    if annotations:
        theory.set("about", f"#{m.id}")
        for ann in annotations:
            theory.append(annotation_meta(ann))

    for ref in m.imports:
        imports = ET.SubElement(theory, o_("imports"))
        imports.set("from", _import_target(ref))
        if ref.meta:
            imports.set("meta", "true")

    for kd in m.keydefs:
        meta = ET.SubElement(theory, o_("meta"), {"keydef": kd.key, "env": kd.env})
        if kd.link:
            meta.set("link", "true")

    for sym in m.symdefs:
        symbol = ET.SubElement(theory, o_("symbol"))
        symbol.set(XML_ID, ctx.claim_id(sym.name, f"symbol in {m.id}", sym.span))
        rule = rules.get((sym.home, sym.name))
        if rule is None:  # pragma: no cover - rules cover the whole scope
            raise EmitError(f"no notation rule for {sym.home}#{sym.name}", sym.span)
        theory.append(_notation_element(rule))

    for seq, d in enumerate(m.definitions, start=1):
        theory.append(_definition_element(d, scope, rules, ctx, seq))
    return theory


def _import_target(ref) -> str:
    if ref.path is None:
        return f"#{ref.module}"
    path = ref.path
    for ext in (".tex", ".stex"):
        if path.endswith(ext):
            path = path[: -len(ext)]
            break
    return f"{path}.omdoc#{ref.module}"


def _notation_element(rule: NotationRule) -> ET.Element:
    notation = ET.Element(o_("notation"))
    prototype = ET.SubElement(notation, o_("prototype"))
    head = ET.Element(omxml.om("OMS"), {"cd": rule.cd, "name": rule.name})
    if rule.arity == 0:
        prototype.append(head)
    else:
        oma = ET.SubElement(prototype, omxml.om("OMA"))
        oma.append(head)
        for k in range(1, rule.arity + 1):
            ET.SubElement(oma, o_("expr"), {"name": f"arg{k}"})
    rendering = ET.SubElement(notation, o_("rendering"))
    for el in _template_xml(rule.rendering):
        rendering.append(el)
    return notation


def _template_xml(nodes) -> list[ET.Element]:
    out: list[ET.Element] = []
    for node in nodes:
        if isinstance(node, RToken):
            el = ET.Element(m_(node.kind))
            el.text = node.text
            if node.fence is not None:
                el.set("fence", "true")
            out.append(el)
        elif isinstance(node, RSlot):
            out.append(ET.Element(o_("render"), {"name": f"arg{node.index}"}))
        elif isinstance(node, RSup):
            sup = ET.Element(m_("msup"))
            for part in (node.base, node.script):
                rendered = _template_xml(part)
                if len(rendered) == 1:
                    sup.append(rendered[0])
                else:
                    row = ET.Element(m_("mrow"))
                    for r in rendered:
                        row.append(r)
                    sup.append(row)
            out.append(sup)
    return out


def emit_definition(
    d: DefinitionBlock,
    scope: Scope,
    *,
    rules=None,
    base_uri: str | None = None,
    doc_dir: str = "",
    vocab_uri=None,
    used_ids: set | None = None,
    seq: int = 1,
) -> ET.Element:
    """Emit one definition block (standalone entry point)."""
    base_uri = base_uri or default_base_uri()
    if rules is None:
        rules = compile_rules(scope)
    if vocab_uri is None:
        vocab_uri = lambda mid: vocab_namespace(base_uri, mid)
    ctx = _EmitContext(base_uri, doc_dir, vocab_uri, PrefixMap(), used_ids or set())
    return _definition_element(d, scope, rules, ctx, seq)


def _definition_element(
    d: DefinitionBlock, scope: Scope, rules, ctx: _EmitContext, seq: int
) -> ET.Element:
    target = d.target
    if target is not None and not _target_in_scope(target, scope):
        raise EmitError(f"definition for unknown symbol '{target}'", d.span)

    if d.id:
        ident = ctx.claim_id(d.id, "definition", d.span)
    else:
        ident = f"{target}.def" if target else f"def{seq}"
        if ident in ctx.used_ids:
            ident = f"def{seq}"
        ctx.claim_id(ident, "definition", d.span)

    el = ET.Element(o_("definition"))
    el.set(XML_ID, ident)
    if target:
        el.set("for", target)

    has_metadata = False
    if d.title:
        meta = ET.SubElement(el, o_("meta"), {"property": "dc:title"})
        meta.text = d.title
        has_metadata = True
    for ann in resolve_annotations(
        d.keyvals,
        scope,
        "definition",
        vocab_uri=ctx.vocab_uri,
        rules=rules,
        prefixes=ctx.prefixes,
        base_uri=ctx.base_uri,
        doc_dir=ctx.doc_dir,
    ):
        el.append(annotation_meta(ann))
        has_metadata = True
    if has_metadata:
        el.set("about", f"#{ident}")

    _emit_body(el, list(d.body), scope, rules)
    _trim_mixed(el)
    return el


def _target_in_scope(target: str, scope: Scope) -> bool:
    if target in scope.symbols:
        return True
    return any(kd.key == target for kd in scope.keys.values())


# ── Definition bodies ───────────────────────────────────────────────


def _append_text(el: ET.Element, text: str) -> None:
    children = list(el)
    if children:
        children[-1].tail = (children[-1].tail or "") + text
    else:
        el.text = (el.text or "") + text


def _current_text(el: ET.Element) -> str:
    children = list(el)
    return (children[-1].tail if children else el.text) or ""


def _add_prose(el: ET.Element, raw: str) -> None:
    import re as _re

    collapsed = _re.sub(r"\s+", " ", raw)
    if collapsed.startswith(" ") and _current_text(el).endswith(" "):
        collapsed = collapsed[1:]
    if collapsed:
        _append_text(el, collapsed)


def _trim_mixed(el: ET.Element) -> None:
    children = list(el)
    if el.text:
        el.text = el.text.lstrip() if children or el.text.strip() else None
        if not children and el.text is not None:
            el.text = el.text.strip() or None
    if children and children[-1].tail:
        children[-1].tail = children[-1].tail.rstrip() or None


def _emit_body(el: ET.Element, nodes: list, scope: Scope, rules) -> None:
    i = 0
    while i < len(nodes):
        node = nodes[i]
        if isinstance(node, Text):
            _add_prose(el, node.value)
        elif isinstance(node, Group):
            _emit_body(el, list(node.children), scope, rules)
        elif isinstance(node, MathGroup):
            obj = expand_math(node.tokens, scope)
            el.append(omobj_element(obj))
        elif isinstance(node, Command):
            if node.name == "definiendum":
                el.append(_term_element(node, scope, rules))
            elif node.name in _ACCENTS and i + 1 < len(nodes) and isinstance(nodes[i + 1], Text):
                following = nodes[i + 1].value
                if following:
                    _add_prose(el, accent_char(node.name, following[0]) + following[1:])
                    i += 2
                    continue
                _add_prose(el, print_node(node))
            elif node.name in _NAMED_GLYPHS:
                _add_prose(el, _NAMED_GLYPHS[node.name])
            else:
                _add_prose(el, print_node(node))
        elif isinstance(node, Environment):
            raise EmitError(
                f"environment '{node.name}' is not allowed inside a definition",
                node.span,
            )
        i += 1


def _term_element(node: Command, scope: Scope, rules) -> ET.Element:
    target = None
    for key, value in node.opts:
        if value is None:
            target = key
            break
    if not target:
        raise EmitError("\\definiendum needs a [symbol] option", node.span)
    home = _home_of(target, scope)
    if home is None:
        raise EmitError(f"\\definiendum for unknown symbol '{target}'", node.span)
    term = ET.Element(o_("term"), {"cd": home, "name": target})
    _emit_body(term, list(node.args[0].children), scope, rules)
    _trim_mixed(term)
    return term


def _home_of(name: str, scope: Scope) -> str | None:
    sym = scope.symbols.get(name)
    if sym is not None:
        return sym.home
    homes = {kd.home for kd in scope.keys.values() if kd.key == name}
    if len(homes) == 1:
        return next(iter(homes))
    return None


def definition_plain_text(d: DefinitionBlock, scope: Scope, rules=None) -> str:
    """Readable one-line text of a definition, formulas linearized."""
    if rules is None:
        rules = compile_rules(scope)
    el = ET.Element(o_("definition"))
    _emit_body(el, list(d.body), scope, rules)
    _trim_mixed(el)
    return element_plain_text(el, rules)


def element_plain_text(el: ET.Element, rules) -> str:
    parts: list[str] = []

    def walk(e: ET.Element):
        local = omxml.local_name(e.tag)
        if local == "meta":
            return
        if local == "OMOBJ":
            obj = omxml.om_from_xml(e)
            parts.append(linearize(render_object(obj, rules).math))
            return
        if e.text:
            parts.append(e.text)
        for child in e:
            walk(child)
            if child.tail:
                parts.append(child.tail)

    if el.text:
        parts.append(el.text)
    for child in el:
        walk(child)
        if child.tail:
            parts.append(child.tail)
    import re as _re

    return _re.sub(r"\s+", " ", "".join(parts)).strip()
