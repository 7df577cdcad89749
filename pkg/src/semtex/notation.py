"""Notation rules: compiling symbol templates, matching them against
content trees, and rendering to Presentation MathML with parallel markup.

A rendered formula embeds its originating content tree inside an
``annotation-xml`` element; presentation nodes reference content nodes
through ``xref`` attributes, which is what the interactive viewer uses
for folding.
"""

from __future__ import annotations

import copy
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .content import OMA, OMI, OMS, OMV, OMObject
from .errors import NotationError
from .modsys import Scope, SymDef
from .syntax import Token, TokenKind
from . import omxml
from .omxml import m as m_

ANNOTATION_ENCODING = "application/openmath+xml"

# ── Template nodes ──────────────────────────────────────────────────


@dataclass
class RToken:
    kind: str  # mo | mi | mn | mtext
    text: str
    fence: str | None = None  # "open" | "close"
    elidable: bool = False
    pair: int | None = None


@dataclass
class RSlot:
    index: int


@dataclass
class RSup:
    base: list
    script: list


RNode = RToken | RSlot | RSup


@dataclass(frozen=True)
class Prototype:
    head: OMS
    arity: int


@dataclass
class NotationRule:
    cd: str
    name: str
    arity: int
    rendering: tuple = ()

    @property
    def prototype(self) -> Prototype:
        return Prototype(OMS(self.cd, self.name), self.arity)


@dataclass
class RenderedFormula:
    math: ET.Element
    content: OMObject
    content_xml: ET.Element
    crossrefs: tuple = ()


# ── Character tables ────────────────────────────────────────────────

_BB_UPPER_EXCEPTIONS = {
    "C": "ℂ",
    "H": "ℍ",
    "N": "ℕ",
    "P": "ℙ",
    "Q": "ℚ",
    "R": "ℝ",
    "Z": "ℤ",
}

_NAMED_GLYPHS = {
    "in": "∈",
    "mid": "∣",
    "cdot": "⋅",
    "times": "×",
    "ldots": "…",
}

_ACCENTS = {'"': "̈", "'": "́", "`": "̀", "^": "̂", "~": "̃"}

_SUPERSCRIPT_CHARS = {
    "0": "⁰",
    "1": "¹",
    "2": "²",
    "3": "³",
    "4": "⁴",
    "5": "⁵",
    "6": "⁶",
    "7": "⁷",
    "8": "⁸",
    "9": "⁹",
    "+": "⁺",
    "-": "⁻",
    "=": "⁼",
    "(": "⁽",
    ")": "⁾",
    "n": "ⁿ",
    "i": "ⁱ",
}

_OPEN_FENCES = "(["
_CLOSE_FENCES = ")]"


def doublestruck(ch: str) -> str:
    if ch in _BB_UPPER_EXCEPTIONS:
        return _BB_UPPER_EXCEPTIONS[ch]
    if "A" <= ch <= "Z":
        return chr(0x1D538 + ord(ch) - ord("A"))
    if "a" <= ch <= "z":
        return chr(0x1D552 + ord(ch) - ord("a"))
    if ch.isdigit():
        return chr(0x1D7D8 + int(ch))
    raise NotationError(f"cannot render '{ch}' double-struck")


def accent_char(accent: str, ch: str) -> str:
    mark = _ACCENTS.get(accent)
    if mark is None:
        raise NotationError(f"unsupported accent \\{accent}")
    return unicodedata.normalize("NFC", ch + mark)


def detex_text(tokens) -> str:
    """Flatten template/prose tokens into plain text, applying accents."""
    parts: list[str] = []
    toks = [t for t in tokens if t.kind is not TokenKind.COMMENT]
    i = 0
    while i < len(toks):
        tok = toks[i]
        if tok.kind is TokenKind.TEXT:
            parts.append(tok.lexeme)
        elif tok.kind in (TokenKind.BEGIN_GROUP, TokenKind.END_GROUP):
            pass
        elif tok.kind is TokenKind.COMMAND:
            name = tok.name
            if name in _ACCENTS:
                if i + 1 < len(toks) and toks[i + 1].kind is TokenKind.TEXT and toks[i + 1].lexeme:
                    nxt = toks[i + 1].lexeme
                    parts.append(accent_char(name, nxt[0]) + nxt[1:])
                    i += 2
                    continue
                raise NotationError(f"accent \\{name} without a letter", tok.span)
            elif name == "ss":
                parts.append("ß")
            elif name in _NAMED_GLYPHS:
                parts.append(_NAMED_GLYPHS[name])
            else:
                raise NotationError(f"\\{name} is not supported inside \\text", tok.span)
        else:
            raise NotationError(
                f"'{tok.lexeme}' is not supported inside \\text", tok.span
            )
        i += 1
    return "".join(parts)


# ── Template compilation ────────────────────────────────────────────


class _TplCursor:
    """Atom stream over template tokens; text runs yield single chars."""

    def __init__(self, tokens):
        self.tokens = [t for t in tokens if t.kind is not TokenKind.COMMENT]
        self.ti = 0
        self.ci = 0

    def peek(self):
        return self._get(consume=False)

    def next(self):
        return self._get(consume=True)

    def _get(self, consume: bool):
        ti, ci = self.ti, self.ci
        while ti < len(self.tokens):
            tok = self.tokens[ti]
            if tok.kind is TokenKind.TEXT:
                if ci < len(tok.lexeme):
                    atom = ("char", tok.lexeme[ci], tok)
                    if consume:
                        self.ti, self.ci = (ti, ci + 1)
                    return atom
                ti, ci = ti + 1, 0
                continue
            if consume:
                self.ti, self.ci = ti + 1, 0
            if tok.kind is TokenKind.PARAMETER:
                return ("param", tok.param_index, tok)
            if tok.kind is TokenKind.SUPERSCRIPT:
                return ("sup", None, tok)
            if tok.kind is TokenKind.COMMAND:
                return ("cmd", tok.name, tok)
            if tok.kind is TokenKind.BEGIN_GROUP:
                group, end = self._collect_group(ti)
                if consume:
                    self.ti, self.ci = end, 0
                return ("group", group, tok)
            if tok.kind in (TokenKind.BEGIN_OPT, TokenKind.END_OPT):
                return ("char", tok.lexeme, tok)
            raise NotationError(
                f"'{tok.lexeme}' is not allowed in a notation template", tok.span
            )
        return None

    def _collect_group(self, start: int):
        depth = 0
        i = start
        inner: list[Token] = []
        while i < len(self.tokens):
            tok = self.tokens[i]
            i += 1
            if tok.kind is TokenKind.BEGIN_GROUP:
                depth += 1
                if depth == 1:
                    continue
            elif tok.kind is TokenKind.END_GROUP:
                depth -= 1
                if depth == 0:
                    return inner, i
            inner.append(tok)
        raise NotationError("unbalanced '{' in notation template", self.tokens[start].span)


def compile_notation(sym: SymDef, scope: Scope, _stack: tuple = ()) -> NotationRule:
    """Compile a symbol's template into a notation rule.

    Semantic macros mentioned in the template are inlined; cyclic
    references are rejected.
    """
    if sym.name in _stack:
        chain = " -> ".join(_stack + (sym.name,))
        raise NotationError(f"cyclic notation reference: {chain}", sym.span)
    nodes = _compile_seq(sym.body, sym.arity, scope, _stack + (sym.name,))
    _assign_fence_pairs(nodes, counter=[0])
    return NotationRule(sym.home, sym.name, sym.arity, tuple(nodes))


def compile_rules(scope: Scope) -> dict:
    """Compile rules for every symbol visible in the scope."""
    rules: dict[tuple[str, str], NotationRule] = {}
    for sym in scope.symbols.values():
        rules[(sym.home, sym.name)] = compile_notation(sym, scope)
    return rules


def _compile_seq(tokens, arity: int, scope: Scope, stack: tuple) -> list:
    cur = _TplCursor(tokens)
    out: list[RNode] = []
    while True:
        atom = cur.peek()
        if atom is None:
            return out
        kind = atom[0]
        if kind == "char":
            ch = atom[1]
            if ch.isspace():
                while True:
                    nxt = cur.peek()
                    if nxt is None or nxt[0] != "char" or not nxt[1].isspace():
                        break
                    cur.next()
                out.append(RToken("mtext", " "))
            elif ch.isalpha():
                run = ""
                while True:
                    nxt = cur.peek()
                    if nxt is None or nxt[0] != "char" or not nxt[1].isalpha():
                        break
                    run += cur.next()[1]
                out.append(RToken("mi", run))
            elif ch.isdigit():
                run = ""
                while True:
                    nxt = cur.peek()
                    if nxt is None or nxt[0] != "char" or not nxt[1].isdigit():
                        break
                    run += cur.next()[1]
                out.append(RToken("mn", run))
            else:
                cur.next()
                out.append(_operator_token(ch))
        elif kind == "param":
            cur.next()
            if atom[1] > arity:
                raise NotationError(
                    f"parameter #{atom[1]} exceeds arity {arity}", atom[2].span
                )
            out.append(RSlot(atom[1]))
        elif kind == "sup":
            cur.next()
            if not out:
                raise NotationError("superscript without a base", atom[2].span)
            base = [out.pop()]
            script = _compile_item(cur, arity, scope, stack, atom[2])
            out.append(RSup(base, script))
        elif kind == "group":
            cur.next()
            out.extend(_compile_seq(atom[1], arity, scope, stack))
        elif kind == "cmd":
            cur.next()
            out.extend(_compile_cmd(atom[1], atom[2], cur, arity, scope, stack))
        else:  # pragma: no cover
            raise NotationError(f"unexpected template atom {atom!r}")


def _operator_token(ch: str) -> RToken:
    if ch in _OPEN_FENCES:
        return RToken("mo", ch, fence="open", elidable=True)
    if ch in _CLOSE_FENCES:
        return RToken("mo", ch, fence="close", elidable=True)
    return RToken("mo", ch)


def _compile_item(cur, arity, scope, stack, ctx) -> list:
    atom = cur.next()
    if atom is None:
        raise NotationError("missing template argument", ctx.span)
    kind = atom[0]
    if kind == "group":
        return _compile_seq(atom[1], arity, scope, stack)
    if kind == "param":
        if atom[1] > arity:
            raise NotationError(f"parameter #{atom[1]} exceeds arity {arity}", atom[2].span)
        return [RSlot(atom[1])]
    if kind == "cmd":
        return _compile_cmd(atom[1], atom[2], cur, arity, scope, stack)
    if kind == "char":
        ch = atom[1]
        if ch.isalpha():
            return [RToken("mi", ch)]
        if ch.isdigit():
            return [RToken("mn", ch)]
        if ch.isspace():
            raise NotationError("missing template argument", atom[2].span)
        return [_operator_token(ch)]
    raise NotationError("superscript cannot be a template argument", atom[2].span)


def _compile_cmd(name, tok, cur, arity, scope, stack) -> list:
    if name == "mathbb":
        atom = cur.next()
        if atom is None or atom[0] != "group":
            raise NotationError("\\mathbb needs a braced argument", tok.span)
        text = detex_text(atom[1])
        if not text or not all(c.isalnum() for c in text):
            raise NotationError("\\mathbb expects letters or digits", tok.span)
        return [RToken("mo", "".join(doublestruck(c) for c in text))]
    if name == "text":
        atom = cur.next()
        if atom is None or atom[0] != "group":
            raise NotationError("\\text needs a braced argument", tok.span)
        return [RToken("mtext", detex_text(atom[1]))]
    if name in _NAMED_GLYPHS:
        return [RToken("mo", _NAMED_GLYPHS[name])]
    if name == "{":
        return [RToken("mo", "{", fence="open", elidable=True)]
    if name == "}":
        return [RToken("mo", "}", fence="close", elidable=True)]
    if name in _ACCENTS:
        atom = cur.next()
        if atom is None or atom[0] != "char" or not atom[1].isalpha():
            raise NotationError(f"accent \\{name} without a letter", tok.span)
        return [RToken("mi", accent_char(name, atom[1]))]
    if name == ",":
        return [RToken("mtext", " ")]
    sym = scope.resolve_macro(name)
    if sym is None:
        raise NotationError(f"unknown command \\{name} in notation template", tok.span)
    rule = compile_notation(sym, scope, stack)
    if sym.arity == 0:
        return copy.deepcopy(list(rule.rendering))
    args: dict[int, list] = {}
    for k in range(1, sym.arity + 1):
        args[k] = _compile_item(cur, arity, scope, stack, tok)
    return _substitute(copy.deepcopy(list(rule.rendering)), args)


def _substitute(nodes: list, args: dict) -> list:
    out: list[RNode] = []
    for node in nodes:
        if isinstance(node, RSlot):
            out.extend(copy.deepcopy(args[node.index]))
        elif isinstance(node, RSup):
            out.append(RSup(_substitute(node.base, args), _substitute(node.script, args)))
        else:
            out.append(node)
    return out


def _assign_fence_pairs(nodes: list, counter: list) -> None:
    """Match open/close fences within each template list and give each
    matched pair a number; unmatched fences lose their elidable mark."""
    stack: list[RToken] = []
    for node in nodes:
        if isinstance(node, RSup):
            _assign_fence_pairs(node.base, counter)
            _assign_fence_pairs(node.script, counter)
            continue
        if not isinstance(node, RToken) or node.fence is None:
            continue
        node.pair = None
        if node.fence == "open":
            stack.append(node)
        elif stack:
            opener = stack.pop()
            counter[0] += 1
            opener.pair = node.pair = counter[0]
            opener.elidable = node.elidable = True
        else:
            node.elidable = False
    for leftover in stack:
        leftover.elidable = False


# ── Matching ────────────────────────────────────────────────────────


def match_prototype(rule: NotationRule, obj: OMObject):
    """Bind template slots against a content tree, or return None."""
    head = OMS(rule.cd, rule.name)
    if rule.arity == 0:
        return {} if obj == head else None
    if isinstance(obj, OMA) and obj.head == head and len(obj.args) == rule.arity:
        return {i: arg for i, arg in enumerate(obj.args, start=1)}
    return None


# ── Rendering ───────────────────────────────────────────────────────


class _Renderer:
    def __init__(self, rules, id_prefix: str, symbol_uri):
        self.rules = rules
        self.prefix = id_prefix
        self.symbol_uri = symbol_uri
        self._content_ids: dict[tuple, str] = {}
        self._ccount = 0
        self._pcount = 0
        self._paircount = 0
        self.crossrefs: list[tuple[str, str]] = []

    def content_id(self, path: tuple) -> str:
        cid = self._content_ids.get(path)
        if cid is None:
            self._ccount += 1
            cid = f"{self.prefix}c{self._ccount}"
            self._content_ids[path] = cid
        return cid

    def new_pres_id(self) -> str:
        self._pcount += 1
        return f"{self.prefix}p{self._pcount}"

    def new_pair_id(self) -> str:
        self._paircount += 1
        return f"{self.prefix}f{self._paircount}"

    def present(self, obj: OMObject, path: tuple) -> ET.Element:
        cid = self.content_id(path)
        if isinstance(obj, OMV):
            el = ET.Element(m_("mi"))
            el.text = obj.name
        elif isinstance(obj, OMI):
            el = ET.Element(m_("mn"))
            el.text = str(obj.value)
        elif isinstance(obj, OMS):
            rule = self.rules.get((obj.cd, obj.name))
            if rule is not None and rule.arity == 0:
                el = self._wrap(self._instantiate(rule.rendering, {}, (obj.cd, obj.name)))
            else:
                el = ET.Element(m_("mi"))
                el.text = obj.name
                self._mark_symbol(el, obj.cd, obj.name)
        elif isinstance(obj, OMA):
            el = self._present_application(obj, path)
        else:  # pragma: no cover
            raise NotationError(f"cannot render {obj!r}")
        pid = self.new_pres_id()
        el.set("id", pid)
        el.set("xref", cid)
        self.crossrefs.append((pid, cid))
        return el

    def _present_application(self, obj: OMA, path: tuple) -> ET.Element:
        head = obj.head
        if isinstance(head, OMS):
            rule = self.rules.get((head.cd, head.name))
            if rule is not None:
                bindings = match_prototype(rule, obj)
                if bindings is not None:
                    slots = {
                        k: (lambda k=k: self.present(bindings[k], path + (k,)))
                        for k in bindings
                    }
                    return self._wrap(
                        self._instantiate(rule.rendering, slots, (head.cd, head.name))
                    )
        # generic prefix fallback: head(arg1, ..., argN)
        row = ET.Element(m_("mrow"))
        row.append(self.present(head, path + (0,)))
        pair = self.new_pair_id()
        row.append(self._fence("(", "open", pair))
        for i, arg in enumerate(obj.args, start=1):
            if i > 1:
                comma = ET.Element(m_("mo"))
                comma.text = ","
                row.append(comma)
                space = ET.Element(m_("mtext"))
                space.text = " "
                row.append(space)
            row.append(self.present(arg, path + (i,)))
        row.append(self._fence(")", "close", pair))
        return row

    def _fence(self, ch: str, direction: str, pair: str) -> ET.Element:
        el = ET.Element(m_("mo"))
        el.text = ch
        el.set("data-semtex-fence", direction)
        el.set("data-semtex-elidable", "true")
        el.set("data-semtex-pair", pair)
        return el

    def _mark_symbol(self, el: ET.Element, cd: str, name: str) -> None:
        el.set("data-semtex-cd", cd)
        el.set("data-semtex-name", name)
        if self.symbol_uri is not None:
            el.set("href", self.symbol_uri(cd, name))

    def _wrap(self, elements: list) -> ET.Element:
        if len(elements) == 1:
            return elements[0]
        row = ET.Element(m_("mrow"))
        for e in elements:
            row.append(e)
        return row

    def _instantiate(self, nodes, slots, symbol: tuple) -> list:
        pair_map: dict[int, str] = {}
        return self._instantiate_inner(nodes, slots, symbol, pair_map)

    def _instantiate_inner(self, nodes, slots, symbol, pair_map) -> list:
        out: list[ET.Element] = []
        for node in nodes:
            if isinstance(node, RToken):
                el = ET.Element(m_(node.kind))
                el.text = node.text
                if node.fence is not None:
                    el.set("data-semtex-fence", node.fence)
                    if node.elidable:
                        el.set("data-semtex-elidable", "true")
                    if node.pair is not None:
                        page_pair = pair_map.get(node.pair)
                        if page_pair is None:
                            page_pair = self.new_pair_id()
                            pair_map[node.pair] = page_pair
                        el.set("data-semtex-pair", page_pair)
                else:
                    self._mark_symbol(el, symbol[0], symbol[1])
                out.append(el)
            elif isinstance(node, RSlot):
                render = slots.get(node.index)
                if render is None:
                    raise NotationError(
                        f"template slot #{node.index} has no binding"
                    )
                out.append(render())
            elif isinstance(node, RSup):
                sup = ET.Element(m_("msup"))
                sup.append(self._wrap(self._instantiate_inner(node.base, slots, symbol, pair_map)))
                sup.append(self._wrap(self._instantiate_inner(node.script, slots, symbol, pair_map)))
                out.append(sup)
            else:  # pragma: no cover
                raise NotationError(f"unexpected template node {node!r}")
        return out


def render_object(
    obj: OMObject,
    rules,
    id_prefix: str = "",
    symbol_uri=None,
) -> RenderedFormula:
    """Render a content tree to MathML with an embedded content annotation."""
    renderer = _Renderer(rules, id_prefix, symbol_uri)
    content_xml = omxml.omobj_element(obj, id_for=renderer.content_id)
    pres = renderer.present(obj, ())
    math = ET.Element(m_("math"))
    semantics = ET.Element(m_("semantics"))
    semantics.append(pres)
    annotation = ET.Element(m_("annotation-xml"), {"encoding": ANNOTATION_ENCODING})
    annotation.append(content_xml)
    semantics.append(annotation)
    math.append(semantics)
    return RenderedFormula(math, obj, content_xml, tuple(renderer.crossrefs))


def formula_annotation(math: ET.Element) -> ET.Element | None:
    """The embedded OMOBJ of a rendered formula, if any."""
    for el in math.iter():
        if omxml.local_name(el.tag) == "annotation-xml":
            children = list(el)
            if children:
                return children[0]
    return None


def linearize(el: ET.Element) -> str:
    """Plain-text reading of a presentation tree (superscripts become
    Unicode superscript characters where possible)."""
    local = omxml.local_name(el.tag)
    if local in ("annotation-xml", "annotation"):
        return ""
    if local in ("mi", "mo", "mn", "mtext"):
        return el.text or ""
    if local == "msup":
        kids = list(el)
        base = linearize(kids[0]) if kids else ""
        script = linearize(kids[1]) if len(kids) > 1 else ""
        if script and all(c in _SUPERSCRIPT_CHARS for c in script):
            return base + "".join(_SUPERSCRIPT_CHARS[c] for c in script)
        return base + "^" + script
    return "".join(linearize(c) for c in el)


# ── Page assembly ───────────────────────────────────────────────────

from .uris import default_base_uri, symbol_uri as _symbol_uri  # noqa: E402
from .omxml import xh  # noqa: E402

PAGE_CSS = """
body { font-family: Georgia, serif; margin: 2em auto; max-width: 46em; padding: 0 1em; }
h1 { font-size: 1.5em; } h2 { font-size: 1.2em; }
.semtex-definition { border: 1px solid #aaa; padding: .4em .8em; margin: .8em 0; }
.semtex-term { font-style: italic; }
.semtex-meta { display: none; }
[data-semtex-cd] { cursor: pointer; }
.semtex-hide-brackets [data-semtex-elidable='true'] { display: none; }
.semtex-popup { position: fixed; background: #fffcf0; border: 1px solid #444;
  padding: .5em .8em; max-width: 28em; box-shadow: 2px 2px 8px rgba(0,0,0,.35); z-index: 100; }
.semtex-popup-close { float: right; cursor: pointer; margin-left: .6em; }
"""

VIEWER_SCRIPT_NAME = "semtex-viewer.js"


def default_symbol_resolver(doc: ET.Element, doc_path: str, base_uri: str):
    """Map symbol references to URIs using the document's own imports."""
    import posixpath

    doc_dir = posixpath.dirname(doc_path)
    paths: dict[str, str] = {}
    for theory in doc:
        if omxml.local_name(theory.tag) != "theory":
            continue
        tid = theory.get(omxml.XML_ID)
        if tid:
            paths[tid] = doc_path
        for imp in theory:
            if omxml.local_name(imp.tag) != "imports":
                continue
            target = imp.get("from") or ""
            path, _, frag = target.partition("#")
            if frag and path:
                rel = path[: -len(".omdoc")] if path.endswith(".omdoc") else path
                paths[frag] = posixpath.normpath(posixpath.join(doc_dir, rel))

    def resolve(cd: str, name: str) -> str:
        return _symbol_uri(base_uri, paths.get(cd, cd), name)

    return resolve


def _dc_title_of(el: ET.Element) -> str | None:
    for child in el:
        if omxml.local_name(child.tag) == "meta" and child.get("property") == "dc:title":
            return child.get("content") or child.text
    return None


def _copy_rdfa_spans(target: ET.Element, source: ET.Element) -> None:
    """Mirror RDFa-bearing meta children as hidden spans."""
    for child in source:
        if omxml.local_name(child.tag) != "meta":
            continue
        if child.get("property") is not None:
            span = ET.SubElement(target, xh("span"), {"class": "semtex-meta"})
            span.set("property", child.get("property"))
            span.set("content", child.get("content") or child.text or "")
        elif child.get("rel") is not None and child.get("resource") is not None:
            span = ET.SubElement(target, xh("span"), {"class": "semtex-meta"})
            span.set("rel", child.get("rel"))
            span.set("resource", child.get("resource"))


class _FormulaCounter:
    def __init__(self):
        self.n = 0

    def next_prefix(self) -> str:
        self.n += 1
        return f"f{self.n}-"


def _append_text(parent: ET.Element, text: str) -> None:
    if not text:
        return
    children = list(parent)
    if children:
        children[-1].tail = (children[-1].tail or "") + text
    else:
        parent.text = (parent.text or "") + text


def _render_mixed(target: ET.Element, source: ET.Element, rules, counter, symbol_uri_for) -> None:
    if source.text:
        _append_text(target, source.text)
    for child in source:
        local = omxml.local_name(child.tag)
        if local == "OMOBJ":
            obj = omxml.om_from_xml(child)
            rendered = render_object(
                obj, rules, id_prefix=counter.next_prefix(), symbol_uri=symbol_uri_for
            )
            target.append(rendered.math)
        elif local == "term":
            span = ET.SubElement(target, xh("span"), {"class": "semtex-term"})
            cd, name = child.get("cd"), child.get("name")
            if cd and name:
                span.set("data-semtex-cd", cd)
                span.set("data-semtex-name", name)
                if symbol_uri_for is not None:
                    anchor = ET.SubElement(span, xh("a"), {"href": symbol_uri_for(cd, name)})
                    _render_mixed(anchor, child, rules, counter, symbol_uri_for)
                else:
                    _render_mixed(span, child, rules, counter, symbol_uri_for)
            else:
                _render_mixed(span, child, rules, counter, symbol_uri_for)
        elif local == "meta":
            pass  # mirrored separately as hidden spans
        else:
            _render_mixed(target, child, rules, counter, symbol_uri_for)
        if child.tail:
            _append_text(target, child.tail)


def render_definition_div(
    def_el: ET.Element,
    rules,
    label: str,
    counter: _FormulaCounter | None = None,
    symbol_uri_for=None,
) -> ET.Element:
    """One definition as a self-contained XHTML fragment."""
    counter = counter or _FormulaCounter()
    div = ET.Element(xh("div"), {"class": "semtex-definition"})
    def_id = def_el.get(omxml.XML_ID)
    if def_id:
        div.set("id", def_id)
    if def_el.get("about") is not None:
        div.set("about", def_el.get("about"))
    _copy_rdfa_spans(div, def_el)
    para = ET.SubElement(div, xh("p"))
    bold = ET.SubElement(para, xh("b"))
    bold.text = label
    bold.tail = " "
    _render_mixed(para, def_el, rules, counter, symbol_uri_for)
    return div


def definition_label(index_in_theory: int, theory_number: int, title: str | None) -> str:
    label = f"Definition {theory_number}.{index_in_theory}"
    if title:
        label += f" ({title})"
    return label + ":"


def assemble_page(
    doc: ET.Element,
    rules,
    *,
    base_uri: str | None = None,
    doc_path: str = "",
    symbol_uri_for=None,
    theory_numbers: dict | None = None,
    page_title: str | None = None,
) -> ET.Element:
    """Render an emitted OMDoc document to an interactive XHTML page.

    RDFa annotations are preserved; symbol tokens carry cd/name data
    attributes and dereferenceable hrefs; the viewer script is referenced
    but the page is fully readable without it.
    """
    base_uri = base_uri or default_base_uri()
    if symbol_uri_for is None:
        symbol_uri_for = default_symbol_resolver(doc, doc_path, base_uri)

    html = ET.Element(xh("html"))
    if doc.get("prefix") is not None:
        html.set("prefix", doc.get("prefix"))
    if doc.get("about") is not None:
        html.set("about", doc.get("about"))

    head = ET.SubElement(html, xh("head"))
    title_el = ET.SubElement(head, xh("title"))
    title_el.text = page_title or _dc_title_of(doc) or doc_path or "compiled document"
    style = ET.SubElement(head, xh("style"), {"type": "text/css"})
    style.text = PAGE_CSS
    ET.SubElement(
        head,
        xh("script"),
        {"type": "module", "src": f"{base_uri}/{VIEWER_SCRIPT_NAME}"},
    )
    for child in doc:
        if omxml.local_name(child.tag) != "meta":
            continue
        if child.get("property") is not None:
            meta = ET.SubElement(head, xh("meta"))
            meta.set("property", child.get("property"))
            meta.set("content", child.get("content") or child.text or "")
        elif child.get("rel") is not None and child.get("resource") is not None:
            link = ET.SubElement(head, xh("link"))
            link.set("rel", child.get("rel"))
            link.set("resource", child.get("resource"))

    body = ET.SubElement(html, xh("body"))
    if doc_path:
        body.set("data-semtex-doc", doc_path)
    h1 = ET.SubElement(body, xh("h1"))
    h1.text = title_el.text

    counter = _FormulaCounter()
    theories = [el for el in doc if omxml.local_name(el.tag) == "theory"]
    for position, theory in enumerate(theories, start=1):
        tid = theory.get(omxml.XML_ID) or f"theory{position}"
        number = (theory_numbers or {}).get(tid, position)
        section = ET.SubElement(
            body, xh("section"), {"class": "semtex-theory", "id": f"theory-{tid}"}
        )
        if theory.get("about") is not None:
            section.set("about", theory.get("about"))
        _copy_rdfa_spans(section, theory)
        h2 = ET.SubElement(section, xh("h2"))
        h2.text = _dc_title_of(theory) or tid
        definitions = [c for c in theory if omxml.local_name(c.tag) == "definition"]
        for j, def_el in enumerate(definitions, start=1):
            label = definition_label(j, number, _dc_title_of(def_el))
            section.append(
                render_definition_div(def_el, rules, label, counter, symbol_uri_for)
            )
    return html
