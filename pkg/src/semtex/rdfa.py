"""RDF triples from metadata annotations, embedded as (and recovered
from) a small RDFa subset: about / property / rel / resource / content
plus prefix declarations on the root element.

Vocabulary namespaces are dereferenceable: the namespace of a key
declared in module M is the compiled document URI of M plus ``#``, so
every predicate resolves to the page that defines it.
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass
from urllib.parse import urljoin
import xml.etree.ElementTree as ET

from .content import OMObject, expand_math
from .errors import RdfaError
from .modsys import BUILTIN_KEYS, KeyDef, Scope
from .notation import linearize, render_object
from .syntax import KeyValList, MathGroup
from .uris import DEFAULT_BASE_URI, resource_uri, symbol_uri, vocab_namespace  # noqa: F401
from . import omxml

DC_NS = "http://purl.org/dc/elements/1.1/"

_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: str
    object_is_uri: bool = False

    def nt_line(self) -> str:
        if self.object_is_uri:
            obj = f"<{self.object}>"
        else:
            obj = '"' + _escape_literal(self.object) + '"'
        return f"<{self.subject}> <{self.predicate}> {obj} ."


def _escape_literal(s: str) -> str:
    return (
        s.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def nt_document(triples) -> str:
    lines = sorted(t.nt_line() for t in triples)
    return "".join(line + "\n" for line in lines)


class PrefixMap:
    """prefix -> namespace URI; ``dc`` is always available."""

    def __init__(self, mapping: dict | None = None):
        self.mapping: dict[str, str] = {"dc": DC_NS}
        if mapping:
            for prefix, uri in mapping.items():
                self.declare(prefix, uri)

    def declare(self, prefix: str, uri: str) -> None:
        existing = self.mapping.get(prefix)
        if existing is not None and existing != uri:
            raise RdfaError(f"prefix '{prefix}' already bound to {existing}")
        self.mapping[prefix] = uri

    def resolve_curie(self, curie: str) -> str:
        prefix, sep, local = curie.partition(":")
        if not sep:
            raise RdfaError(f"'{curie}' is not a CURIE")
        uri = self.mapping.get(prefix)
        if uri is None:
            raise RdfaError(f"undeclared prefix '{prefix}' in '{curie}'")
        return uri + local

    def curie_for(self, uri: str) -> str:
        best: tuple[str, str] | None = None
        for prefix, ns in self.mapping.items():
            if uri.startswith(ns) and (best is None or len(ns) > len(best[1])):
                best = (prefix, ns)
        if best is None:
            raise RdfaError(f"no declared prefix covers <{uri}>")
        return f"{best[0]}:{uri[len(best[1]):]}"

    def to_attr(self) -> str:
        return " ".join(f"{p}: {self.mapping[p]}" for p in sorted(self.mapping))

    @classmethod
    def from_attr(cls, value: str | None) -> "PrefixMap":
        pm = cls()
        if not value:
            return pm
        parts = value.split()
        if len(parts) % 2 != 0:
            raise RdfaError(f"malformed prefix declaration: {value!r}")
        for i in range(0, len(parts), 2):
            prefix = parts[i]
            if not prefix.endswith(":"):
                raise RdfaError(f"malformed prefix declaration: {value!r}")
            pm.mapping[prefix[:-1]] = parts[i + 1]
        return pm


@dataclass(frozen=True)
class Annotation:
    """One resolved metadata pair, ready for emission."""

    key: str
    keydef: KeyDef
    predicate: str
    curie: str
    object: str
    object_is_uri: bool
    math: OMObject | None = None

    def triple(self, subject: str) -> Triple:
        return Triple(subject, self.predicate, self.object, self.object_is_uri)


def resolve_link(value: str, base_uri: str, doc_dir: str) -> str:
    """Document-relative references become dereferenceable store URIs."""
    if _SCHEME.match(value):
        return value
    path, _, fragment = value.partition("#")
    norm = posixpath.normpath(posixpath.join(doc_dir, path)) if path else doc_dir
    if fragment:
        return f"{base_uri}/doc/{norm}.omdoc#{fragment}"
    return f"{base_uri}/doc/{norm}"


def resolve_annotations(
    kvs: KeyValList,
    scope: Scope,
    env: str,
    *,
    vocab_uri,
    rules,
    prefixes: PrefixMap,
    base_uri: str = DEFAULT_BASE_URI,
    doc_dir: str = "",
) -> list[Annotation]:
    """Match keyvals against visible key declarations.

    Builtin keys (``id``, ``title``, ``for``) are skipped here; their
    meaning is realized by the emitters. Unknown keys are errors.
    """
    builtins = BUILTIN_KEYS.get(env, ("id", "title"))
    out: list[Annotation] = []
    for key, value in kvs:
        if key in builtins:
            continue
        kd = scope.find_key(env, key)
        if kd is None:
            raise RdfaError(f"unknown key '{key}' for environment '{env}'")
        ns = vocab_uri(kd.home)
        prefixes.declare(kd.home, ns)
        predicate = ns + key
        curie = f"{kd.home}:{key}"
        if kd.link:
            if not isinstance(value, str) or not value:
                raise RdfaError(f"link key '{key}' needs a reference value")
            uri = resolve_link(value, base_uri, doc_dir)
            out.append(Annotation(key, kd, predicate, curie, uri, True))
        elif isinstance(value, MathGroup):
            obj = expand_math(value.tokens, scope)
            literal = linearize(render_object(obj, rules).math)
            out.append(Annotation(key, kd, predicate, curie, literal, False, obj))
        elif value is None:
            out.append(Annotation(key, kd, predicate, curie, "true", False))
        else:
            out.append(Annotation(key, kd, predicate, curie, value, False))
    return out


def triples_from_keyvals(
    subject: str,
    kvs: KeyValList,
    scope: Scope,
    *,
    env: str = "document",
    vocab_uri,
    rules,
    base_uri: str = DEFAULT_BASE_URI,
    doc_dir: str = "",
) -> list[Triple]:
    prefixes = PrefixMap()
    annotations = resolve_annotations(
        kvs,
        scope,
        env,
        vocab_uri=vocab_uri,
        rules=rules,
        prefixes=prefixes,
        base_uri=base_uri,
        doc_dir=doc_dir,
    )
    return [a.triple(subject) for a in annotations]


# ── Embedding and extraction ────────────────────────────────────────


def annotation_meta(ann: Annotation) -> ET.Element:
    """The ``meta`` element carrying one annotation inside OMDoc."""
    meta = ET.Element(omxml.omdoc("meta"))
    if ann.object_is_uri:
        meta.set("rel", ann.curie)
        meta.set("resource", ann.object)
    elif ann.math is not None:
        meta.set("property", ann.curie)
        meta.set("content", ann.object)
        meta.append(omxml.omobj_element(ann.math))
    else:
        meta.set("property", ann.curie)
        meta.text = ann.object
    return meta


def emit_rdfa(doc: ET.Element, triples, *, prefixes: PrefixMap | None = None, doc_uri: str = "") -> ET.Element:
    """Attach triples to a document as RDFa ``meta`` children of their
    subject elements; prefixes are declared on the root."""
    prefixes = prefixes or PrefixMap()
    for t in triples:
        prefixes.declare(*_prefix_for(t.predicate, prefixes))
    base = doc.get("about", doc_uri) or doc_uri
    for t in triples:
        target = _subject_element(doc, t.subject, base)
        if target is None:
            raise RdfaError(f"no element for subject <{t.subject}>")
        if target is not doc and target.get("about") is None:
            frag = t.subject[len(base):] if t.subject.startswith(base) else t.subject
            target.set("about", frag)
        meta = ET.Element(omxml.omdoc("meta"))
        curie = prefixes.curie_for(t.predicate)
        if t.object_is_uri:
            meta.set("rel", curie)
            meta.set("resource", t.object)
        else:
            meta.set("property", curie)
            meta.text = t.object
        target.append(meta)
    doc.set("prefix", prefixes.to_attr())
    return doc


def _prefix_for(uri: str, prefixes: PrefixMap) -> tuple[str, str]:
    try:
        curie = prefixes.curie_for(uri)
        prefix = curie.partition(":")[0]
        return prefix, prefixes.mapping[prefix]
    except RdfaError:
        pass
    ns, _, local = uri.rpartition("#") if "#" in uri else uri.rpartition("/")
    ns = ns + ("#" if "#" in uri else "/")
    count = len(prefixes.mapping)
    prefix = f"ns{count}"
    while prefix in prefixes.mapping:
        count += 1
        prefix = f"ns{count}"
    return prefix, ns


def _subject_element(doc: ET.Element, subject: str, base: str) -> ET.Element | None:
    if subject == base or subject == "":
        return doc
    if subject.startswith(base + "#") or subject.startswith("#"):
        frag = subject.rpartition("#")[2]
        for el in doc.iter():
            if el.get(omxml.XML_ID) == frag or el.get("id") == frag:
                return el
    for el in doc.iter():
        if el.get("about") == subject:
            return el
    return None


def extract_triples(doc: ET.Element, doc_uri: str | None = None) -> list[Triple]:
    """Recover all triples from the supported RDFa subset."""
    base = doc_uri if doc_uri is not None else ""
    root_about = doc.get("about")
    if root_about is not None:
        base = _resolve_ref(root_about, base)
    prefixes = PrefixMap.from_attr(doc.get("prefix"))
    out: list[Triple] = []
    _walk_rdfa(doc, base or "", prefixes, out, is_root=True)
    return out


def _resolve_ref(ref: str, base: str) -> str:
    if ref == "":
        return base
    if _SCHEME.match(ref):
        return ref
    if ref.startswith("#"):
        return base + ref
    return urljoin(base, ref) if base else ref


def _walk_rdfa(el: ET.Element, subject: str, prefixes: PrefixMap, out: list, is_root: bool = False) -> None:
    decl = el.get("prefix")
    if decl and not is_root:
        merged = PrefixMap(dict(prefixes.mapping))
        for p, uri in PrefixMap.from_attr(decl).mapping.items():
            merged.mapping[p] = uri
        prefixes = merged
    about = el.get("about")
    if about is not None and not is_root:
        subject = _resolve_ref(about, subject)
    prop = el.get("property")
    if prop is not None:
        content = el.get("content")
        literal = content if content is not None else (el.text or "")
        out.append(Triple(subject, prefixes.resolve_curie(prop), literal, False))
    rel = el.get("rel")
    if rel is not None:
        resource = el.get("resource")
        if resource is None:
            raise RdfaError(f"rel='{rel}' without resource")
        out.append(
            Triple(subject, prefixes.resolve_curie(rel), _resolve_ref(resource, subject), True)
        )
    for child in el:
        _walk_rdfa(child, subject, prefixes, out)
