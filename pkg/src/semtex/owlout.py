"""OWL XML export for vocabulary modules whose meta language is owl.

Mapping profile: key declarations become AnnotationProperties; nullary
symbols become NamedIndividuals; value-forming (n-ary) symbols become
AnnotationProperties. A symbol can override its kind with the reserved
``owltype=`` option (class | individual | objectproperty |
annotationproperty). Definition texts ride along as rdfs:comment
annotation assertions.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .errors import OwlExportError
from .modsys import ModuleDef, Scope
from .notation import compile_rules
from .omdoc import definition_plain_text
from .rdfa import resolve_annotations, PrefixMap
from .uris import default_base_uri, symbol_uri, vocab_namespace
from .omxml import owl as owl_

RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"

_OWLTYPE_ELEMENTS = {
    "class": "Class",
    "individual": "NamedIndividual",
    "objectproperty": "ObjectProperty",
    "annotationproperty": "AnnotationProperty",
}


def meta_language_of(m: ModuleDef) -> str | None:
    for ref in m.imports:
        if ref.meta:
            return ref.module
    return None


def export_owl(
    m: ModuleDef,
    scope: Scope,
    *,
    rules=None,
    base_uri: str | None = None,
    doc_path: str | None = None,
    vocab_uri=None,
    import_iris: list[str] | None = None,
) -> ET.Element:
    """Export one module as an OWL XML ontology document."""
    if meta_language_of(m) != "owl":
        raise OwlExportError(
            f"module '{m.id}' has no owl meta language import", m.span
        )
    base_uri = base_uri or default_base_uri()
    doc_path = doc_path if doc_path is not None else m.id
    if rules is None:
        rules = compile_rules(scope)
    ontology_iri = f"{base_uri}/doc/{doc_path}.omdoc"

    def entity_iri(name: str) -> str:
        return symbol_uri(base_uri, doc_path, name)

    root = ET.Element(owl_("Ontology"), {"ontologyIRI": ontology_iri})
    ET.SubElement(root, owl_("Prefix"), {"name": "rdfs", "IRI": RDFS_NS})
    for iri in import_iris or []:
        imp = ET.SubElement(root, owl_("Import"))
        imp.text = iri

    if vocab_uri is None:
        vocab_uri = lambda mid: vocab_namespace(base_uri, doc_path if mid == m.id else mid)
    for ann in resolve_annotations(
        m.annotations,
        scope,
        "module",
        vocab_uri=vocab_uri,
        rules=rules,
        prefixes=PrefixMap(),
        base_uri=base_uri,
    ):
        annotation = ET.SubElement(root, owl_("Annotation"))
        ET.SubElement(annotation, owl_("AnnotationProperty"), {"IRI": ann.predicate})
        literal = ET.SubElement(annotation, owl_("Literal"))
        literal.text = ann.object

    entities: dict[str, str] = {}
    for kd in m.keydefs:
        entities[kd.key] = "AnnotationProperty"
    for sym in m.symdefs:
        override = sym.opts.get("owltype")
        if override is not None:
            kind = _OWLTYPE_ELEMENTS.get(str(override).lower())
            if kind is None:
                raise OwlExportError(
                    f"unknown owltype '{override}' on symbol '{sym.name}'", sym.span
                )
        else:
            kind = "NamedIndividual" if sym.arity == 0 else "AnnotationProperty"
        entities[sym.name] = kind

    for name, kind in entities.items():
        decl = ET.SubElement(root, owl_("Declaration"))
        ET.SubElement(decl, owl_(kind), {"IRI": entity_iri(name)})

    for d in m.definitions:
        target = d.target
        if target is None or target not in entities:
            continue
        text = definition_plain_text(d, scope, rules)
        if not text:
            continue
        assertion = ET.SubElement(root, owl_("AnnotationAssertion"))
        ET.SubElement(
            assertion, owl_("AnnotationProperty"), {"abbreviatedIRI": "rdfs:comment"}
        )
        iri = ET.SubElement(assertion, owl_("IRI"))
        iri.text = entity_iri(target)
        literal = ET.SubElement(assertion, owl_("Literal"))
        literal.text = text
    return root


def declaration_count(doc: ET.Element) -> int:
    from .omxml import local_name

    return sum(1 for el in doc.iter() if local_name(el.tag) == "Declaration")
