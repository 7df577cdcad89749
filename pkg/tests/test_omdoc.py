from __future__ import annotations

import xml.etree.ElementTree as ET

import pytest

from semtex.content import OMA, OMI, OMS, OMV
from semtex.errors import EmitError
from semtex.modsys import ModuleDef, ModuleGraph, collect_modules
from semtex.omdoc import definition_plain_text, emit_theory, serialize
from semtex.omxml import XML_ID, local_name, om_from_xml
from semtex.notation import compile_rules
from semtex.store import MEDIA_OMDOC
from semtex.syntax import parse_document

BASE = "http://localhost:8080"


def _children(el, name):
    return [c for c in el if local_name(c.tag) == name]


def _theory_of(doc):
    (theory,) = _children(doc, "theory")
    return theory


@pytest.fixture(scope="module")
def reals_doc(compiled_corpus):
    _, docs = compiled_corpus
    return ET.fromstring(docs["main/reals"].variants[MEDIA_OMDOC])


def test_theory_id_and_import_target(reals_doc):
    theory = _theory_of(reals_doc)
    assert theory.get(XML_ID) == "reals"
    (imports,) = _children(theory, "imports")
    assert imports.get("from") == "../background/sets.omdoc#sets"


def test_symbols_in_declaration_order_each_followed_by_a_notation(reals_doc):
    theory = _theory_of(reals_doc)
    names = [c.get(XML_ID) for c in _children(theory, "symbol")]
    assert names == ["Reals", "greater", "positiveReals"]
    kinds = [local_name(c.tag) for c in theory]
    for i, kind in enumerate(kinds):
        if kind == "symbol":
            assert kinds[i + 1] == "notation"


def test_definition_attributes_and_title(reals_doc):
    theory = _theory_of(reals_doc)
    (definition,) = _children(theory, "definition")
    assert definition.get(XML_ID) == "posreals.def"
    assert definition.get("for") == "positiveReals"
    (meta,) = _children(definition, "meta")
    assert meta.get("property") == "dc:title"
    assert meta.text == "Positive Real Numbers"


def test_definition_object_is_the_expected_tree(reals_doc):
    theory = _theory_of(reals_doc)
    (definition,) = _children(theory, "definition")
    (omobj,) = _children(definition, "OMOBJ")
    assert om_from_xml(omobj) == OMA(
        OMS("mathtalk", "defeq"),
        (
            OMS("reals", "positiveReals"),
            OMA(
                OMS("sets", "setst"),
                (
                    OMA(OMS("sets", "inset"), (OMV("x"), OMS("reals", "Reals"))),
                    OMA(OMS("reals", "greater"), (OMV("x"), OMI(0))),
                ),
            ),
        ),
    )


def test_empty_module_emits_a_bare_theory():
    mod = ModuleDef(id="m", origin="m.tex")
    scope = ModuleGraph({"m": mod}, []).scope("m")
    doc = emit_theory(mod, scope, base_uri=BASE, doc_path="m")
    theory = _theory_of(doc)
    assert theory.get(XML_ID) == "m"
    assert list(theory) == []


def test_certification_theory_records_keydefs(compiled_corpus):
    _, docs = compiled_corpus
    doc = ET.fromstring(docs["ontologies/cert"].variants[MEDIA_OMDOC])
    theory = _theory_of(doc)
    keydefs = [c for c in _children(theory, "meta") if c.get("keydef")]
    assert [(m.get("keydef"), m.get("env")) for m in keydefs] == [("hasState", "document")]
    symbols = [c.get(XML_ID) for c in _children(theory, "symbol")]
    assert symbols == ["state-doc-rd", "tuev"]
    (imports,) = _children(theory, "imports")
    assert imports.get("meta") == "true"


def test_term_element_for_the_definiendum(compiled_corpus):
    _, docs = compiled_corpus
    doc = ET.fromstring(docs["ontologies/cert"].variants[MEDIA_OMDOC])
    theory = _theory_of(doc)
    defs = _children(theory, "definition")
    has_state = next(d for d in defs if d.get("for") == "hasState")
    (term,) = [el for el in has_state.iter() if local_name(el.tag) == "term"]
    assert term.get("cd") == "certification"
    assert term.get("name") == "hasState"
    assert term.text == "has state"


def test_definition_for_unknown_symbol_is_an_error():
    source = (
        "\\begin{module}[id=m]\\symdef{x}{1}"
        "\\begin{definition}[for=ghost]g\\end{definition}\\end{module}"
    )
    (mod,) = collect_modules(parse_document(source), "m.tex")
    scope = ModuleGraph({"m": mod}, []).scope("m")
    with pytest.raises(EmitError):
        emit_theory(mod, scope, base_uri=BASE, doc_path="m")


def test_duplicate_definition_ids_collide():
    source = (
        "\\begin{module}[id=m]\\symdef{x}{1}"
        "\\begin{definition}[id=d,for=x]a\\end{definition}"
        "\\begin{definition}[id=d,for=x]b\\end{definition}\\end{module}"
    )
    (mod,) = collect_modules(parse_document(source), "m.tex")
    scope = ModuleGraph({"m": mod}, []).scope("m")
    with pytest.raises(EmitError) as err:
        emit_theory(mod, scope, base_uri=BASE, doc_path="m")
    assert "collision" in str(err.value)


def test_definitions_without_id_get_stable_generated_ids(compiled_corpus):
    _, docs = compiled_corpus
    doc = ET.fromstring(docs["ontologies/cert"].variants[MEDIA_OMDOC])
    ids = [d.get(XML_ID) for d in _theory_of(doc).iter() if local_name(d.tag) == "definition"]
    assert ids == ["hasState.def", "state-doc-rd.def", "tuev.def"]


def test_accents_are_decoded_in_body_text(compiled_corpus):
    _, docs = compiled_corpus
    data = docs["ontologies/cert"].variants[MEDIA_OMDOC].decode("utf-8")
    assert "T\\\"UV" not in data
    assert "Überwachungsverein" in data


# ── serialize ───────────────────────────────────────────────────────


def test_serialization_is_deterministic(reals_doc, compiled_corpus):
    _, docs = compiled_corpus
    data = docs["main/reals"].variants[MEDIA_OMDOC]
    assert serialize(ET.fromstring(data)) == data


def test_serialized_documents_reparse_to_equal_structure(reals_doc):
    data = serialize(reals_doc)
    again = ET.fromstring(data)

    def shape(el):
        return (
            el.tag,
            sorted(el.attrib.items()),
            (el.text or "").strip(),
            [shape(c) for c in el],
        )

    assert shape(again) == shape(reals_doc)


def test_attribute_escaping():
    el = ET.Element("{http://omdoc.org/ns}meta", {"property": 'a<b&"c'})
    el.text = "x < y & z"
    data = serialize(el)
    assert b"&lt;" in data and b"&amp;" in data and b"&quot;" in data
    back = ET.fromstring(data)
    assert back.get("property") == 'a<b&"c'
    assert back.text == "x < y & z"


def test_definition_plain_text(compiled_corpus):
    graph, _ = compiled_corpus
    cert = graph.modules["certification"]
    scope = graph.scope("certification")
    rules = compile_rules(scope)
    texts = [definition_plain_text(d, scope, rules) for d in cert.definitions]
    assert texts[0] == "A document has state x, iff the project manager decrees it so."
    assert texts[1] == (
        "A document has state rd. x, iff it has been submitted to x for certification."
    )
    assert texts[2] == (
        "The TÜV (Technischer Überwachungsverein) is a well-known "
        "certification agency in Germany."
    )
