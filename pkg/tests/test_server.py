from __future__ import annotations

import io
import json
import urllib.error
import urllib.request

import pytest

from semtex.server import LinkedDataServer, build_multipart, negotiate, parse_accept
from semtex.store import (
    MEDIA_NTRIPLES,
    MEDIA_OMDOC,
    MEDIA_OWL,
    MEDIA_XHTML,
    Store,
)

BASE = "http://localhost:8080"


@pytest.fixture(scope="module")
def corpus_server(tmp_path_factory, compiled_corpus):
    _, docs = compiled_corpus
    store = Store(tmp_path_factory.mktemp("store"))
    for doc in docs.values():
        store.put_resource(doc.doc_path, doc.variants)
    server = LinkedDataServer(store, port=0, base_uri=BASE, log=io.StringIO())
    server.start_background()
    yield server
    server.shutdown()


def _get(server, path, accept=None, method="GET", data=None, headers=None):
    request = urllib.request.Request(
        f"http://127.0.0.1:{server.port}{path}", data=data, method=method
    )
    if accept:
        request.add_header("Accept", accept)
    for name, value in (headers or {}).items():
        request.add_header(name, value)
    try:
        with urllib.request.urlopen(request) as response:
            return response.status, dict(response.headers), response.read()
    except urllib.error.HTTPError as exc:
        return exc.code, dict(exc.headers), exc.read()


# ── content negotiation ─────────────────────────────────────────────


def test_accept_header_parses_quality_values():
    entries = parse_accept("application/omdoc+xml;q=0.9, */*;q=0.1")
    assert entries == [("application/omdoc+xml", 0.9), ("*/*", 0.1)]


def test_negotiation_prefers_highest_quality():
    available = [MEDIA_XHTML, MEDIA_OMDOC]
    assert negotiate("application/omdoc+xml;q=0.9,application/xhtml+xml;q=0.2", available) == MEDIA_OMDOC


def test_negotiation_ties_break_on_fixed_variant_order():
    available = [MEDIA_NTRIPLES, MEDIA_OWL, MEDIA_OMDOC, MEDIA_XHTML]
    assert negotiate("*/*", available) == MEDIA_XHTML
    assert negotiate(None, available) == MEDIA_XHTML
    assert negotiate("application/*", available) == MEDIA_XHTML


def test_negotiation_returns_none_when_nothing_matches():
    assert negotiate("text/html", [MEDIA_OMDOC]) is None


def test_get_document_variant_by_accept(corpus_server):
    code, headers, body = _get(
        corpus_server, "/doc/background/sets", accept="application/omdoc+xml"
    )
    assert code == 200
    assert headers["Content-Type"] == MEDIA_OMDOC
    assert headers["X-Revision"] == "1"
    assert body.startswith(b"<?xml")
    assert b"<theory" in body


def test_get_document_by_extension_ignores_accept(corpus_server):
    code, headers, body = _get(
        corpus_server, "/doc/background/sets.omdoc", accept="text/html"
    )
    assert code == 200
    assert headers["Content-Type"] == MEDIA_OMDOC


def test_unknown_document_is_404(corpus_server):
    code, _, _ = _get(corpus_server, "/doc/nothing/here")
    assert code == 404


def test_unmatched_accept_is_406(corpus_server):
    code, _, _ = _get(corpus_server, "/doc/background/sets", accept="image/png")
    assert code == 406


def test_revision_parameter_selects_old_bytes(corpus_server):
    store = corpus_server.store
    store.put_resource("rev/demo", {MEDIA_OMDOC: b"<one/>"})
    store.put_resource("rev/demo", {MEDIA_OMDOC: b"<two/>"})
    code, headers, body = _get(
        corpus_server, "/doc/rev/demo?rev=1", accept="application/omdoc+xml"
    )
    assert code == 200 and body == b"<one/>" and headers["X-Revision"] == "1"
    code, _, body = _get(corpus_server, "/doc/rev/demo", accept="application/omdoc+xml")
    assert body == b"<two/>"
    code, _, _ = _get(corpus_server, "/doc/rev/demo?rev=99")
    assert code == 404


def test_cors_header_on_gets(corpus_server):
    _, headers, _ = _get(corpus_server, "/doc/main/reals.xhtml")
    assert headers["Access-Control-Allow-Origin"] == "*"


# ── lookup ──────────────────────────────────────────────────────────


def test_lookup_returns_the_definition_fragment(corpus_server):
    code, headers, body = _get(corpus_server, "/lookup?cd=sets&name=inset")
    assert code == 200
    assert headers["Content-Type"].startswith("application/xhtml+xml")
    assert b"is a member of the set" in body
    assert b"semtex-definition" in body


def test_lookup_is_byte_identical_across_requests(corpus_server):
    _, _, one = _get(corpus_server, "/lookup?cd=reals&name=positiveReals")
    _, _, two = _get(corpus_server, "/lookup?cd=reals&name=positiveReals")
    assert one == two
    assert b"Positive Real Numbers" in one


def test_lookup_unknown_cd_and_symbol_are_404(corpus_server):
    assert _get(corpus_server, "/lookup?cd=nosuch&name=x")[0] == 404
    assert _get(corpus_server, "/lookup?cd=sets&name=ghost")[0] == 404


def test_lookup_symbol_without_definition_says_so(corpus_server):
    code, _, body = _get(corpus_server, "/lookup?cd=certification&name=tuev")
    assert code == 200  # tuev has a definition
    code, _, body = _get(corpus_server, "/lookup?cd=owl&name=owlthing")
    assert code == 200
    assert b"No definition" in body


def test_lookup_requires_both_parameters(corpus_server):
    assert _get(corpus_server, "/lookup?cd=sets")[0] == 400


# ── uploads ─────────────────────────────────────────────────────────


@pytest.fixture()
def token_server(tmp_path):
    store = Store(tmp_path / "store")
    server = LinkedDataServer(store, port=0, base_uri=BASE, token="hunter2", log=io.StringIO())
    server.start_background()
    yield server
    server.shutdown()


def test_put_without_token_is_401(token_server):
    body, ctype = build_multipart({MEDIA_OMDOC: b"<d/>"})
    code, _, _ = _get(
        token_server, "/doc/a", method="PUT", data=body, headers={"Content-Type": ctype}
    )
    assert code == 401


def test_put_with_token_then_get_round_trips(token_server):
    body, ctype = build_multipart({MEDIA_OMDOC: b"<d/>", MEDIA_XHTML: b"<p/>"})
    code, _, payload = _get(
        token_server,
        "/doc/a/b",
        method="PUT",
        data=body,
        headers={"Content-Type": ctype, "Authorization": "Bearer hunter2"},
    )
    assert code == 201
    assert json.loads(payload) == {"path": "a/b", "revision": 1}
    code, _, fetched = _get(token_server, "/doc/a/b", accept="application/omdoc+xml")
    assert code == 200 and fetched == b"<d/>"


def test_put_malformed_body_is_400(token_server):
    code, _, _ = _get(
        token_server,
        "/doc/a",
        method="PUT",
        data=b"junk",
        headers={"Content-Type": "multipart/form-data; boundary=x", "Authorization": "Bearer hunter2"},
    )
    assert code == 400


def test_put_non_multipart_is_400(token_server):
    code, _, _ = _get(
        token_server,
        "/doc/a",
        method="PUT",
        data=b"{}",
        headers={"Content-Type": "application/json", "Authorization": "Bearer hunter2"},
    )
    assert code == 400


def test_put_escaping_path_is_400(token_server):
    body, ctype = build_multipart({MEDIA_OMDOC: b"<d/>"})
    code, _, _ = _get(
        token_server,
        "/doc/../../etc",
        method="PUT",
        data=body,
        headers={"Content-Type": ctype, "Authorization": "Bearer hunter2"},
    )
    assert code in (400, 404)


def test_uploaded_index_becomes_visible_to_lookup(token_server, compiled_corpus):
    _, docs = compiled_corpus
    doc = docs["background/sets"]
    body, ctype = build_multipart(doc.variants)
    code, _, _ = _get(
        token_server,
        "/doc/background/sets",
        method="PUT",
        data=body,
        headers={"Content-Type": ctype, "Authorization": "Bearer hunter2"},
    )
    assert code == 201
    code, _, payload = _get(token_server, "/lookup?cd=sets&name=inset")
    assert code == 200 and b"member of the set" in payload


def test_viewer_script_serving(tmp_path, compiled_corpus):
    script = tmp_path / "semtex-viewer.js"
    script.write_text("export {};\n")
    store = Store(tmp_path / "store")
    server = LinkedDataServer(store, port=0, viewer_script=script, log=io.StringIO())
    server.start_background()
    try:
        code, headers, body = _get(server, "/semtex-viewer.js")
        assert code == 200
        assert body == b"export {};\n"
        assert "javascript" in headers["Content-Type"]
    finally:
        server.shutdown()
