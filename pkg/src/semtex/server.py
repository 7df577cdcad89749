"""HTTP frontend: dereferenceable document URIs with content negotiation,
a definition-lookup endpoint for the viewer, and authenticated uploads.

Lookup never parses OMDoc at request time: the compiler stores a JSON
index variant next to each document, holding pre-rendered definition
fragments per symbol; the server only stitches fragments together.
"""

from __future__ import annotations

import email.parser
import email.policy
import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlsplit

from .errors import StoreError
from .store import (
    MEDIA_INDEX,
    MEDIA_NTRIPLES,
    MEDIA_OMDOC,
    MEDIA_OWL,
    MEDIA_XHTML,
    Store,
)
from .uris import default_base_uri

# Fixed preference order; ties in Accept quality resolve in this order.
VARIANT_ORDER = [MEDIA_XHTML, MEDIA_OMDOC, MEDIA_OWL, MEDIA_NTRIPLES]

EXT_MEDIA = {
    ".omdoc": MEDIA_OMDOC,
    ".xhtml": MEDIA_XHTML,
    ".owl": MEDIA_OWL,
    ".nt": MEDIA_NTRIPLES,
}

XHTML_NS_DECL = 'xmlns="http://www.w3.org/1999/xhtml"'


def parse_accept(value: str) -> list[tuple[str, float]]:
    entries: list[tuple[str, float]] = []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        media, *params = [p.strip() for p in part.split(";")]
        q = 1.0
        for param in params:
            name, _, pv = param.partition("=")
            if name.strip() == "q":
                try:
                    q = float(pv)
                except ValueError:
                    q = 0.0
        entries.append((media, q))
    return entries


def negotiate(accept_header: str | None, available: list[str]) -> str | None:
    """Deterministic choice: highest q wins, ties break on VARIANT_ORDER."""
    entries = parse_accept(accept_header or "*/*")

    def quality(media: str) -> float:
        best_q = 0.0
        best_spec = -1
        for accepted, q in entries:
            if accepted == media:
                spec = 2
            elif accepted.endswith("/*") and media.startswith(accepted[:-1]):
                spec = 1
            elif accepted == "*/*":
                spec = 0
            else:
                continue
            if spec > best_spec:
                best_spec, best_q = spec, q
            elif spec == best_spec:
                best_q = max(best_q, q)
        return best_q

    ordered = [m for m in VARIANT_ORDER if m in available]
    ordered += [m for m in available if m not in ordered]
    best = None
    best_q = 0.0
    for media in ordered:
        q = quality(media)
        if q > best_q:
            best, best_q = media, q
    return best


class LinkedDataServer:
    """Owns the store, the symbol index and the HTTP machinery."""

    def __init__(
        self,
        store: Store,
        host: str = "127.0.0.1",
        port: int = 8080,
        base_uri: str | None = None,
        token: str | None = None,
        viewer_script: str | Path | None = None,
        log=None,
    ):
        self.store = store
        self.base_uri = base_uri or default_base_uri()
        self.token = token
        self.viewer_script = Path(viewer_script) if viewer_script else None
        self.log = log if log is not None else sys.stdout
        self._index_lock = threading.Lock()
        self._cd_to_path: dict[str, str] = {}
        self.refresh_index()
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.linked_data = self
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    # -- symbol index -------------------------------------------------

    def refresh_index(self, path: str | None = None) -> None:
        with self._index_lock:
            paths = [path] if path is not None else self.store.list_paths()
            for p in paths:
                index = self._load_index(p)
                if index is None:
                    continue
                for cd in index.get("theories", {}):
                    self._cd_to_path[cd] = p

    def _load_index(self, path: str) -> dict | None:
        try:
            res = self.store.get_resource(path)
        except StoreError:
            return None
        data = res.variants.get(MEDIA_INDEX)
        if data is None:
            return None
        try:
            return json.loads(data.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            return None

    def lookup_fragment(self, cd: str, name: str) -> tuple[int, bytes]:
        with self._index_lock:
            path = self._cd_to_path.get(cd)
        if path is None:
            return 404, _text_fragment(f"unknown content dictionary '{cd}'")
        index = self._load_index(path)
        theory = (index or {}).get("theories", {}).get(cd)
        if theory is None:
            return 404, _text_fragment(f"unknown content dictionary '{cd}'")
        entry = theory.get("symbols", {}).get(name)
        if entry is None:
            return 404, _text_fragment(f"unknown symbol '{name}' in '{cd}'")
        fragments = [d.get("xhtml", "") for d in entry.get("definitions", [])]
        if not fragments:
            body = (
                f'<div {XHTML_NS_DECL} class="semtex-lookup semtex-lookup-empty">'
                f"<p>No definition is available for {cd}?{name}.</p></div>"
            )
            return 200, body.encode("utf-8")
        joined = "".join(f.strip() for f in fragments)
        body = f'<div {XHTML_NS_DECL} class="semtex-lookup">{joined}</div>'
        return 200, body.encode("utf-8")


def _text_fragment(message: str) -> bytes:
    from .omxml import escape_text

    return (
        f'<div {XHTML_NS_DECL} class="semtex-lookup semtex-lookup-error">'
        f"<p>{escape_text(message)}</p></div>"
    ).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    server_version = "semtex/0.1"
    protocol_version = "HTTP/1.1"

    @property
    def ld(self) -> LinkedDataServer:
        return self.server.linked_data

    # -- plumbing -----------------------------------------------------

    def log_message(self, fmt, *args):  # one line per request, to stdout
        print(f"{self.address_string()} {fmt % args}", file=self.ld.log)

    def _respond(self, code: int, body: bytes, ctype: str, extra: dict | None = None):
        self.send_response(code)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        for name, value in (extra or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _error(self, code: int, message: str):
        self._respond(code, message.encode("utf-8") + b"\n", "text/plain; charset=utf-8")

    # -- methods ------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, PUT, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Accept, Authorization, Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        url = urlsplit(self.path)
        if url.path == "/lookup":
            return self._get_lookup(url)
        if url.path.startswith("/doc/"):
            return self._get_doc(url)
        if url.path == "/semtex-viewer.js":
            return self._get_viewer()
        if url.path == "/":
            listing = "\n".join(self.ld.store.list_paths())
            return self._respond(200, (listing + "\n").encode("utf-8"), "text/plain; charset=utf-8")
        self._error(404, "not found")

    def _get_viewer(self):
        script = self.ld.viewer_script
        if script is None or not script.exists():
            return self._error(404, "viewer script not configured")
        self._respond(200, script.read_bytes(), "text/javascript; charset=utf-8")

    def _get_doc(self, url):
        rel = unquote(url.path[len("/doc/"):])
        forced = None
        for ext, media in EXT_MEDIA.items():
            if rel.endswith(ext):
                forced = media
                rel = rel[: -len(ext)]
                break
        params = parse_qs(url.query)
        revision = None
        if "rev" in params:
            try:
                revision = int(params["rev"][0])
            except ValueError:
                return self._error(400, "rev must be an integer")
        try:
            resource = self.ld.store.get_resource(rel, revision)
        except StoreError as exc:
            return self._error(404, exc.message)
        available = [m for m in resource.variants if m != MEDIA_INDEX]
        if forced is not None:
            media = forced if forced in resource.variants else None
            if media is None:
                return self._error(404, f"no {forced} variant stored")
        else:
            media = negotiate(self.headers.get("Accept"), available)
            if media is None:
                return self._error(406, "no stored variant matches Accept")
        self._respond(
            200,
            resource.variants[media],
            media,
            {"X-Revision": str(resource.revision), "Vary": "Accept"},
        )

    def _get_lookup(self, url):
        params = parse_qs(url.query)
        cd = params.get("cd", [None])[0]
        name = params.get("name", [None])[0]
        if not cd or not name:
            return self._error(400, "lookup needs cd and name parameters")
        code, body = self.ld.lookup_fragment(cd, name)
        self._respond(code, body, "application/xhtml+xml; charset=utf-8")

    def do_PUT(self):
        if not self.path.startswith("/doc/"):
            return self._error(404, "PUT is only supported under /doc/")
        token = self.ld.token
        if token is not None:
            supplied = self.headers.get("Authorization", "")
            if supplied != f"Bearer {token}":
                return self._error(401, "missing or invalid token")
        rel = unquote(urlsplit(self.path).path[len("/doc/"):])
        ctype = self.headers.get("Content-Type", "")
        if not ctype.startswith("multipart/"):
            return self._error(400, "PUT body must be multipart")
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            return self._error(400, "bad Content-Length")
        if length <= 0:
            return self._error(400, "empty body")
        body = self.rfile.read(length)
        variants = _parse_multipart(ctype, body)
        if variants is None:
            return self._error(400, "malformed multipart body")
        try:
            revision = self.ld.store.put_resource(rel, variants)
        except StoreError as exc:
            return self._error(400, exc.message)
        self.ld.refresh_index(rel)
        payload = json.dumps({"path": rel, "revision": revision}).encode("utf-8")
        self._respond(201, payload, "application/json")


def _parse_multipart(content_type: str, body: bytes) -> dict | None:
    header = f"Content-Type: {content_type}\r\nMIME-Version: 1.0\r\n\r\n".encode("ascii")
    try:
        msg = email.parser.BytesParser(policy=email.policy.default).parsebytes(header + body)
    except Exception:
        return None
    if not msg.is_multipart():
        return None
    variants: dict[str, bytes] = {}
    for part in msg.iter_parts():
        media = part.get_content_type()
        payload = part.get_payload(decode=True)
        if payload is None:
            return None
        variants[media] = payload
    return variants or None


def build_multipart(variants: dict) -> tuple[bytes, str]:
    """Encode variants for PUT; returns (body, content-type header)."""
    import uuid

    boundary = f"semtex-{uuid.uuid4().hex}"
    lines: list[bytes] = []
    for media in sorted(variants):
        lines.append(f"--{boundary}\r\n".encode("ascii"))
        lines.append(
            f'Content-Disposition: form-data; name="variant"\r\n'
            f"Content-Type: {media}\r\n"
            f"Content-Transfer-Encoding: binary\r\n\r\n".encode("ascii")
        )
        lines.append(variants[media])
        lines.append(b"\r\n")
    lines.append(f"--{boundary}--\r\n".encode("ascii"))
    return b"".join(lines), f'multipart/form-data; boundary="{boundary}"'
