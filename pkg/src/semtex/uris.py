"""The Linked Data URI scheme shared across emitters and the server.

A compiled document lives at ``{base}/doc/{path}`` (content-negotiated);
a symbol or key declared in it is addressed as
``{base}/doc/{path}.omdoc#{name}``, mirroring how imports reference the
defining document.
"""

from __future__ import annotations

import os

DEFAULT_BASE_URI = "http://localhost:8080"
BASE_URI_ENV_VAR = "SEMTEX_BASE_URI"


def default_base_uri() -> str:
    return os.environ.get(BASE_URI_ENV_VAR, DEFAULT_BASE_URI)


def resource_uri(base_uri: str, doc_path: str) -> str:
    return f"{base_uri}/doc/{doc_path}"


def symbol_uri(base_uri: str, doc_path: str, name: str) -> str:
    return f"{base_uri}/doc/{doc_path}.omdoc#{name}"


def vocab_namespace(base_uri: str, doc_path: str) -> str:
    return f"{base_uri}/doc/{doc_path}.omdoc#"
