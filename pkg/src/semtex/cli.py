"""Command-line entry point: compile, check, graph, triples, serve, publish.

Exit codes: 0 success, 1 diagnostics, 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from .errors import EmitError, SemtexError
from .modsys import ModuleGraph, build_graph
from .notation import (
    _FormulaCounter,
    assemble_page,
    compile_rules,
    definition_label,
    render_definition_div,
)
from .omdoc import emit_file, serialize
from .owlout import export_owl, meta_language_of
from .rdfa import extract_triples, nt_document
from .server import LinkedDataServer, build_multipart
from .store import (
    MEDIA_INDEX,
    MEDIA_NTRIPLES,
    MEDIA_OMDOC,
    MEDIA_OWL,
    MEDIA_XHTML,
    Store,
)
from .uris import default_base_uri, symbol_uri, vocab_namespace
from . import omxml

ALL_FORMATS = ("omdoc", "xhtml", "owl", "nt")

FORMAT_MEDIA = {
    "omdoc": MEDIA_OMDOC,
    "xhtml": MEDIA_XHTML,
    "owl": MEDIA_OWL,
    "nt": MEDIA_NTRIPLES,
}

MEDIA_EXT = {
    MEDIA_OMDOC: ".omdoc",
    MEDIA_XHTML: ".xhtml",
    MEDIA_OWL: ".owl",
    MEDIA_NTRIPLES: ".nt",
    MEDIA_INDEX: ".idx.json",
}


@dataclass
class CompiledDoc:
    doc_path: str
    variants: dict


def compile_corpus(
    roots: list, base_uri: str | None = None, formats=ALL_FORMATS
) -> tuple[ModuleGraph, list[CompiledDoc]]:
    """Parse, resolve and emit the import closure of the given roots."""
    base_uri = base_uri or default_base_uri()
    graph = build_graph([Path(r) for r in roots])

    rules_cache: dict[str, dict] = {}

    def rules_for(mid: str) -> dict:
        cached = rules_cache.get(mid)
        if cached is None:
            cached = compile_rules(graph.scope(mid))
            rules_cache[mid] = cached
        return cached

    def vocab_uri(mid: str) -> str:
        return vocab_namespace(base_uri, graph.doc_path(mid))

    def symbol_uri_for(cd: str, name: str) -> str:
        if cd in graph.modules:
            return symbol_uri(base_uri, graph.doc_path(cd), name)
        return symbol_uri(base_uri, cd, name)

    # Theories are numbered dependencies-first across the whole corpus.
    theory_numbers: dict[str, int] = {}
    counter = 0
    for file in graph.file_order:
        for mid in graph.file_modules[file]:
            if not graph.modules[mid].is_document:
                counter += 1
                theory_numbers[mid] = counter

    docs: list[CompiledDoc] = []
    for file in graph.file_order:
        module_ids = graph.file_modules[file]
        modules = [graph.modules[mid] for mid in module_ids]
        doc_path = graph.doc_path(module_ids[0])
        root = emit_file(
            modules,
            lambda mid: graph.scope(mid),
            rules_for=rules_for,
            base_uri=base_uri,
            doc_path=doc_path,
            vocab_uri=vocab_uri,
        )
        variants: dict[str, bytes] = {}
        if "omdoc" in formats:
            variants[MEDIA_OMDOC] = serialize(root)
        if "nt" in formats:
            variants[MEDIA_NTRIPLES] = nt_document(extract_triples(root)).encode("utf-8")
        page_rules: dict = {}
        for mid in module_ids:
            page_rules.update(rules_for(mid))
        if "xhtml" in formats:
            page = assemble_page(
                root,
                page_rules,
                base_uri=base_uri,
                doc_path=doc_path,
                symbol_uri_for=symbol_uri_for,
                theory_numbers=theory_numbers,
            )
            variants[MEDIA_XHTML] = serialize(page)
        if "owl" in formats:
            owl_modules = [m for m in modules if meta_language_of(m) == "owl"]
            if len(owl_modules) > 1:
                raise EmitError(
                    f"{file}: several owl-exported modules in one file "
                    f"({', '.join(m.id for m in owl_modules)})"
                )
            if owl_modules:
                m = owl_modules[0]
                import_iris = [
                    f"{base_uri}/doc/{graph.doc_path(ref.module)}.omdoc"
                    for ref in m.imports
                    if not ref.meta
                ]
                owl_doc = export_owl(
                    m,
                    graph.scope(m.id),
                    rules=rules_for(m.id),
                    base_uri=base_uri,
                    doc_path=doc_path,
                    vocab_uri=vocab_uri,
                    import_iris=import_iris,
                )
                variants[MEDIA_OWL] = serialize(owl_doc)
        variants[MEDIA_INDEX] = _build_index(
            root, modules, rules_for, theory_numbers, symbol_uri_for
        )
        docs.append(CompiledDoc(doc_path, variants))
    return graph, docs


def _build_index(root, modules, rules_for, theory_numbers, symbol_uri_for) -> bytes:
    """Pre-rendered lookup fragments, one entry per declared symbol/key."""
    theories: dict[str, dict] = {}
    def_elements = {}
    for theory_el in root:
        if omxml.local_name(theory_el.tag) != "theory":
            continue
        tid = theory_el.get(omxml.XML_ID)
        for el in theory_el:
            if omxml.local_name(el.tag) == "definition":
                def_elements.setdefault(tid, []).append(el)

    for m in modules:
        if m.is_document:
            continue
        rules = rules_for(m.id)
        symbols: dict[str, dict] = {}
        names = [sd.name for sd in m.symdefs] + [kd.key for kd in m.keydefs]
        for name in names:
            symbols[name] = {"definitions": []}
        for j, def_el in enumerate(def_elements.get(m.id, []), start=1):
            target = def_el.get("for")
            if target is None or target not in symbols:
                continue
            title = None
            for child in def_el:
                if (
                    omxml.local_name(child.tag) == "meta"
                    and child.get("property") == "dc:title"
                ):
                    title = child.get("content") or child.text
            label = definition_label(j, theory_numbers.get(m.id, 1), title)
            div = render_definition_div(
                def_el, rules, label, _FormulaCounter(), symbol_uri_for
            )
            fragment = omxml.canonical_bytes(div, xml_decl=False).decode("utf-8").strip()
            symbols[target]["definitions"].append(
                {
                    "id": def_el.get(omxml.XML_ID),
                    "title": title,
                    "xhtml": fragment,
                }
            )
        theories[m.id] = {"symbols": symbols}
    payload = {"theories": theories}
    return (json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def write_outputs(docs: list[CompiledDoc], out_dir: Path) -> list[Path]:
    written: list[Path] = []
    for doc in docs:
        for media, data in doc.variants.items():
            target = out_dir / (doc.doc_path + MEDIA_EXT[media])
            target.parent.mkdir(parents=True, exist_ok=True)
            tmp = target.with_name(target.name + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(target)
            written.append(target)
    return written


# ── Commands ────────────────────────────────────────────────────────


def _cmd_compile(args) -> int:
    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    for f in formats:
        if f not in ALL_FORMATS:
            print(f"unknown format '{f}'", file=sys.stderr)
            return 2
    _, docs = compile_corpus(args.roots, args.base_uri, formats)
    written = write_outputs(docs, Path(args.out))
    for path in written:
        print(path)
    return 0


def _cmd_check(args) -> int:
    failures = 0
    for root in args.roots:
        try:
            compile_corpus([root], args.base_uri)
        except SemtexError as exc:
            print(exc.diagnostic(), file=sys.stderr)
            failures += 1
    return 1 if failures else 0


def _cmd_graph(args) -> int:
    graph = build_graph([Path(r) for r in args.roots])
    sys.stdout.write(graph.to_dot())
    return 0


def _cmd_triples(args) -> int:
    root_file = Path(args.root).resolve()
    graph, docs = compile_corpus([args.root], args.base_uri, formats=("nt",))
    root_ids = graph.file_modules[str(root_file)]
    doc_path = graph.doc_path(root_ids[0])
    for doc in docs:
        if doc.doc_path == doc_path:
            sys.stdout.write(doc.variants[MEDIA_NTRIPLES].decode("utf-8"))
            return 0
    return 1  # pragma: no cover - the root always compiles to a doc


def _cmd_serve(args) -> int:
    server = LinkedDataServer(
        Store(args.store),
        host=args.host,
        port=args.port,
        base_uri=args.base_uri,
        token=args.token,
        viewer_script=args.viewer_script,
    )
    print(f"serving store '{args.store}' on http://{args.host}:{server.port}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def _cmd_publish(args) -> int:
    _, docs = compile_corpus(args.roots, args.base_uri)
    base = args.to.rstrip("/")
    for doc in docs:
        body, ctype = build_multipart(doc.variants)
        request = urllib.request.Request(
            f"{base}/doc/{doc.doc_path}", data=body, method="PUT"
        )
        request.add_header("Content-Type", ctype)
        if args.token:
            request.add_header("Authorization", f"Bearer {args.token}")
        try:
            with urllib.request.urlopen(request) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            print(f"{doc.doc_path}: upload failed: {exc.code} {exc.reason}", file=sys.stderr)
            return 1
        except urllib.error.URLError as exc:
            print(f"{doc.doc_path}: upload failed: {exc.reason}", file=sys.stderr)
            return 1
        print(f"{doc.doc_path} -> revision {payload.get('revision')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semtex",
        description="Compile modular semantic TeX sources and serve them as Linked Data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_base_uri(p):
        p.add_argument(
            "--base-uri",
            default=default_base_uri(),
            help="base URI for generated links (env SEMTEX_BASE_URI)",
        )

    p = sub.add_parser("compile", help="compile sources and their import closure")
    p.add_argument("roots", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", default=",".join(ALL_FORMATS), help="comma-separated formats")
    add_base_uri(p)
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("check", help="run all analyses, write nothing")
    p.add_argument("roots", nargs="+")
    add_base_uri(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("graph", help="print the import graph as DOT")
    p.add_argument("roots", nargs="+")
    p.add_argument("--dot", action="store_true", default=True, help="DOT output (default)")
    p.set_defaults(func=_cmd_graph)

    p = sub.add_parser("triples", help="print a document's triples as N-Triples")
    p.add_argument("root")
    add_base_uri(p)
    p.set_defaults(func=_cmd_triples)

    p = sub.add_parser("serve", help="serve a compiled store over HTTP")
    p.add_argument("--store", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--token", default=None)
    p.add_argument("--viewer-script", default=None)
    add_base_uri(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("publish", help="compile and PUT the results to a server")
    p.add_argument("roots", nargs="+")
    p.add_argument("--to", required=True, help="server base URL")
    p.add_argument("--token", default=None)
    add_base_uri(p)
    p.set_defaults(func=_cmd_publish)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SemtexError as exc:
        print(exc.diagnostic(), file=sys.stderr)
        return 1


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
