#!/usr/bin/env python3
"""End-to-end demo: compile the fixture corpus, load it into a store and
serve it locally.

    python scripts/demo.py [--port 8080]

Then browse http://127.0.0.1:<port>/doc/main/reals.xhtml and try
    curl 'http://127.0.0.1:<port>/lookup?cd=sets&name=inset'
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from semtex.cli import compile_corpus  # noqa: E402
from semtex.server import LinkedDataServer  # noqa: E402
from semtex.store import Store  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--store", default=None, help="store directory (default: temp)")
    args = parser.parse_args()

    base_uri = f"http://127.0.0.1:{args.port}"
    roots = [
        REPO / "fixtures" / "main" / "reals.tex",
        REPO / "fixtures" / "main" / "manual.tex",
        REPO / "fixtures" / "main" / "vdemo.tex",
    ]
    print("compiling fixture corpus ...")
    _, docs = compile_corpus(roots, base_uri)

    store_dir = args.store or tempfile.mkdtemp(prefix="semtex-store-")
    store = Store(store_dir)
    for doc in docs:
        revision = store.put_resource(doc.doc_path, doc.variants)
        print(f"  {doc.doc_path} -> revision {revision}")

    viewer = REPO / "frontend" / "dist" / "semtex-viewer.js"  # present after `npm run build`
    server = LinkedDataServer(
        store,
        port=args.port,
        base_uri=base_uri,
        viewer_script=viewer if viewer.exists() else None,
    )
    print(f"serving {store_dir} at {base_uri}/ (Ctrl-C to stop)")
    print(f"  try {base_uri}/doc/main/reals.xhtml")
    print(f"  and {base_uri}/lookup?cd=sets&name=inset")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
