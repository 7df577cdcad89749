"""Directory-backed revisioned store for compiled artifacts.

Layout: ``<root>/<path>/_rev/<n>/<variant files>`` plus a one-line
``LATEST`` marker per path, updated by atomic rename. A revision becomes
visible only once LATEST points at it, so readers never observe partial
writes; bytes are immutable once committed.
"""

from __future__ import annotations

import json
import os
import posixpath
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from .errors import StoreError

MEDIA_OMDOC = "application/omdoc+xml"
MEDIA_XHTML = "application/xhtml+xml"
MEDIA_OWL = "application/owl+xml"
MEDIA_NTRIPLES = "application/n-triples"
MEDIA_INDEX = "application/x.semtex.index+json"

VARIANT_FILES = {
    MEDIA_OMDOC: "doc.omdoc",
    MEDIA_XHTML: "doc.xhtml",
    MEDIA_OWL: "doc.owl",
    MEDIA_NTRIPLES: "doc.nt",
    MEDIA_INDEX: "doc.idx.json",
}
FILE_MEDIA = {fname: media for media, fname in VARIANT_FILES.items()}

_REV_DIR = "_rev"
_LATEST = "LATEST"
_META = ".meta.json"


@dataclass(frozen=True)
class StoredResource:
    path: str
    revision: int
    variants: dict
    created: str


def normalize_path(path: str) -> str:
    cleaned = path.replace("\\", "/")
    if cleaned.startswith("/"):
        raise StoreError(f"resource paths must be relative: {path!r}")
    norm = posixpath.normpath(cleaned)
    if norm in (".", ""):
        raise StoreError("empty resource path")
    parts = norm.split("/")
    if any(p in ("..", _REV_DIR, _LATEST) for p in parts):
        raise StoreError(f"illegal resource path: {path!r}")
    return norm


class Store:
    """Many concurrent readers; writes serialize per path."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks_guard = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}

    def _lock_for(self, path: str) -> threading.Lock:
        with self._locks_guard:
            lock = self._locks.get(path)
            if lock is None:
                lock = threading.Lock()
                self._locks[path] = lock
            return lock

    def _resource_dir(self, path: str) -> Path:
        return self.root / Path(path)

    def put_resource(self, path: str, variants: dict) -> int:
        """Store a new revision; returns its (contiguous) number."""
        path = normalize_path(path)
        if not variants:
            raise StoreError("a revision needs at least one variant")
        for media in variants:
            if media not in VARIANT_FILES:
                raise StoreError(f"unknown variant media type: {media}")
        resource = self._resource_dir(path)
        with self._lock_for(path):
            revision = self._latest_revision(resource) + 1
            rev_parent = resource / _REV_DIR
            rev_parent.mkdir(parents=True, exist_ok=True)
            tmp = resource / f".tmp-{uuid.uuid4().hex}"
            tmp.mkdir(parents=True)
            try:
                for media, data in variants.items():
                    (tmp / VARIANT_FILES[media]).write_bytes(data)
                meta = {"created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
                (tmp / _META).write_text(json.dumps(meta), encoding="utf-8")
                os.rename(tmp, rev_parent / str(revision))
            except OSError as exc:
                raise StoreError(f"cannot write revision for '{path}': {exc}") from exc
            latest_tmp = resource / f".latest-{uuid.uuid4().hex}"
            latest_tmp.write_text(str(revision), encoding="utf-8")
            os.replace(latest_tmp, resource / _LATEST)
        return revision

    def _latest_revision(self, resource: Path) -> int:
        latest = resource / _LATEST
        try:
            return int(latest.read_text(encoding="utf-8").strip())
        except FileNotFoundError:
            return 0
        except ValueError as exc:
            raise StoreError(f"corrupt LATEST marker in {resource}") from exc

    def get_resource(self, path: str, revision: int | None = None) -> StoredResource:
        path = normalize_path(path)
        resource = self._resource_dir(path)
        latest = self._latest_revision(resource)
        if latest == 0:
            raise StoreError(f"unknown resource '{path}'")
        rev = latest if revision is None else revision
        if rev < 1 or rev > latest:
            raise StoreError(f"unknown revision {revision} of '{path}'")
        rev_dir = resource / _REV_DIR / str(rev)
        variants: dict[str, bytes] = {}
        try:
            for entry in sorted(rev_dir.iterdir()):
                media = FILE_MEDIA.get(entry.name)
                if media is not None:
                    variants[media] = entry.read_bytes()
            meta = json.loads((rev_dir / _META).read_text(encoding="utf-8"))
        except OSError as exc:
            raise StoreError(f"cannot read revision {rev} of '{path}': {exc}") from exc
        return StoredResource(path, rev, variants, meta.get("created", ""))

    def list_revisions(self, path: str) -> list[tuple[int, str]]:
        path = normalize_path(path)
        resource = self._resource_dir(path)
        latest = self._latest_revision(resource)
        if latest == 0:
            raise StoreError(f"unknown resource '{path}'")
        out: list[tuple[int, str]] = []
        for rev in range(1, latest + 1):
            meta_file = resource / _REV_DIR / str(rev) / _META
            try:
                meta = json.loads(meta_file.read_text(encoding="utf-8"))
            except OSError as exc:
                raise StoreError(f"missing revision {rev} of '{path}'") from exc
            out.append((rev, meta.get("created", "")))
        return out

    def list_paths(self) -> list[str]:
        """All resource paths currently visible in the store."""
        found: list[str] = []
        for dirpath, dirnames, filenames in os.walk(self.root):
            dirnames[:] = [d for d in dirnames if d != _REV_DIR and not d.startswith(".")]
            if _LATEST in filenames:
                rel = Path(dirpath).relative_to(self.root).as_posix()
                if rel != ".":
                    found.append(rel)
        return sorted(found)
