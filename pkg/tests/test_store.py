from __future__ import annotations

import random
import threading

import pytest

from semtex.errors import StoreError
from semtex.store import (
    MEDIA_NTRIPLES,
    MEDIA_OMDOC,
    MEDIA_XHTML,
    Store,
    normalize_path,
)


@pytest.fixture()
def store(tmp_path):
    return Store(tmp_path / "store")


def test_first_put_is_revision_one(store):
    assert store.put_resource("background/sets", {MEDIA_OMDOC: b"one"}) == 1


def test_second_put_keeps_the_first_readable(store):
    store.put_resource("background/sets", {MEDIA_OMDOC: b"one"})
    assert store.put_resource("background/sets", {MEDIA_OMDOC: b"two"}) == 2
    assert store.get_resource("background/sets", 1).variants[MEDIA_OMDOC] == b"one"
    assert store.get_resource("background/sets").variants[MEDIA_OMDOC] == b"two"
    assert store.get_resource("background/sets").revision == 2


def test_get_specific_revision_and_errors(store):
    with pytest.raises(StoreError):
        store.get_resource("missing")
    store.put_resource("a", {MEDIA_OMDOC: b"x"})
    with pytest.raises(StoreError):
        store.get_resource("a", 2)
    with pytest.raises(StoreError):
        store.get_resource("a", 0)


def test_list_revisions_is_contiguous_with_ordered_timestamps(store):
    for i in range(3):
        store.put_resource("p", {MEDIA_OMDOC: str(i).encode()})
    revisions = store.list_revisions("p")
    assert [r for r, _ in revisions] == [1, 2, 3]
    stamps = [ts for _, ts in revisions]
    assert stamps == sorted(stamps)
    with pytest.raises(StoreError):
        store.list_revisions("nope")


def test_path_escapes_are_rejected(store):
    for bad in ("../evil", "a/../../b", "/abs", "a/_rev/x", ""):
        with pytest.raises(StoreError):
            store.put_resource(bad, {MEDIA_OMDOC: b"x"})


def test_normalize_path_round_trips_clean_paths():
    assert normalize_path("a/b") == "a/b"
    assert normalize_path("a//b/") == "a/b"
    assert normalize_path("./a") == "a"


def test_unknown_variant_type_is_rejected(store):
    with pytest.raises(StoreError):
        store.put_resource("a", {"application/zip": b"x"})
    with pytest.raises(StoreError):
        store.put_resource("a", {})


def test_nested_resources_do_not_shadow_each_other(store):
    store.put_resource("a", {MEDIA_OMDOC: b"outer"})
    store.put_resource("a/b", {MEDIA_OMDOC: b"inner"})
    assert store.get_resource("a").variants[MEDIA_OMDOC] == b"outer"
    assert store.get_resource("a/b").variants[MEDIA_OMDOC] == b"inner"
    assert store.list_paths() == ["a", "a/b"]


def test_atomic_visibility_of_multi_variant_revisions(store):
    """Readers must never see a revision with only some of its variants."""
    paths = ["p"]
    stop = threading.Event()
    failures: list[str] = []

    def reader():
        while not stop.is_set():
            try:
                res = store.get_resource("p")
            except StoreError:
                continue
            if set(res.variants) != {MEDIA_OMDOC, MEDIA_XHTML, MEDIA_NTRIPLES}:
                failures.append(f"partial revision {res.revision}: {sorted(res.variants)}")
                return

    threads = [threading.Thread(target=reader) for _ in range(4)]
    for t in threads:
        t.start()
    for i in range(30):
        payload = str(i).encode()
        store.put_resource(
            "p", {MEDIA_OMDOC: payload, MEDIA_XHTML: payload, MEDIA_NTRIPLES: payload}
        )
    stop.set()
    for t in threads:
        t.join()
    assert failures == []


def test_linearizability_against_a_shadow_map(store):
    """Random concurrent puts/gets agree with a lock-protected shadow map."""
    rng = random.Random(20240811)
    paths = [f"p{i}" for i in range(5)]
    shadow: dict[tuple[str, int], bytes] = {}
    shadow_lock = threading.Lock()
    errors: list[str] = []

    def writer(worker: int):
        local_rng = random.Random(worker)
        for i in range(60):
            path = local_rng.choice(paths)
            payload = f"{worker}-{i}".encode()
            rev = store.put_resource(path, {MEDIA_OMDOC: payload})
            with shadow_lock:
                if (path, rev) in shadow:
                    errors.append(f"revision {rev} of {path} assigned twice")
                shadow[(path, rev)] = payload

    def reader(worker: int):
        local_rng = random.Random(1000 + worker)
        for _ in range(120):
            path = local_rng.choice(paths)
            with shadow_lock:
                known = [r for (p, r) in shadow if p == path]
            if not known:
                continue
            rev = local_rng.choice(known)
            data = store.get_resource(path, rev).variants[MEDIA_OMDOC]
            with shadow_lock:
                expected = shadow[(path, rev)]
            if data != expected:
                errors.append(f"{path}@{rev}: {data!r} != {expected!r}")

    threads = [threading.Thread(target=writer, args=(w,)) for w in range(4)]
    threads += [threading.Thread(target=reader, args=(w,)) for w in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []

    # shadow map and store agree on every (path, revision) afterwards
    for (path, rev), expected in shadow.items():
        assert store.get_resource(path, rev).variants[MEDIA_OMDOC] == expected
    for path in paths:
        revisions = [r for (p, r) in shadow if p == path]
        if revisions:
            assert sorted(revisions) == list(range(1, max(revisions) + 1))
