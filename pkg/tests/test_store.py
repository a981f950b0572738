from __future__ import annotations

import json

import pytest

from xmlops.errors import (
    ImmutabilityError,
    StoreCorruptionError,
    StoreVersionError,
    UnknownEntityError,
)
from xmlops.store import FileStore


@pytest.fixture
def store(tmp_path) -> FileStore:
    return FileStore(tmp_path / "store")


def test_manifest_declares_hash_and_schema(store):
    assert store.manifest == {"hash_algorithm": "sha256", "schema_version": 1}


def test_blob_roundtrip_and_sharded_layout(store):
    digest = store.put_blob(b"hello")
    assert store.get_blob(digest) == b"hello"
    assert (store.root / "objects" / digest[:2] / digest).exists()


def test_unknown_blob_and_meta_raise(store):
    with pytest.raises(UnknownEntityError):
        store.get_blob("0" * 64)
    with pytest.raises(UnknownEntityError):
        store.get_meta("sample", "nope")


def test_meta_idempotent_and_immutable(store):
    assert store.put_meta("sample", "s1", {"a": 1}) is True
    assert store.put_meta("sample", "s1", {"a": 1}) is False
    with pytest.raises(ImmutabilityError):
        store.put_meta("sample", "s1", {"a": 2})
    assert store.get_meta("sample", "s1") == {"a": 1}


def test_next_seq_monotonic_across_reopen(tmp_path):
    store = FileStore(tmp_path / "store")
    assert [store.next_seq("x") for _ in range(3)] == [1, 2, 3]
    reopened = FileStore(tmp_path / "store")
    assert reopened.next_seq("x") == 4


def test_log_append_read_audit(store):
    for i in range(5):
        store.append_log("events", {"i": i})
    assert [r["i"] for r in store.read_log("events")] == list(range(5))
    audit = store.audit_log("events")
    assert (audit.records, audit.partial) == (5, 0)


def test_torn_log_tail_is_truncated_on_reopen(tmp_path):
    store = FileStore(tmp_path / "store")
    for i in range(3):
        store.append_log("events", {"i": i})
    log_path = store.root / "log" / "events.log"
    with open(log_path, "ab") as fh:
        fh.write(b'deadbeef\t{"torn": tru')  # no newline, bad hash
    reopened = FileStore(tmp_path / "store")
    audit = reopened.audit_log("events")
    assert (audit.records, audit.partial) == (3, 0)
    assert [r["i"] for r in reopened.read_log("events")] == [0, 1, 2]
    assert any(a.truncated_bytes > 0 for a in reopened.recovery_report)


def test_corrupt_record_mid_log_truncates_from_there(tmp_path):
    store = FileStore(tmp_path / "store")
    for i in range(4):
        store.append_log("events", {"i": i})
    log_path = store.root / "log" / "events.log"
    lines = log_path.read_bytes().split(b"\n")
    lines[1] = lines[1][:-4] + b"XXXX"  # corrupt the second record's payload
    log_path.write_bytes(b"\n".join(lines))
    reopened = FileStore(tmp_path / "store")
    assert [r["i"] for r in reopened.read_log("events")] == [0]


def test_newer_schema_version_refused(tmp_path):
    store = FileStore(tmp_path / "store")
    manifest_path = store.root / "manifest.json"
    manifest_path.write_text(json.dumps({"hash_algorithm": "sha256",
                                         "schema_version": 99}))
    with pytest.raises(StoreVersionError):
        FileStore(tmp_path / "store")


def test_corrupt_manifest_error_names_file(tmp_path):
    store = FileStore(tmp_path / "store")
    (store.root / "manifest.json").write_text("{not json")
    with pytest.raises(StoreCorruptionError, match="manifest.json"):
        FileStore(tmp_path / "store")


def test_fingerprint_stable_and_change_sensitive(store):
    store.put_meta("sample", "s1", {"a": 1})
    fp1 = store.fingerprint()
    assert store.fingerprint() == fp1
    store.put_meta("sample", "s2", {"a": 2})
    assert store.fingerprint() != fp1
