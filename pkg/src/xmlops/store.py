"""Content-addressed file store with append-only, checksummed logs.

Layout (self-describing; the manifest pins hash algorithm and schema):

    store/manifest.json                 hash algorithm + schema version
    store/objects/<first2>/<hash>       immutable blobs
    store/meta/<entity-kind>/<id>.json  metadata documents
    store/log/<name>.log                append-only logs (one checksummed
                                        record per line)
    store/counters.json                 monotonic sequence numbers

Writes serialize through a single lock (single-writer, multi-reader).
Metadata documents are immutable by default: rewriting an id with different
content raises ImmutabilityError; the few legitimate state transitions go
through update_meta. Log lines carry a SHA-256 prefix so a torn write from
a crash is detected and truncated on the next open, never surfaced as data.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .canonical import HASH_ALGORITHM, canonical_json_bytes, content_hash
from .errors import (
    ImmutabilityError,
    StoreCorruptionError,
    StoreVersionError,
    UnknownEntityError,
)

SCHEMA_VERSION = 1


@dataclass
class LogAudit:
    """Result of a log integrity scan."""

    name: str
    records: int
    partial: int  # torn/corrupt lines found (0 after recovery)
    truncated_bytes: int = 0


class FileStore:
    def __init__(self, root: str | Path, create: bool = True):
        self.root = Path(root)
        self._lock = threading.RLock()
        self._log_cache: dict[str, list[dict]] = {}
        self._recovery: list[LogAudit] = []
        manifest_path = self.root / "manifest.json"
        if manifest_path.exists():
            self._load_manifest(manifest_path)
        elif create:
            self._init_store(manifest_path)
        else:
            raise StoreCorruptionError(f"no store at {self.root} (missing {manifest_path})")
        self._recover_logs()

    # -- lifecycle -------------------------------------------------------

    def _init_store(self, manifest_path: Path) -> None:
        for sub in ("objects", "meta", "log"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        manifest = {"hash_algorithm": HASH_ALGORITHM, "schema_version": SCHEMA_VERSION}
        self._atomic_write(manifest_path, canonical_json_bytes(manifest))
        self._atomic_write(self.root / "counters.json", b"{}")

    def _load_manifest(self, manifest_path: Path) -> None:
        try:
            manifest = json.loads(manifest_path.read_text("utf-8"))
        except (ValueError, OSError) as exc:
            raise StoreCorruptionError(f"corrupt manifest: {manifest_path}: {exc}") from exc
        if not isinstance(manifest, dict) or "schema_version" not in manifest:
            raise StoreCorruptionError(f"corrupt manifest: {manifest_path}: missing schema_version")
        if manifest["schema_version"] > SCHEMA_VERSION:
            raise StoreVersionError(
                f"store schema {manifest['schema_version']} is newer than supported "
                f"{SCHEMA_VERSION}; refusing to open {self.root}")
        if manifest.get("hash_algorithm") != HASH_ALGORITHM:
            raise StoreCorruptionError(
                f"store uses hash {manifest.get('hash_algorithm')!r}, "
                f"this build supports {HASH_ALGORITHM!r}")

    # -- blobs -----------------------------------------------------------

    def put_blob(self, data: bytes) -> str:
        digest = content_hash(data)
        path = self.root / "objects" / digest[:2] / digest
        if not path.exists():
            with self._lock:
                if not path.exists():
                    path.parent.mkdir(parents=True, exist_ok=True)
                    self._atomic_write(path, data)
        return digest

    def get_blob(self, digest: str) -> bytes:
        path = self.root / "objects" / digest[:2] / digest
        if not path.exists():
            raise UnknownEntityError("blob", digest)
        data = path.read_bytes()
        if content_hash(data) != digest:
            raise StoreCorruptionError(f"blob {digest} failed its checksum")
        return data

    def has_blob(self, digest: str) -> bool:
        return (self.root / "objects" / digest[:2] / digest).exists()

    # -- metadata documents ----------------------------------------------

    def _meta_path(self, kind: str, entity_id: str) -> Path:
        if "/" in entity_id or entity_id in ("", ".", ".."):
            raise UnknownEntityError(kind, entity_id)
        return self.root / "meta" / kind / f"{entity_id}.json"

    def put_meta(self, kind: str, entity_id: str, doc: dict) -> bool:
        """Persist a document. Returns False when an identical doc already
        exists (idempotent no-op); differing content raises ImmutabilityError.
        """
        data = canonical_json_bytes(doc)
        with self._lock:
            path = self._meta_path(kind, entity_id)
            if path.exists():
                if path.read_bytes() == data:
                    return False
                raise ImmutabilityError(
                    f"{kind} {entity_id} already exists with different content")
            path.parent.mkdir(parents=True, exist_ok=True)
            self._atomic_write(path, data)
            return True

    def update_meta(self, kind: str, entity_id: str, mutate) -> dict:
        """Apply a state transition to an existing document."""
        with self._lock:
            doc = self.get_meta(kind, entity_id)
            new_doc = mutate(doc)
            self._atomic_write(self._meta_path(kind, entity_id),
                               canonical_json_bytes(new_doc))
            return new_doc

    def get_meta(self, kind: str, entity_id: str) -> dict:
        path = self._meta_path(kind, entity_id)
        if not path.exists():
            raise UnknownEntityError(kind, entity_id)
        return json.loads(path.read_text("utf-8"))

    def has_meta(self, kind: str, entity_id: str) -> bool:
        try:
            return self._meta_path(kind, entity_id).exists()
        except UnknownEntityError:
            return False

    def list_meta(self, kind: str) -> list[str]:
        kind_dir = self.root / "meta" / kind
        if not kind_dir.exists():
            return []
        return sorted(p.stem for p in kind_dir.glob("*.json"))

    def iter_meta(self, kind: str):
        for entity_id in self.list_meta(kind):
            yield self.get_meta(kind, entity_id)

    # -- sequence numbers --------------------------------------------------

    def next_seq(self, name: str) -> int:
        with self._lock:
            path = self.root / "counters.json"
            counters = json.loads(path.read_text("utf-8")) if path.exists() else {}
            value = counters.get(name, 0) + 1
            counters[name] = value
            self._atomic_write(path, canonical_json_bytes(counters))
            return value

    # -- append-only logs --------------------------------------------------

    def _log_path(self, name: str) -> Path:
        return self.root / "log" / f"{name}.log"

    def append_log(self, name: str, doc: dict) -> None:
        data = canonical_json_bytes(doc)
        line = hashlib.sha256(data).hexdigest().encode("ascii") + b"\t" + data + b"\n"
        with self._lock:
            path = self._log_path(name)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "ab") as fh:
                fh.write(line)
                fh.flush()
            self._log_cache.setdefault(name, []).append(json.loads(data))

    def read_log(self, name: str) -> list[dict]:
        with self._lock:
            if name not in self._log_cache:
                self._log_cache[name] = [doc for doc, _ in self._scan_log(name)]
            return list(self._log_cache[name])

    def log_len(self, name: str) -> int:
        with self._lock:
            if name not in self._log_cache:
                self._log_cache[name] = [doc for doc, _ in self._scan_log(name)]
            return len(self._log_cache[name])

    def log_slice(self, name: str, start: int) -> list[dict]:
        """Records appended at or after index start (incremental consumers)."""
        with self._lock:
            if name not in self._log_cache:
                self._log_cache[name] = [doc for doc, _ in self._scan_log(name)]
            return self._log_cache[name][start:]

    def audit_log(self, name: str) -> LogAudit:
        """Re-scan a log from disk, verifying every record checksum."""
        records = 0
        partial = 0
        for doc, ok in self._scan_log(name):
            if ok:
                records += 1
            else:
                partial += 1
        return LogAudit(name=name, records=records, partial=partial)

    def _scan_log(self, name: str):
        path = self._log_path(name)
        if not path.exists():
            return
        raw = path.read_bytes()
        pos = 0
        while pos < len(raw):
            nl = raw.find(b"\n", pos)
            if nl == -1:
                # torn tail: a record only counts once its newline landed
                yield None, False
                return
            parsed = self._parse_log_line(raw[pos:nl])
            if parsed is None:
                yield None, False
            else:
                yield parsed, True
            pos = nl + 1

    @staticmethod
    def _parse_log_line(line: bytes):
        if b"\t" not in line:
            return None
        digest, payload = line.split(b"\t", 1)
        try:
            if hashlib.sha256(payload).hexdigest().encode("ascii") != digest:
                return None
            return json.loads(payload)
        except (ValueError, UnicodeDecodeError):
            return None

    def _recover_logs(self) -> None:
        """Truncate torn tails left by a crash; only whole records survive."""
        log_dir = self.root / "log"
        if not log_dir.exists():
            return
        with self._lock:
            for path in sorted(log_dir.glob("*.log")):
                raw = path.read_bytes()
                good_end = 0
                records = 0
                partial = 0
                pos = 0
                while pos < len(raw):
                    nl = raw.find(b"\n", pos)
                    if nl == -1:
                        partial += 1
                        break
                    if self._parse_log_line(raw[pos:nl]) is not None:
                        records += 1
                        good_end = nl + 1
                        pos = nl + 1
                    else:
                        # torn or corrupt line: everything from here is untrusted
                        partial += 1
                        break
                if good_end < len(raw):
                    with open(path, "r+b") as fh:
                        fh.truncate(good_end)
                self._recovery.append(LogAudit(
                    name=path.stem, records=records, partial=partial,
                    truncated_bytes=len(raw) - good_end))

    @property
    def recovery_report(self) -> list[LogAudit]:
        return list(self._recovery)

    # -- auditing ----------------------------------------------------------

    def fingerprint(self) -> str:
        """Digest of every file in the store; byte-identical stores match."""
        entries = []
        for path in sorted(self.root.rglob("*")):
            if path.is_file():
                entries.append(f"{path.relative_to(self.root)}:{content_hash(path.read_bytes())}")
        return content_hash("\n".join(entries).encode("utf-8"))

    @property
    def manifest(self) -> dict:
        return json.loads((self.root / "manifest.json").read_text("utf-8"))

    # -- internals ---------------------------------------------------------

    @staticmethod
    def _atomic_write(path: Path, data: bytes) -> None:
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
        os.replace(tmp, path)
