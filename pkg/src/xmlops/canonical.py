"""Canonical serialization, content addressing, and timestamp handling.

Every identity in the platform is the SHA-256 digest of a canonical JSON
encoding: keys sorted, compact separators, floats in their shortest
round-trip decimal form, NaN/Inf rejected. Re-serializing a stored record
must reproduce its id bit for bit, so nothing here may depend on locale,
dict insertion order, or platform float printing quirks.
"""

from __future__ import annotations

import hashlib
import json
import math
from datetime import datetime
from typing import Any

from .errors import ValidationError

HASH_ALGORITHM = "sha256"
DIGEST_BYTES = 32

# Payload cells are finite floats or None (the explicit missing-value
# sentinel); NaN/Inf never enter the store.
MISSING = None


def canonical_json_bytes(obj: Any) -> bytes:
    """Encode *obj* as canonical JSON bytes.

    Deterministic across runs and platforms: sorted keys, no whitespace,
    shortest round-trip float repr. Raises ValidationError on NaN or Inf
    anywhere in the structure.
    """
    try:
        text = json.dumps(
            obj,
            sort_keys=True,
            separators=(",", ":"),
            allow_nan=False,
            ensure_ascii=False,
        )
    except ValueError as exc:
        raise ValidationError(f"payload is not canonicalizable: {exc}") from exc
    return text.encode("utf-8")


def content_hash(payload: bytes | Any) -> str:
    """32-byte SHA-256 digest of canonical bytes, hex encoded.

    Accepts raw bytes directly, anything else is canonicalized first.
    Total on bytes; deterministic.
    """
    if not isinstance(payload, (bytes, bytearray)):
        payload = canonical_json_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def parse_timestamp(value: str | datetime) -> datetime:
    """Parse an RFC 3339 timestamp, rejecting offset-less values.

    Global timestamps must carry an explicit UTC offset; naive datetimes
    and bare dates are validation errors, not silently localized.
    """
    if isinstance(value, datetime):
        dt = value
    else:
        try:
            dt = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
        except ValueError as exc:
            raise ValidationError(f"invalid timestamp {value!r}: {exc}") from exc
    if dt.tzinfo is None or dt.utcoffset() is None:
        raise ValidationError(
            f"timestamp {value!r} has no UTC offset; offset-less timestamps are rejected"
        )
    return dt


def format_timestamp(dt: datetime) -> str:
    """RFC 3339 text with the offset the datetime carries."""
    if dt.tzinfo is None or dt.utcoffset() is None:
        raise ValidationError("refusing to format an offset-less timestamp")
    return dt.isoformat()


def normalize_payload(payload: Any) -> list[float | None]:
    """Validate and normalize a numeric payload vector.

    Cells become floats; None passes through as the missing-value sentinel.
    Scalars are wrapped into a one-element vector. NaN/Inf and non-numeric
    cells are rejected.
    """
    if isinstance(payload, (int, float)):
        payload = [payload]
    if not isinstance(payload, (list, tuple)):
        raise ValidationError(f"payload must be a numeric vector, got {type(payload).__name__}")
    if len(payload) == 0:
        raise ValidationError("payload must not be empty")
    out: list[float | None] = []
    for i, cell in enumerate(payload):
        if cell is MISSING:
            out.append(None)
            continue
        if isinstance(cell, bool) or not isinstance(cell, (int, float)):
            raise ValidationError(f"payload[{i}] is not numeric: {cell!r}")
        cell = float(cell)
        if not math.isfinite(cell):
            raise ValidationError(f"payload[{i}] is not finite: {cell!r}")
        out.append(cell)
    return out
