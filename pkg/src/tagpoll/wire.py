"""The delimited wire format: `value~quality~timestamp` per tag, `;` between tags.

This is the canonical monitor payload. Floats are rendered with Python's
shortest round-trip representation (at most 17 significant digits, no locale
separators); timestamps are ISO-8601 UTC with millisecond precision and a
trailing Z. format/parse are exact inverses on that grammar.
"""

from __future__ import annotations

import math
from datetime import datetime, timezone
from typing import NamedTuple

from .hub import Snapshot

ITEM_SEP = ";"
FIELD_SEP = "~"


class WireError(ValueError):
    pass


class WireItem(NamedTuple):
    value: float
    quality: int
    timestamp: datetime


def format_timestamp(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return f"{dt:%Y-%m-%dT%H:%M:%S}.{dt.microsecond // 1000:03d}Z"


def parse_timestamp(text: str) -> datetime:
    try:
        dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ")
    except ValueError as exc:
        raise WireError(f"bad timestamp {text!r}") from exc
    return dt.replace(tzinfo=timezone.utc)


def format_value(value: float) -> str:
    value = float(value)
    if math.isfinite(value) and value.is_integer():
        return str(int(value))  # integral values go bare: 50, not 50.0
    return repr(value)


def format_items(items) -> str:
    """Join (value, quality, timestamp) triples into the wire body."""
    return ITEM_SEP.join(
        f"{format_value(it.value)}{FIELD_SEP}{it.quality}{FIELD_SEP}{format_timestamp(it.timestamp)}"
        for it in items
    )


def format_snapshot(snapshot: Snapshot) -> str:
    return format_items(snapshot.items)


def parse_snapshot(body: str) -> list[WireItem]:
    """Inverse of format_snapshot; strict about field count and types."""
    if body == "":
        raise WireError("empty body")
    items = []
    for chunk in body.split(ITEM_SEP):
        fields = chunk.split(FIELD_SEP)
        if len(fields) != 3:
            raise WireError(f"expected 3 fields, got {len(fields)} in {chunk!r}")
        raw_value, raw_quality, raw_ts = fields
        try:
            value = float(raw_value)
        except ValueError as exc:
            raise WireError(f"bad value {raw_value!r}") from exc
        try:
            quality = int(raw_quality)
        except ValueError as exc:
            raise WireError(f"bad quality {raw_quality!r}") from exc
        items.append(WireItem(value, quality, parse_timestamp(raw_ts)))
    return items


def join_setpoints(values) -> str:
    return ITEM_SEP.join(format_value(v) for v in values)


def parse_setpoints(body: str) -> list[float]:
    """Split a `v1;v2;...;vn` setpoint body into floats.

    Whitespace around each number is trimmed; empty fields and NaN are
    rejected. Arity and range checks are the caller's job.
    """
    parts = body.split(ITEM_SEP)
    values = []
    for part in parts:
        text = part.strip()
        if not text:
            raise WireError("empty setpoint field")
        try:
            value = float(text)
        except ValueError as exc:
            raise WireError(f"non-numeric setpoint {text!r}") from exc
        if math.isnan(value):
            raise WireError("NaN setpoint")
        values.append(value)
    return values


def snapshot_to_json(snapshot: Snapshot) -> dict:
    """Optional JSON rendering of a snapshot (behind the gateway config flag)."""
    return {
        "sequence": snapshot.sequence,
        "taken_at": format_timestamp(snapshot.taken_at),
        "items": [
            {
                "name": it.name,
                "handle": it.handle,
                "value": it.value,
                "quality": it.quality,
                "timestamp": format_timestamp(it.timestamp),
            }
            for it in snapshot.items
        ],
    }
