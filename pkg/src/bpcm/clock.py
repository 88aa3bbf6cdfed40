"""Timestamps, injectable clocks and sortable record identifiers."""

from __future__ import annotations

import hashlib
import os
from datetime import datetime, timezone
from typing import Callable, Optional

Clock = Callable[[], datetime]
IdFactory = Callable[[datetime], str]

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def fixed_clock(instant: datetime) -> Clock:
    instant = normalize_timestamp(instant)
    return lambda: instant


def normalize_timestamp(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {dt!r} is naive; a UTC instant is required")
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(dt: datetime) -> str:
    """RFC 3339 text with second precision, always in UTC (``Z`` suffix)."""
    return normalize_timestamp(dt).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} carries no UTC offset")
    return normalize_timestamp(dt)


def ulid(instant: datetime, entropy: Optional[bytes] = None) -> str:
    """26-character Crockford base32 id: 48-bit milliseconds + 80 bits entropy."""
    ms = int(normalize_timestamp(instant).timestamp() * 1000)
    if entropy is None:
        entropy = os.urandom(10)
    value = (ms << 80) | int.from_bytes(entropy[:10].rjust(10, b"\0"), "big")
    chars = []
    for _ in range(26):
        chars.append(_CROCKFORD[value & 31])
        value >>= 5
    return "".join(reversed(chars))


def random_ids(instant: datetime) -> str:
    return ulid(instant)


class SeededIds:
    """Deterministic id factory: the same seed yields the same id sequence."""

    def __init__(self, seed: bytes) -> None:
        self._seed = seed
        self._counter = 0

    def __call__(self, instant: datetime) -> str:
        digest = hashlib.sha256(self._seed + self._counter.to_bytes(8, "big")).digest()
        self._counter += 1
        return ulid(instant, digest[:10])
