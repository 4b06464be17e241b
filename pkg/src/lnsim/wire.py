"""Canonical byte serialization.

Every field is length-prefixed with a 4-byte big-endian length; integers
are encoded as 8-byte big-endian unsigned values inside their prefix;
lists carry a 4-byte big-endian element count followed by length-prefixed
elements.  Fields are serialized in declaration order.  Transaction ids
are SHA-256 over this encoding (see basechain), so the format is bit-exact
across runs and platforms.
"""

from __future__ import annotations


def ser_bytes(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def ser_int(n: int) -> bytes:
    return ser_bytes(int(n).to_bytes(8, "big"))


def ser_str(s: str) -> bytes:
    return ser_bytes(s.encode("utf-8"))


def ser_list(items: list[bytes]) -> bytes:
    return len(items).to_bytes(4, "big") + b"".join(ser_bytes(i) for i in items)


class Reader:
    """Cursor over the canonical encoding."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated field")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def read_bytes(self) -> bytes:
        n = int.from_bytes(self.take(4), "big")
        return self.take(n)

    def read_int(self) -> int:
        return int.from_bytes(self.read_bytes(), "big")

    def read_str(self) -> str:
        return self.read_bytes().decode("utf-8")
