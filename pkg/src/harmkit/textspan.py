"""Byte-span helpers for CJK-safe substring reporting.

Spans in match/replacement records are UTF-8 byte offsets, which stay stable
across clients; consumers working in code points convert with these tables.
"""

from __future__ import annotations


def byte_offsets(text: str) -> list[int]:
    """byte_offsets(t)[i] is the UTF-8 byte offset of code point i; a final
    entry holds the total byte length."""
    offsets = [0]
    total = 0
    for ch in text:
        total += len(ch.encode("utf-8"))
        offsets.append(total)
    return offsets


def find_all(haystack: str, needle: str) -> list[int]:
    """Code-point start indices of every (possibly overlapping) occurrence."""
    hits = []
    start = haystack.find(needle)
    while start != -1:
        hits.append(start)
        start = haystack.find(needle, start + 1)
    return hits
