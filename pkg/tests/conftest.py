"""Shared test oracles."""

from __future__ import annotations


def span_rank(rows: list[int]) -> int:
    """Brute-force GF(2) rank oracle: grow the row span as an explicit
    set of packed vectors; rank = log2 of the span size.

    Independent of the elimination under test (no pivoting, no row
    reduction), so the two can only agree by computing the same thing.
    """
    span = {0}
    for v in rows:
        if v not in span:
            span |= {x ^ v for x in span}
    return (len(span) - 1).bit_length()
