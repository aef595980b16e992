"""Slow reference eluder dimension, written independently of the library.

Walks every ordered sequence of distinct domain points and tracks the set of
scales eps' >= eps at which the sequence is valid, as a union of intervals.
A point z is eps'-independent of the prefix S when some ordered pair (g, g')
has sqrt(sum_S (g - g')^2) <= eps' < g(z) - g'(z).
"""

import math


def _intersect(a, b):
    out = []
    for lo1, hi1 in a:
        for lo2, hi2 in b:
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if lo < hi:
                out.append((lo, hi))
    return out


def reference_eluder(values, epsilon):
    rows = [list(map(float, r)) for r in values]
    n = len(rows[0]) if rows else 0
    pairs = [(g, h) for g in range(len(rows)) for h in range(len(rows)) if g != h]
    best = 0

    def extend(seq, allowed):
        nonlocal best
        best = max(best, len(seq))
        for z in range(n):
            if z in seq:
                continue
            spans = []
            for g, h in pairs:
                total = 0.0
                for s in seq:
                    d = rows[g][s] - rows[h][s]
                    total += d * d
                lo, hi = math.sqrt(total), rows[g][z] - rows[h][z]
                if lo < hi:
                    spans.append((lo, hi))
            nxt = _intersect(allowed, spans)
            if nxt:
                extend(seq + [z], nxt)

    extend([], [(float(epsilon), math.inf)])
    return best
