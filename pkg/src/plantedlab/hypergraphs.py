"""Counting even k-uniform hypergraphs by brute-force enumeration.

A hypergraph (a set of distinct k-subsets) is *even* when every vertex it
touches has even degree.  ``count_even_spanning(k, t, m)`` counts the even
simple hypergraphs with exactly t edges whose vertex support is exactly
[m] (all m labeled vertices touched).  Counts are cached on disk keyed by
(k, t, m) because the enumeration is a one-time cost reused across sweeps.

Enumeration caps: t <= 5 edges, m <= 9 vertices (for k = 3 the worst case is
about 3.4e7 edge subsets).
"""

from __future__ import annotations

import itertools
import json
import os
from functools import lru_cache
from typing import Iterator

from .errors import GuardExceeded
from .util import atomic_write_text

T_CAP = 5
M_CAP = 9

_ENV_CACHE = "PLANTEDLAB_CACHE_DIR"


def cache_dir() -> str:
    base = os.environ.get(_ENV_CACHE)
    if base is None:
        base = os.path.join(os.path.expanduser("~"), ".cache", "plantedlab")
    return base


def _cache_path() -> str:
    return os.path.join(cache_dir(), "even_hypergraph_counts.json")


def _load_cache() -> dict[str, int]:
    try:
        with open(_cache_path()) as fh:
            return json.load(fh)
    except (OSError, ValueError):
        return {}


def _store_cache(cache: dict[str, int]) -> None:
    atomic_write_text(_cache_path(), json.dumps(cache, sort_keys=True, indent=0))


def iter_even_spanning(k: int, t: int, m: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Yield every even t-edge k-uniform hypergraph spanning exactly [m]."""
    if t > T_CAP or m > M_CAP:
        raise GuardExceeded(f"even-hypergraph enumeration capped at t<={T_CAP}, m<={M_CAP}")
    if m > k * t or m < k:
        return
    edges = list(itertools.combinations(range(m), k))
    masks = [sum(1 << v for v in e) for e in edges]
    # even degree <=> per-vertex parity (xor of edge masks) zero
    full = (1 << m) - 1
    for chosen in itertools.combinations(range(len(edges)), t):
        par = 0
        supp = 0
        for idx in chosen:
            par ^= masks[idx]
            supp |= masks[idx]
        if par == 0 and supp == full:
            yield tuple(edges[idx] for idx in chosen)


@lru_cache(maxsize=None)
def count_even_spanning(k: int, t: int, m: int) -> int:
    """Number of even t-edge k-uniform simple hypergraphs spanning exactly
    m labeled vertices."""
    if t == 0:
        return 1 if m == 0 else 0
    if m > k * t // 2 or m < k:
        # an even hypergraph has every degree >= 2, so at most k*t/2 vertices
        return 0
    if (k * t) % 2:
        return 0  # degree sum k*t must be even
    key = f"{k},{t},{m}"
    cache = _load_cache()
    if key in cache:
        return int(cache[key])
    count = _count_by_enumeration(k, t, m)
    cache = _load_cache()  # re-read: another process may have added keys
    cache[key] = count
    _store_cache(cache)
    return count


def _count_by_enumeration(k: int, t: int, m: int) -> int:
    if t > T_CAP or m > M_CAP:
        raise GuardExceeded(f"even-hypergraph enumeration capped at t<={T_CAP}, m<={M_CAP}")
    edges = list(itertools.combinations(range(m), k))
    masks = [sum(1 << v for v in e) for e in edges]
    full = (1 << m) - 1
    count = 0
    for chosen in itertools.combinations(masks, t):
        par = 0
        supp = 0
        for mask in chosen:
            par ^= mask
            supp |= mask
        if par == 0 and supp == full:
            count += 1
    return count
