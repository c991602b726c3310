"""Index sets for the remainder sums: compositions, sign sequences, chains."""

from __future__ import annotations

from functools import lru_cache
from typing import Iterator, Sequence

from .depgraph import DependencyGraph, sorted_vertices


@lru_cache(maxsize=None)
def _compositions(t: int) -> tuple:
    if t == 0:
        return ((),)
    out = []
    for first in range(t, 0, -1):
        for rest in _compositions(t - first):
            out.append((first,) + rest)
    return tuple(out)


def compositions(t: int) -> list[tuple[int, ...]]:
    """All ``2**(t-1)`` compositions of ``t``, largest first part first."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return list(_compositions(t))


def compositions_star(t: int) -> list[tuple[int, ...]]:
    """Compositions of ``t`` whose parts, except possibly the last, are all >= 2."""
    if t < 2:
        raise ValueError("t must be >= 2")
    return [c for c in _compositions(t) if all(part >= 2 for part in c[:-1])]


def sign_sequences(k: int) -> list[tuple[int, ...]]:
    """Members of ``M_{1,k+2}``.

    Sequences ``(t_1..t_{k+2})`` with ``t_1 = 0``, ``t_{j+1} = +-j`` and no two
    consecutive entries both non-negative.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    out = []

    def extend(seq):
        j = len(seq)
        if j == k + 2:
            out.append(tuple(seq))
            return
        for cand in (j, -j):
            if min(seq[-1], cand) < 0:
                extend(seq + [cand])

    extend([0])
    return out


def is_valid_sign_sequence(t: Sequence[int]) -> bool:
    if not t or t[0] != 0:
        return False
    return all(abs(tj) <= j for j, tj in enumerate(t))


def blocks_from_signs(t: Sequence[int]) -> tuple[int, ...]:
    """Block sizes ``(q_1 - q_0, ..., q_{z+1} - q_z)`` induced by the positive entries of ``t``."""
    q = [1] + [j + 1 for j, tj in enumerate(t) if tj > 0] + [len(t) + 1]
    return tuple(b - a for a, b in zip(q, q[1:]))


def composition_to_signs(eta: Sequence[int]) -> tuple[int, ...]:
    """The member of ``M_{1,k+2}`` matching a composition in ``C*(k+2)``."""
    t = [0]
    starts = set()
    pos = 1
    for part in eta[:-1]:
        pos += part
        starts.add(pos)
    for j in range(2, sum(eta) + 1):
        t.append(j - 1 if j in starts else -(j - 1))
    return tuple(t)


def _index_set(g: DependencyGraph, chain: list, tj: int | None, j: int):
    if j == 0:
        return g.vertices
    if tj is None:
        return sorted_vertices(g.neighborhood_set(chain))
    if tj == 0:
        return ()
    return sorted_vertices(g.neighborhood_set(chain[: abs(tj)]))


def enumerate_chains(g: DependencyGraph, q: int, sign_seq: Sequence[int] | None = None,
                     first: Sequence | None = None) -> Iterator[tuple]:
    """Stream index chains ``(i_1..i_q)`` in lexicographic vertex order.

    Without ``sign_seq`` position ``j`` ranges over ``N(i_1..i_{j-1})``.  With
    it, position ``j`` ranges over ``N(i_1..i_{|t_j|})``, or nothing when
    ``t_j = 0``.  ``first`` restricts ``i_1`` (used to partition work).
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if sign_seq is not None and len(sign_seq) < q:
        raise ValueError("sign sequence shorter than chain length")
    roots = g.vertices if first is None else first
    chain: list = []

    def rec(j):
        if j == q:
            yield tuple(chain)
            return
        tj = None if sign_seq is None else sign_seq[j]
        for v in _index_set(g, chain, tj, j):
            chain.append(v)
            yield from rec(j + 1)
            chain.pop()

    for r in roots:
        chain.append(r)
        yield from rec(1)
        chain.pop()


def is_chain(g: DependencyGraph, chain: Sequence) -> bool:
    for j in range(1, len(chain)):
        if chain[j] not in g.neighborhood_set(chain[:j]):
            return False
    return True
