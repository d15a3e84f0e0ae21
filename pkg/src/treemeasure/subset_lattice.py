"""Algebra on the finite lattice of RSets, subsets of ``Q x {1..d}``.

An RSet is an int bitmask; the pair ``(q, i)`` lives at bit ``(i-1)*|Q| + q``,
so coordinate ``i`` is the contiguous block of ``|Q|`` bits holding the states
present at priority ``i``. A QSet is a ``|Q|``-bit mask.

The bit-level helpers (``bid_r``, ``cut_r``, ``big_delta_a``) accept Python
ints or int64 numpy arrays alike; the distribution code relies on that.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable

from .automaton import Automaton


def bit(aut: Automaton, q: int, i: int) -> int:
    return (i - 1) * aut.n_states + q


def rset(aut: Automaton, pairs: Iterable[tuple]) -> int:
    """Build an RSet from ``(state, priority)`` pairs; states by name or index."""
    r = 0
    for q, i in pairs:
        if not 1 <= i <= aut.d:
            raise ValueError(f"coordinate {i} outside 1..{aut.d}")
        r |= 1 << bit(aut, aut.state_index(q), i)
    return r


def pairs_of(aut: Automaton, r: int) -> set[tuple[int, int]]:
    n = aut.n_states
    return {(b % n, b // n + 1) for b in range(aut.width) if (r >> b) & 1}


def full(aut: Automaton) -> int:
    return (1 << aut.width) - 1


def qmask(aut: Automaton) -> int:
    return (1 << aut.n_states) - 1


def coord(aut: Automaton, r, i: int):
    """States present at coordinate ``i`` (a QSet)."""
    return (r >> ((i - 1) * aut.n_states)) & qmask(aut)


def _low(aut: Automaton, k: int) -> int:
    """Mask of coordinates ``1..k``."""
    return (1 << (k * aut.n_states)) - 1


def _spread(aut: Automaton, qs, start: int):
    """Copy a QSet into every coordinate ``start..d``."""
    n = aut.n_states
    out = qs << ((start - 1) * n)
    for i in range(start + 1, aut.d + 1):
        out = out | (qs << ((i - 1) * n))
    return out


def delta_a(aut: Automaton, a, rl: int, rr: int) -> int:
    """States with an ``a``-transition whose children sit, at the source
    state's own priority, in ``rl`` and ``rr``."""
    a = aut.letter_index(a)
    out = 0
    for q, ql, qr in aut.transitions_for(a):
        p = aut.priority[q]
        if (rl >> bit(aut, ql, p)) & 1 and (rr >> bit(aut, qr, p)) & 1:
            out |= 1 << q
    return out


@lru_cache(maxsize=256)
def _delta_plan(aut: Automaton, a: int) -> tuple[tuple[int, int, int], ...]:
    """Triples ``(left bit, right bit, target mask)`` for one letter.

    Coordinate ``i`` of the result reads both children at priority
    ``min(Omega(q), i)``; all coordinates ``i >= Omega(q)`` read the same bits
    and share one target mask.
    """
    plan: dict[tuple[int, int], int] = {}
    for q, ql, qr in aut.transitions_for(a):
        w = aut.priority[q]
        for p in range(1, min(w, aut.d) + 1):
            if p < w:
                target = 1 << bit(aut, q, p)
            else:
                target = 0
                for i in range(w, aut.d + 1):
                    target |= 1 << bit(aut, q, i)
            key = (bit(aut, ql, p), bit(aut, qr, p))
            plan[key] = plan.get(key, 0) | target
    return tuple((lb, rb, m) for (lb, rb), m in sorted(plan.items()))


def big_delta_a(aut: Automaton, a, rl, rr):
    """One transition step on RSets: ``(q, i)`` is in the result iff some
    ``(q, a, qL, qR)`` has ``(qL, min(Omega(q), i))`` in ``rl`` and
    ``(qR, min(Omega(q), i))`` in ``rr``."""
    out = (rl & 0) | (rr & 0)  # zero of the broadcast shape
    for lb, rb, m in _delta_plan(aut, aut.letter_index(a)):
        hit = (rl >> lb) & (rr >> rb) & 1
        out = out | (hit * m)
    return out


def bid_r(aut: Automaton, n: int, r):
    """Overwrite coordinates ``n..d`` by coordinate ``n-2`` (with coordinate
    -1 empty and coordinate 0 full)."""
    if not 1 <= n <= aut.d:
        raise ValueError(f"Bid index {n} outside 1..{aut.d}")
    keep = r & _low(aut, n - 1)
    if n == 1:
        return keep
    if n == 2:
        return keep | _spread(aut, qmask(aut), n)
    return keep | _spread(aut, coord(aut, r, n - 2), n)


def cut_r(aut: Automaton, n: int, r):
    """Overwrite coordinates ``n..d`` by coordinate ``n+1``."""
    if not 1 <= n <= aut.d - 1:
        raise ValueError(f"Cut index {n} outside 1..{aut.d - 1}")
    return (r & _low(aut, n - 1)) | _spread(aut, coord(aut, r, n + 1), n)


def parity_leq(i: int, j: int) -> bool:
    """``1 < 3 < 5 < ... < 6 < 4 < 2``, reflexively."""
    if i % 2 != j % 2:
        return i % 2 == 1
    return i <= j if i % 2 else i >= j


def is_ordered(aut: Automaton, r: int) -> bool:
    """Coordinates grow along the parity order: ``i <= j`` (parity) implies
    coordinate ``i`` is a subset of coordinate ``j``."""
    slices = [coord(aut, r, i) for i in range(1, aut.d + 1)]
    # the parity order is linear, so checking consecutive pairs suffices
    chain = sorted(range(1, aut.d + 1), key=_parity_rank)
    return all(slices[i - 1] & ~slices[j - 1] == 0 for i, j in zip(chain, chain[1:]))


def _parity_rank(i: int) -> tuple[int, int]:
    return (0, i) if i % 2 else (1, -i)


def is_n_fixed(aut: Automaton, n: int, r: int) -> bool:
    if not 1 <= n <= aut.d + 1:
        raise ValueError(f"index {n} outside 1..{aut.d + 1}")
    if n == aut.d + 1:
        return True
    base = coord(aut, r, n)
    return all(coord(aut, r, i) == base for i in range(n + 1, aut.d + 1))
