"""Independent ground truth for restricted automaton classes.

Nothing here goes through the RSet machinery: patterns are counted
directly, and the safety oracle runs its own dynamic program over plain
state sets with exact rationals.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from typing import Mapping

from .automaton import Automaton

# node -> letter; nodes are words over "LR", "" is the root
Pattern = Mapping[str, str]

SINK = "top"


def _check_nodes(p: Pattern) -> None:
    for v in p:
        if set(v) - {"L", "R"}:
            raise ValueError(f"node {v!r} is not a word over L, R")


def pattern_measure(p: Pattern, alphabet_size: int) -> Fraction:
    """Probability that a random tree agrees with ``p``: one independent
    uniform letter per constrained node."""
    if alphabet_size < 1:
        raise ValueError("alphabet size must be >= 1")
    _check_nodes(p)
    return Fraction(1, alphabet_size ** len(p))


def _node_name(v: str) -> str:
    return "root" if v == "" else "n_" + v


def pattern_automaton(alphabet, p: Pattern) -> Automaton:
    """Automaton accepting exactly the trees that agree with ``p``.

    One state per prefix of a constrained node, plus an all-accepting sink.
    A constrained node only has a transition on its own letter. Every
    priority is 2.
    """
    alphabet = tuple(alphabet)
    _check_nodes(p)
    for v, a in p.items():
        if a not in alphabet:
            raise ValueError(f"letter {a!r} at node {v!r} is not in the alphabet")
    nodes = {""} if p else set()
    for v in p:
        nodes.update(v[:i] for i in range(len(v) + 1))
    order = sorted(nodes, key=lambda v: (len(v), v))
    states = {_node_name(v): 2 for v in order}
    states[SINK] = 2

    def child(v: str) -> str:
        return _node_name(v) if v in nodes else SINK

    trans = [(SINK, a, SINK, SINK) for a in alphabet]
    for v in order:
        for a in ([p[v]] if v in p else alphabet):
            trans.append((_node_name(v), a, child(v + "L"), child(v + "R")))
    initial = _node_name("") if p else SINK
    return Automaton.build(alphabet, states, initial, trans)


def safety_prefix_measure(aut: Automaton, k: int) -> Fraction:
    """Probability that a run exists on a random depth-``k`` prefix (the
    nodes above depth ``k``), starting from the initial state.

    Only meaningful as an upper bound sequence for automata whose
    priorities are all even; non-increasing in ``k``.
    """
    if any(p % 2 for p in aut.priority):
        raise ValueError("safety oracle needs all priorities even")
    if k < 0:
        raise ValueError("k must be >= 0")
    n_letters = len(aut.alphabet)
    by_letter: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    for q, a, l, r in aut.transitions:
        by_letter[a].append((q, l, r))

    def step(left: int, right: int, a: int) -> int:
        out = 0
        for q, l, r in by_letter[a]:
            if left >> l & 1 and right >> r & 1:
                out |= 1 << q
        return out

    # beta maps a state set S to the probability that S is exactly the set
    # of states admitting a run on the prefix
    beta: dict[int, Fraction] = {(1 << len(aut.states)) - 1: Fraction(1)}
    for _ in range(k):
        nxt: dict[int, Fraction] = defaultdict(Fraction)
        for sl, pl in beta.items():
            for sr, pr in beta.items():
                w = pl * pr / n_letters
                for a in range(n_letters):
                    nxt[step(sl, sr, a)] += w
        beta = dict(nxt)
    return sum((p for s, p in beta.items() if s >> aut.initial & 1), Fraction(0))
