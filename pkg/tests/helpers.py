"""Random generators shared by the tests."""

import itertools
import random

from treemeasure.automaton import Automaton

NODES_UP_TO_DEPTH_3 = [""] + ["".join(w) for n in range(1, 4)
                              for w in itertools.product("LR", repeat=n)]


def random_pattern(rng: random.Random, alphabet: str, max_nodes: int = 8) -> dict:
    dom = rng.sample(NODES_UP_TO_DEPTH_3, rng.randint(0, max_nodes))
    return {v: rng.choice(alphabet) for v in dom}


def random_even_automaton(rng: random.Random, max_states: int = 4) -> Automaton:
    """All priorities in {2, 4}; the last state is an all-accepting sink so
    that measures strictly between 0 and 1 show up."""
    n = rng.randint(1, max_states - 1)
    states = {f"s{j}": rng.choice([2, 4]) for j in range(n)}
    states["top"] = 2
    names = list(states)
    alphabet = "ab"
    trans = {("top", a, "top", "top") for a in alphabet}
    for q in names[:-1]:
        for a in alphabet:
            for _ in range(rng.choice([0, 1, 1, 2])):
                trans.add((q, a, rng.choice(names), rng.choice(names)))
    return Automaton.build(alphabet, states, names[0], trans)


def random_automaton(rng: random.Random, max_states: int = 3, max_priority: int = 4,
                     alphabet: str = "ab") -> Automaton:
    n = rng.randint(1, max_states)
    states = {f"s{j}": rng.randint(1, max_priority) for j in range(n)}
    names = list(states)
    trans = set()
    for q in names:
        for a in alphabet:
            for _ in range(rng.choice([0, 1, 1, 2])):
                trans.add((q, a, rng.choice(names), rng.choice(names)))
    return Automaton.build(alphabet, states, rng.choice(names), trans)
