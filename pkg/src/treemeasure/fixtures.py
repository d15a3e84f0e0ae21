"""Small reference automata used by tests, the CLI samples and the README."""

from .automaton import Automaton, parse_automaton

# All trees over {a, b}.
A1_TEXT = """\
alphabet a b
state q 2
initial q
trans q a q q
trans q b q q
"""

# No transitions: empty language.
A2_TEXT = """\
alphabet a b
state q 2
initial q
"""

# Trees whose root is labelled a.
A3_TEXT = """\
alphabet a b
state root 2
state top 2
initial root
trans root a top top
trans top a top top
trans top b top top
"""

# Only letter a has a transition: the single all-a tree.
A4_TEXT = """\
alphabet a b
state q 2
initial q
trans q a q q
"""

# Some node is labelled a: guess a path towards it. The searching state has
# priority 1, so the guessed path cannot search forever.
SOME_A_TEXT = """\
alphabet a b
state search 1
state done 2
initial search
trans search a done done
trans search a search done
trans search a done search
trans search b search done
trans search b done search
trans done a done done
trans done b done done
"""


def a1() -> Automaton:
    return parse_automaton(A1_TEXT)


def a2() -> Automaton:
    return parse_automaton(A2_TEXT)


def a3() -> Automaton:
    return parse_automaton(A3_TEXT)


def a4() -> Automaton:
    return parse_automaton(A4_TEXT)


def some_a() -> Automaton:
    return parse_automaton(SOME_A_TEXT)


SAMPLES = {
    "a1": A1_TEXT,
    "a2": A2_TEXT,
    "a3": A3_TEXT,
    "a4": A4_TEXT,
    "some_a": SOME_A_TEXT,
}
