"""Min-parity tree automata: the ``.pta`` text format, validation, canonical form.

A document is line oriented, ``#`` starts a comment::

    alphabet a b
    state q 2
    initial q
    trans q a q q

Names are identifiers over ``[A-Za-z0-9_]``. States and letters are stored
by dense index in declaration order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_IDENT = re.compile(r"[A-Za-z0-9_]+\Z")


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int = 0
    column: int = 0

    def __str__(self) -> str:
        where = f"{self.line}:{self.column}: " if self.line else ""
        return f"{where}{self.severity}: {self.message}"


@dataclass(frozen=True)
class Automaton:
    """Nondeterministic min-parity automaton over infinite binary trees.

    ``priority[q]`` is the priority of state ``q``; ``d`` is the even priority
    ceiling. ``transitions`` holds ``(state, letter, left, right)`` index
    quadruples.
    """

    alphabet: tuple[str, ...]
    states: tuple[str, ...]
    initial: int
    priority: tuple[int, ...]
    transitions: frozenset[tuple[int, int, int, int]]
    d: int = field(default=0)

    def __post_init__(self):
        if self.d == 0:
            object.__setattr__(self, "d", even_ceiling(max(self.priority, default=1)))

    @classmethod
    def build(cls, alphabet, states, initial, transitions) -> "Automaton":
        """Construct from names: ``states`` maps name -> priority,
        ``transitions`` is an iterable of name quadruples."""
        alphabet = tuple(alphabet)
        names = tuple(states)
        s_idx = {s: i for i, s in enumerate(names)}
        a_idx = {a: i for i, a in enumerate(alphabet)}
        trans = frozenset(
            (s_idx[q], a_idx[a], s_idx[l], s_idx[r]) for q, a, l, r in transitions
        )
        return cls(alphabet, names, s_idx[initial],
                   tuple(states[s] for s in names), trans)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def width(self) -> int:
        """Number of bits of an RSet: ``|Q| * d``."""
        return len(self.states) * self.d

    def letter_index(self, letter) -> int:
        if isinstance(letter, int):
            if not 0 <= letter < len(self.alphabet):
                raise ValueError(f"unknown letter index {letter}")
            return letter
        try:
            return self.alphabet.index(letter)
        except ValueError:
            raise ValueError(f"unknown letter {letter}") from None

    def state_index(self, state) -> int:
        if isinstance(state, int):
            if not 0 <= state < len(self.states):
                raise ValueError(f"unknown state index {state}")
            return state
        try:
            return self.states.index(state)
        except ValueError:
            raise ValueError(f"unknown state {state}") from None

    def transitions_for(self, letter: int) -> list[tuple[int, int, int]]:
        return sorted((q, l, r) for q, a, l, r in self.transitions if a == letter)


def even_ceiling(p: int) -> int:
    return max(2, p + (p % 2))


def parse_automaton(text: str) -> Automaton:
    alphabet: list[str] | None = None
    states: dict[str, int] = {}
    initial: tuple[str, int, int] | None = None
    raw_trans: list[tuple[list[tuple[str, int]], int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        if not tokens:
            continue
        head, col = tokens[0]
        args = tokens[1:]
        for tok, c in args:
            if not _IDENT.match(tok):
                raise ParseError(f"invalid name {tok!r}", lineno, c)

        if head == "alphabet":
            if alphabet is not None:
                raise ParseError("duplicate alphabet line", lineno, col)
            if not args:
                raise ParseError("empty alphabet", lineno, col)
            alphabet = []
            for tok, c in args:
                if tok in alphabet:
                    raise ParseError(f"duplicate letter {tok}", lineno, c)
                alphabet.append(tok)
        elif head == "state":
            if len(args) != 2:
                raise ParseError("expected: state <name> <priority>", lineno, col)
            (name, c_name), (prio, c_prio) = args
            if name in states:
                raise ParseError(f"duplicate state {name}", lineno, c_name)
            if not prio.isdigit():
                raise ParseError(f"priority must be an integer, got {prio!r}", lineno, c_prio)
            if int(prio) < 1:
                raise ParseError(f"priority of {name} must be >= 1", lineno, c_prio)
            states[name] = int(prio)
        elif head == "initial":
            if initial is not None:
                raise ParseError("duplicate initial line", lineno, col)
            if len(args) != 1:
                raise ParseError("expected: initial <name>", lineno, col)
            initial = (args[0][0], lineno, args[0][1])
        elif head == "trans":
            if len(args) != 4:
                raise ParseError("expected: trans <q> <letter> <qL> <qR>", lineno, col)
            raw_trans.append((args, lineno))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, col)

    if alphabet is None:
        raise ParseError("missing alphabet line")
    if not states:
        raise ParseError("no states declared")
    if initial is None:
        raise ParseError("missing initial line")

    names = list(states)
    s_idx = {s: i for i, s in enumerate(names)}
    a_idx = {a: i for i, a in enumerate(alphabet)}
    if initial[0] not in s_idx:
        raise ParseError(f"unknown state {initial[0]}", initial[1], initial[2])

    transitions = set()
    for args, lineno in raw_trans:
        (q, cq), (a, ca), (l, cl), (r, cr) = args
        for name, c in ((q, cq), (l, cl), (r, cr)):
            if name not in s_idx:
                raise ParseError(f"unknown state {name}", lineno, c)
        if a not in a_idx:
            raise ParseError(f"unknown letter {a}", lineno, ca)
        transitions.add((s_idx[q], a_idx[a], s_idx[l], s_idx[r]))

    return Automaton(
        alphabet=tuple(alphabet),
        states=tuple(names),
        initial=s_idx[initial[0]],
        priority=tuple(states[s] for s in names),
        transitions=frozenset(transitions),
    )


def validate(aut: Automaton) -> list[Diagnostic]:
    out: list[Diagnostic] = []

    def error(msg):
        out.append(Diagnostic("error", msg))

    if not aut.alphabet:
        error("empty alphabet")
    if not aut.states:
        error("empty state list")
    for name in (*aut.alphabet, *aut.states):
        if not _IDENT.match(name):
            error(f"invalid name {name!r}")
    if len(set(aut.alphabet)) != len(aut.alphabet):
        error("duplicate letter names")
    if len(set(aut.states)) != len(aut.states):
        error("duplicate state names")
    if len(aut.priority) != len(aut.states):
        error("priority map does not cover the states")
    for name, p in zip(aut.states, aut.priority):
        if p < 1:
            error(f"priority of {name} is {p}, must be >= 1")
        elif p > aut.d:
            error(f"priority of {name} is {p}, exceeds d={aut.d}")
    if aut.d % 2:
        error(f"d={aut.d} is odd")
    if not 0 <= aut.initial < len(aut.states):
        error(f"initial state index {aut.initial} out of range")

    n_q, n_a = len(aut.states), len(aut.alphabet)
    for q, a, l, r in sorted(aut.transitions):
        if not (0 <= q < n_q and 0 <= l < n_q and 0 <= r < n_q):
            error(f"transition {(q, a, l, r)} references an unknown state")
        if not 0 <= a < n_a:
            error(f"transition {(q, a, l, r)} references an unknown letter")
    if any(d.severity == "error" for d in out):
        return out

    enabled = {(q, a) for q, a, _, _ in aut.transitions}
    for q, qname in enumerate(aut.states):
        missing = [a for i, a in enumerate(aut.alphabet) if (q, i) not in enabled]
        if missing:
            out.append(Diagnostic(
                "warning", f"state {qname} blocks on letter(s) {' '.join(missing)}"))
    return out


def is_valid(aut: Automaton) -> bool:
    return not any(d.severity == "error" for d in validate(aut))


def canonical_text(aut: Automaton) -> str:
    lines = ["alphabet " + " ".join(aut.alphabet)]
    lines += [f"state {s} {p}" for s, p in zip(aut.states, aut.priority)]
    lines.append(f"initial {aut.states[aut.initial]}")
    for q, a, l, r in sorted(aut.transitions):
        lines.append(f"trans {aut.states[q]} {aut.alphabet[a]} {aut.states[l]} {aut.states[r]}")
    return "\n".join(lines) + "\n"


def structure(aut: Automaton) -> tuple:
    """Comparable structural key; equal keys mean identical automata."""
    return (aut.alphabet, aut.states, aut.initial, aut.priority,
            tuple(sorted(aut.transitions)), aut.d)


def load(path) -> Automaton:
    with open(path, encoding="utf-8") as fh:
        return parse_automaton(fh.read())
