"""Oracle harness on small powerset lattices.

Elements of the lattice ``P({0..g-1})`` are ``g``-bit ints. A ``DeltaTable``
stores a monotone ``delta: V^d -> V`` as a flat array indexed by the packed
argument tuple (coordinate ``i`` occupies bits ``g*(i-1) .. g*i-1``).

``phi_on_lattice`` evaluates Phi_1 at bottom through the unary evaluator;
``nested_fixpoint`` computes the alternating fixpoint
``mu x1. nu x2. ... nu xd. delta`` by plain Knaster-Tarski iteration. The two
must agree on every table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .subset_lattice import parity_leq
from .unary_mu import DomainContract, Symbol, build_phi, evaluate

MAX_COMPARABLE_PAIRS = 65536


@dataclass(frozen=True)
class FinLattice:
    g: int

    @property
    def bottom(self) -> int:
        return 0

    @property
    def top(self) -> int:
        return (1 << self.g) - 1

    @property
    def size(self) -> int:
        return 1 << self.g


@dataclass(frozen=True, eq=False)
class DeltaTable:
    g: int
    d: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_size(self.g, self.d)
        if self.values.shape != (1 << (self.g * self.d),):
            raise ValueError("table has the wrong number of entries")
        if not is_monotone(self.g, self.d, self.values):
            raise ValueError("table is not monotone")

    @property
    def lattice(self) -> FinLattice:
        return FinLattice(self.g)

    def __call__(self, *xs: int) -> int:
        return int(self.values[pack(self.g, xs)])

    def __eq__(self, other) -> bool:
        return (isinstance(other, DeltaTable) and (self.g, self.d) == (other.g, other.d)
                and np.array_equal(self.values, other.values))

    __hash__ = None


def pack(g: int, xs) -> int:
    idx = 0
    for i, x in enumerate(xs):
        idx |= x << (g * i)
    return idx


def unpack(g: int, d: int, idx: int) -> tuple[int, ...]:
    m = (1 << g) - 1
    return tuple((idx >> (g * i)) & m for i in range(d))


def check_size(g: int, d: int) -> None:
    if g < 1:
        raise ValueError("ground set must be non-empty")
    if d < 2 or d % 2:
        raise ValueError(f"d must be even and >= 2, got {d}")
    # comparable argument pairs of V^d = 3^(g*d)
    if 3 ** (g * d) > MAX_COMPARABLE_PAIRS:
        raise ValueError(f"lattice too large for exhaustive checks (g={g}, d={d})")


def is_monotone(g: int, d: int, values: np.ndarray) -> bool:
    """Exhaustive check over covering pairs (one extra argument bit)."""
    n = g * d
    idx = np.arange(1 << n)
    for b in range(n):
        lo = idx[(idx >> b) & 1 == 0]
        if np.any(values[lo] & ~values[lo | (1 << b)]):
            return False
    return True


def table_from_function(g: int, d: int, fn) -> DeltaTable:
    vals = np.array([fn(*unpack(g, d, i)) for i in range(1 << (g * d))], dtype=np.int64)
    return DeltaTable(g, d, vals)


def random_monotone_delta(g: int, d: int, seed: int) -> DeltaTable:
    """Deterministic random monotone table.

    Each output bit is a random monotone Boolean function of the ``g*d``
    argument bits: a join of minimal argument points (DNF) or, dually, a meet
    of clauses (CNF). Any such table is monotone by construction.
    """
    check_size(g, d)
    rng = np.random.default_rng(seed)
    n = g * d
    idx = np.arange(1 << n, dtype=np.int64)
    vals = np.zeros(1 << n, dtype=np.int64)
    for j in range(g):
        n_terms = int(rng.integers(0, 5))
        terms = []
        for _ in range(n_terms):
            m = 0
            for b in rng.choice(n, size=int(rng.integers(1, min(n, 3) + 1)), replace=False):
                m |= 1 << int(b)
            terms.append(m)
        if rng.random() < 0.5:
            hit = np.zeros(1 << n, dtype=bool)
            for m in terms:
                hit |= (idx & m) == m
        else:
            hit = np.ones(1 << n, dtype=bool)
            for m in terms:
                hit &= (idx & m) != 0
        vals |= hit.astype(np.int64) << j
    return DeltaTable(g, d, vals)


def nested_fixpoint(tbl: DeltaTable) -> int:
    """``mu x1. nu x2. mu x3 ... nu xd. delta(x1, ..., xd)``; every inner
    iteration restarts from bottom (mu) or top (nu)."""
    top = (1 << tbl.g) - 1

    def solve(prefix: tuple[int, ...]) -> int:
        k = len(prefix) + 1
        x = 0 if k % 2 else top
        while True:
            args = prefix + (x,)
            y = tbl(*args) if k == tbl.d else solve(args)
            if y == x:
                return x
            x = y

    return solve(())


def tuple_delta(tbl: DeltaTable, tau: tuple[int, ...]) -> tuple[int, ...]:
    """Coordinate ``i`` is ``delta(tau_1, ..., tau_{i-1}, tau_i, ..., tau_i)``."""
    d = tbl.d
    return tuple(tbl(*(tau[:i] + (tau[i],) * (d - i))) for i in range(d))


def tuple_basic(tbl: DeltaTable, sym: Symbol, tau: tuple[int, ...]) -> tuple[int, ...]:
    d, top = tbl.d, (1 << tbl.g) - 1
    if sym.kind == "delta":
        return tuple_delta(tbl, tau)
    n = sym.index
    if sym.kind == "bid":
        if not 1 <= n <= d:
            raise ValueError(f"Bid index {n} outside 1..{d}")
        fill = 0 if n == 1 else top if n == 2 else tau[n - 3]
    else:
        if not 1 <= n <= d - 1:
            raise ValueError(f"Cut index {n} outside 1..{d - 1}")
        fill = tau[n]
    return tau[: n - 1] + (fill,) * (d - n + 1)


def _leq(a: tuple, b: tuple) -> bool:
    return all(x & ~y == 0 for x, y in zip(a, b))


def in_s(tbl: DeltaTable, n: int, tau: tuple[int, ...]) -> list[str]:
    """Reasons why ``tau`` is not in the invariant set S_n (empty if it is)."""
    d = tbl.d
    bad = []
    for i, j in product(range(1, d + 1), repeat=2):
        if parity_leq(i, j) and tau[i - 1] & ~tau[j - 1]:
            bad.append("not ordered")
            break
    if n <= d and any(tau[i - 1] != tau[n - 1] for i in range(n, d + 1)):
        bad.append(f"not {n}-fixed")
    dt = tuple_delta(tbl, tau)
    if dt[: n - 1] != tau[: n - 1]:
        bad.append(f"not {n}-saturated")
    if n % 2 and not _leq(tau, dt):
        bad.append("Delta not above")
    if n % 2 == 0 and not _leq(dt, tau):
        bad.append("Delta not below")
    return bad


def lattice_interpretation(tbl: DeltaTable, violations: list | None = None,
                           cap: int = 10**6) -> DomainContract:
    """V^d interpretation with exact stabilization. When ``violations`` is a
    list, S_n membership is checked at every structural boundary."""

    def hook(stage, value):
        kind = stage[0]
        if kind == "bid":
            checks = [(stage[1], value)]
        elif kind in ("iter", "fixed"):
            n = stage[1][1]
            checks = [(n if kind == "iter" else n + 1, value)]
        else:
            _, direction, path = stage
            prev, nxt = value
            if not (_leq(prev, nxt) if direction == "up" else _leq(nxt, prev)):
                violations.append(f"{path}: iterate not monotone ({direction})")
            return
        for n, tau in checks:
            for reason in in_s(tbl, n, tau):
                violations.append(f"{stage}: {reason} for S_{n}: {tau}")

    return DomainContract(
        eval_basic=lambda sym, tau: tuple_basic(tbl, sym, tau),
        stabilized=lambda a, b: a == b,
        invariant_hook=hook if violations is not None else None,
        max_iterations=cap,
    )


def phi_on_lattice(tbl: DeltaTable, violations: list | None = None) -> int:
    bottom = (0,) * tbl.d
    return evaluate(build_phi(tbl.d), lattice_interpretation(tbl, violations), bottom)[0]


def dump_table(tbl: DeltaTable) -> str:
    """Replay text: header ``d g``, then one ``x1 .. xd -> y`` line per entry."""
    lines = [f"d {tbl.d}", f"g {tbl.g}"]
    for idx in range(len(tbl.values)):
        xs = unpack(tbl.g, tbl.d, idx)
        lines.append(" ".join(map(str, xs)) + f" -> {int(tbl.values[idx])}")
    return "\n".join(lines) + "\n"


def load_table(text: str) -> DeltaTable:
    header = {}
    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "->" in line:
            lhs, rhs = line.split("->")
            entries[tuple(int(x) for x in lhs.split())] = int(rhs)
        else:
            key, val = line.split()
            header[key] = int(val)
    g, d = header["g"], header["d"]
    vals = np.zeros(1 << (g * d), dtype=np.int64)
    for xs, y in entries.items():
        vals[pack(g, xs)] = y
    return DeltaTable(g, d, vals)


@dataclass
class Mismatch:
    trial: int
    phi: int
    nested: int
    table: str


@dataclass
class EquivalenceReport:
    g: int
    d: int
    seed: int
    trials: int
    mismatches: list[Mismatch] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.violations

    def merge(self, other: "EquivalenceReport") -> "EquivalenceReport":
        return EquivalenceReport(self.g, self.d, self.seed, self.trials + other.trials,
                                 self.mismatches + other.mismatches,
                                 self.violations + other.violations)


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def check_equivalence(g: int, d: int, seed: int, trials: int,
                      check_invariants: bool = True) -> EquivalenceReport:
    check_size(g, d)
    report = EquivalenceReport(g, d, seed, trials)
    for k in range(trials):
        tbl = random_monotone_delta(g, d, trial_seed(seed, k))
        violations = [] if check_invariants else None
        phi = phi_on_lattice(tbl, violations)
        nested = nested_fixpoint(tbl)
        if phi != nested:
            report.mismatches.append(Mismatch(k, phi, nested, dump_table(tbl)))
        if violations:
            report.violations.extend(f"trial {k}: {v}" for v in violations)
    return report
