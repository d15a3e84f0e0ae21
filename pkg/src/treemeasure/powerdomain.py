"""Distributions over RSets, the stochastic order and the measure pipeline.

A ``Dist`` is a finite sparse distribution: RSet keys (int64, sorted) with
float64 masses. The lifted basic symbols push mass through the RSet maps;
``dist_delta`` draws a letter uniformly and the two children independently.

``alpha <= beta`` (stochastic order) holds when every upward-closed family of
RSets gets at least as much mass under ``beta`` as under ``alpha``.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Union

import networkx as nx
import numpy as np

from .automaton import Automaton
from .subset_lattice import big_delta_a, bid_r, coord, cut_r
from .unary_mu import (DomainContract, IterationLimit, Symbol, build_phi,
                       evaluate_traced, term_size)

log = logging.getLogger(__name__)

DRIFT_BOUND = 1e-9
ORDER_TOL = 1e-12
NAIVE_MAX_WIDTH = 5
MAX_KEY_WIDTH = 62
# above this many (left, right) pairs dist_delta works in row blocks
_PAIR_BLOCK = 1 << 22


class SupportLimit(RuntimeError):
    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"support size {size} exceeds the limit {limit}")


class InvariantViolation(RuntimeError):
    def __init__(self, messages: list[str]):
        self.messages = list(messages)
        super().__init__(f"{len(messages)} invariant violation(s); first: {messages[0]}")


@dataclass(frozen=True, eq=False)
class Dist:
    """Immutable sparse distribution. Build with ``from_mapping`` or
    ``point_mass``; the constructor expects canonical arrays."""

    keys: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.keys.setflags(write=False)
        self.probs.setflags(write=False)

    @classmethod
    def from_mapping(cls, masses: Mapping[int, float]) -> "Dist":
        items = sorted((int(k), float(p)) for k, p in masses.items() if p > 0)
        if any(p < 0 for p in masses.values()):
            raise ValueError("negative mass")
        if not items:
            raise ValueError("distribution has no mass")
        keys = np.array([k for k, _ in items], dtype=np.int64)
        probs = np.array([p for _, p in items], dtype=np.float64)
        return cls(keys, probs)

    @property
    def support_size(self) -> int:
        return len(self.keys)

    def total(self) -> float:
        return float(self.probs.sum())

    def to_dict(self) -> dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.keys, self.probs)}

    def get(self, r: int) -> float:
        i = np.searchsorted(self.keys, r)
        if i < len(self.keys) and self.keys[i] == r:
            return float(self.probs[i])
        return 0.0

    def mass_where(self, mask: np.ndarray) -> float:
        return float(self.probs[mask].sum())

    def __eq__(self, other) -> bool:
        return (isinstance(other, Dist) and np.array_equal(self.keys, other.keys)
                and np.array_equal(self.probs, other.probs))

    __hash__ = None

    def __repr__(self) -> str:
        body = ", ".join(f"{int(k):#x}: {p:.6g}" for k, p in zip(self.keys, self.probs))
        return f"Dist({{{body}}})"


def point_mass(r: int) -> Dist:
    return Dist(np.array([r], dtype=np.int64), np.array([1.0]))


def _aggregate(keys: np.ndarray, weights: np.ndarray) -> tuple[Dist, float]:
    """Sum weights per key, drop zero masses, renormalize.

    Returns the distribution and the drift ``|total - 1|`` measured before
    renormalization.
    """
    uniq, inv = np.unique(keys, return_inverse=True)
    probs = np.bincount(inv.ravel(), weights=weights.ravel(), minlength=len(uniq))
    return _canonical(uniq, probs)


def _canonical(keys: np.ndarray, probs: np.ndarray) -> tuple[Dist, float]:
    nz = probs > 0
    keys, probs = keys[nz], probs[nz]
    total = float(probs.sum())
    return Dist(keys.astype(np.int64), probs / total), abs(total - 1.0)


class DeltaOp:
    """``dist_delta`` with a per-support cache of the pair-to-output map.

    Limit iterations usually keep the support fixed and only move mass, so
    the expensive part (evaluating the transition step on every support
    pair) is done once per distinct support.
    """

    def __init__(self, aut: Automaton, max_support: int = 1 << 16, cache_size: int = 64):
        check_key_width(aut)
        self.aut = aut
        self.max_support = max_support
        self.cache_size = cache_size
        self._cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
        self.last_drift = 0.0

    def _pair_map(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        tag = keys.tobytes()
        hit = self._cache.get(tag)
        if hit is not None:
            return hit
        aut, m = self.aut, len(keys)
        n_letters = len(aut.alphabet)
        out = np.empty((n_letters, m, m), dtype=np.int64)
        rows = max(1, _PAIR_BLOCK // max(m, 1))
        right = keys[None, :]
        for a in range(n_letters):
            for lo in range(0, m, rows):
                left = keys[lo:lo + rows, None]
                out[a, lo:lo + rows] = big_delta_a(aut, a, left, right)
        uniq, inv = np.unique(out.ravel(), return_inverse=True)
        if len(uniq) > self.max_support:
            raise SupportLimit(len(uniq), self.max_support)
        if len(self._cache) >= self.cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[tag] = (uniq, inv.ravel())
        return uniq, inv.ravel()

    def __call__(self, alpha: Dist) -> Dist:
        uniq, inv = self._pair_map(alpha.keys)
        n_letters = len(self.aut.alphabet)
        pair = np.outer(alpha.probs, alpha.probs).ravel() / n_letters
        weights = np.tile(pair, n_letters)
        probs = np.bincount(inv, weights=weights, minlength=len(uniq))
        out, self.last_drift = _canonical(uniq, probs)
        return out


def check_key_width(aut: Automaton) -> None:
    if aut.width > MAX_KEY_WIDTH:
        raise ValueError(
            f"|Q|*d = {aut.width} exceeds {MAX_KEY_WIDTH}; RSets must fit in 64-bit keys")


def dist_delta(aut: Automaton, alpha: Dist, max_support: int = 1 << 16) -> Dist:
    return DeltaOp(aut, max_support)(alpha)


def dist_superficial(aut: Automaton, which: Symbol, alpha: Dist) -> Dist:
    """Push every atom through ``bid_r``/``cut_r`` and accumulate mass."""
    if which.kind == "bid":
        keys = bid_r(aut, which.index, alpha.keys)
    elif which.kind == "cut":
        keys = cut_r(aut, which.index, alpha.keys)
    else:
        raise ValueError(f"{which} is not a Bid or Cut symbol")
    return _aggregate(np.asarray(keys, dtype=np.int64), alpha.probs)[0]


def tv_distance(alpha: Dist, beta: Dist) -> float:
    u = np.union1d(alpha.keys, beta.keys)
    pa = np.zeros(len(u))
    pb = np.zeros(len(u))
    pa[np.searchsorted(u, alpha.keys)] = alpha.probs
    pb[np.searchsorted(u, beta.keys)] = beta.probs
    return 0.5 * float(np.abs(pa - pb).sum())


# -- stochastic order ------------------------------------------------------

@lru_cache(maxsize=None)
def upsets(width: int) -> np.ndarray:
    """All upward-closed families of subsets of a ``width``-element set, as a
    boolean matrix (one row per family, one column per subset).

    A family is upward closed iff its indicator is a monotone Boolean
    function; those are built as pairs ``f0 <= f1`` of monotone functions in
    one variable fewer.
    """
    if width > NAIVE_MAX_WIDTH:
        raise ValueError(f"upset enumeration limited to width {NAIVE_MAX_WIDTH}")
    funcs = [0, 1]  # truth tables over 2^0 inputs
    for w in range(width):
        shift = 1 << w
        funcs = [f0 | (f1 << shift) for f0 in funcs for f1 in funcs if f0 & ~f1 == 0]
    cols = np.arange(1 << width)
    table = np.array([[(f >> c) & 1 for c in cols] for f in funcs], dtype=bool)
    return table


def _width_of(aut: Union[Automaton, int]) -> int:
    return aut if isinstance(aut, int) else aut.width


def _dense(alpha: Dist, width: int) -> np.ndarray:
    if len(alpha.keys) and int(alpha.keys[-1]) >> width:
        raise ValueError(f"atom outside a width-{width} lattice")
    v = np.zeros(1 << width)
    v[alpha.keys] = alpha.probs
    return v


def order_deficit_naive(aut: Union[Automaton, int], alpha: Dist, beta: Dist) -> float:
    """``max_U alpha(U) - beta(U)`` over upward-closed ``U``."""
    width = _width_of(aut)
    ups = upsets(width)
    diff = _dense(alpha, width) - _dense(beta, width)
    return float((ups @ diff).max())


def dist_leq_naive(aut: Union[Automaton, int], alpha: Dist, beta: Dist) -> bool:
    """Exhaustive check over upward-closed families (width at most 4).

    ``aut`` may be an automaton or the bare lattice width.
    """
    width = _width_of(aut)
    if width > 4:
        raise ValueError(f"width {width} too large for the exhaustive order check")
    return order_deficit_naive(width, alpha, beta) <= ORDER_TOL


_SCALE = 1 << 60


def order_deficit(alpha: Dist, beta: Dist) -> float:
    """Mass of ``alpha`` that cannot be moved up into ``beta`` along the
    subset order, i.e. ``1 - maxflow``. Equals ``max_U alpha(U) - beta(U)``.

    Capacities are scaled to integers so the flow computation is exact.
    """
    a_int = [int(round(p * _SCALE)) for p in alpha.probs]
    b_int = [int(round(p * _SCALE)) for p in beta.probs]
    g = nx.DiGraph()
    for i, c in enumerate(a_int):
        g.add_edge("s", ("a", i), capacity=c)
    for j, c in enumerate(b_int):
        g.add_edge(("b", j), "t", capacity=c)
    bkeys = [int(k) for k in beta.keys]
    for i, r in enumerate(int(k) for k in alpha.keys):
        for j, r2 in enumerate(bkeys):
            if r & ~r2 == 0:
                g.add_edge(("a", i), ("b", j))
    if "t" not in g:
        return float(sum(a_int)) / _SCALE
    flow = nx.maximum_flow_value(g, "s", "t")
    return (sum(a_int) - flow) / _SCALE


def dist_leq_coupling(alpha: Dist, beta: Dist, slack: float = 0.0) -> bool:
    """Order check via a monotone coupling, at any width.

    With ``slack=0`` this agrees with ``dist_leq_naive``: both accept up to
    the same float tolerance.
    """
    return order_deficit(alpha, beta) <= slack + ORDER_TOL


# -- interpretation and pipeline -------------------------------------------

def _ordered_mask(aut: Automaton, keys: np.ndarray) -> np.ndarray:
    d = aut.d
    chain = [i for i in range(1, d + 1, 2)] + [i for i in range(d, 0, -2)]
    ok = np.ones(len(keys), dtype=bool)
    for i, j in zip(chain, chain[1:]):
        ok &= (coord(aut, keys, i) & ~coord(aut, keys, j)) == 0
    return ok


def _fixed_mask(aut: Automaton, n: int, keys: np.ndarray) -> np.ndarray:
    ok = np.ones(len(keys), dtype=bool)
    if n > aut.d:
        return ok
    base = coord(aut, keys, n)
    for i in range(n + 1, aut.d + 1):
        ok &= coord(aut, keys, i) == base
    return ok


def marginals(aut: Automaton, alpha: Dist, upto: int) -> np.ndarray:
    """Mass of each ``(q, i)`` slice for ``i < upto``, indexed by bit."""
    nbits = (upto - 1) * aut.n_states
    return np.array([alpha.probs[(alpha.keys >> b) & 1 == 1].sum() for b in range(nbits)])


@dataclass
class DInterpretation:
    """Everything ``measure_of_language`` needs around the contract."""

    contract: DomainContract
    delta: DeltaOp
    violations: list[str]
    max_support: int = 1
    max_drift: float = 0.0


def d_interpretation(aut: Automaton, tol: float = 1e-9, cap: int = 10**6,
                     check_invariants: bool = False,
                     violations: Optional[list] = None,
                     max_support: int = 1 << 16,
                     step_slack: float = 1e-9,
                     saturation_slack: Optional[float] = None) -> DInterpretation:
    """Distribution-valued interpretation of the basic symbols.

    Limits stop once successive values are within ``tol`` in total
    variation. With ``check_invariants`` the hook checks support structure,
    marginal saturation, simplex drift and monotone ascent/descent of limit
    iterates; findings are appended to ``violations``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if saturation_slack is None:
        saturation_slack = max(1e-6, 1e3 * tol)
    delta = DeltaOp(aut, max_support)
    found = violations if violations is not None else []
    state = DInterpretation(None, delta, found)  # contract filled below

    def record(alpha: Dist, drift: float) -> Dist:
        state.max_support = max(state.max_support, alpha.support_size)
        state.max_drift = max(state.max_drift, drift)
        if alpha.support_size > max_support:
            raise SupportLimit(alpha.support_size, max_support)
        if check_invariants and drift > DRIFT_BOUND:
            found.append(f"simplex drift {drift:.3g} exceeds {DRIFT_BOUND}")
        return alpha

    def eval_basic(sym: Symbol, alpha: Dist) -> Dist:
        if sym.kind == "delta":
            out = delta(alpha)
            return record(out, delta.last_drift)
        keys = (bid_r if sym.kind == "bid" else cut_r)(aut, sym.index, alpha.keys)
        out, drift = _aggregate(np.asarray(keys, dtype=np.int64), alpha.probs)
        return record(out, drift)

    def atoms(label: str, alpha: Dist, n: int, ordered: bool) -> None:
        bad = ~_fixed_mask(aut, n, alpha.keys)
        if bad.any():
            found.append(f"{label}: {int(bad.sum())} atom(s) not {n}-fixed")
        if ordered:
            bad = ~_ordered_mask(aut, alpha.keys)
            if bad.any():
                found.append(f"{label}: {int(bad.sum())} atom(s) not ordered")

    def saturated(label: str, alpha: Dist, n: int) -> None:
        if n <= 1:
            return
        before = marginals(aut, alpha, n)
        after = marginals(aut, delta(alpha), n)
        gap = float(np.abs(before - after).max())
        if gap > saturation_slack:
            found.append(f"{label}: marginal {n}-saturation off by {gap:.3g}")

    def hook(stage: tuple, value) -> None:
        kind = stage[0]
        if kind == "bid":
            atoms(f"after Bid{stage[1]}", value, stage[1], ordered=True)
        elif kind in ("iter", "fixed"):
            what, n = stage[1]
            m = n if kind == "iter" else n + 1
            label = f"{kind} {what}{n}"
            atoms(label, value, m, ordered=True)
            if kind == "fixed":
                saturated(label, value, m)
        else:
            _, direction, path = stage
            prev, nxt = value
            lo, hi = (prev, nxt) if direction == "up" else (nxt, prev)
            gap = order_deficit(lo, hi)
            if gap > step_slack:
                found.append(f"{path}: {direction} step breaks the order by {gap:.3g}")

    state.contract = DomainContract(
        eval_basic=eval_basic,
        stabilized=lambda a, b: tv_distance(a, b) < tol,
        invariant_hook=hook if check_invariants else None,
        max_iterations=cap,
    )
    return state


@dataclass
class MeasureReport:
    measure: Optional[float]
    d: int
    states: int
    term_size: int
    lims: list[dict] = field(default_factory=list)
    max_support: int = 1
    violations: list[str] = field(default_factory=list)
    tol: float = 1e-9
    cap: int = 10**6
    wall_time: float = 0.0
    final: Optional[Dist] = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return all(l["converged"] for l in self.lims)

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "d": self.d,
            "states": self.states,
            "term_size": self.term_size,
            "lims": self.lims,
            "max_support": self.max_support,
            "violations": self.violations,
            "tol": self.tol,
            "cap": self.cap,
        }

    def to_json(self) -> str:
        # wall_time stays out so that repeated runs serialize identically
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class NonConvergence(IterationLimit):
    """An ``IterationLimit`` carrying the partial report."""

    def __init__(self, err: IterationLimit, report: MeasureReport):
        super().__init__(err.path, err.cap)
        self.trace = err.trace
        self.report = report


def _lim_rows(trace, failed: Optional[str] = None) -> list[dict]:
    rows = []
    for rec in trace.records():
        ok = rec.converged and not (failed and failed.startswith(rec.path))
        rows.append({"path": rec.path, "iterations": rec.iterations, "converged": ok})
    return rows


def initial_mass(aut: Automaton, alpha: Dist) -> float:
    """Mass of the RSets containing ``(q_I, 1)``."""
    return alpha.mass_where((alpha.keys >> aut.initial) & 1 == 1)


def measure_of_language(aut: Automaton, tol: float = 1e-9, cap: int = 10**6,
                        check_invariants: bool = False, strict: bool = False,
                        max_support: int = 1 << 16) -> MeasureReport:
    """Evaluate Phi_1 from the point mass on the empty RSet and return the
    mass of the RSets containing ``(q_I, 1)``.

    Raises ``NonConvergence`` (an ``IterationLimit``) when a limit hits
    ``cap``; its ``report`` has ``measure=None``. In ``strict`` mode any
    invariant violation raises ``InvariantViolation``.
    """
    t0 = time.perf_counter()
    phi = build_phi(aut.d)
    interp = d_interpretation(aut, tol, cap, check_invariants or strict,
                              max_support=max_support)
    report = MeasureReport(None, aut.d, aut.n_states, term_size(phi), tol=tol, cap=cap)
    try:
        final, trace = evaluate_traced(phi, interp.contract, point_mass(0))
    except IterationLimit as err:
        report.lims = _lim_rows(err.trace, err.path)
        report.max_support = interp.max_support
        report.violations = list(interp.violations)
        report.wall_time = time.perf_counter() - t0
        raise NonConvergence(err, report) from None
    value = initial_mass(aut, final)
    report.measure = min(1.0, max(0.0, value))
    report.lims = _lim_rows(trace)
    report.max_support = interp.max_support
    report.violations = list(interp.violations)
    report.final = final
    report.wall_time = time.perf_counter() - t0
    log.info("measure %.12g in %.3fs, max support %d", report.measure,
             report.wall_time, report.max_support)
    if strict and report.violations:
        raise InvariantViolation(report.violations)
    return report


# -- order self-test --------------------------------------------------------

def incomparable_pair() -> tuple[Dist, Dist]:
    """Over subsets of ``{p, q}`` (bits 0 and 1): half on ``{p}`` and half on
    ``{q}`` versus half on the empty set and half on ``{p, q}``."""
    return (Dist.from_mapping({0b01: 0.5, 0b10: 0.5}),
            Dist.from_mapping({0b00: 0.5, 0b11: 0.5}))


def random_dist(rng: np.random.Generator, width: int, max_atoms: int = 6) -> Dist:
    k = int(rng.integers(1, min(max_atoms, 1 << width) + 1))
    keys = rng.choice(1 << width, size=k, replace=False)
    probs = rng.dirichlet(np.ones(k))
    return Dist.from_mapping(dict(zip(keys.tolist(), probs.tolist())))


def shift_up(rng: np.random.Generator, alpha: Dist, width: int) -> Dist:
    """A distribution above ``alpha``: random parts of each atom's mass move
    to random supersets."""
    out: dict[int, float] = {}
    for r, p in zip(alpha.keys.tolist(), alpha.probs.tolist()):
        moved = p * float(rng.uniform(0, 1)) if rng.random() < 0.7 else 0.0
        up = r | int(rng.integers(0, 1 << width))
        out[r] = out.get(r, 0.0) + p - moved
        out[up] = out.get(up, 0.0) + moved
    return Dist.from_mapping(out)


@dataclass
class OrderSelftest:
    trials: int
    agree: int = 0
    comparable: int = 0
    disagreements: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements


def order_selftest(seed: int, trials: int, max_width: int = 4) -> OrderSelftest:
    """Compare ``dist_leq_coupling`` (slack 0) against ``dist_leq_naive`` on
    ``trials`` random pairs. The first pair is always ``incomparable_pair``;
    the rest mix independent pairs, upward shifts and their reversals."""
    rng = np.random.default_rng(seed)
    report = OrderSelftest(trials)
    for k in range(trials):
        if k == 0:
            width = 2
            alpha, beta = incomparable_pair()
        else:
            width = int(rng.integers(1, max_width + 1))
            alpha = random_dist(rng, width)
            mode = k % 3
            if mode == 0:
                beta = random_dist(rng, width)
            else:
                beta = shift_up(rng, alpha, width)
                if mode == 2:
                    alpha, beta = beta, alpha
        for a, b in ((alpha, beta), (beta, alpha)):
            naive = dist_leq_naive(width, a, b)
            coupled = dist_leq_coupling(a, b, 0.0)
            report.comparable += naive
            if naive == coupled:
                report.agree += 1
            else:
                report.disagreements.append(
                    f"trial {k}: naive={naive} coupling={coupled} for {a!r} vs {b!r}")
    return report
