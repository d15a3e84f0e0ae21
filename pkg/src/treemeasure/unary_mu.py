"""Unary mu-calculus: terms, the Phi builder and a domain-generic evaluator.

A term is built from basic symbols by sequential composition and the two
limit operators. ``Seq(f, g)`` applies ``f`` first. ``LimUp(f)`` maps ``x`` to
the least fixed point of ``f`` above ``x``; the evaluator obtains it by
iterating ``f`` from ``x`` until the domain reports stabilization.
``LimDown`` is dual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Symbol:
    kind: str  # "delta" | "bid" | "cut"
    index: int = 0

    def __str__(self) -> str:
        return "Delta" if self.kind == "delta" else f"{self.kind.capitalize()}{self.index}"


DELTA = Symbol("delta")


def Bid(n: int) -> Symbol:
    return Symbol("bid", n)


def Cut(n: int) -> Symbol:
    return Symbol("cut", n)


@dataclass(frozen=True)
class Basic:
    symbol: Symbol


@dataclass(frozen=True)
class Seq:
    first: "Term"
    second: "Term"


@dataclass(frozen=True)
class LimUp:
    body: "Term"
    # Structural label set by build_phi, e.g. ("psi", 1); used only by hooks.
    tag: Optional[tuple] = None


@dataclass(frozen=True)
class LimDown:
    body: "Term"
    tag: Optional[tuple] = None


Term = Union[Basic, Seq, LimUp, LimDown]


def seq(*terms: Term) -> Term:
    """Right-nested composition of one or more terms."""
    if len(terms) == 1:
        return terms[0]
    return Seq(terms[0], seq(*terms[1:]))


def build_phi(d: int) -> Term:
    """The formula Phi_1 for priority ceiling ``d``.

    ``Phi_d = Bid_d ; limD(Delta)`` and for ``n < d``
    ``Phi_n = Bid_n ; lim(lim(Delta) ; Phi_{n+1} ; Cut_n)`` where both limits
    go up for odd ``n`` and down for even ``n``.
    """
    if d < 2 or d % 2:
        raise ValueError(f"d must be an even integer >= 2, got {d}")
    phi: Term = Seq(Basic(Bid(d)), LimDown(Basic(DELTA), tag=("delta", d)))
    for n in range(d - 1, 0, -1):
        lim = LimUp if n % 2 else LimDown
        psi = seq(lim(Basic(DELTA), tag=("delta", n)), phi, Basic(Cut(n)))
        phi = Seq(Basic(Bid(n)), lim(psi, tag=("psi", n)))
    return phi


def term_size(t: Term) -> int:
    """Number of basic-symbol leaves."""
    if isinstance(t, Basic):
        return 1
    if isinstance(t, Seq):
        return term_size(t.first) + term_size(t.second)
    return term_size(t.body)


def basic_symbols(t: Term) -> list[Symbol]:
    """Leaves from left to right, i.e. in application order."""
    if isinstance(t, Basic):
        return [t.symbol]
    if isinstance(t, Seq):
        return basic_symbols(t.first) + basic_symbols(t.second)
    return basic_symbols(t.body)


def format_term(t: Term) -> str:
    """Parenthesized text such as ``Bid1 ; up(up(Delta) ; Bid2 ; down(Delta) ; Cut1)``."""
    if isinstance(t, Basic):
        return str(t.symbol)
    if isinstance(t, Seq):
        return f"{format_term(t.first)} ; {format_term(t.second)}"
    name = "up" if isinstance(t, LimUp) else "down"
    return f"{name}({format_term(t.body)})"


class IterationLimit(RuntimeError):
    def __init__(self, path: str, cap: int):
        self.path = path
        self.cap = cap
        self.trace: Optional[EvalTrace] = None  # filled in by evaluate_traced
        super().__init__(f"limit at {path} did not stabilize within {cap} applications")


@dataclass
class DomainContract:
    """An interpretation of the basic symbols.

    ``stabilized(prev, next)`` decides when a limit iteration has reached a
    fixed point. ``invariant_hook(stage, value)`` is called at structural
    boundaries: ``("bid", n)`` after a Bid, ``("iter", tag)`` after each
    iteration of a tagged limit, ``("fixed", tag)`` on its result, and
    ``("step", "up"|"down", path)`` with a ``(prev, next)`` pair after every
    limit iteration.
    """

    eval_basic: Callable[[Symbol, Any], Any]
    stabilized: Callable[[Any, Any], bool]
    invariant_hook: Optional[Callable[[tuple, Any], None]] = None
    max_iterations: int = 10**6


@dataclass
class LimRecord:
    path: str
    direction: str
    tag: Optional[tuple]
    invocations: int = 0
    iterations: int = 0  # productive: applications minus one per invocation
    max_iterations: int = 0
    converged: bool = True


@dataclass
class EvalTrace:
    lims: dict[str, LimRecord] = field(default_factory=dict)
    basic_applications: int = 0

    def records(self) -> list[LimRecord]:
        return [self.lims[p] for p in sorted(self.lims)]


def evaluate(t: Term, dom: DomainContract, x0):
    return evaluate_traced(t, dom, x0)[0]


def evaluate_traced(t: Term, dom: DomainContract, x0):
    trace = EvalTrace()
    try:
        return _Evaluator(dom, trace).run(t, x0, "phi"), trace
    except IterationLimit as e:
        e.trace = trace
        raise


class _Evaluator:
    def __init__(self, dom: DomainContract, trace: EvalTrace):
        self.dom = dom
        self.trace = trace
        self.hook = dom.invariant_hook or (lambda stage, value: None)

    def run(self, t: Term, x, path: str):
        if isinstance(t, Basic):
            self.trace.basic_applications += 1
            y = self.dom.eval_basic(t.symbol, x)
            if t.symbol.kind == "bid":
                self.hook(("bid", t.symbol.index), y)
            return y
        if isinstance(t, Seq):
            return self.run(t.second, self.run(t.first, x, path + ".0"), path + ".1")
        return self._lim(t, x, path)

    def _lim(self, t, x, path: str):
        up = isinstance(t, LimUp)
        rec = self.trace.lims.get(path)
        if rec is None:
            rec = self.trace.lims[path] = LimRecord(path, "up" if up else "down", t.tag)
        rec.invocations += 1
        body_path = path + (".up" if up else ".down")
        y = x
        for applications in range(1, self.dom.max_iterations + 1):
            nxt = self.run(t.body, y, body_path)
            self.hook(("step", rec.direction, path), (y, nxt))
            if t.tag is not None:
                self.hook(("iter", t.tag), nxt)
            if self.dom.stabilized(y, nxt):
                rec.iterations += applications - 1
                rec.max_iterations = max(rec.max_iterations, applications - 1)
                if t.tag is not None:
                    self.hook(("fixed", t.tag), nxt)
                return nxt
            y = nxt
        rec.converged = False
        log.debug("limit %s hit the iteration cap", path)
        raise IterationLimit(path, self.dom.max_iterations)
