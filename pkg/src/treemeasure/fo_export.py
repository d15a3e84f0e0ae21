"""Exact-mode export: the measure as an SMT-LIB 2 script over real arithmetic.

Every distribution-valued subterm ``t`` of Phi_1 becomes a predicate
``(t x y)`` over two real vectors indexed by RSets, true iff ``y`` is the
value of ``t`` at ``x``:

* basic symbols are polynomial equations (bilinear for Delta, linear for
  Bid/Cut),
* ``Seq(f, g)`` is ``exists z. f(x, z) and g(z, y)``,
* ``LimUp(f)`` says ``y`` is a fixed point of ``f`` above ``x`` that lies
  below every other such fixed point; ``LimDown`` is dual.

The order on distributions is spelled out over all upward-closed families,
so the script grows with the Dedekind number of the RSet lattice width.
"""

from __future__ import annotations

import itertools
import os
import re
import subprocess
import tempfile
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from .automaton import Automaton
from .powerdomain import upsets
from .subset_lattice import big_delta_a, bid_r, cut_r
from .unary_mu import Basic, LimDown, LimUp, Seq, Symbol, Term, build_phi

MAX_EXPORT_WIDTH = 5
RELATIONS = (">", ">=", "<", "<=", "=")


class ExportError(ValueError):
    pass


class SmtSyntaxError(ValueError):
    pass


def _num(c: Fraction) -> str:
    if c < 0:
        return f"(- {_num(-c)})"
    if c.denominator == 1:
        return str(c.numerator)
    return f"(/ {c.numerator} {c.denominator})"


def _sum(terms: list[str]) -> str:
    if not terms:
        return "0"
    return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"


def _and(parts: list[str]) -> str:
    if not parts:
        return "true"
    return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"


class _Builder:
    def __init__(self, aut: Automaton):
        if aut.width > MAX_EXPORT_WIDTH:
            raise ExportError(
                f"|Q|*d = {aut.width} exceeds {MAX_EXPORT_WIDTH}: the order encoding "
                f"enumerates all upward-closed families of a 2^{aut.width}-element "
                "lattice, which is infeasible")
        self.aut = aut
        self.n = 1 << aut.width
        self.lines: list[str] = []
        self.basics: dict[Symbol, str] = {}
        self.bound = 0  # fresh-variable counter for quantified vectors

    def params(self, *prefixes: str) -> str:
        return " ".join(f"({p}{i} Real)" for p in prefixes for i in range(self.n))

    def vec(self, prefix: str) -> str:
        return " ".join(f"{prefix}{i}" for i in range(self.n))

    def fresh(self, base: str) -> str:
        self.bound += 1
        return f"{base}{self.bound}_"

    def header(self) -> None:
        n = self.n
        self.lines.append("(set-logic NRA)")
        simplex = [f"(>= v{i} 0)" for i in range(n)]
        simplex.append(f"(= {_sum([f'v{i}' for i in range(n)])} 1)")
        self.lines.append(f"(define-fun simplex ({self.params('v')}) Bool {_and(simplex)})")
        rows = []
        for row in upsets(self.aut.width):
            members = [i for i in range(n) if row[i]]
            if not members or len(members) == n:
                continue  # trivial on the simplex
            rows.append(f"(<= {_sum([f'a{i}' for i in members])} "
                        f"{_sum([f'b{i}' for i in members])})")
        self.lines.append(f"(define-fun leq ({self.params('a', 'b')}) Bool {_and(rows)})")

    def basic(self, sym: Symbol) -> str:
        if sym in self.basics:
            return self.basics[sym]
        aut, n = self.aut, self.n
        name = "delta" if sym.kind == "delta" else f"{sym.kind}_{sym.index}"
        eqs = []
        if sym.kind == "delta":
            coeff: dict[int, dict[tuple[int, int], Fraction]] = defaultdict(dict)
            share = Fraction(1, len(aut.alphabet))
            for a in range(len(aut.alphabet)):
                for rl, rr in itertools.product(range(n), repeat=2):
                    out = big_delta_a(aut, a, rl, rr)
                    coeff[out][rl, rr] = coeff[out].get((rl, rr), 0) + share
            for r in range(n):
                terms = [f"(* {_num(c)} x{rl} x{rr})" if c != 1 else f"(* x{rl} x{rr})"
                         for (rl, rr), c in sorted(coeff[r].items())]
                eqs.append(f"(= y{r} {_sum(terms)})")
        else:
            fn = bid_r if sym.kind == "bid" else cut_r
            pre: dict[int, list[int]] = defaultdict(list)
            for r in range(n):
                pre[fn(aut, sym.index, r)].append(r)
            for r in range(n):
                eqs.append(f"(= y{r} {_sum([f'x{s}' for s in pre[r]])})")
        self.lines.append(f"(define-fun {name} ({self.params('x', 'y')}) Bool {_and(eqs)})")
        self.basics[sym] = name
        return name

    def term(self, t: Term, counter: list[int]) -> str:
        if isinstance(t, Basic):
            return self.basic(t.symbol)
        if isinstance(t, Seq):
            f = self.term(t.first, counter)
            g = self.term(t.second, counter)
            z = self.fresh("z")
            body = (f"(exists ({self.params(z)}) "
                    f"(and ({f} {self.vec('x')} {self.vec(z)}) ({g} {self.vec(z)} {self.vec('y')})))")
        else:
            f = self.term(t.body, counter)
            w = self.fresh("w")
            x, y, wv = self.vec("x"), self.vec("y"), self.vec(w)
            if isinstance(t, LimUp):
                near, far = f"(leq {x} {y})", f"(leq {y} {wv})"
                cand = f"(leq {x} {wv})"
            else:
                near, far = f"(leq {y} {x})", f"(leq {wv} {y})"
                cand = f"(leq {wv} {x})"
            body = (f"(and (simplex {y}) ({f} {y} {y}) {near} "
                    f"(forall ({self.params(w)}) "
                    f"(=> (and (simplex {wv}) ({f} {wv} {wv}) {cand}) {far})))")
        counter[0] += 1
        name = f"t{counter[0]}"
        self.lines.append(f"(define-fun {name} ({self.params('x', 'y')}) Bool {body})")
        return name

    def goal(self) -> None:
        aut, n = self.aut, self.n
        top = self.term(build_phi(aut.d), [0])
        for i in range(n):
            self.lines.append(f"(declare-const r{i} Real)")
        self.lines.append("(declare-const measure Real)")
        bottom = " ".join("1" if i == 0 else "0" for i in range(n))
        self.lines.append(f"(assert ({top} {bottom} {self.vec('r')}))")
        accept = [f"r{i}" for i in range(n) if (i >> aut.initial) & 1]
        self.lines.append(f"(assert (= measure {_sum(accept)}))")


def _script(aut: Automaton, extra: list[str], check_sat: bool) -> str:
    b = _Builder(aut)
    b.header()
    b.goal()
    b.lines.extend(extra)
    if check_sat:
        b.lines.append("(check-sat)")
    return "\n".join(b.lines) + "\n"


def export_measure(aut: Automaton, check_sat: bool = True) -> str:
    """Script declaring ``measure`` and constraining it to the language
    measure. Raises ``ExportError`` when ``|Q|*d`` is too large."""
    return _script(aut, [], check_sat)


def _as_fraction(q) -> Fraction:
    try:
        return Fraction(q)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ExportError(f"not a rational number: {q!r}") from None


def export_compare(aut: Automaton, q, relation: str = ">") -> str:
    """``export_measure`` plus ``(assert (relation measure q))``."""
    q = _as_fraction(q)
    if not 0 <= q <= 1:
        raise ExportError(f"q must lie in [0, 1], got {q}")
    if relation not in RELATIONS:
        raise ExportError(f"relation must be one of {' '.join(RELATIONS)}")
    return _script(aut, [f"(assert ({relation} measure {_num(q)}))"], True)


def export_distance(aut: Automaton, m, eps) -> str:
    """Script asserting ``|measure - m| > eps``; unsatisfiable iff the exact
    measure lies within ``eps`` of ``m``."""
    m, eps = _as_fraction(m), _as_fraction(eps)
    return _script(aut, [f"(assert (> (abs (- measure {_num(m)})) {_num(eps)}))"], True)


# -- reading scripts back ---------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_NUMERAL = re.compile(r"\d+(\.\d+)?\Z")
_BUILTINS = {"+", "-", "*", "/", "=", "<", "<=", ">", ">=", "and", "or", "not",
             "=>", "ite", "abs", "true", "false", "distinct", "xor"}
_COMMANDS = {"set-logic", "set-option", "set-info", "define-fun", "declare-const",
             "declare-fun", "assert", "check-sat", "get-model", "get-value", "exit"}


def parse_sexprs(text: str) -> list:
    """Top-level s-expressions as nested lists of string atoms."""
    stack: list[list] = [[]]
    for tok in _TOKEN.findall(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SmtSyntaxError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SmtSyntaxError(f"{len(stack) - 1} unclosed '('")
    return stack[0]


def _sorted_vars(decl, where: str) -> list[str]:
    if not isinstance(decl, list):
        raise SmtSyntaxError(f"{where}: expected a variable list")
    names = []
    for item in decl:
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], str)
                and item[1] in ("Real", "Bool", "Int")):
            raise SmtSyntaxError(f"{where}: malformed variable binding {item!r}")
        names.append(item[0])
    if len(set(names)) != len(names):
        raise SmtSyntaxError(f"{where}: variable bound twice")
    return names


def _check_expr(e, scope: set, funs: dict, where: str) -> None:
    if isinstance(e, str):
        if e in scope or e in funs or e in _BUILTINS or _NUMERAL.match(e):
            return
        raise SmtSyntaxError(f"{where}: {e} used before declaration")
    if not e:
        raise SmtSyntaxError(f"{where}: empty application")
    head = e[0]
    if head in ("exists", "forall"):
        if len(e) != 3:
            raise SmtSyntaxError(f"{where}: malformed quantifier")
        names = _sorted_vars(e[1], where)
        _check_expr(e[2], scope | set(names), funs, where)
        return
    if not isinstance(head, str):
        raise SmtSyntaxError(f"{where}: application head must be a symbol")
    if head in funs:
        if len(e) - 1 != funs[head]:
            raise SmtSyntaxError(f"{where}: {head} expects {funs[head]} arguments, got {len(e) - 1}")
    elif head not in _BUILTINS:
        raise SmtSyntaxError(f"{where}: {head} used before declaration")
    for arg in e[1:]:
        _check_expr(arg, scope, funs, where)


def validate_script(text: str) -> None:
    """Balanced parentheses, known commands, every symbol declared before
    use, every name declared once. Raises ``SmtSyntaxError``."""
    funs: dict[str, int] = {}
    consts: set[str] = set()
    for k, cmd in enumerate(parse_sexprs(text), start=1):
        where = f"command {k}"
        if not isinstance(cmd, list) or not cmd or cmd[0] not in _COMMANDS:
            raise SmtSyntaxError(f"{where}: unknown command {cmd!r}")
        head = cmd[0]
        if head in ("define-fun", "declare-const", "declare-fun"):
            name = cmd[1]
            if name in funs or name in consts or name in _BUILTINS:
                raise SmtSyntaxError(f"{where}: {name} declared twice")
        if head == "define-fun":
            if len(cmd) != 5:
                raise SmtSyntaxError(f"{where}: malformed define-fun")
            params = _sorted_vars(cmd[2], where)
            _check_expr(cmd[4], set(params) | consts, funs, where)
            funs[cmd[1]] = len(params)
        elif head == "declare-const":
            if len(cmd) != 3:
                raise SmtSyntaxError(f"{where}: malformed declare-const")
            consts.add(cmd[1])
        elif head == "declare-fun":
            funs[cmd[1]] = len(cmd[2])
        elif head == "assert":
            if len(cmd) != 2:
                raise SmtSyntaxError(f"{where}: assert takes one term")
            _check_expr(cmd[1], consts, funs, where)


@dataclass(frozen=True)
class FormulaStats:
    variables: int       # declared constants plus quantified variables
    alternation_depth: int  # quantifier blocks after prenexing, define-funs inlined
    functions: int
    size: int            # characters


def formula_stats(text: str) -> FormulaStats:
    cmds = parse_sexprs(text)
    bodies: dict[str, object] = {}
    variables = 0
    for cmd in cmds:
        if cmd[0] == "define-fun":
            bodies[cmd[1]] = cmd[4]
        elif cmd[0] == "declare-const" and cmd[1] != "measure":
            variables += 1

    def count_bound(e) -> int:
        if isinstance(e, str):
            return 0
        here = len(e[1]) if e and e[0] in ("exists", "forall") else 0
        return here + sum(count_bound(x) for x in e[1:] if isinstance(x, list))

    variables += sum(count_bound(b) for b in bodies.values())

    memo: dict[tuple[str, bool], dict[str, int]] = {}

    def blocks(e, pos: bool) -> dict[str, int]:
        # longest quantifier-block chain starting with E / A
        if isinstance(e, str):
            return {"E": 0, "A": 0}
        head = e[0]
        if head in ("exists", "forall"):
            inner = blocks(e[2], pos)
            k = "E" if (head == "exists") == pos else "A"
            other = "A" if k == "E" else "E"
            return {k: max(1, inner[k], inner[other] + 1), other: 0}
        if head == "not":
            return blocks(e[1], not pos)
        if head == "=>":
            parts = [blocks(e[1], not pos)] + [blocks(x, pos) for x in e[2:]]
        elif head in bodies:
            key = (head, pos)
            if key not in memo:
                memo[key] = blocks(bodies[head], pos)
            parts = [memo[key]]
        elif head in ("and", "or"):
            parts = [blocks(x, pos) for x in e[1:]]
        else:
            # ite / boolean = and friends: both polarities
            parts = [blocks(x, p) for x in e[1:] for p in (True, False)]
        return {k: max([p[k] for p in parts] + [0]) for k in ("E", "A")}

    depth = 0
    for cmd in cmds:
        if cmd[0] == "assert":
            depth = max(depth, max(blocks(cmd[1], True).values()))
    return FormulaStats(variables, depth, len(bodies), len(text))


def run_solver(solver: str, script: str, timeout: float = 60.0) -> str:
    """Run an external SMT solver on ``script`` and return ``sat``,
    ``unsat`` or ``unknown``. The script is passed as a file argument, which
    the common solvers accept."""
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as fh:
        fh.write(script)
        path = fh.name
    try:
        proc = subprocess.run([solver, path], capture_output=True, text=True,
                              timeout=timeout)
    except subprocess.TimeoutExpired:
        return "unknown"
    finally:
        os.unlink(path)
    for line in proc.stdout.splitlines():
        line = line.strip()
        if line in ("sat", "unsat", "unknown"):
            return line
    return "unknown"
