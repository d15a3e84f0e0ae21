import random

import pytest
from hypothesis import given, settings, strategies as st

from treemeasure.fixtures import a1
from treemeasure.powerdomain import d_interpretation, point_mass, tv_distance
from treemeasure.unary_mu import (DELTA, Basic, Bid, Cut, DomainContract, IterationLimit,
                                  LimDown, LimUp, Seq, Symbol, basic_symbols, build_phi,
                                  evaluate, evaluate_traced, format_term, seq, term_size)

H = Symbol("h")
H1, H2 = Symbol("h", 1), Symbol("h", 2)


def contract(fn, cap=10**6):
    return DomainContract(eval_basic=lambda s, x: fn(s, x), stabilized=lambda a, b: a == b,
                          max_iterations=cap)


def test_build_phi_d2():
    phi = build_phi(2)
    expected = Seq(Basic(Bid(1)), LimUp(
        seq(LimUp(Basic(DELTA)), Seq(Basic(Bid(2)), LimDown(Basic(DELTA))), Basic(Cut(1)))))
    assert _strip_tags(phi) == expected
    assert format_term(phi) == "Bid1 ; up(up(Delta) ; Bid2 ; down(Delta) ; Cut1)"


def _strip_tags(t):
    if isinstance(t, Basic):
        return t
    if isinstance(t, Seq):
        return Seq(_strip_tags(t.first), _strip_tags(t.second))
    return type(t)(_strip_tags(t.body))


def test_build_phi_d4_symbol_order():
    syms = [str(s) for s in basic_symbols(build_phi(4))]
    assert syms == ["Bid1", "Delta", "Bid2", "Delta", "Bid3", "Delta", "Bid4", "Delta",
                    "Cut3", "Cut2", "Cut1"]
    assert format_term(build_phi(4)).count("down(Delta)") == 2


def test_innermost_is_bid_d_then_down_delta():
    def find(t):
        if isinstance(t, Seq):
            if t.first == Basic(Bid(4)):
                return t
            return find(t.first) or find(t.second)
        if isinstance(t, (LimUp, LimDown)):
            return find(t.body)
        return None

    inner = find(build_phi(4))
    assert isinstance(inner.second, LimDown) and inner.second.body == Basic(DELTA)


def test_lim_directions_follow_parity():
    def walk(t, found):
        if isinstance(t, (LimUp, LimDown)):
            found.append((t.tag, isinstance(t, LimUp)))
            walk(t.body, found)
        elif isinstance(t, Seq):
            walk(t.first, found)
            walk(t.second, found)
        return found

    for tag, up in walk(build_phi(6), []):
        assert up == (tag[1] % 2 == 1)


@pytest.mark.parametrize("d", [0, 1, 3, 5, -2])
def test_build_phi_rejects(d):
    with pytest.raises(ValueError):
        build_phi(d)


def test_term_size():
    assert term_size(build_phi(2)) == 5
    assert term_size(build_phi(4)) == 11
    assert term_size(Basic(DELTA)) == 1
    for d in range(2, 21, 2):
        assert term_size(build_phi(d)) == 3 * d - 1


def test_two_point_lattice():
    assert evaluate(LimUp(Basic(H)), contract(lambda s, x: x), 0) == 0
    assert evaluate(LimUp(Basic(H)), contract(lambda s, x: 1), 0) == 1
    assert evaluate(LimDown(Basic(H)), contract(lambda s, x: 0), 1) == 0


def test_composition_order():
    calls = []

    def fn(s, x):
        calls.append(s.index)
        return x * 10 + s.index

    assert evaluate(Seq(Basic(H1), Basic(H2)), contract(fn), 0) == 12
    assert calls == [1, 2]


def test_trace_counts():
    _, tr = evaluate_traced(LimUp(Basic(H)), contract(lambda s, x: 1), 0)
    (rec,) = tr.records()
    assert rec.iterations == 1 and rec.converged and rec.invocations == 1
    _, tr = evaluate_traced(LimUp(Basic(H)), contract(lambda s, x: x), 0)
    assert tr.records()[0].iterations == 0
    assert tr.basic_applications == 1


def test_iteration_limit_reports_path():
    t = Seq(Basic(H), LimUp(Basic(H)))
    with pytest.raises(IterationLimit) as err:
        evaluate(t, contract(lambda s, x: x + 1, cap=5), 0)
    assert err.value.path == "phi.1"
    assert err.value.cap == 5
    rec = err.value.trace.lims["phi.1"]
    assert not rec.converged


def test_hooks_fire():
    seen = []
    dom = DomainContract(eval_basic=lambda s, x: min(x + 1, 3), stabilized=lambda a, b: a == b,
                         invariant_hook=lambda stage, v: seen.append(stage[0]))
    evaluate(LimUp(Basic(Bid(1)), tag=("psi", 1)), dom, 0)
    assert seen.count("bid") == 4
    assert seen.count("iter") == 4 and seen.count("step") == 4 and seen.count("fixed") == 1


def test_a1_run_all_lims_converge():
    interp = d_interpretation(a1())
    out, tr = evaluate_traced(build_phi(2), interp.contract, point_mass(0))
    assert all(r.converged for r in tr.records())
    assert tv_distance(out, point_mass(0b11)) == 0


def _monotone_map(rng, g):
    """Random monotone map on subsets of {0..g-1}: each output bit is a
    union of a few random conjunctions."""
    terms = [[sum(1 << b for b in rng.sample(range(g), rng.randint(1, min(3, g))))
              for _ in range(rng.randint(0, 3))] for _ in range(g)]

    def f(x):
        return sum(1 << j for j, ts in enumerate(terms) if any(x & m == m for m in ts))
    return f


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10**6), st.data())
def test_lim_is_least_fixed_point_above(g, seed, data):
    rng = random.Random(seed)
    f = _monotone_map(rng, g)
    x = data.draw(st.integers(0, (1 << g) - 1))
    if x & ~f(x):
        x = 0  # iteration ascends only from post-fixed points
    y = evaluate(LimUp(Basic(H)), contract(lambda s, v: f(v)), x)
    # lattices of up to 256 elements: enumerate the fixed points above x
    above = [z for z in range(1 << g) if f(z) == z and z & x == x]
    assert f(y) == y and y in above
    assert all(y & ~z == 0 for z in above)
