import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from agct import corpus
from agct.cegar import abstract_mc
from agct.ir import as_networkx, enumerate_branches, parse_program, product
from agct.monitor import (MonitorError, ProductView, check_deterministic, lift_goals,
                          monitor_from_arg, monitor_to_dot, step_product)

from conftest import bounded_runs, motivating_monitor_graph, label_paths, random_program

_label_match = nx.algorithms.isomorphism.categorical_multiedge_match("label", None)


@pytest.fixture(scope="module")
def motivating_mc(motivating):
    out = abstract_mc(motivating, [], {"7#0"}, 10)
    return out, monitor_from_arg(out.arg)


def test_motivating_monitor_matches_hand_drawn(motivating_mc):
    out, m = motivating_mc
    assert len(m.locs) == 16 and len(m.edges) == 18
    assert nx.is_isomorphic(as_networkx(m), motivating_monitor_graph(), edge_match=_label_match)


def test_dot_dashes_redirected_edges(motivating_mc):
    out, m = motivating_mc
    assert monitor_to_dot(m, out.arg).count("style=dashed") == len(out.arg.subsume)


def test_check_deterministic_rejects_duplicate_labels(motivating):
    p = motivating
    bad = p.__class__(p.vars, p.locs, p.init,
                      tuple(e.__class__(e.id, e.src, e.cmd, e.dst, "x") for e in p.edges if e.src == 2))
    with pytest.raises(MonitorError):
        check_deterministic(bad)


def test_on_the_fly_equals_explicit(motivating, motivating_mc):
    _, m = motivating_mc
    lazy = ProductView(motivating, [m]).materialize()
    eager = product(motivating, m)
    assert set(lazy.locs) == set(eager.locs)
    assert {(e.id, e.src, e.dst, e.label) for e in lazy.edges} == \
        {(e.id, e.src, e.dst, e.label) for e in eager.edges}


def test_step_product_blocks_goal_after_failed_check(motivating, motivating_mc):
    _, m = motivating_mc
    view = ProductView(motivating, [m])
    c = view.init
    for lab in ["1#0", "2#0", "3#0", "4#0", "5#0", "6#0"] + ["2#0", "3#0", "4#1", "6#0"] * 29 + ["2#1"]:
        c = step_product(view, c, lab)
        assert c is not None
    assert step_product(view, c, "7#0") is None
    assert step_product(view, c, "7#1") is not None
    with pytest.raises(ValueError):
        view.step(c, "4#0")


def test_lift_goals(motivating, motivating_mc):
    _, m = motivating_mc
    lifted = lift_goals({"7#0"}, product(motivating, m))
    assert lifted.projection == {"(7,s3)#0": "7#0"}
    assert lifted.originals() == {"7#0"}
    lifted.drop_projection("7#0")
    assert len(lifted) == 0


def test_chain_program_monitor_is_isomorphic():
    p = parse_program("var x; var y = 0; x = input(); y = x + 1; x = y * 2;")
    out = abstract_mc(p, [], set(), 50)
    assert not out.arg.subsume
    m = monitor_from_arg(out.arg)
    assert nx.is_isomorphic(as_networkx(m), as_networkx(p), edge_match=_label_match)


def _monitors(p):
    out = abstract_mc(p, [], enumerate_branches(p), 400)
    return out, monitor_from_arg(out.arg)


@given(st.integers(0, 3_000))
@settings(max_examples=30, deadline=None)
def test_monitor_deterministic_and_sized(seed):
    p = random_program(seed)
    out, m = _monitors(p)
    check_deterministic(m)
    assert len(m.locs) == len(out.arg.live())
    lazy = ProductView(p, [m]).materialize()
    eager = product(p, m)
    assert set(lazy.locs) == set(eager.locs) and {e.id for e in lazy.edges} == {e.id for e in eager.edges}


@given(st.integers(0, 3_000))
@settings(max_examples=25, deadline=None)
def test_product_keeps_concrete_runs(seed):
    p = random_program(seed, max_inputs=2)
    _, m = _monitors(p)
    view = ProductView(p, [m])
    for _, path in itertools.islice(bounded_runs(p, range(-3, 4), 14), 300):
        c = view.init
        for e in path:
            c = view.step(c, e.label)
            assert c is not None


@given(st.integers(0, 3_000))
@settings(max_examples=20, deadline=None)
def test_iterated_products_shrink(seed):
    p = random_program(seed)
    _, m1 = _monitors(p)
    out2 = abstract_mc(p, [], enumerate_branches(p), 40)
    m2 = monitor_from_arg(out2.arg)
    v1 = ProductView(p, [m1])
    k = 12
    base = label_paths(p, k)
    one = label_paths(v1.materialize(), k)
    two = label_paths(v1.extend(m2).materialize(), k)
    assert two <= one <= base


def test_motivating_product_prunes_goal_paths(motivating, motivating_mc):
    _, m = motivating_mc
    prod = ProductView(motivating, [m]).materialize()
    k = 14
    assert ("1#0", "2#0", "3#0", "4#0", "5#0", "6#0", "2#1", "7#0") in label_paths(motivating, k)
    assert ("1#0", "2#0", "3#0", "4#0", "5#0", "6#0", "2#1", "7#0") not in label_paths(prod, k)


def test_corpus_monitors_deterministic():
    for name in corpus.NAMES:
        p = corpus.load(name, bound=4)
        _, m = _monitors(p)
        check_deterministic(m)
