import random

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS, corpus_text
from vflight.frontend import (
    DuplicateFunction, ParseError, SSAError, UnresolvedCallee,
    build_call_graph, parse_program, print_program, tarjan_scc,
)
from vflight.fuzz import FuzzConfig, random_program, statement_count


def test_fig1_shape():
    p = parse_program(corpus_text("fig1.vf"))
    assert [f.name for f in p.functions] == ["foo", "bar", "baz", "qux"]
    assert p.function("foo").params == ("c",)
    assert [c.line for c in p.function("foo").calls()] == [2, 3, 5, 6]
    assert p.function("qux").ret == "m"
    assert p.roots == ("foo",)


def test_fig1_layers():
    cg = build_call_graph(parse_program(corpus_text("fig1.vf")))
    assert cg.layers == ((("bar",), ("baz",), ("qux",)), (("foo",),))
    assert cg.bottom_up() == ["bar", "baz", "qux", "foo"]
    assert not any(cg.is_recursive(c) for c in cg.sccs)


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.vf")), ids=lambda p: p.name)
def test_corpus_round_trip(path):
    p = parse_program(path.read_text())
    assert parse_program(print_program(p)) == p


def test_empty_program():
    p = parse_program("")
    assert p.functions == ()
    assert build_call_graph(p).layers == ()


@pytest.mark.parametrize("src, err", [
    ("func f( { }", ParseError),
    ("func f() { x = $ }", ParseError),
    ("func f() {\n  x = null\n  x = null\n}", SSAError),
    ("func f() {\n  deref y\n}", SSAError),
    ("func f() {\n  x = call g()\n}", UnresolvedCallee),
    ("func f() {\n}\nfunc f() {\n}", DuplicateFunction),
    ("func f(a) {\n  return a\n}\nfunc g() {\n  x = null\n  y = call f(x, x)\n}", ParseError),
    ("func f() {\n  x = null\n}\nfunc g() {\n  y = call f()\n}", ParseError),
    ("func f(a) {\n  x = phi(a, a)\n}", SSAError),
])
def test_rejects(src, err):
    with pytest.raises(err):
        parse_program(src)


def test_block_scoping():
    # a variable defined in the then block is not visible after the if
    src = "func f(a) {\n  if (a == null) {\n    b = a }\n  deref b\n}"
    with pytest.raises(SSAError):
        parse_program(src)


def test_phi_reads_arms_from_their_branches():
    ok = "func f(a) {\n  if (a == null) {\n    b = a\n  } else {\n    c = a }\n  r = phi(b, c)\n  deref r\n}"
    parse_program(ok)
    swapped = ok.replace("phi(b, c)", "phi(c, b)")
    with pytest.raises(SSAError):
        parse_program(swapped)


def test_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse_program("func f() {\n  x = null\n  deref x;\n}")
    assert info.value.line == 3


def _random_graph(seed):
    rng = random.Random(seed)
    n = rng.randint(0, 25)
    nodes = [f"n{i}" for i in range(n)]
    succ = {v: sorted({rng.choice(nodes) for _ in range(rng.randint(0, 3))}) for v in nodes}
    return nodes, succ


@pytest.mark.parametrize("seed", range(60))
def test_tarjan_matches_networkx(seed):
    nodes, succ = _random_graph(seed)
    ours = tarjan_scc(nodes, succ)
    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    g.add_edges_from((u, v) for u, vs in succ.items() for v in vs)
    assert {frozenset(c) for c in ours} == {frozenset(c) for c in nx.strongly_connected_components(g)}
    # reverse topological order: every edge goes to the same or an earlier component
    pos = {v: i for i, c in enumerate(ours) for v in c}
    assert all(pos[v] <= pos[u] for u, vs in succ.items() for v in vs)


def test_tarjan_deep_chain_is_iterative():
    n = 5000
    nodes = [str(i) for i in range(n)]
    succ = {str(i): [str(i + 1)] for i in range(n - 1)}
    succ[str(n - 1)] = ["0"]
    assert len(tarjan_scc(nodes, succ)) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_fuzz_programs_round_trip(seed):
    cfg = FuzzConfig()
    p = random_program(seed, cfg)
    assert len(p.functions) <= cfg.max_funcs
    assert statement_count(p) <= cfg.max_stmts
    assert parse_program(print_program(p)) == p


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_layers_respect_calls(seed):
    p = random_program(seed)
    cg = build_call_graph(p)
    for e in cg.edges:
        if cg.scc_of(e.caller) != cg.scc_of(e.callee):
            assert cg.layer_of(e.callee) < cg.layer_of(e.caller)
