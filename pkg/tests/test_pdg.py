import json

import pydot
import pytest
from hypothesis import given, settings, strategies as st

from conftest import corpus_text
from vflight.frontend import parse_program
from vflight.fuzz import random_program
from vflight.pdg import (
    ACTUAL_PARAM, ACTUAL_RETURN, DEREF, FORMAL_PARAM, FORMAL_RETURN, GUARD, NULL_CONST,
    PdgError, build_pdg, export_dot, export_json, import_json,
)


def edges_by_name(g):
    out = set()
    for e in g.data_edges:
        out.add((g.name(e.src), g.name(e.dst), tuple(g.name(x) for x in e.guards), e.tag))
    return out


def test_fig1_vertices(fig1):
    g = fig1.pdg
    kinds = {v.name: v.kind for v in g.vertices}
    assert kinds["NULL@19"] == NULL_CONST
    assert kinds["*a@9"] == kinds["*c@8"] == kinds["*p@13"] == DEREF
    assert kinds["[e!=null]@7"] == kinds["[p==null]@12"] == GUARD
    assert kinds["p@11"] == kinds["c@1"] == FORMAL_PARAM
    assert kinds["m@20"] == kinds["f@16"] == FORMAL_RETURN
    assert kinds["a@5"] == kinds["b@6"] == ACTUAL_PARAM
    assert kinds["a@2"] == kinds["e@6"] == ACTUAL_RETURN


def test_fig1_edges(fig1):
    g = fig1.pdg
    assert edges_by_name(g) == {
        ("a@2", "a@5", (), None),
        ("b@3", "b@6", (), None),
        ("e@6", "[e!=null]@7", (), None),
        ("c@1", "*c@8", ("[e!=null]@7",), None),
        ("a@2", "*a@9", (), None),
        ("p@11", "[p==null]@12", (), None),
        ("p@11", "*p@13", ("[p==null]@12",), None),
        ("f@15", "f@16", (), None),
        ("NULL@19", "m@20", (), None),
        ("m@20", "a@2", (), ("return", 2)),
        ("m@20", "b@3", (), ("return", 3)),
        ("a@5", "p@11", (), ("call", 5)),
        ("b@6", "f@15", (), ("call", 6)),
        ("f@16", "e@6", (), ("return", 6)),
    }


def test_fig1_roles(fig1):
    g = fig1.pdg
    names = lambda r, fn=None: sorted(g.name(v) for v in g.role(r, fn))  # noqa: E731
    assert names("src") == ["NULL@19"]
    assert names("sink") == ["*a@9", "*c@8", "*p@13"]
    assert names("fp", "foo") == ["c@1"]
    assert names("fr", "qux") == ["m@20"]
    assert names("ar", "foo") == ["a@2", "b@3", "e@6"]
    assert names("ap", "foo") == ["a@5", "b@6"]
    assert names("g") == ["[e!=null]@7", "[p==null]@12"]


def test_fig1_control_edges(fig1):
    g = fig1.pdg
    ctrl = {(g.name(a), g.name(b)) for a, b in g.control_edges}
    assert ctrl == {("[e!=null]@7", "*c@8"), ("[p==null]@12", "*p@13")}


def test_three_vertex_chain():
    g = build_pdg(parse_program("func f() {\n  x = null\n  y = x\n  deref y\n}"))
    assert [v.name for v in g.vertices] == ["NULL@2", "y@3", "*y@4"]
    assert edges_by_name(g) == {("NULL@2", "y@3", (), None), ("y@3", "*y@4", (), None)}


def test_non_null_condition_has_no_incoming_flow():
    g = build_pdg(parse_program("func f(a) {\n  if (a < 3) {\n    deref a }\n}"))
    guard = g.by_name("[a<3]@2")
    assert g.vertex(guard).opaque
    assert g.pred(guard) == []
    assert [g.name(x) for e in g.pred(g.by_name("*a@3")) for x in e.guards] == ["[a<3]@2"]


def test_nested_guards_outermost_first():
    g = build_pdg(parse_program(corpus_text("nested_guard.vf")))
    (e,) = g.pred(g.by_name("*x@6"))
    assert [g.name(x) for x in e.guards] == ["[y==null]@4", "[z==null]@5"]


def test_generic_checker_globs():
    g = build_pdg(parse_program(corpus_text("fig1.vf")), sources=["c@*"], sinks=["[*]c@*"])
    assert [g.name(v) for v in g.role("src")] == ["c@1"]
    assert [g.name(v) for v in g.role("sink")] == ["*c@8"]


def test_dot_parses(fig1):
    text = export_dot(fig1.pdg)
    (graph,) = pydot.graph_from_dot_data(text)
    assert len(graph.get_nodes()) == len(fig1.pdg.vertices)
    assert len(graph.get_edges()) == len(fig1.pdg.data_edges) + len(fig1.pdg.control_edges)
    labels = {e.get_label().strip('"') for e in graph.get_edges() if e.get_label()}
    assert {"[e!=null]@7", "[p==null]@12", "[5", "]2"} <= labels
    shapes = {n.get_label().strip('"'): n.get_shape() for n in graph.get_nodes() if n.get_label()}
    assert shapes["[p==null]@12"] == "diamond"
    assert shapes["NULL@19"] == "box"


def test_empty_dot_and_json():
    g = build_pdg(parse_program(""))
    assert export_dot(g) == "digraph pdg {\n}\n"
    assert import_json(export_json(g)).vertices == []


def test_json_round_trip(fig1):
    text = export_json(fig1.pdg)
    back = import_json(text)
    assert back.vertices == fig1.pdg.vertices
    assert back.data_edges == fig1.pdg.data_edges
    assert export_json(back) == text


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_json_round_trip_fuzz(seed):
    g = build_pdg(random_program(seed))
    assert export_json(import_json(export_json(g))) == export_json(g)


def _mutate(text, fn):
    doc = json.loads(text)
    fn(doc)
    return json.dumps(doc)


@pytest.mark.parametrize("bad", [
    "not json",
    "[]",
    "{}",
    lambda d: d["data_edges"].append({"src": 0, "dst": 999, "guards": [], "tag": None}),
    lambda d: d["data_edges"].append({"src": 0, "dst": 1, "guards": [0], "tag": None}),
    lambda d: d["vertices"][0].update(kind="blob"),
    lambda d: d["vertices"][0].update(id=7),
    lambda d: d["control_edges"].append([0, -1]),
    lambda d: d["roles"].update(weird={}),
    lambda d: d["vertices"][0].pop("name"),
])
def test_import_rejects(fig1, bad):
    text = bad if isinstance(bad, str) else _mutate(export_json(fig1.pdg), bad)
    with pytest.raises(PdgError):
        import_json(text)


def test_edges_respect_ownership():
    g = build_pdg(random_program(11))
    for e in g.data_edges:
        same = g.vertex(e.src).owner == g.vertex(e.dst).owner
        assert same == (e.tag is None)
