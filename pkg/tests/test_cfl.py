from hypothesis import given, settings, strategies as st

from oracles import stack_reachable
from vflight.cfl import CLOSE, EPS, OPEN, CflSearch, cfl_reachable_from, dyck_label
from vflight.ci import BfsSearch
from vflight.frontend import parse_program
from vflight.fuzz import FuzzConfig, random_program
from vflight.pdg import build_pdg

MISMATCH = """func main() {
  x = null
  a = call id(x)
  y = call mk()
  b = call id(y)
  deref b
}
func id(v) {
  return v
}
func mk() {
  z = call fresh()
  return z
}
func fresh() {
  w = null
  return w
}
"""


def test_labels():
    assert dyck_label(None) == (EPS, 0)
    assert dyck_label(("call", 4)) == (OPEN, 4)
    assert dyck_label(("return", 4)) == (CLOSE, 4)
    assert dyck_label(("call", 4), "backward") == (CLOSE, 4)
    assert dyck_label(("return", 4), "backward") == (OPEN, 4)


def test_rejects_mismatched_call_return():
    g = build_pdg(parse_program(MISMATCH))
    x = g.by_name("NULL@2")
    cfl = {g.name(v) for v in cfl_reachable_from(g, [x])}
    bfs = {g.name(v) for v in BfsSearch(g).add([x]).visited}
    # entering id at line 3 and leaving at line 5 is not a valid path
    assert "b@5" in bfs and "*b@6" in bfs
    assert "b@5" not in cfl and "*b@6" not in cfl
    assert "a@3" in cfl


def test_backward_mismatch():
    g = build_pdg(parse_program(MISMATCH))
    sink = g.by_name("*b@6")
    back = {g.name(v) for v in cfl_reachable_from(g, [sink], "backward")}
    assert "NULL@16" in back
    assert "NULL@2" not in back


def test_unmatched_returns_allowed():
    g = build_pdg(parse_program(MISMATCH))
    w = g.by_name("NULL@16")
    out = {g.name(v) for v in cfl_reachable_from(g, [w])}
    assert {"z@12", "y@4", "b@5", "*b@6"} <= out


def test_incremental_add_shares_state():
    g = build_pdg(parse_program(MISMATCH))
    s = CflSearch(g)
    s.add([g.by_name("NULL@2")])
    first = set(s.visited)
    s.add([g.by_name("NULL@16")])
    assert first <= s.visited
    assert s.visited == cfl_reachable_from(g, [g.by_name("NULL@2"), g.by_name("NULL@16")])


ACYCLIC = FuzzConfig(recursion_rate=0.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["forward", "backward"]))
def test_matches_stack_enumeration(seed, direction):
    g = build_pdg(random_program(seed, ACYCLIC))
    starts = sorted(g.role("src") if direction == "forward" else g.role("sink"))
    assert cfl_reachable_from(g, starts, direction) == stack_reachable(g, starts, direction)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["forward", "backward"]))
def test_subset_of_bfs(seed, direction):
    g = build_pdg(random_program(seed))
    starts = sorted(g.role("src") if direction == "forward" else g.role("sink"))
    cfl = CflSearch(g, direction).add(starts)
    bfs = BfsSearch(g, direction).add(starts)
    assert cfl.visited <= bfs.visited
    assert cfl.edges <= bfs.edges
