"""Whole-program dependence graph with guard vertices and callsite tags.

Vertex names follow the ``v@line`` convention: a definition or use of ``v``
at source line ``line``.  Null constants are ``NULL@line``, dereference sinks
``*v@line`` and guards ``[v!=null]@line`` (the else side carries the flipped
operator).
"""
from __future__ import annotations

import fnmatch
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .frontend import (
    Call,
    CallGraph,
    Condition,
    Copy,
    Deref,
    FunctionIR,
    If,
    NullConst,
    Phi,
    ProgramIR,
    Return,
    Stmt,
)

VALUE = "value"
GUARD = "guard"
NULL_CONST = "null-const"
DEREF = "deref-sink"
FORMAL_PARAM = "formal-param"
FORMAL_RETURN = "formal-return"
ACTUAL_PARAM = "actual-param"
ACTUAL_RETURN = "actual-return"
OPERATOR = "operator"
VERTEX_KINDS = (VALUE, GUARD, NULL_CONST, DEREF, FORMAL_PARAM, FORMAL_RETURN, ACTUAL_PARAM, ACTUAL_RETURN, OPERATOR)

ROLES = ("src", "sink", "fp", "fr", "ap", "ar", "g")


class PdgError(Exception):
    pass


@dataclass(frozen=True)
class Vertex:
    id: int
    name: str
    kind: str
    owner: str
    line: int
    var: str = ""
    # guard vertices only
    op: str = ""
    rhs: str = ""

    @property
    def is_guard(self) -> bool:
        return self.kind == GUARD

    @property
    def opaque(self) -> bool:
        return self.kind == GUARD and not Condition(self.var, self.op, self.rhs).is_null_test


@dataclass(frozen=True)
class DataEdge:
    """A value flow ``src -> dst``.

    ``guards`` lists every guard that qualifies the flow, outermost first; an
    empty tuple is the label *true*.  ``tag`` is ``("call", k)`` or
    ``("return", k)`` on edges that cross into or out of a callee at line k.
    """

    src: int
    dst: int
    guards: tuple[int, ...] = ()
    tag: Optional[tuple[str, int]] = None


@dataclass
class Pdg:
    vertices: list[Vertex] = field(default_factory=list)
    data_edges: list[DataEdge] = field(default_factory=list)
    control_edges: list[tuple[int, int]] = field(default_factory=list)
    roles: dict[str, dict[str, tuple[int, ...]]] = field(default_factory=dict)
    out_edges: dict[int, list[int]] = field(default_factory=lambda: defaultdict(list))
    in_edges: dict[int, list[int]] = field(default_factory=lambda: defaultdict(list))

    def __post_init__(self) -> None:
        for r in ROLES:
            self.roles.setdefault(r, {})
        self.reindex()

    # -- construction helpers --------------------------------------------

    def reindex(self) -> None:
        self.out_edges = defaultdict(list)
        self.in_edges = defaultdict(list)
        for i, e in enumerate(self.data_edges):
            self.out_edges[e.src].append(i)
            self.in_edges[e.dst].append(i)

    def add_vertex(self, name: str, kind: str, owner: str, line: int, **extra: str) -> int:
        v = Vertex(len(self.vertices), name, kind, owner, line, **extra)
        self.vertices.append(v)
        return v.id

    def add_edge(self, e: DataEdge) -> None:
        self.out_edges[e.src].append(len(self.data_edges))
        self.in_edges[e.dst].append(len(self.data_edges))
        self.data_edges.append(e)

    # -- queries ----------------------------------------------------------

    def vertex(self, vid: int) -> Vertex:
        return self.vertices[vid]

    def name(self, vid: int) -> str:
        return self.vertices[vid].name

    def by_name(self, name: str) -> int:
        for v in self.vertices:
            if v.name == name:
                return v.id
        raise KeyError(name)

    def succ(self, vid: int) -> list[DataEdge]:
        return [self.data_edges[i] for i in self.out_edges.get(vid, ())]

    def pred(self, vid: int) -> list[DataEdge]:
        return [self.data_edges[i] for i in self.in_edges.get(vid, ())]

    def role(self, role: str, fn: Optional[str] = None) -> frozenset[int]:
        table = self.roles[role]
        if fn is not None:
            return frozenset(table.get(fn, ()))
        return frozenset(v for ids in table.values() for v in ids)

    @property
    def guards(self) -> frozenset[int]:
        return frozenset(v.id for v in self.vertices if v.kind == GUARD)

    @property
    def heads(self) -> frozenset[int]:
        """V_h: formal parameters, actual returns and sources."""
        return self.role("fp") | self.role("ar") | self.role("src")

    @property
    def tails(self) -> frozenset[int]:
        """V_t: actual parameters, formal returns, sinks and guards."""
        return self.role("ap") | self.role("fr") | self.role("sink") | self.guards

    def functions(self) -> list[str]:
        seen: dict[str, None] = {}
        for v in self.vertices:
            seen.setdefault(v.owner, None)
        return list(seen)

    def formal_params(self, fn: str) -> list[int]:
        return sorted(self.roles["fp"].get(fn, ()))

    def formal_return(self, fn: str) -> Optional[int]:
        ids = self.roles["fr"].get(fn, ())
        return ids[0] if ids else None


# --------------------------------------------------------------------------
# construction


class _FunctionBuilder:
    def __init__(self, g: Pdg, fn: FunctionIR):
        self.g = g
        self.fn = fn
        self.defs: dict[str, int] = {}
        self.def_sides: dict[str, tuple[tuple[int, bool], ...]] = {}
        self.guard_of: dict[tuple[int, bool], int] = {}
        self.conds: dict[int, tuple[Condition, tuple[tuple[int, bool], ...]]] = {}
        self.roles: dict[str, list[int]] = defaultdict(list)
        self.calls: list[tuple[Call, list[int], Optional[int]]] = []

    def vertex(self, name: str, kind: str, line: int, var: str, sides, **extra: str) -> int:
        vid = self.g.add_vertex(name, kind, self.fn.name, line, var=var, **extra)
        if sides:
            self.g.control_edges.append((self.guard(sides[-1]), vid))
        return vid

    def guard(self, side: tuple[int, bool]) -> int:
        if side in self.guard_of:
            return self.guard_of[side]
        line, then = side
        cond, cond_sides = self.conds[line]
        shown = cond if then else cond.negated()
        op_text = shown.op
        name = f"[{shown.var}{op_text}{shown.rhs}]@{line}"
        vid = self.g.add_vertex(name, GUARD, self.fn.name, line, var=shown.var, op=shown.op, rhs=shown.rhs)
        self.guard_of[side] = vid
        self.roles["g"].append(vid)
        if cond_sides:
            self.g.control_edges.append((self.guard(cond_sides[-1]), vid))
        if shown.is_null_test:
            self.flow(shown.var, vid, cond_sides)
        return vid

    def flow(self, var: str, dst: int, use_sides: tuple[tuple[int, bool], ...]) -> None:
        src = self.defs[var]
        inherited = self.def_sides[var]
        label = tuple(self.guard(s) for s in use_sides[len(inherited):])
        self.g.add_edge(DataEdge(src, dst, label))

    def define(self, var: str, vid: int, sides) -> None:
        self.defs[var] = vid
        self.def_sides[var] = sides

    def run(self) -> None:
        for p in self.fn.params:
            vid = self.vertex(f"{p}@{self.fn.line}", FORMAL_PARAM, self.fn.line, p, ())
            self.roles["fp"].append(vid)
            self.define(p, vid, ())
        self.block(self.fn.body, ())

    def block(self, body: tuple[Stmt, ...], sides: tuple[tuple[int, bool], ...]) -> None:
        last_if: Optional[If] = None
        for s in body:
            if isinstance(s, NullConst):
                vid = self.vertex(f"NULL@{s.line}", NULL_CONST, s.line, s.target, sides)
                self.roles["src"].append(vid)
                self.define(s.target, vid, sides)
            elif isinstance(s, Copy):
                vid = self.vertex(f"{s.target}@{s.line}", VALUE, s.line, s.target, sides)
                self.flow(s.source, vid, sides)
                self.define(s.target, vid, sides)
            elif isinstance(s, Phi):
                vid = self.vertex(f"{s.target}@{s.line}", VALUE, s.line, s.target, sides)
                assert last_if is not None
                self.flow(s.left, vid, sides + ((last_if.line, True),))
                self.flow(s.right, vid, sides + ((last_if.line, False),))
                self.define(s.target, vid, sides)
            elif isinstance(s, Call):
                aps = []
                for i, a in enumerate(s.args):
                    tag = f"#{i}" if a in s.args[:i] else ""
                    vid = self.vertex(f"{a}@{s.line}{tag}", ACTUAL_PARAM, s.line, a, sides)
                    self.flow(a, vid, sides)
                    self.roles["ap"].append(vid)
                    aps.append(vid)
                ar = None
                if s.target is not None:
                    ar = self.vertex(f"{s.target}@{s.line}", ACTUAL_RETURN, s.line, s.target, sides)
                    self.roles["ar"].append(ar)
                    self.define(s.target, ar, sides)
                self.calls.append((s, aps, ar))
            elif isinstance(s, Deref):
                vid = self.vertex(f"*{s.var}@{s.line}", DEREF, s.line, s.var, sides)
                self.flow(s.var, vid, sides)
                self.roles["sink"].append(vid)
            elif isinstance(s, Return):
                vid = self.vertex(f"{s.var}@{s.line}", FORMAL_RETURN, s.line, s.var, sides)
                self.flow(s.var, vid, sides)
                self.roles["fr"].append(vid)
            elif isinstance(s, If):
                self.conds[s.line] = (s.cond, sides)
                self.block(s.then, sides + ((s.line, True),))
                self.block(s.orelse, sides + ((s.line, False),))
            if not isinstance(s, Phi):
                last_if = s if isinstance(s, If) else None


def _select(g: Pdg, kind: str, patterns: Optional[Iterable[str]]) -> Optional[set[int]]:
    if patterns is None:
        return None
    pats = list(patterns)
    return {v.id for v in g.vertices if v.kind != GUARD and any(fnmatch.fnmatchcase(v.name, p) for p in pats)}


def build_pdg(
    p: ProgramIR,
    cg: Optional[CallGraph] = None,
    sources: Optional[Iterable[str]] = None,
    sinks: Optional[Iterable[str]] = None,
) -> Pdg:
    """Build the stitched PDG of ``p``.

    With no patterns the null-dereference client is used: null constants are
    sources and ``deref`` statements are sinks.  Glob patterns over vertex
    names select sources or sinks for the generic checker instead.
    """
    g = Pdg()
    builders = []
    for fn in p.functions:
        b = _FunctionBuilder(g, fn)
        b.run()
        builders.append(b)
    by_name = {b.fn.name: b for b in builders}
    for b in builders:
        for call, aps, ar in b.calls:
            callee = by_name[call.callee]
            for ap, fp in zip(aps, callee.roles["fp"]):
                g.add_edge(DataEdge(ap, fp, (), ("call", call.line)))
            if ar is not None:
                g.add_edge(DataEdge(callee.roles["fr"][0], ar, (), ("return", call.line)))
    src_sel = _select(g, "src", sources)
    sink_sel = _select(g, "sink", sinks)
    for b in builders:
        for r in ROLES:
            ids = b.roles.get(r, [])
            if r == "src" and src_sel is not None:
                ids = [v.id for v in g.vertices if v.owner == b.fn.name and v.id in src_sel]
            if r == "sink" and sink_sel is not None:
                ids = [v.id for v in g.vertices if v.owner == b.fn.name and v.id in sink_sel]
            g.roles[r][b.fn.name] = tuple(sorted(ids))
    return g


# --------------------------------------------------------------------------
# export


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(g: Pdg) -> str:
    src, sink = g.role("src"), g.role("sink")
    lines = ["digraph pdg {"]
    for v in g.vertices:
        if v.kind == GUARD:
            shape = "diamond"
        elif v.id in src:
            shape = "box"
        elif v.id in sink:
            shape = "octagon"
        else:
            shape = "ellipse"
        lines.append(f"  v{v.id} [label={_dot_id(v.name)}, shape={shape}];")
    for e in g.data_edges:
        attrs = []
        if e.guards:
            attrs.append("label=" + _dot_id(" & ".join(g.name(x) for x in e.guards)))
        if e.tag:
            paren = "[" if e.tag[0] == "call" else "]"
            attrs.append("label=" + _dot_id(f"{paren}{e.tag[1]}"))
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  v{e.src} -> v{e.dst}{suffix};")
    for gv, v in g.control_edges:
        lines.append(f"  v{gv} -> v{v} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(g: Pdg) -> str:
    doc = {
        "vertices": [
            {k: val for k, val in vars(v).items() if val != "" or k in ("name", "kind", "owner")}
            for v in g.vertices
        ],
        "data_edges": [
            {"src": e.src, "dst": e.dst, "guards": list(e.guards), "tag": list(e.tag) if e.tag else None}
            for e in g.data_edges
        ],
        "control_edges": [list(c) for c in g.control_edges],
        "roles": {r: {fn: list(ids) for fn, ids in sorted(t.items())} for r, t in sorted(g.roles.items())},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def import_json(text: str) -> Pdg:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PdgError(f"malformed document: {exc}") from None
    if not isinstance(doc, dict):
        raise PdgError("malformed document: top level must be an object")
    for key in ("vertices", "data_edges", "control_edges"):
        if not isinstance(doc.get(key), list):
            raise PdgError(f"malformed document: missing list {key!r}")
    g = Pdg()
    try:
        for i, rec in enumerate(doc["vertices"]):
            if rec["id"] != i:
                raise PdgError(f"vertex ids must be dense, found {rec['id']} at position {i}")
            if rec["kind"] not in VERTEX_KINDS:
                raise PdgError(f"unknown vertex kind {rec['kind']!r}")
            g.vertices.append(
                Vertex(
                    i, rec["name"], rec["kind"], rec["owner"], int(rec.get("line", 0)),
                    rec.get("var", ""), rec.get("op", ""), rec.get("rhs", ""),
                )
            )
        n = len(g.vertices)

        def ref(x) -> int:
            if not isinstance(x, int) or not 0 <= x < n:
                raise PdgError(f"dangling vertex reference {x!r}")
            return x

        for rec in doc["data_edges"]:
            tag = rec.get("tag")
            guards = tuple(ref(x) for x in rec.get("guards", []))
            for x in guards:
                if g.vertices[x].kind != GUARD:
                    raise PdgError(f"edge label {x} is not a guard vertex")
            g.data_edges.append(
                DataEdge(ref(rec["src"]), ref(rec["dst"]), guards, (str(tag[0]), int(tag[1])) if tag else None)
            )
        g.control_edges = [(ref(a), ref(b)) for a, b in doc["control_edges"]]
        for r, table in doc.get("roles", {}).items():
            if r not in ROLES:
                raise PdgError(f"unknown role {r!r}")
            g.roles[r] = {fn: tuple(ref(x) for x in ids) for fn, ids in table.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise PdgError(f"malformed document: {exc!r}") from None
    g.reindex()
    return g
