"""Path conditions and the built-in nullness/equality solver.

A term names one PDG vertex under a calling context: ``(vertex_id, ctx)``
where ``ctx`` lists the call lines a cloned summary was inlined through,
innermost first.  Conditions are plain conjunctions of atoms over terms.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol

Term = tuple[int, tuple[int, ...]]

FLOW_EQ = "flow-eq"
NULL_EQ = "null-eq"
NULL_NEQ = "null-neq"
OPAQUE = "opaque"
ATOM_KINDS = (FLOW_EQ, NULL_EQ, NULL_NEQ, OPAQUE)

SAT = "sat"
UNSAT = "unsat"


def term(vid: int, ctx: tuple[int, ...] = ()) -> Term:
    return (vid, tuple(ctx))


def in_context(t: Term, k: int) -> Term:
    """The copy of ``t`` seen from a caller that inlines it at line ``k``."""
    return (t[0], t[1] + (k,))


@dataclass(frozen=True, order=True)
class Atom:
    kind: str
    operands: tuple[Term, ...]

    def __post_init__(self) -> None:
        if self.kind not in ATOM_KINDS:
            raise ValueError(f"unknown atom kind {self.kind!r}")
        want = 2 if self.kind == FLOW_EQ else 1
        if len(self.operands) != want:
            raise ValueError(f"{self.kind} takes {want} operand(s)")

    def renamed(self, k: int) -> "Atom":
        return Atom(self.kind, tuple(in_context(t, k) for t in self.operands))


def flow_eq(u: Term, v: Term) -> Atom:
    return Atom(FLOW_EQ, tuple(sorted((u, v))))


def null_eq(t: Term) -> Atom:
    return Atom(NULL_EQ, (t,))


def null_neq(t: Term) -> Atom:
    return Atom(NULL_NEQ, (t,))


def opaque(t: Term) -> Atom:
    return Atom(OPAQUE, (t,))


@dataclass(frozen=True)
class PathCondition:
    atoms: frozenset[Atom] = frozenset()
    provenance: frozenset[int] = frozenset()
    owner: Optional[int] = field(default=None, compare=False)

    @classmethod
    def of(cls, atoms: Iterable[Atom], owner: Optional[int] = None) -> "PathCondition":
        return cls(frozenset(atoms), frozenset(), owner)

    def renamed(self, k: int) -> "PathCondition":
        return PathCondition(frozenset(a.renamed(k) for a in self.atoms), self.provenance, self.owner)

    def owned_by(self, owner: Optional[int]) -> "PathCondition":
        return PathCondition(self.atoms, self.provenance, owner)

    def terms(self) -> set[Term]:
        return {t for a in self.atoms for t in a.operands}

    def __len__(self) -> int:
        return len(self.atoms)


TRUE = PathCondition()


def conjoin(a: PathCondition, b: PathCondition) -> PathCondition:
    """Conjunction of ``a`` and ``b``; ``b``'s owning summary joins the provenance."""
    prov = a.provenance | b.provenance
    if b.owner is not None:
        prov = prov | {b.owner}
    return PathCondition(a.atoms | b.atoms, prov, a.owner)


class SolverInterface(Protocol):
    def check(self, c: PathCondition) -> str: ...


class BuiltinSolver:
    """Union-find over flow equalities with a nullness status per class."""

    UNKNOWN, NULL, NONNULL, CONFLICT = 0, 1, 2, 3

    def check(self, c: PathCondition) -> str:
        parent: dict[Term, Term] = {}

        def find(x: Term) -> Term:
            parent.setdefault(x, x)
            root = x
            while parent[root] != root:
                root = parent[root]
            while parent[x] != root:
                parent[x], x = root, parent[x]
            return root

        for a in c.atoms:
            if a.kind == FLOW_EQ:
                ra, rb = find(a.operands[0]), find(a.operands[1])
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        status: dict[Term, int] = {}
        for a in c.atoms:
            if a.kind == NULL_EQ:
                want = self.NULL
            elif a.kind == NULL_NEQ:
                want = self.NONNULL
            else:
                continue
            r = find(a.operands[0])
            cur = status.get(r, self.UNKNOWN)
            if cur == self.UNKNOWN:
                status[r] = want
            elif cur != want:
                return UNSAT
        return SAT


class CountingSolver:
    """Wraps a solver and counts ``check`` calls; safe across threads."""

    def __init__(self, inner: Optional[SolverInterface] = None):
        self.inner = inner if inner is not None else BuiltinSolver()
        self._calls = 0
        self._lock = threading.Lock()

    def check(self, c: PathCondition) -> str:
        with self._lock:
            self._calls += 1
        return self.inner.check(c)

    @property
    def calls(self) -> int:
        return self._calls

    def reset(self) -> None:
        with self._lock:
            self._calls = 0


def check_builtin(c: PathCondition) -> str:
    return BuiltinSolver().check(c)
