"""Dyck-constrained reachability over callsite-tagged PDG edges.

A call edge at line k opens ``[k`` and a return edge closes ``]k``.  A path
is accepted when its label string is partially balanced: every close matches
the nearest pending open, and closes with nothing pending (returning into an
unknown caller) are allowed only before the first unmatched open.

The search tabulates same-level reachability per callee entry, the usual
summary-edge construction: ``reach[entry]`` holds everything reachable from
the entry by balanced paths, and ``callers[entry]`` remembers which contexts
entered it at which line so returns can be matched when they show up.
"""
from __future__ import annotations

from collections import deque
from typing import Iterable, Optional

from .pdg import Pdg

OPEN, CLOSE, EPS = "open", "close", "eps"
ROOT = -1


def dyck_label(tag: Optional[tuple[str, int]], direction: str = "forward") -> tuple[str, int]:
    """Label of an edge as seen when walking it in ``direction``."""
    if tag is None:
        return (EPS, 0)
    kind, k = tag
    opening = kind == "call"
    if direction == "backward":
        opening = not opening
    return (OPEN if opening else CLOSE, k)


class CflSearch:
    """Incremental partially-balanced reachability sharing one visited set."""

    def __init__(self, g: Pdg, direction: str = "forward"):
        self.g = g
        self.direction = direction
        self.visited: set[int] = set()
        self.edges: set[int] = set()
        self.vertex_visits = 0
        self.edge_visits = 0
        self.reach: dict[int, set[int]] = {ROOT: set()}
        # entry -> {(caller context, line)}
        self.callers: dict[int, set[tuple[int, int]]] = {}
        # entry -> {(exit vertex, line, return target, edge index)}
        self.exits: dict[int, set[tuple[int, int, int, int]]] = {}
        self.work: deque[tuple[int, int]] = deque()

    def _out(self, v: int) -> list[int]:
        table = self.g.out_edges if self.direction == "forward" else self.g.in_edges
        return table.get(v, [])

    def _far(self, idx: int) -> int:
        e = self.g.data_edges[idx]
        return e.dst if self.direction == "forward" else e.src

    def _add(self, ctx: int, v: int) -> None:
        seen = self.reach.setdefault(ctx, set())
        if v not in seen:
            seen.add(v)
            self.visited.add(v)
            self.work.append((ctx, v))

    def _use(self, idx: int) -> None:
        if idx not in self.edges:
            self.edges.add(idx)
            self.edge_visits += 1

    def add(self, starts: Iterable[int]) -> "CflSearch":
        for s in starts:
            self._add(ROOT, s)
        while self.work:
            ctx, v = self.work.popleft()
            self.vertex_visits += 1
            for idx in sorted(self._out(v)):
                kind, k = dyck_label(self.g.data_edges[idx].tag, self.direction)
                w = self._far(idx)
                if kind == EPS:
                    self._use(idx)
                    self._add(ctx, w)
                elif kind == OPEN:
                    self._use(idx)
                    link = (ctx, k)
                    callers = self.callers.setdefault(w, set())
                    if link not in callers:
                        callers.add(link)
                        for ex, line, target, eidx in sorted(self.exits.get(w, ())):
                            if line == k:
                                self._use(eidx)
                                self._add(ctx, target)
                    self._add(w, w)
                else:
                    if ctx == ROOT:
                        # nothing pending: return into an unknown caller
                        self._use(idx)
                        self._add(ROOT, w)
                        continue
                    rec = (v, k, w, idx)
                    exits = self.exits.setdefault(ctx, set())
                    if rec in exits:
                        continue
                    exits.add(rec)
                    for caller, line in sorted(self.callers.get(ctx, ())):
                        if line == k:
                            self._use(idx)
                            self._add(caller, w)
        return self


def cfl_reachable_from(g: Pdg, starts: Iterable[int], direction: str = "forward") -> set[int]:
    return set(CflSearch(g, direction).add(starts).visited)
