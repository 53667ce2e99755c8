"""Contribution identification: which heads, tails and guards can matter.

Every summary whose head and tail both fall outside the necessary set V^N
is guaranteed not to feed a reported source-sink path, either as a piece of
the path or through the condition of a guard on it.  The engine uses V^N to
shrink its role sets before collecting anything.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .cfl import CflSearch
from .pdg import Pdg


class BfsSearch:
    """Plain BFS over data edges.  ``add`` may be called repeatedly; the
    visited vertex and edge sets are shared between calls, so each vertex is
    expanded at most once per search object."""

    def __init__(self, g: Pdg, direction: str = "forward"):
        self.g = g
        self.direction = direction
        self.visited: set[int] = set()
        self.edges: set[int] = set()
        self.vertex_visits = 0
        self.edge_visits = 0

    def add(self, starts: Iterable[int]) -> "BfsSearch":
        table = self.g.out_edges if self.direction == "forward" else self.g.in_edges
        forward = self.direction == "forward"
        queue = deque()
        for s in starts:
            if s not in self.visited:
                self.visited.add(s)
                queue.append(s)
        while queue:
            v = queue.popleft()
            self.vertex_visits += 1
            for idx in table.get(v, ()):
                if idx in self.edges:
                    continue
                self.edges.add(idx)
                self.edge_visits += 1
                e = self.g.data_edges[idx]
                w = e.dst if forward else e.src
                if w not in self.visited:
                    self.visited.add(w)
                    queue.append(w)
        return self


BACKENDS = {"bfs": BfsSearch, "cfl": CflSearch}


@dataclass
class NecessarySet:
    vertices: set[int] = field(default_factory=set)
    candidates: set[int] = field(default_factory=set)
    guards: set[int] = field(default_factory=set)
    path_vertices: set[int] = field(default_factory=set)
    counters: dict[str, dict[str, int]] = field(default_factory=dict)
    reach: str = "bfs"

    def count(self, phase: str, *searches) -> None:
        self.counters[phase] = {
            "vertex_visits": sum(s.vertex_visits for s in searches),
            "edge_visits": sum(s.edge_visits for s in searches),
        }

    def to_json(self, g: Pdg) -> dict:
        names = lambda ids: sorted(g.name(v) for v in ids)  # noqa: E731
        return {
            "reach": self.reach,
            "vn": names(self.vertices),
            "candidates": names(self.candidates),
            "necessary_guards": names(self.guards),
            "counters": self.counters,
        }


def identify_path_contrib(g: Pdg, out: NecessarySet, reach: str = "bfs") -> None:
    search = BACKENDS[reach]
    fwd = search(g, "forward").add(sorted(g.role("src")))
    bwd = search(g, "backward").add(sorted(g.role("sink")))
    ends = (g.tails | g.heads) - g.guards
    out.vertices = fwd.visited & bwd.visited & ends
    out.candidates = (fwd.visited | bwd.visited) - out.vertices
    out.path_vertices = set(out.vertices)
    out.count("path", fwd, bwd)


def gather_nec_guards(g: Pdg, nec: NecessarySet, reach: str = "bfs") -> None:
    search = BACKENDS[reach]
    starts = sorted(nec.vertices)
    fwd = search(g, "forward").add(starts)
    bwd = search(g, "backward").add(starts)
    for idx in sorted(fwd.edges & bwd.edges):
        nec.guards.update(g.data_edges[idx].guards)
    nec.count("guards", fwd, bwd)


def identify_cond_contrib(g: Pdg, nec: NecessarySet, reach: str = "bfs", literal: bool = False) -> None:
    """Add the vertices that may feed the condition of a necessary guard.

    The literal procedure intersects forward reach from the candidates with
    backward reach from the necessary guards.  That misses value flows that
    start outside everything the source/sink searches touched (a parameter
    that is only ever compared, say), and guards nested on such flows.  The
    default therefore takes the whole backward closure from the necessary
    guards, pulling in every guard that labels an edge of the closure until
    nothing new appears.
    """
    gather_nec_guards(g, nec, reach)
    search = BACKENDS[reach]
    ends = g.tails | g.heads
    if literal:
        fwd = search(g, "forward").add(sorted(nec.candidates))
        bwd = search(g, "backward").add(sorted(nec.guards))
        nec.vertices |= fwd.visited & bwd.visited & ends
        nec.count("cond", fwd, bwd)
        return
    bwd = search(g, "backward")
    frontier = set(nec.guards)
    while frontier:
        bwd.add(sorted(frontier))
        labels = {x for idx in bwd.edges for x in g.data_edges[idx].guards}
        frontier = labels - nec.guards
        nec.guards |= frontier
    nec.vertices |= bwd.visited & ends
    nec.count("cond", bwd)


def identify_contrib(g: Pdg, reach: str = "bfs", literal: bool = False) -> NecessarySet:
    nec = NecessarySet(reach=reach)
    identify_path_contrib(g, nec, reach)
    identify_cond_contrib(g, nec, reach, literal)
    return nec
