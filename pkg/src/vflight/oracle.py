"""Ground-truth contribution verdicts from an unfiltered run's lineage.

A summary contributes to the path of a reported bug when it was inlined,
directly or through other clones, into a feasible source-sink summary.  It
contributes to the condition when some guard on such a path (or on a summary
already known to contribute) was instantiated with it.  Everything else in
S^all is redundant.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .conditions import SAT
from .engine import SOURCE_SINK, Summary, SummaryStore

PATH = "path-contributing"
COND = "condition-contributing"
REDUNDANT = "redundant"


class LineageError(Exception):
    pass


@dataclass(frozen=True)
class ContributionVerdict:
    summary: int
    verdict: str
    witness: Optional[int] = None


def _lineage(store: SummaryStore, s: Summary, attr: str) -> list[int]:
    ids = sorted(getattr(s, attr))
    for i in ids:
        if not 0 <= i < len(store.all):
            raise LineageError(f"summary {s.id} names missing summary {i} in its {attr} lineage")
    return ids


def classify(store: SummaryStore) -> list[ContributionVerdict]:
    seeds = [s for s in store.all if s.kind == SOURCE_SINK and s.verdict == SAT]
    verdict: dict[int, tuple[str, int]] = {}
    # Path contribution first so it wins over condition contribution.
    queue = deque((s.id, s.id) for s in seeds)
    for s in seeds:
        verdict[s.id] = (PATH, s.id)
    while queue:
        sid, wit = queue.popleft()
        for c in _lineage(store, store.all[sid], "clones"):
            if c not in verdict:
                verdict[c] = (PATH, wit)
                queue.append((c, wit))
    queue = deque((sid, wit) for sid, (_, wit) in sorted(verdict.items()))
    while queue:
        sid, wit = queue.popleft()
        s = store.all[sid]
        kids = _lineage(store, s, "uses")
        if verdict[sid][0] == COND:
            kids = kids + _lineage(store, s, "clones")
        for c in kids:
            if c not in verdict:
                verdict[c] = (COND, wit)
                queue.append((c, wit))
    out = []
    for s in store.all:
        for attr in ("clones", "uses"):
            _lineage(store, s, attr)
        v = verdict.get(s.id)
        out.append(ContributionVerdict(s.id, v[0], v[1]) if v else ContributionVerdict(s.id, REDUNDANT))
    return out


def redundant_ids(verdicts: Iterable[ContributionVerdict]) -> set[int]:
    return {v.summary for v in verdicts if v.verdict == REDUNDANT}


def identification_ratio(verdicts: Iterable[ContributionVerdict], pruned: Iterable[int]) -> Fraction:
    red = redundant_ids(verdicts)
    if not red:
        return Fraction(1)
    return Fraction(len(red & set(pruned)), len(red))
