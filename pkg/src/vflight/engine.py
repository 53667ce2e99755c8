"""Bottom-up summary collection, cloning, guard instantiation and reporting.

Functions are visited callee-first over the call-graph layers.  Each one
gets transfer (param to return), input (param to sink) and output (source to
return) summaries, and complete source-sink paths are gathered as soon as a
caller can stitch them together.  Conditions of ordinary summaries are solved
when collected; source-sink conditions are solved once, at report time.

Given a necessary-vertex set the engine runs in filtered mode: formal and
actual parameters/returns and guards outside the set are dropped from the
role sets before collection, so nothing is collected, cloned or instantiated
through them.
"""
from __future__ import annotations

import itertools
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Collection, Iterable, Optional

from .conditions import (
    SAT,
    UNSAT,
    Atom,
    CountingSolver,
    PathCondition,
    SolverInterface,
    Term,
    conjoin,
    flow_eq,
    in_context,
    null_eq,
    null_neq,
    opaque,
)
from .frontend import CallGraph, ProgramIR
from .pdg import (
    ACTUAL_PARAM,
    ACTUAL_RETURN,
    FORMAL_PARAM,
    FORMAL_RETURN,
    GUARD,
    NULL_CONST,
    Pdg,
)

TRANSFER = "transfer"
INPUT = "input"
OUTPUT = "output"
SOURCE_SINK = "source-sink"
CONDITION = "condition"
SUMMARY_KINDS = (TRANSFER, INPUT, OUTPUT, SOURCE_SINK, CONDITION)


@dataclass(frozen=True)
class Caps:
    max_path_len: int = 64
    max_summaries: int = 10_000
    guard_depth: int = 8
    scc_iters: int = 3
    max_variants: int = 64

    def __post_init__(self) -> None:
        for k, v in vars(self).items():
            if v <= 0:
                raise ValueError(f"{k} must be positive")


@dataclass
class Summary:
    id: int
    kind: str
    path: tuple[Term, ...]
    condition: PathCondition
    owner: str
    clones: frozenset[int] = frozenset()
    uses: frozenset[int] = frozenset()
    discarded: bool = False
    verdict: Optional[str] = None
    clone_of: Optional[int] = None
    callsite: Optional[int] = None

    @property
    def head(self) -> Term:
        return self.path[0]

    @property
    def tail(self) -> Term:
        return self.path[-1]

    def key(self) -> tuple:
        return (self.kind, self.owner, self.path, self.condition.atoms)


@dataclass
class SummaryStore:
    all: list[Summary] = field(default_factory=list)
    stored: dict[str, dict[str, list[int]]] = field(default_factory=dict)
    source_sink: list[int] = field(default_factory=list)
    clone_cache: dict[tuple[int, int], int] = field(default_factory=dict)
    keys: dict[tuple, int] = field(default_factory=dict)
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    def of(self, fn: str, kind: str) -> list[Summary]:
        return [self.all[i] for i in self.stored.get(fn, {}).get(kind, ())]

    def __len__(self) -> int:
        return len(self.all)


@dataclass(frozen=True)
class BugReport:
    source: str
    sink: str
    path: tuple[str, ...]
    lines: tuple[int, ...]
    verdict: str = SAT
    sort_key: tuple = field(default=(), repr=False)

    def to_json(self) -> dict:
        return {"source": self.source, "sink": self.sink, "path": list(self.path), "lines": list(self.lines)}


@dataclass
class EngineStats:
    solver_calls: int = 0
    engine_time_s: float = 0.0
    soundness_flag: bool = False
    notes: list[str] = field(default_factory=list)


@dataclass
class AnalysisResult:
    store: SummaryStore
    bugs: list[BugReport]
    stats: EngineStats

    def summary_keys(self, g: Pdg) -> set[tuple]:
        return {summary_key(g, s) for s in self.store.all}


def term_name(g: Pdg, t: Term) -> str:
    return g.name(t[0]) + "".join(f"@{k}" for k in t[1])


def summary_key(g: Pdg, s: Summary) -> tuple:
    """Identity of a summary that survives differing id assignment across runs."""
    atoms = tuple(sorted((a.kind, tuple(term_name(g, t) for t in a.operands)) for a in s.condition.atoms))
    return (s.kind, s.owner, tuple(term_name(g, t) for t in s.path), atoms)


class _CapHit(Exception):
    pass


@dataclass
class _Chain:
    """A backward value flow ending at the operand of a guard."""

    path: tuple[Term, ...]
    atoms: tuple[Atom, ...] = ()
    conds: tuple[PathCondition, ...] = ()
    clones: frozenset[int] = frozenset()
    uses: frozenset[int] = frozenset()
    cloned: bool = False

    def extend(self, t: Term, atoms=(), conds=(), uses=frozenset()) -> "_Chain":
        return _Chain(
            self.path + (t,), self.atoms + tuple(atoms), self.conds + tuple(conds),
            self.clones, self.uses | uses, self.cloned,
        )


class Engine:
    def __init__(
        self,
        p: ProgramIR,
        g: Pdg,
        cg: CallGraph,
        keep: Optional[Collection[int]] = None,
        solver: Optional[SolverInterface] = None,
        caps: Caps = Caps(),
        jobs: int = 1,
    ):
        self.p = p
        self.g = g
        self.cg = cg
        self.keep = None if keep is None else frozenset(keep)
        self.solver = solver if isinstance(solver, CountingSolver) else CountingSolver(solver)
        self.caps = caps
        self.jobs = jobs
        self.store = SummaryStore()
        self.stats = EngineStats()
        self._stats_lock = threading.Lock()
        self._index_calls()

    # -- setup -------------------------------------------------------------

    def _index_calls(self) -> None:
        g = self.g
        self.call_of_ap: dict[int, tuple[int, int, str]] = {}
        self.ar_of_call: dict[int, int] = {}
        self.aps_of_call: dict[int, dict[int, int]] = {}
        self.callee_of: dict[int, str] = {}
        for e in g.data_edges:
            if e.tag is None:
                continue
            kind, k = e.tag
            if kind == "call":
                fp = e.dst
                callee = g.vertex(fp).owner
                self.call_of_ap[e.src] = (k, fp, callee)
                self.aps_of_call.setdefault(k, {})[fp] = e.src
                self.callee_of[k] = callee
            else:
                self.ar_of_call[k] = e.dst
                self.callee_of[k] = g.vertex(e.src).owner
        self.sinks = g.role("sink")
        self.sources = g.role("src")

    def allowed(self, vid: int) -> bool:
        return self.keep is None or vid in self.keep

    def flag(self, note: str) -> None:
        with self._stats_lock:
            self.stats.soundness_flag = True
            if note not in self.stats.notes:
                self.stats.notes.append(note)

    # -- the store -----------------------------------------------------------

    def record(
        self,
        kind: str,
        owner: str,
        path: tuple[Term, ...],
        cond: PathCondition,
        clones: Iterable[int] = (),
        uses: Iterable[int] = (),
        solve: bool = True,
        clone_of: Optional[int] = None,
        callsite: Optional[int] = None,
    ) -> Summary:
        """Log a summary in S^all, solving it when asked.  Only feasible
        summaries of the four reusable kinds go into the per-function sets;
        clone instances and guard-condition flows live in S^all alone."""
        st = self.store
        with st.lock:
            key = (kind, owner, path, cond.atoms)
            if key in st.keys:
                return st.all[st.keys[key]]
            owned = sum(1 for s in st.all if s.owner == owner) if len(st.all) >= self.caps.max_summaries else 0
            if owned >= self.caps.max_summaries:
                raise _CapHit(f"summary cap hit in {owner}")
            s = Summary(
                len(st.all), kind, path, cond.owned_by(len(st.all)), owner,
                frozenset(clones), frozenset(uses), clone_of=clone_of, callsite=callsite,
            )
            st.all.append(s)
            st.keys[key] = s.id
        if solve:
            s.verdict = self.solver.check(s.condition)
            s.discarded = s.verdict == UNSAT
        if not s.discarded and clone_of is None and kind != CONDITION:
            with st.lock:
                if kind == SOURCE_SINK:
                    st.source_sink.append(s.id)
                else:
                    self._pending.setdefault(owner, {}).setdefault(kind, []).append(s.id)
        return s

    def clone_instance(self, s: Summary, k: int, owner: str) -> Summary:
        """Materialize callee output summary ``s`` at call line ``k``."""
        with self.store.lock:
            hit = self.store.clone_cache.get((s.id, k))
            if hit is not None:
                return self.store.all[hit]
            c = self.record(
                s.kind, owner, tuple(in_context(t, k) for t in s.path),
                PathCondition(s.condition.renamed(k).atoms, s.condition.provenance | {s.id}),
                clones=(s.id,), solve=False, clone_of=s.id, callsite=k,
            )
            self.store.clone_cache[(s.id, k)] = c.id
            return c

    # -- guards --------------------------------------------------------------

    def guard_atom(self, gid: int) -> Atom:
        v = self.g.vertex(gid)
        t = (gid, ())
        if v.opaque:
            return opaque(t)
        return null_neq(t) if v.op == "!=" else null_eq(t)

    def guard_alternatives(self, fn: str, gid: int, depth: int, cache: dict) -> list[tuple[PathCondition, frozenset[int]]]:
        """Ways guard ``gid`` can hold: one condition per feasible incoming value flow."""
        atom = self.guard_atom(gid)
        if depth > self.caps.guard_depth:
            self.flag(f"guard nesting cap hit in {fn}")
            return [(PathCondition.of([opaque((gid, ()))]), frozenset())]
        if not self.allowed(gid) or self.g.vertex(gid).opaque or not self.g.pred(gid):
            return [(PathCondition.of([atom]), frozenset())]
        if gid in cache:
            return cache[gid]
        alts: list[tuple[PathCondition, frozenset[int]]] = []
        for ch in self.chains(fn, gid, depth, cache, {}):
            local = PathCondition.of(ch.atoms)
            for c in ch.conds:
                local = conjoin(local, c)
            if ch.cloned:
                s = self.record(CONDITION, fn, ch.path, local, clones=ch.clones, uses=ch.uses)
                if s.discarded:
                    continue
                alts.append((conjoin(PathCondition.of([atom]), s.condition), frozenset({s.id})))
            else:
                alts.append((conjoin(PathCondition.of([atom]), local), ch.uses))
        cache[gid] = alts
        return alts

    def _nested(self, fn: str, guards: tuple[int, ...], depth: int, cache: dict):
        """Product of alternatives for the guards on one edge."""
        options = [self.guard_alternatives(fn, x, depth + 1, cache) for x in guards]
        return list(itertools.product(*options))

    def chains(self, fn: str, vid: int, depth: int, cache: dict, memo: dict) -> list[_Chain]:
        """Backward flows into ``vid`` from a root (null constant, parameter or
        unconstrained call result), cloning callee summaries at call results."""
        if vid in memo:
            return memo[vid]
        g = self.g
        v = g.vertex(vid)
        t: Term = (vid, ())
        out: list[_Chain] = []
        if v.kind == NULL_CONST:
            out = [_Chain((t,), (null_eq(t),))]
        elif v.kind == FORMAL_PARAM:
            out = [_Chain((t,))]
        elif v.kind == ACTUAL_RETURN:
            out = self._chains_through_call(fn, vid, depth, cache, memo)
        else:
            for e in g.pred(vid):
                if e.tag is not None:
                    continue
                for base in self.chains(fn, e.src, depth, cache, memo):
                    if len(base.path) >= self.caps.max_path_len:
                        self.flag(f"path length cap hit in {fn}")
                        continue
                    for combo in self._nested(fn, e.guards, depth, cache):
                        conds = [c for c, _ in combo]
                        uses = frozenset().union(*(u for _, u in combo)) if combo else frozenset()
                        out.append(base.extend(t, [flow_eq(base.path[-1], t)], conds, uses))
            if v.kind != GUARD and not out and not g.pred(vid):
                out = [_Chain((t,))]
        if len(out) > self.caps.max_variants:
            self.flag(f"variant cap hit in {fn}")
            out = out[: self.caps.max_variants]
        memo[vid] = out
        return out

    def _chains_through_call(self, fn: str, ar: int, depth: int, cache: dict, memo: dict) -> list[_Chain]:
        t: Term = (ar, ())
        if not self.allowed(ar):
            return [_Chain((t,))]
        k = self.g.vertex(ar).line
        callee = self.callee_of[k]
        fr = self.g.formal_return(callee)
        link = flow_eq(in_context((fr, ()), k), t)
        out: list[_Chain] = []
        for s in self.store.of(callee, OUTPUT):
            c = self.clone_instance(s, k, fn)
            out.append(_Chain(c.path + (t,), (link,), (c.condition,), frozenset({c.id}), frozenset(), True))
        for s in self.store.of(callee, TRANSFER):
            ap = self.aps_of_call[k].get(s.head[0])
            if ap is None or not self.allowed(ap):
                continue
            renamed = tuple(in_context(x, k) for x in s.path)
            if len(renamed) + 2 > self.caps.max_path_len:
                self.flag(f"path length cap hit in {fn}")
                continue
            for base in self.chains(fn, ap, depth, cache, memo):
                out.append(
                    _Chain(
                        base.path + renamed + (t,),
                        base.atoms + (flow_eq((ap, ()), renamed[0]), link),
                        base.conds + (s.condition.renamed(k),),
                        base.clones | {s.id},
                        base.uses,
                        True,
                    )
                )
        return out or [_Chain((t,))]

    # -- forward collection ----------------------------------------------------

    def collect(self, fn: str) -> None:
        g = self.g
        cache: dict = {}
        try:
            for fp in g.formal_params(fn):
                if self.allowed(fp):
                    self._walk(fn, "fp", fp, ((fp, ()),), (), (), frozenset(), (), cache)
            for src in sorted(g.role("src", fn)):
                atoms = (null_eq((src, ())),) if g.vertex(src).kind == NULL_CONST else ()
                self._walk(fn, "src", src, ((src, ()),), atoms, (), frozenset(), (), cache)
            for ar in sorted(g.role("ar", fn)):
                if not self.allowed(ar):
                    continue
                k = g.vertex(ar).line
                callee = self.callee_of[k]
                fr = g.formal_return(callee)
                for s in self.store.of(callee, OUTPUT):
                    c = self.clone_instance(s, k, fn)
                    self._walk(
                        fn, "src", ar, c.path + ((ar, ()),), (flow_eq(in_context((fr, ()), k), (ar, ())),),
                        (c.condition,), frozenset({c.id}), (), cache,
                    )
        except _CapHit as exc:
            self.flag(str(exc))

    def _walk(self, fn, head, vid, path, atoms, conds, clones, guards, cache) -> None:
        g = self.g
        if len(path) > self.caps.max_path_len:
            self.flag(f"path length cap hit in {fn}")
            return
        v = g.vertex(vid)
        if vid in self.sinks:
            self._emit(fn, INPUT if head == "fp" else SOURCE_SINK, path, atoms, conds, clones, guards, cache)
        if v.kind == FORMAL_RETURN:
            if self.allowed(vid):
                self._emit(fn, TRANSFER if head == "fp" else OUTPUT, path, atoms, conds, clones, guards, cache)
            return
        if v.kind == ACTUAL_PARAM:
            if self.allowed(vid):
                self._cross(fn, head, vid, path, atoms, conds, clones, guards, cache)
            return
        here: Term = (vid, ())
        for e in sorted(g.succ(vid), key=lambda e: e.dst):
            if e.tag is not None or g.vertex(e.dst).kind == GUARD:
                continue
            if not all(self.allowed(x) for x in e.guards):
                # a guard dropped from V_g can no longer qualify any flow
                continue
            nxt: Term = (e.dst, ())
            self._walk(
                fn, head, e.dst, path + (nxt,), atoms + (flow_eq(here, nxt),), conds, clones,
                guards + e.guards, cache,
            )

    def _cross(self, fn, head, ap, path, atoms, conds, clones, guards, cache) -> None:
        k, fp, callee = self.call_of_ap[ap]
        link = flow_eq((ap, ()), in_context((fp, ()), k))
        ar = self.ar_of_call.get(k)
        for s in self.store.of(callee, TRANSFER):
            if s.head[0] != fp or ar is None or not self.allowed(ar):
                continue
            fr_k = in_context(s.tail, k)
            self._walk(
                fn, head, ar, path + tuple(in_context(x, k) for x in s.path) + ((ar, ()),),
                atoms + (link, flow_eq(fr_k, (ar, ()))), conds + (s.condition.renamed(k),),
                clones | {s.id}, guards, cache,
            )
        for s in self.store.of(callee, INPUT):
            if s.head[0] != fp:
                continue
            full = path + tuple(in_context(x, k) for x in s.path)
            if len(full) > self.caps.max_path_len:
                self.flag(f"path length cap hit in {fn}")
                continue
            self._emit(
                fn, INPUT if head == "fp" else SOURCE_SINK, full, atoms + (link,),
                conds + (s.condition.renamed(k),), clones | {s.id}, guards, cache,
            )

    def _emit(self, fn, kind, path, atoms, conds, clones, guards, cache) -> None:
        base = PathCondition.of(atoms)
        for c in conds:
            base = conjoin(base, c)
        distinct = tuple(dict.fromkeys(guards))
        options = [self.guard_alternatives(fn, x, 1, cache) for x in distinct]
        variants = itertools.product(*options)
        count = 0
        for combo in variants:
            count += 1
            if count > self.caps.max_variants:
                self.flag(f"variant cap hit in {fn}")
                break
            cond = base
            uses: frozenset[int] = frozenset()
            for c, u in combo:
                cond = conjoin(cond, c)
                uses |= u
            self.record(kind, fn, path, cond, clones, uses, solve=kind != SOURCE_SINK)

    # -- driver --------------------------------------------------------------

    def _commit(self) -> int:
        with self.store.lock:
            added = 0
            for fn, kinds in self._pending.items():
                table = self.store.stored.setdefault(fn, {})
                for kind, ids in kinds.items():
                    have = table.setdefault(kind, [])
                    have.extend(i for i in ids if i not in have)
                    added += len(ids)
            self._pending = {}
            return added

    def _run_scc(self, scc: tuple[str, ...]) -> None:
        if not self.cg.is_recursive(scc):
            for fn in scc:
                self.collect(fn)
            return
        # Peers only see each other's summaries from the previous round.
        for _ in range(self.caps.scc_iters):
            before = len(self.store.all)
            for fn in scc:
                self.collect(fn)
            self._promote(scc)
            if len(self.store.all) == before:
                return
        self.flag(f"recursion in {'/'.join(scc)} not settled after {self.caps.scc_iters} rounds")

    def _promote(self, scc: tuple[str, ...]) -> None:
        with self.store.lock:
            for fn in scc:
                kinds = self._pending.pop(fn, {})
                table = self.store.stored.setdefault(fn, {})
                for kind, ids in kinds.items():
                    have = table.setdefault(kind, [])
                    have.extend(i for i in ids if i not in have)

    def run(self) -> AnalysisResult:
        self._pending: dict[str, dict[str, list[int]]] = {}
        start = time.perf_counter()
        calls_before = self.solver.calls
        for layer in self.cg.layers:
            if self.jobs > 1 and len(layer) > 1:
                with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                    list(pool.map(self._run_scc, layer))
            else:
                for scc in layer:
                    self._run_scc(scc)
            self._commit()
        bugs = self.report()
        self.stats.solver_calls = self.solver.calls - calls_before
        self.stats.engine_time_s = time.perf_counter() - start
        return AnalysisResult(self.store, bugs, self.stats)

    def report(self) -> list[BugReport]:
        g = self.g
        found: dict[tuple[Term, ...], BugReport] = {}
        for sid in list(self.store.source_sink):
            s = self.store.all[sid]
            s.verdict = self.solver.check(s.condition)
            if s.verdict != SAT:
                s.discarded = True
                continue
            if s.path in found:
                continue
            src, sink = g.vertex(s.head[0]), g.vertex(s.tail[0])
            key = (src.line, sink.line, len(s.path), tuple(s.path))
            found[s.path] = BugReport(
                term_name(g, s.head), term_name(g, s.tail),
                tuple(term_name(g, t) for t in s.path),
                tuple(g.vertex(t[0]).line for t in s.path), SAT, key,
            )
        return sorted(found.values(), key=lambda b: b.sort_key)


def analyze(
    p: ProgramIR,
    g: Pdg,
    cg: CallGraph,
    keep: Optional[Collection[int]] = None,
    solver: Optional[SolverInterface] = None,
    caps: Caps = Caps(),
    jobs: int = 1,
) -> AnalysisResult:
    """Run the bottom-up analysis; ``keep`` is the necessary-vertex filter."""
    return Engine(p, g, cg, keep, solver, caps, jobs).run()
