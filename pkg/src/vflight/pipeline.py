"""Glue: parse, build graphs, identify, analyze and measure one program."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Optional

from .ci import NecessarySet, identify_contrib
from .engine import AnalysisResult, Caps, analyze, summary_key
from .frontend import CallGraph, ProgramIR, build_call_graph, parse_program
from .metrics import Metrics, RunRecord
from .oracle import ContributionVerdict, classify, identification_ratio, redundant_ids
from .pdg import Pdg, build_pdg

MODES = ("fusion", "light", "cfl-light")


@dataclass
class Prepared:
    program: ProgramIR
    cg: CallGraph
    pdg: Pdg


@dataclass
class Run:
    mode: str
    prepared: Prepared
    nec: Optional[NecessarySet]
    result: AnalysisResult
    metrics: Metrics

    @property
    def bugs(self):
        return self.result.bugs

    def record(self) -> RunRecord:
        return RunRecord(self.prepared.program.digest(), self.metrics, self.result.bugs)


def prepare(
    source: str | ProgramIR,
    sources: Optional[Iterable[str]] = None,
    sinks: Optional[Iterable[str]] = None,
) -> Prepared:
    p = parse_program(source) if isinstance(source, str) else source
    cg = build_call_graph(p)
    return Prepared(p, cg, build_pdg(p, cg, sources, sinks))


def run_mode(prep: Prepared, mode: str = "fusion", caps: Caps = Caps(), jobs: int = 1, literal: bool = False) -> Run:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    nec = None
    ci_time = 0.0
    if mode != "fusion":
        start = time.perf_counter()
        nec = identify_contrib(prep.pdg, "cfl" if mode == "cfl-light" else "bfs", literal)
        ci_time = time.perf_counter() - start
    result = analyze(prep.program, prep.pdg, prep.cg, None if nec is None else nec.vertices, caps=caps, jobs=jobs)
    stored: dict[str, int] = {}
    for s in result.store.all:
        if not s.discarded:
            stored[s.kind] = stored.get(s.kind, 0) + 1
    m = Metrics(
        mode=mode,
        s_all=len(result.store.all),
        stored=stored,
        solver_calls=result.stats.solver_calls,
        ci_time_s=ci_time,
        engine_time_s=result.stats.engine_time_s,
        ci_counters=dict(nec.counters) if nec else {},
        soundness_flag=result.stats.soundness_flag,
        notes=list(result.stats.notes),
    )
    return Run(mode, prep, nec, result, m)


def pruned_ids(fusion: Run, light: Run) -> set[int]:
    """Ids (in the fusion store) of summaries the filtered run never materialized."""
    g = fusion.prepared.pdg
    kept = light.result.summary_keys(g)
    return {s.id for s in fusion.result.store.all if summary_key(g, s) not in kept}


def measure(fusion: Run, others: Iterable[Run]) -> list[ContributionVerdict]:
    """Fill the redundancy counters of every run from the fusion oracle."""
    verdicts = classify(fusion.result.store)
    red = redundant_ids(verdicts)
    fusion.metrics.redun = len(red)
    for r in others:
        pruned = pruned_ids(fusion, r)
        r.metrics.redun = len(red)
        r.metrics.identified = len(pruned & red)
        r.metrics.ratio = identification_ratio(verdicts, pruned)
    return verdicts


def run_diff(
    prep: Prepared, modes: Iterable[str] = MODES, caps: Caps = Caps(), jobs: int = 1, literal: bool = False
) -> list[Run]:
    runs = [run_mode(prep, m, caps, jobs, literal) for m in modes]
    fusion = next((r for r in runs if r.mode == "fusion"), None)
    if fusion is not None:
        measure(fusion, [r for r in runs if r is not fusion])
    return runs
