"""Per-run counters and the JSON report."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .engine import BugReport

METRIC_KEYS = ("s_all", "redun", "identified", "solver_calls", "ci_time_s", "engine_time_s", "gains")


class ReportError(Exception):
    pass


@dataclass
class Metrics:
    mode: str
    s_all: int = 0
    stored: dict[str, int] = field(default_factory=dict)
    redun: Optional[int] = None
    identified: Optional[int] = None
    solver_calls: int = 0
    ci_time_s: float = 0.0
    engine_time_s: float = 0.0
    ci_counters: dict[str, dict[str, int]] = field(default_factory=dict)
    soundness_flag: bool = False
    notes: list[str] = field(default_factory=list)
    ratio: Optional[Fraction] = None


@dataclass
class RunRecord:
    program: str
    metrics: Metrics
    bugs: list[BugReport]


def _pct(before: float, after: float) -> Optional[float]:
    if not before:
        return None
    return round(100.0 * (before - after) / before, 2)


def gains(fusion: Metrics, light: Metrics) -> Optional[float]:
    """Time saved by the filtered run per unit of identification overhead."""
    if light.ci_time_s <= 0:
        return None
    saved = (fusion.ci_time_s + fusion.engine_time_s) - (light.ci_time_s + light.engine_time_s)
    return round(saved / light.ci_time_s, 4)


def _run_doc(r: RunRecord, no_timing: bool, gain: Optional[float]) -> dict:
    m = r.metrics
    t = (lambda x: 0.0) if no_timing else (lambda x: round(x, 6))
    return {
        "mode": m.mode,
        "bugs": [b.to_json() for b in r.bugs],
        "metrics": {
            "s_all": m.s_all,
            "redun": m.redun,
            "identified": m.identified,
            "solver_calls": m.solver_calls,
            "ci_time_s": t(m.ci_time_s),
            "engine_time_s": t(m.engine_time_s),
            "gains": None if no_timing else gain,
        },
        "details": {
            "stored": dict(sorted(m.stored.items())),
            "ci_counters": m.ci_counters,
            "identification_ratio": None if m.ratio is None else float(m.ratio),
            "notes": list(m.notes),
        },
        "soundness_flag": m.soundness_flag,
    }


def assemble_report(runs: Sequence[RunRecord], no_timing: bool = False) -> str:
    if not runs:
        raise ReportError("no runs to report")
    programs = {r.program for r in runs}
    if len(programs) > 1:
        raise ReportError(f"runs cover different programs: {sorted(programs)}")
    fusion = next((r for r in runs if r.metrics.mode == "fusion"), None)
    docs = []
    for r in runs:
        g = gains(fusion.metrics, r.metrics) if fusion is not None and r is not fusion else None
        docs.append(_run_doc(r, no_timing, g))
    if len(docs) == 1:
        doc = {"program": runs[0].program, **docs[0]}
    else:
        doc = {"program": runs[0].program, "runs": docs}
        light = [r for r in runs if r.metrics.mode != "fusion"]
        if fusion is not None and light:
            doc["comparison"] = {
                r.metrics.mode: {
                    "same_bugs": r.bugs == fusion.bugs,
                    "s_all_reduction_pct": _pct(fusion.metrics.s_all, r.metrics.s_all),
                    "solver_call_reduction_pct": _pct(fusion.metrics.solver_calls, r.metrics.solver_calls),
                    "solver_call_delta": fusion.metrics.solver_calls - r.metrics.solver_calls,
                    "identified": r.metrics.identified,
                    "redun": r.metrics.redun,
                }
                for r in light
            }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
