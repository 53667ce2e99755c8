"""Command-line entry point.

Exit status: 0 ok, 1 usage error, 2 analysis error, 3 soundness flag set
(a cap or the recursion bound was hit), 4 ``--mode diff`` found different
bug lists.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .ci import BACKENDS, identify_contrib
from .engine import Caps, term_name
from .frontend import FrontendError
from .metrics import ReportError, assemble_report
from .oracle import LineageError, classify
from .pdg import PdgError, export_dot, export_json
from .pipeline import MODES, Prepared, prepare, run_diff, run_mode

EXIT_OK, EXIT_USAGE, EXIT_ANALYSIS, EXIT_UNSOUND, EXIT_MISMATCH = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    inputs: list[str]
    mode: str = "fusion"
    reach: str = "bfs"
    checker: str = "npd"
    sources: list[str] = field(default_factory=list)
    sinks: list[str] = field(default_factory=list)
    caps: Caps = field(default_factory=Caps)
    out: Optional[str] = None
    no_timing: bool = False
    jobs: int = 1
    literal_ci: bool = False

    def __post_init__(self):
        if self.mode not in MODES + ("diff",):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.reach not in BACKENDS:
            raise UsageError(f"unknown reachability backend {self.reach!r}")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if self.checker == "npd" and (self.sources or self.sinks):
            raise UsageError("--sources/--sinks need --checker generic")
        if self.checker == "generic" and not (self.sources and self.sinks):
            raise UsageError("--checker generic needs both --sources and --sinks")

    @property
    def light_mode(self) -> str:
        """The filtered mode matching the chosen backend."""
        return "cfl-light" if self.reach == "cfl" else "light"


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vflight", description="Path-sensitive value-flow bug finder.")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", nargs=1, help="mini-IR source file")
    common.add_argument("--reach", choices=sorted(BACKENDS), default="bfs")
    common.add_argument("--checker", choices=["npd", "generic"], default="npd")
    common.add_argument("--sources", action="append", default=[], metavar="GLOB")
    common.add_argument("--sinks", action="append", default=[], metavar="GLOB")
    common.add_argument("--out", help="write here instead of stdout")
    common.add_argument("--literal-ci", action="store_true",
                        help="use the unrepaired condition phase (may prune contributing summaries)")

    engine = argparse.ArgumentParser(add_help=False)
    d = Caps()
    engine.add_argument("--max-path-len", type=int, default=d.max_path_len)
    engine.add_argument("--max-summaries", type=int, default=d.max_summaries)
    engine.add_argument("--guard-depth", type=int, default=d.guard_depth)
    engine.add_argument("--scc-iters", type=int, default=d.scc_iters)
    engine.add_argument("--max-variants", type=int, default=d.max_variants)
    engine.add_argument("--no-timing", action="store_true")
    engine.add_argument("--jobs", type=int, default=1)
    engine.add_argument("--seq", action="store_true", help="sequential reference mode (overrides --jobs)")

    a = sub.add_parser("analyze", parents=[common, engine], help="run the analysis and print a JSON report")
    a.add_argument("--mode", choices=list(MODES) + ["diff"], default="fusion")

    c = sub.add_parser("classify", parents=[common, engine], help="oracle verdicts for an unfiltered run")
    c.set_defaults(mode="fusion")

    du = sub.add_parser("dump", parents=[common], help="write the PDG or the necessary set")
    du.add_argument("--what", choices=["pdg", "vn"], default="pdg")
    du.add_argument("--format", choices=["dot", "json"], default="dot")
    du.set_defaults(mode="fusion")
    return ap


def _config(ns: argparse.Namespace) -> RunConfig:
    caps = Caps()
    if hasattr(ns, "max_path_len"):
        try:
            caps = Caps(ns.max_path_len, ns.max_summaries, ns.guard_depth, ns.scc_iters, ns.max_variants)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return RunConfig(
        inputs=list(ns.input),
        mode=ns.mode,
        reach=ns.reach,
        checker=ns.checker,
        sources=ns.sources,
        sinks=ns.sinks,
        caps=caps,
        out=ns.out,
        no_timing=getattr(ns, "no_timing", False),
        jobs=1 if getattr(ns, "seq", True) else getattr(ns, "jobs", 1),
        literal_ci=ns.literal_ci,
    )


def _load(cfg: RunConfig) -> Prepared:
    path = cfg.inputs[0]
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    if cfg.checker == "generic":
        return prepare(text, cfg.sources, cfg.sinks)
    return prepare(text)


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_analyze(cfg: RunConfig) -> int:
    prep = _load(cfg)
    if cfg.mode == "diff":
        runs = run_diff(prep, ("fusion", cfg.light_mode), cfg.caps, cfg.jobs, cfg.literal_ci)
        _emit(cfg, assemble_report([r.record() for r in runs], cfg.no_timing))
        return EXIT_OK if runs[0].bugs == runs[1].bugs else EXIT_MISMATCH
    mode = cfg.mode
    if mode == "light" and cfg.reach == "cfl":
        mode = "cfl-light"
    run = run_mode(prep, mode, cfg.caps, cfg.jobs, cfg.literal_ci)
    _emit(cfg, assemble_report([run.record()], cfg.no_timing))
    return EXIT_UNSOUND if run.metrics.soundness_flag else EXIT_OK


def cmd_classify(cfg: RunConfig) -> int:
    prep = _load(cfg)
    run = run_mode(prep, "fusion", cfg.caps, cfg.jobs)
    g, store = prep.pdg, run.result.store
    rows = []
    for v in classify(store):
        s = store.all[v.summary]
        rows.append({
            "id": s.id,
            "kind": s.kind,
            "owner": s.owner,
            "path": [term_name(g, t) for t in s.path],
            "verdict": v.verdict,
            "witness": v.witness,
        })
    doc = {"program": prep.program.digest(), "summaries": rows}
    _emit(cfg, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_UNSOUND if run.metrics.soundness_flag else EXIT_OK


def cmd_dump(cfg: RunConfig, what: str, fmt: str) -> int:
    prep = _load(cfg)
    if what == "pdg":
        _emit(cfg, export_dot(prep.pdg) if fmt == "dot" else export_json(prep.pdg))
        return EXIT_OK
    nec = identify_contrib(prep.pdg, cfg.reach, cfg.literal_ci)
    _emit(cfg, json.dumps(nec.to_json(prep.pdg), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = _config(ns)
        if ns.command == "analyze":
            return cmd_analyze(cfg)
        if ns.command == "classify":
            return cmd_classify(cfg)
        return cmd_dump(cfg, ns.what, ns.format)
    except UsageError as exc:
        print(f"vflight: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FrontendError, PdgError, ReportError, LineageError) as exc:
        print(f"vflight: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
