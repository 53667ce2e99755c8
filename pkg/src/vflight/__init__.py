"""Bottom-up path-sensitive value-flow analysis with contribution filtering."""
from .engine import AnalysisResult, BugReport, Caps, analyze
from .frontend import ProgramIR, build_call_graph, parse_program, print_program
from .pdg import Pdg, build_pdg
from .ci import NecessarySet, identify_contrib
from .oracle import classify

__all__ = [
    "AnalysisResult", "BugReport", "Caps", "analyze",
    "ProgramIR", "build_call_graph", "parse_program", "print_program",
    "Pdg", "build_pdg", "NecessarySet", "identify_contrib", "classify",
]
__version__ = "0.1.0"
