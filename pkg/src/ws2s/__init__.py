"""WS2S solver: classical tree-automata engine, lazy automata-term
engine, and a brute-force semantic oracle for cross-checking."""

from .formula import parse, to_text, desugar, rename_apart, antiprenex
from .classical import decide_sat as classical_decide_sat
from .classical import decide_valid as classical_decide_valid
from .lazy import EngineConfig, LazyEngine, decide_sat, decide_valid

__all__ = [
    "parse", "to_text", "desugar", "rename_apart", "antiprenex",
    "classical_decide_sat", "classical_decide_valid",
    "EngineConfig", "LazyEngine", "decide_sat", "decide_valid",
]
