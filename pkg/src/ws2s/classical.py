"""Classical bottom-up WS2S decision procedure (the reference engine).

Builds an explicit automaton inductively over the formula: base automata
for atoms, products for the connectives, complement of a determinized
operand for negation, and projection + subset construction + zero-symbol
saturation for the quantifier; then tests language emptiness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .formula import And, Exists, Formula, Not, Or, is_atom
from .tautomata import (TreeAutomaton, base_automaton, complement,
                        determinize, intersect, project, reach, union,
                        zero_derivative)
from .trees import Alphabet, alphabet_of

SAT = "SAT"
UNSAT = "UNSAT"
VALID = "VALID"
INVALID = "INVALID"

DEFAULT_STATE_CAP = 10**6


@dataclass
class ClassicalStats:
    result: Optional[str] = None
    wall_ms: float = 0.0
    automaton_states: int = 0  # reachable states of the final automaton
    extra: dict = field(default_factory=dict)


def build(phi: Formula, alphabet: Alphabet, cap: int = DEFAULT_STATE_CAP,
          deadline: Optional[float] = None) -> TreeAutomaton:
    """Automaton with the same language as the (desugared, renamed) formula."""
    if is_atom(phi):
        return base_automaton(phi, alphabet)
    if isinstance(phi, And):
        return intersect(build(phi.left, alphabet, cap, deadline),
                         build(phi.right, alphabet, cap, deadline), cap)
    if isinstance(phi, Or):
        return union(build(phi.left, alphabet, cap, deadline),
                     build(phi.right, alphabet, cap, deadline), cap)
    if isinstance(phi, Not):
        sub = build(phi.sub, alphabet, cap, deadline)
        if not (sub.deterministic and sub.complete):
            sub = determinize(sub, cap)
        return complement(sub)
    if isinstance(phi, Exists):
        sub = build(phi.body, alphabet, cap, deadline)
        return zero_derivative(determinize(project(sub, phi.vars), cap))
    raise TypeError(f"classical engine expects a core formula, got {phi!r}")


def decide_sat(phi: Formula, cap: int = DEFAULT_STATE_CAP,
               timeout_s: Optional[float] = None,
               stats: Optional[ClassicalStats] = None) -> str:
    """SAT iff the formula's automaton has a non-empty language."""
    start = time.monotonic()
    deadline = start + timeout_s if timeout_s else None
    alphabet = alphabet_of(phi)
    aut = build(phi, alphabet, cap, deadline)
    reached = reach(aut, aut.leaf_states, deadline=deadline)
    verdict = SAT if any(aut.is_root(q) for q in reached) else UNSAT
    if stats is not None:
        stats.result = verdict
        stats.wall_ms = (time.monotonic() - start) * 1000.0
        stats.automaton_states = len(reached)
    return verdict


def decide_valid(phi: Formula, cap: int = DEFAULT_STATE_CAP,
                 timeout_s: Optional[float] = None,
                 stats: Optional[ClassicalStats] = None) -> str:
    verdict = decide_sat(Not(phi), cap, timeout_s, stats)
    out = VALID if verdict == UNSAT else INVALID
    if stats is not None:
        stats.result = out
    return out
