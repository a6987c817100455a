"""Brute-force semantic oracle: direct evaluation of WS2S satisfaction.

Entirely independent of the automata machinery.  Quantifiers are a
bounded witness search: candidate sets use positions up to the given
depth, plus exactly-determined values propagated from positive
conjuncts (so chains of successor and constant atoms are decided
exactly even beyond the depth bound).  Every call is metered; hitting
the budget raises OracleCapExceeded, which means "no witness found
within budget", never a definite verdict.
"""

from __future__ import annotations

import itertools
from typing import Optional

from .errors import OracleCapExceeded
from .formula import (And, EqEpsilon, EqPos, Exists, Formula, Not, Or, Sing,
                      Subseteq, SuccLeft, SuccRight, Var, free_vars)

DEFAULT_CAP = 1_000_000


class _Budget:
    __slots__ = ("steps", "cap")

    def __init__(self, cap: int):
        self.steps = 0
        self.cap = cap

    def spend(self, n: int = 1):
        self.steps += n
        if self.steps > self.cap:
            raise OracleCapExceeded(f"oracle budget of {self.cap} steps exhausted")


def positions_upto(depth: int) -> list[str]:
    out = [""]
    frontier = [""]
    for _ in range(depth):
        frontier = [p + d for p in frontier for d in "LR"]
        out.extend(frontier)
    return out


def shift_left(ps: frozenset[str]) -> frozenset[str]:
    return frozenset(p + "L" for p in ps)


def shift_right(ps: frozenset[str]) -> frozenset[str]:
    return frozenset(p + "R" for p in ps)


def _unshift(ps: frozenset[str], d: str) -> Optional[frozenset[str]]:
    if not all(p.endswith(d) for p in ps):
        return None
    return frozenset(p[:-1] for p in ps)


def _eval_atom(phi: Formula, env: dict[Var, frozenset[str]]) -> bool:
    if isinstance(phi, Subseteq):
        return env[phi.x] <= env[phi.y]
    if isinstance(phi, SuccLeft):
        return env[phi.x] == shift_left(env[phi.y])
    if isinstance(phi, SuccRight):
        return env[phi.x] == shift_right(env[phi.y])
    if isinstance(phi, Sing):
        return len(env[phi.x]) == 1
    if isinstance(phi, EqEpsilon):
        return env[phi.x] == frozenset({""})
    if isinstance(phi, EqPos):
        return env[phi.x] == frozenset({phi.pos})
    raise TypeError(f"oracle expects core formulas, got {phi!r}")


def _positive_conjuncts(phi: Formula):
    """Atoms holding in every model of phi (the And-spine of the body)."""
    if isinstance(phi, And):
        yield from _positive_conjuncts(phi.left)
        yield from _positive_conjuncts(phi.right)
    elif not isinstance(phi, (Or, Not, Exists)):
        yield phi


class _Contradiction(Exception):
    pass


def _forced_values(vs: tuple[Var, ...], body: Formula,
                   env: dict[Var, frozenset[str]]) -> dict[Var, frozenset[str]]:
    """Quantified vars whose value is exactly determined by positive conjuncts.

    Raises _Contradiction when two determinations disagree or a required
    successor-preimage does not exist, in which case the quantified body
    has no model at all.
    """
    targets = set(vs)
    forced: dict[Var, frozenset[str]] = {}

    def known(v: Var) -> Optional[frozenset[str]]:
        if v in forced:
            return forced[v]
        if v in env and v not in targets:
            return env[v]
        return None

    def record(v: Var, value: Optional[frozenset[str]]):
        if value is None:
            raise _Contradiction
        if v in forced and forced[v] != value:
            raise _Contradiction
        forced[v] = value

    atoms = [a for a in _positive_conjuncts(body)
             if isinstance(a, (EqEpsilon, EqPos, SuccLeft, SuccRight))]
    changed = True
    while changed:
        changed = False
        for a in atoms:
            if isinstance(a, EqEpsilon) and a.x in targets:
                if a.x not in forced:
                    record(a.x, frozenset({""}))
                    changed = True
            elif isinstance(a, EqPos) and a.x in targets:
                if a.x not in forced:
                    record(a.x, frozenset({a.pos}))
                    changed = True
            elif isinstance(a, (SuccLeft, SuccRight)):
                d = "L" if isinstance(a, SuccLeft) else "R"
                yv = known(a.y)
                if a.x in targets and a.x not in forced and yv is not None:
                    record(a.x, frozenset(p + d for p in yv))
                    changed = True
                xv = known(a.x)
                if a.y in targets and a.y not in forced and xv is not None:
                    record(a.y, _unshift(xv, d))
                    changed = True
    return forced


def _subsets_by_size(universe: list[str]):
    for size in range(len(universe) + 1):
        for combo in itertools.combinations(universe, size):
            yield frozenset(combo)


def _eval(phi: Formula, env: dict[Var, frozenset[str]], depth: int,
          budget: _Budget, memo: dict) -> bool:
    budget.spend()
    if isinstance(phi, Not):
        return not _eval(phi.sub, env, depth, budget, memo)
    if isinstance(phi, And):
        return _eval(phi.left, env, depth, budget, memo) and \
            _eval(phi.right, env, depth, budget, memo)
    if isinstance(phi, Or):
        return _eval(phi.left, env, depth, budget, memo) or \
            _eval(phi.right, env, depth, budget, memo)
    if isinstance(phi, Exists):
        key = (id(phi), tuple(sorted((v.uid, env[v]) for v in free_vars(phi) if v in env)))
        if key in memo:
            return memo[key]
        result = _eval_exists(phi, env, depth, budget, memo)
        memo[key] = result
        return result
    return _eval_atom(phi, env)


def _eval_exists(phi: Exists, env, depth, budget, memo) -> bool:
    try:
        forced = _forced_values(phi.vars, phi.body, env)
    except _Contradiction:
        return False
    open_vars = [v for v in phi.vars if v not in forced]
    universe = positions_upto(depth)
    inner = dict(env)
    inner.update(forced)

    def search(i: int) -> bool:
        if i == len(open_vars):
            budget.spend()
            return _eval(phi.body, inner, depth, budget, memo)
        v = open_vars[i]
        for candidate in _subsets_by_size(universe):
            budget.spend()
            inner[v] = candidate
            if search(i + 1):
                return True
        del inner[v]
        return False

    return search(0)


def satisfies(assignment: dict[Var, frozenset[str]], phi: Formula,
              depth: int = 3, cap: int = DEFAULT_CAP) -> bool:
    """Does the assignment satisfy phi?

    The assignment must cover the free variables of phi (values beyond
    them are ignored).  Inner quantifiers search positions up to `depth`,
    the same bound throughout; the search is a sound semi-decision:
    True answers are definite, False may mean "no witness within bound"
    when quantifiers are involved.
    """
    env = {v: frozenset(assignment[v]) for v in free_vars(phi)}
    return _eval(phi, env, depth, _Budget(cap), {})


def candidate_count(n_free: int, depth: int) -> int:
    return 1 << (n_free * ((1 << (depth + 1)) - 1))


def bounded_sat(phi: Formula, depth: int,
                cap: int = DEFAULT_CAP) -> Optional[dict[Var, frozenset[str]]]:
    """Search for a model with free-variable positions of length <= depth.

    Returns a satisfying assignment or None if none exists within the
    bound.  Raises OracleCapExceeded when the candidate space (or the
    evaluation work) exceeds the cap.
    """
    fv = sorted(free_vars(phi), key=lambda v: v.uid)
    if candidate_count(len(fv), depth) > cap:
        raise OracleCapExceeded(
            f"{candidate_count(len(fv), depth)} candidate assignments exceed cap {cap}")
    universe = positions_upto(depth)
    budget = _Budget(cap)
    memo: dict = {}
    for values in itertools.product(*(_subsets_by_size(universe) for _ in fv)):
        budget.spend()
        alpha = dict(zip(fv, values))
        if _eval(phi, alpha, depth, budget, memo):
            return alpha
    return None
