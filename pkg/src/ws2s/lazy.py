"""Lazy decision engine: on-the-fly top-level fixpoint with early
termination, short-circuited root tests, memoization, resumable partial
saturations (continuations), subsumption pruning, and the optional
product-flattening and nondeterministic-union preprocessing rewrites.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .errors import ResourceLimit, SolverTimeout
from .formula import Formula, Not, antiprenex as _antiprenex, free_vars
from .terms import (ATOM, SINK, T_AND, T_DERIV, T_NOT, T_OR, T_PROJ, T_SET,
                    Term, TermContext, created_terms, mk_and, mk_deriv,
                    mk_not, mk_or, mk_proj, mk_set, saturate as eager_saturate,
                    successors, translate)
from .trees import alphabet_of

SAT = "SAT"
UNSAT = "UNSAT"
VALID = "VALID"
INVALID = "INVALID"


@dataclass
class EngineConfig:
    lazy_rt: bool = True
    subsumption: bool = True
    flatten: bool = False
    nondet_union: bool = False
    antiprenex: bool = True
    term_cap: int = 1_000_000
    timeout_s: Optional[float] = None
    trace: bool = False


@dataclass
class Stats:
    """Per-decision statistics record."""

    result: Optional[str] = None
    wall_ms: float = 0.0
    term_nodes: int = 0
    fixpoint_iterations: int = 0
    saturation_resumptions: int = 0
    subsumption_prunes: int = 0
    early_terminations: int = 0
    frontier_peak: int = 0
    events: list = field(default_factory=list)


class Continuation:
    """A paused saturation: the frontier produced so far plus the pairs
    still waiting to be expanded.  Frontiers only ever grow (modulo
    subsumption pruning); `exhausted` means the frontier is the full
    saturation."""

    __slots__ = ("deriv", "elements", "uids", "pending", "exhausted",
                 "iterations", "started")

    def __init__(self, deriv: Term):
        self.deriv = deriv
        self.elements: list[Term] = []
        self.uids: set[int] = set()
        self.pending: deque = deque()
        self.exhausted = False
        self.iterations = 0
        self.started = False

    def frontier_set(self) -> Term:
        return mk_set(self.elements)


# -- subsumption -------------------------------------------------------------


def subsumes(t: Term, u: Term, memo: Optional[dict] = None) -> bool:
    """The ordering used for antichain pruning.

    Set terms: subset, or for-all-exists lifting.  Products descend
    component-wise, complement flips the order, projection descends.
    Atoms and derivatives compare by identity (the safe base case:
    pruning less is always sound).
    """
    if t is u:
        return True
    if memo is None:
        memo = {}
    key = (t.uid, u.uid)
    hit = memo.get(key)
    if hit is not None:
        return hit
    memo[key] = False  # cycle guard; terms are acyclic but pairs repeat
    result = _subsumes_raw(t, u, memo)
    memo[key] = result
    return result


def _subsumes_raw(t: Term, u: Term, memo: dict) -> bool:
    if t.kind != u.kind:
        return False
    if t.kind == T_SET:
        if t.elems and set(e.uid for e in t.elems) <= set(e.uid for e in u.elems):
            return True
        return all(any(subsumes(a, b, memo) for b in u.elems) for a in t.elems)
    if t.kind in (T_AND, T_OR):
        return subsumes(t.left, u.left, memo) and subsumes(t.right, u.right, memo)
    if t.kind == T_NOT:
        return subsumes(u.left, t.left, memo)
    if t.kind == T_PROJ:
        return t.vars == u.vars and subsumes(t.left, u.left, memo)
    return False  # distinct atoms / derivatives


def prune(terms: Iterable[Term]) -> set[Term]:
    """Antichain of subsumption-maximal elements (language-preserving)."""
    memo: dict = {}
    kept: list[Term] = []
    for t in terms:
        if any(subsumes(t, k, memo) for k in kept):
            continue
        kept = [k for k in kept if not subsumes(k, t, memo)]
        kept.append(t)
    return set(kept)


# -- interference and the preprocessing rewrites ------------------------------


def interferes(t: Term, u: Term, resolve: Optional[Callable] = None) -> bool:
    """May the two terms share base-automaton state space?

    Gates the nondeterministic-union rewrite and the modified transition
    function: pairs that do not interfere transition to the sink.
    """
    if t is u:
        return True
    if t.kind == T_DERIV:
        return interferes(_resolved(t, resolve), u, resolve)
    if u.kind == T_DERIV:
        return interferes(t, _resolved(u, resolve), resolve)
    if t.kind == T_SET and u.kind == T_SET:
        return any(interferes(a, b, resolve) for a in t.elems for b in u.elems)
    if t.kind != u.kind:
        return False
    if t.kind == ATOM:
        return t.automaton is u.automaton
    if t.kind in (T_AND, T_OR):
        return interferes(t.left, u.left, resolve) or \
            interferes(t.right, u.right, resolve)
    if t.kind == T_NOT:
        return interferes(t.left, u.left, resolve)
    if t.kind == T_PROJ:
        return interferes(t.left, u.left, resolve)
    return False


def _resolved(d: Term, resolve: Optional[Callable]) -> Term:
    if resolve is not None:
        return resolve(d)
    if d.saturated is not None:
        return d.saturated
    raise ValueError("interference on an unsaturated derivative needs a resolver")


def push_projections(t: Term) -> Term:
    """Rewrite pi_V(S) into {pi_V(t) | t in S}, bottom-up to fixpoint."""
    return _rewrite(t, _push_rule)


def _push_rule(t: Term) -> Optional[Term]:
    if t.kind == T_PROJ and t.left.kind == T_SET:
        return mk_set(tuple(mk_proj(t.vars, e) for e in t.left.elems))
    return None


def flatten(t: Term) -> Term:
    """Product flattening: replace set-level products by element-wise
    products, pushing projections inside set terms first."""
    return _rewrite(t, _flatten_rule)


def _flatten_rule(t: Term) -> Optional[Term]:
    pushed = _push_rule(t)
    if pushed is not None:
        return pushed
    if t.kind in (T_OR, T_AND) and t.left.kind == T_SET and t.right.kind == T_SET \
            and t.left.elems and t.right.elems:
        op = mk_or if t.kind == T_OR else mk_and
        return mk_set(tuple(op(a, b) for a in t.left.elems for b in t.right.elems))
    return None


def nondet_union_rewrite(t: Term, resolve: Optional[Callable] = None) -> Term:
    """Replace non-interfering set-level disjunctions by plain set union.

    Callers must evaluate the result with the interference-gated
    transition function.
    """

    def rule(x: Term) -> Optional[Term]:
        pushed = _push_rule(x)
        if pushed is not None:
            return pushed
        if x.kind == T_OR and x.left.kind == T_SET and x.right.kind == T_SET \
                and x.left.elems and x.right.elems \
                and not interferes(x.left, x.right, resolve):
            return mk_set(x.left.elems + x.right.elems)
        return None

    return _rewrite(t, rule)


def _rewrite(t: Term, rule: Callable[[Term], Optional[Term]]) -> Term:
    """Apply a local rewrite rule bottom-up until nothing changes."""
    while True:
        if t.kind in (T_OR, T_AND):
            op = mk_or if t.kind == T_OR else mk_and
            t2 = op(_rewrite(t.left, rule), _rewrite(t.right, rule))
        elif t.kind == T_NOT:
            t2 = mk_not(_rewrite(t.left, rule))
        elif t.kind == T_PROJ:
            t2 = mk_proj(t.vars, _rewrite(t.left, rule))
        elif t.kind == T_SET:
            t2 = mk_set(tuple(_rewrite(e, rule) for e in t.elems))
        elif t.kind == T_DERIV:
            t2 = mk_deriv(_rewrite(t.body, rule))
        else:
            t2 = t
        applied = rule(t2)
        if applied is None or applied is t2:
            return t2
        t = applied


def preprocess(t: Term, config: EngineConfig,
               resolve: Optional[Callable] = None) -> Term:
    """The flag-gated pre-pass run once before the top-level fixpoint.

    Order: projection push, product flattening, nondeterministic union.
    """
    if config.flatten or config.nondet_union:
        t = push_projections(t)
    if config.flatten:
        t = flatten(t)
    if config.nondet_union:
        t = nondet_union_rewrite(t, resolve)
    return t


# -- the engine ---------------------------------------------------------------


class LazyEngine:
    """One satisfiability decision.  Single-threaded; continuations are
    owned by the engine and never shared."""

    def __init__(self, phi: Formula, config: Optional[EngineConfig] = None):
        self.config = config or EngineConfig()
        if self.config.antiprenex:
            phi = _antiprenex(phi)
        self.phi = phi
        self.alphabet = alphabet_of(phi)
        self.stats = Stats()
        self._terms_before = created_terms()
        self._deadline = None
        if self.config.timeout_s is not None:
            self._deadline = time.monotonic() + self.config.timeout_s
        gate = self._gate if self.config.nondet_union else None
        self._gate_memo: dict[tuple[int, int], bool] = {}
        self.ctx = TermContext(self.alphabet,
                               resolve_deriv=self._full_saturation, gate=gate)
        self.continuations: dict[int, Continuation] = {}
        self._rt_memo: dict[int, bool] = {}
        self._sub_memo: dict = {}
        self.root_term = translate(phi, self.alphabet)
        self.root_term = preprocess(self.root_term, self.config,
                                    self._full_saturation)

    # - plumbing -

    def _gate(self, t: Term, u: Term) -> bool:
        key = (t.uid, u.uid)
        hit = self._gate_memo.get(key)
        if hit is None:
            hit = interferes(t, u, self._full_saturation)
            self._gate_memo[key] = hit
        return hit

    def _check_limits(self):
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise SolverTimeout(f"timed out after {self.config.timeout_s}s")
        if created_terms() - self._terms_before > self.config.term_cap:
            raise ResourceLimit(f"term cap {self.config.term_cap} exceeded")

    def _event(self, *info):
        if self.config.trace:
            self.stats.events.append(info)

    # - root test -

    def rt(self, t: Term) -> bool:
        """Root test; short-circuited and early-terminating when lazy_rt
        is on, fully evaluating otherwise.  Results are conclusive and
        therefore memoizable."""
        hit = self._rt_memo.get(t.uid)
        if hit is not None:
            return hit
        lazy = self.config.lazy_rt
        if t.kind == ATOM:
            result = t.automaton.is_root(t.state)
        elif t.kind == T_OR:
            if lazy:
                result = self.rt(t.left) or self.rt(t.right)
            else:
                left, right = self.rt(t.left), self.rt(t.right)
                result = left or right
        elif t.kind == T_AND:
            if lazy:
                result = self.rt(t.left) and self.rt(t.right)
            else:
                left, right = self.rt(t.left), self.rt(t.right)
                result = left and right
        elif t.kind == T_NOT:
            result = not self.rt(t.left)
        elif t.kind == T_PROJ:
            result = self.rt(t.left)
        elif t.kind == T_SET:
            result = any(self.rt(e) for e in t.elems)
        else:  # derivative
            if lazy:
                _, witness = self.lazy_saturate(t, self.rt)
                result = witness is not None
            else:
                result = self.rt(self._full_saturation(t))
        self._rt_memo[t.uid] = result
        return result

    # - saturation with continuations -

    def _continuation(self, d: Term) -> Continuation:
        cont = self.continuations.get(d.uid)
        if cont is None:
            cont = Continuation(d)
            self.continuations[d.uid] = cont
            if d.saturated is not None:
                # a fully memoized saturation from an earlier decision
                cont.elements = list(d.saturated.elems)
                cont.uids = {e.uid for e in cont.elements}
                cont.exhausted = True
                cont.started = True
        return cont

    def lazy_saturate(self, d: Term,
                      stop: Optional[Callable[[Term], bool]]
                      ) -> tuple[Continuation, Optional[Term]]:
        """Extend the derivative's frontier by zero-symbol steps until
        `stop` accepts a produced term or the fixpoint stabilizes.

        Resuming never recomputes earlier steps; the stop predicate is
        first re-applied to the frontier produced so far.
        """
        cont = self._continuation(d)
        if cont.started:
            self.stats.saturation_resumptions += 1
        else:
            cont.started = True
            self._seed(cont, d.body.elems)
        if stop is not None:
            for t in cont.elements:
                if stop(t):
                    return cont, t
        witness = self._run_fixpoint(cont, (self.alphabet.zero,), stop)
        if witness is None and not cont.pending:
            if not cont.exhausted:
                cont.exhausted = True
                if self.ctx.gate is None and not self.config.subsumption:
                    d.saturated = cont.frontier_set()
        elif witness is not None:
            self.stats.early_terminations += 1
            self._event("saturation_early_stop", d.uid, witness.uid,
                        len(cont.elements))
        return cont, witness

    def _full_saturation(self, d: Term) -> Term:
        cont, _ = self.lazy_saturate(d, None)
        return cont.frontier_set()

    # - the shared pruned fixpoint -

    def _seed(self, cont: Continuation, terms: Iterable[Term]):
        for t in terms:
            self._insert(cont, t)

    def _insert(self, cont: Continuation, t: Term) -> bool:
        """Add a term to the frontier, maintaining the antichain when
        subsumption is on.  Returns True if the term was added."""
        if t.uid in cont.uids:
            return False
        if self.config.subsumption:
            for e in cont.elements:
                if subsumes(t, e, self._sub_memo):
                    self.stats.subsumption_prunes += 1
                    return False
            dropped = [e for e in cont.elements
                       if subsumes(e, t, self._sub_memo)]
            if dropped:
                self.stats.subsumption_prunes += len(dropped)
                gone = {e.uid for e in dropped}
                cont.elements = [e for e in cont.elements if e.uid not in gone]
                cont.uids -= gone
                cont.pending = deque(
                    (a, b) for a, b in cont.pending
                    if a.uid not in gone and b.uid not in gone)
        for e in cont.elements:
            cont.pending.append((t, e))
            cont.pending.append((e, t))
        cont.pending.append((t, t))
        cont.elements.append(t)
        cont.uids.add(t.uid)
        self.stats.frontier_peak = max(self.stats.frontier_peak,
                                       len(cont.elements))
        return True

    def _run_fixpoint(self, cont: Continuation, symbols: tuple,
                      stop: Optional[Callable[[Term], bool]]) -> Optional[Term]:
        """Drain pending pairs batch-by-batch; prune after every batch;
        test `stop` on each newly added term."""
        while cont.pending:
            self._check_limits()
            cont.iterations += 1
            self.stats.fixpoint_iterations += 1
            batch = cont.pending
            cont.pending = deque()
            produced: dict[int, Term] = {}
            for a, b in batch:
                if a.uid not in cont.uids or b.uid not in cont.uids:
                    continue
                for sym in symbols:
                    for s in successors(a, b, sym, self.ctx):
                        produced.setdefault(s.uid, s)
            for s in sorted(produced.values(), key=lambda x: x.uid):
                if self._insert(cont, s) and stop is not None and stop(s):
                    return s
        return None

    # - decision -

    def run(self) -> str:
        start = time.monotonic()
        try:
            if free_vars(self.phi):
                verdict = self._decide_top_fixpoint()
            else:
                # ground: satisfiable iff the bottom tree is accepted,
                # i.e. the leaf state term is itself a root
                verdict = SAT if self.rt(self.root_term) else UNSAT
        finally:
            self.stats.wall_ms = (time.monotonic() - start) * 1000.0
            self.stats.term_nodes = created_terms() - self._terms_before
        self.stats.result = verdict
        return verdict

    def _decide_top_fixpoint(self) -> str:
        cont = Continuation(self.root_term)  # not tied to a derivative
        self._seed(cont, self.root_term.elems)
        for t in cont.elements:
            if self.rt(t):
                self._event("top_early_stop", t.uid, len(cont.elements))
                self.stats.early_terminations += 1
                return SAT
        witness = self._run_fixpoint(cont, tuple(self.alphabet.symbols()),
                                     self.rt)
        if witness is not None:
            self._event("top_early_stop", witness.uid, len(cont.elements))
            self.stats.early_terminations += 1
            return SAT
        return UNSAT


def decide_sat(phi: Formula, config: Optional[EngineConfig] = None,
               stats_out: Optional[list] = None) -> str:
    """Lazy-engine satisfiability of a desugared, renamed-apart formula."""
    engine = LazyEngine(phi, config)
    verdict = engine.run()
    if stats_out is not None:
        stats_out.append(engine.stats)
    return verdict


def decide_valid(phi: Formula, config: Optional[EngineConfig] = None,
                 stats_out: Optional[list] = None) -> str:
    verdict = decide_sat(Not(phi), config, stats_out)
    return VALID if verdict == UNSAT else INVALID
