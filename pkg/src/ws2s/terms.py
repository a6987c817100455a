"""Automata terms: hash-consed symbolic states of the tree-automata
constructions, their root test, transition function, derivative
saturation, the formula-to-term translation, and a compiler from terms
back to explicit automata.

A term is one of: an atomic state of a base automaton; a pairwise
disjunction t + u or conjunction t & u; a complement ~t; a projection
pi_V(t); a set term {t1, ..., tn} (a subset-construction state, with
{{...}} collapsed and the empty set acting as universal sink); or a
derivative S - 0* denoting everything zero-reachable from S.  The term
DAG is globally interned: structurally equal terms are the same object.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Optional

from .errors import ResourceLimit
from .formula import (And, Exists, Formula, Not, Or, Var, is_atom)
from .trees import Alphabet
from .tautomata import TreeAutomaton, base_automaton

ATOM, T_OR, T_AND, T_NOT, T_PROJ, T_SET, T_DERIV = range(7)

_KIND_NAMES = {ATOM: "atom", T_OR: "+", T_AND: "&", T_NOT: "~",
               T_PROJ: "proj", T_SET: "set", T_DERIV: "deriv"}


class Term:
    """One hash-consed term node; compare and hash by identity."""

    __slots__ = ("kind", "left", "right", "vars", "elems", "state",
                 "automaton", "body", "saturated", "uid")

    def __init__(self, kind: int, uid: int):
        self.kind = kind
        self.uid = uid
        self.left: Optional[Term] = None
        self.right: Optional[Term] = None
        self.vars: Optional[frozenset[Var]] = None
        self.elems: tuple[Term, ...] = ()
        self.state: Optional[int] = None
        self.automaton: Optional[TreeAutomaton] = None
        self.body: Optional[Term] = None
        self.saturated: Optional[Term] = None  # memoized full saturation

    def __repr__(self):
        return f"<{_KIND_NAMES[self.kind]}:{self.uid}>"

    def __str__(self):
        return pretty(self)


class _TermPool:
    def __init__(self):
        self._lock = threading.Lock()
        self._nodes: dict = {}
        self.created = 0

    def get(self, key, build: Callable[[int], Term]) -> Term:
        with self._lock:
            node = self._nodes.get(key)
            if node is None:
                self.created += 1
                node = build(self.created)
                self._nodes[key] = node
            return node


_POOL = _TermPool()


def created_terms() -> int:
    """Total hash-consed nodes ever built; deltas give per-run node counts."""
    return _POOL.created


def mk_atom(state: int, automaton: TreeAutomaton) -> Term:
    def build(uid):
        t = Term(ATOM, uid)
        t.state = state
        t.automaton = automaton
        return t

    return _POOL.get(("q", state), build)


def _mk_bin(kind: int, a: Term, b: Term) -> Term:
    def build(uid):
        t = Term(kind, uid)
        t.left = a
        t.right = b
        return t

    return _POOL.get((kind, a.uid, b.uid), build)


def mk_or(a: Term, b: Term) -> Term:
    return _mk_bin(T_OR, a, b)


def mk_and(a: Term, b: Term) -> Term:
    return _mk_bin(T_AND, a, b)


def mk_not(a: Term) -> Term:
    def build(uid):
        t = Term(T_NOT, uid)
        t.left = a
        return t

    return _POOL.get((T_NOT, a.uid), build)


def mk_proj(vs: Iterable[Var], a: Term) -> Term:
    vset = frozenset(vs)

    def build(uid):
        t = Term(T_PROJ, uid)
        t.vars = vset
        t.left = a
        return t

    key = (T_PROJ, tuple(sorted(v.uid for v in vset)), a.uid)
    return _POOL.get(key, build)


def mk_set(elements: Iterable[Term]) -> Term:
    """Canonical set term: deduplicated, ordered, {{...}} collapsed."""
    elems = tuple(sorted({e.uid: e for e in elements}.values(), key=lambda e: e.uid))
    if len(elems) == 1 and elems[0].kind == T_SET:
        return elems[0]

    def build(uid):
        t = Term(T_SET, uid)
        t.elems = elems
        return t

    return _POOL.get((T_SET, tuple(e.uid for e in elems)), build)


def mk_deriv(body: Term) -> Term:
    if body.kind != T_SET:
        raise ValueError("derivative body must be a set term")

    def build(uid):
        t = Term(T_DERIV, uid)
        t.body = body
        return t

    return _POOL.get((T_DERIV, body.uid), build)


SINK = mk_set(())


def term_shape(t: Term):
    """Structural skeleton with atomic states erased.

    Two terms can exchange non-sink transitions only if shapes agree.
    """
    if t.kind == ATOM:
        return "q"
    if t.kind in (T_OR, T_AND):
        return (_KIND_NAMES[t.kind], term_shape(t.left), term_shape(t.right))
    if t.kind == T_NOT:
        return ("~", term_shape(t.left))
    if t.kind == T_PROJ:
        return ("proj", tuple(sorted(v.uid for v in t.vars)), term_shape(t.left))
    if t.kind == T_SET:
        return ("set", frozenset(term_shape(e) for e in t.elems))
    return ("deriv", term_shape(t.body))


def pretty(t: Term) -> str:
    """Render using the usual notation: {...}, +, &, ~, π_V(...), − 0̄⧄."""
    if t.kind == ATOM:
        return f"q{t.state}"
    if t.kind == T_OR:
        return f"({pretty(t.left)} + {pretty(t.right)})"
    if t.kind == T_AND:
        return f"({pretty(t.left)} & {pretty(t.right)})"
    if t.kind == T_NOT:
        return f"~{pretty(t.left)}"
    if t.kind == T_PROJ:
        names = ",".join(sorted(v.name for v in t.vars))
        return f"π_{{{names}}}({pretty(t.left)})"
    if t.kind == T_SET:
        return "{" + ", ".join(pretty(e) for e in t.elems) + "}"
    return f"({pretty(t.body)} − 0̄⧄)"


# -- translation -------------------------------------------------------------


def translate(phi: Formula, alphabet: Alphabet) -> Term:
    """Automata term of a desugared, renamed-apart formula.

    Every atom occurrence gets a freshly minted base automaton, so terms
    from different occurrences never share atomic state space.  The
    result is the set term wrapping the formula's state term.
    """
    return mk_set((state_term(phi, alphabet),))


def state_term(phi: Formula, alphabet: Alphabet) -> Term:
    if is_atom(phi):
        aut = base_automaton(phi, alphabet)
        return mk_set(tuple(mk_atom(q, aut) for q in sorted(aut.leaf_states)))
    if isinstance(phi, And):
        return mk_and(state_term(phi.left, alphabet), state_term(phi.right, alphabet))
    if isinstance(phi, Or):
        return mk_or(state_term(phi.left, alphabet), state_term(phi.right, alphabet))
    if isinstance(phi, Not):
        return mk_not(state_term(phi.sub, alphabet))
    if isinstance(phi, Exists):
        inner = state_term(phi.body, alphabet)
        return mk_deriv(mk_set((mk_proj(phi.vars, inner),)))
    raise TypeError(f"translate expects a core formula, got {phi!r}")


# -- evaluation context -------------------------------------------------------


class TermContext:
    """Shared machinery for one decision: transition memo, derivative
    resolution, and the optional interference gate (used by the
    nondeterministic-union mode)."""

    def __init__(self, alphabet: Alphabet,
                 resolve_deriv: Optional[Callable[[Term], Term]] = None,
                 gate: Optional[Callable[[Term, Term], bool]] = None):
        self.alphabet = alphabet
        self.resolve_deriv = resolve_deriv or (lambda d: saturate(d, self))
        self.gate = gate
        self._delta_memo: dict[tuple[int, int, int], frozenset[Term]] = {}
        self._proj_masks: dict[frozenset, list[int]] = {}
        self._rt_memo: dict[int, bool] = {}
        self._sat_memo: dict[int, Term] = {}

    def expansions(self, vs: frozenset, symbol: int) -> list[int]:
        subs = self._proj_masks.get(vs)
        if subs is None:
            mask = self.alphabet.mask(vs)
            subs = self.alphabet.submasks(mask)
            self._proj_masks[vs] = subs
        base = symbol & ~self.alphabet.mask(vs)
        return [base | s for s in subs]


def successors(t: Term, u: Term, symbol: int, ctx: TermContext) -> frozenset[Term]:
    """Transition function on term pairs for one symbol.

    Applies the rule matching both shapes; shape/base mismatches fall to
    the universal sink.  Derivative arguments are resolved to their
    (full) saturation first.  With an interference gate installed,
    non-interfering pairs also fall to the sink.
    """
    memo = ctx._delta_memo
    key = (t.uid, u.uid, symbol)
    hit = memo.get(key)
    if hit is not None:
        return hit

    if t.kind == T_DERIV:
        result = successors(ctx.resolve_deriv(t), u, symbol, ctx)
        memo[key] = result
        return result
    if u.kind == T_DERIV:
        result = successors(t, ctx.resolve_deriv(u), symbol, ctx)
        memo[key] = result
        return result

    if ctx.gate is not None and not ctx.gate(t, u):
        result = frozenset((SINK,))
        memo[key] = result
        return result

    result = _successors_raw(t, u, symbol, ctx)
    memo[key] = result
    return result


_SINK_SET = frozenset((SINK,))


def _successors_raw(t: Term, u: Term, symbol: int, ctx: TermContext) -> frozenset[Term]:
    kind = t.kind
    if kind != u.kind:
        return _SINK_SET
    if kind == ATOM:
        if t.automaton is u.automaton:
            succ = t.automaton.delta(t.state, u.state, symbol)
            if succ:
                return frozenset(mk_atom(q, t.automaton) for q in succ)
        return _SINK_SET
    if kind == T_OR:
        lefts = successors(t.left, u.left, symbol, ctx)
        rights = successors(t.right, u.right, symbol, ctx)
        return frozenset(mk_or(a, b) for a in lefts for b in rights)
    if kind == T_AND:
        lefts = successors(t.left, u.left, symbol, ctx)
        rights = successors(t.right, u.right, symbol, ctx)
        return frozenset(mk_and(a, b) for a in lefts for b in rights)
    if kind == T_NOT:
        return frozenset(mk_not(v) for v in successors(t.left, u.left, symbol, ctx))
    if kind == T_PROJ:
        if t.vars != u.vars:
            return _SINK_SET
        acc: set[Term] = set()
        for sym in ctx.expansions(t.vars, symbol):
            acc.update(successors(t.left, u.left, sym, ctx))
        return frozenset(mk_proj(t.vars, v) for v in acc)
    if kind == T_SET:
        acc = set()
        for a in t.elems:
            for b in u.elems:
                acc.update(successors(a, b, symbol, ctx))
        return frozenset((mk_set(acc),))
    raise AssertionError("unreachable")


# -- root test and saturation -------------------------------------------------


def is_root(t: Term, ctx: Optional[TermContext] = None) -> bool:
    """Does the term denote a root (accepting) state?

    Fully evaluates derivative saturations; the lazy engine has its own
    short-circuiting variant.
    """
    memo = ctx._rt_memo if ctx is not None else None
    if memo is not None:
        cached = memo.get(t.uid)
        if cached is not None:
            return cached
    if t.kind == ATOM:
        result = t.automaton.is_root(t.state)
    elif t.kind == T_OR:
        result = is_root(t.left, ctx) or is_root(t.right, ctx)
    elif t.kind == T_AND:
        result = is_root(t.left, ctx) and is_root(t.right, ctx)
    elif t.kind == T_NOT:
        result = not is_root(t.left, ctx)
    elif t.kind == T_PROJ:
        result = is_root(t.left, ctx)
    elif t.kind == T_SET:
        result = any(is_root(e, ctx) for e in t.elems)
    else:  # derivative
        if ctx is None:
            raise ValueError("root test on a derivative needs a context")
        result = is_root(ctx.resolve_deriv(t), ctx)
    if memo is not None:
        memo[t.uid] = result
    return result


def saturate(d: Term, ctx: TermContext, cap: int = 1_000_000,
             rounds_out: Optional[list] = None) -> Term:
    """Full saturation of a derivative: least fixpoint of zero-symbol
    reachability from its body.

    Memoized on the node under the standard transition function; gated
    contexts keep their saturations to themselves.
    """
    if d.kind != T_DERIV:
        raise ValueError("saturate expects a derivative term")
    if ctx.gate is None and d.saturated is not None:
        return d.saturated
    cached = ctx._sat_memo.get(d.uid)
    if cached is not None:
        return cached
    zero = ctx.alphabet.zero
    elems: dict[int, Term] = {e.uid: e for e in d.body.elems}
    frontier = list(elems.values())
    processed: list[Term] = []
    while frontier:
        if rounds_out is not None:
            rounds_out.append(len(elems))
        new: dict[int, Term] = {}
        everything = processed + frontier
        for q in frontier:
            for r in everything:
                for a, b in ((q, r), (r, q)):
                    for s in successors(a, b, zero, ctx):
                        if s.uid not in elems and s.uid not in new:
                            new[s.uid] = s
        processed = everything
        elems.update(new)
        if len(elems) > cap:
            raise ResourceLimit(f"saturation exceeded term cap {cap}")
        frontier = list(new.values())
    if rounds_out is not None:
        rounds_out.append(len(elems))
    result = mk_set(elems.values())
    ctx._sat_memo[d.uid] = result
    if ctx.gate is None:
        d.saturated = result
    return result


# -- compilation to an explicit automaton -------------------------------------


def compile_term(aterm: Term, alphabet: Alphabet, cap: int = 200_000,
                 ctx: Optional[TermContext] = None) -> TreeAutomaton:
    """Explicit automaton denoted by an automata term.

    States are all transition-reachable terms from the set term's
    elements (a derivative is compiled via its saturation); roots by the
    root test.  Intended for the naive engine and language-level tests.
    """
    ctx = ctx or TermContext(alphabet)
    if aterm.kind == T_DERIV:
        aterm = ctx.resolve_deriv(aterm)
    if aterm.kind != T_SET:
        raise ValueError("compile expects an automata term (set or derivative)")
    nsym = alphabet.size
    node_of: dict[int, Term] = {}
    rows: dict[tuple[int, int], tuple] = {}

    leaves = []
    for e in aterm.elems:
        node_of[e.uid] = e
        leaves.append(e.uid)
    explored = list(node_of.values())
    i = 0
    while i < len(explored):
        q = explored[i]
        i += 1
        for r in explored[:i]:
            for a, b in ((q, r), (r, q)) if q is not r else ((q, q),):
                row = []
                for sym in range(nsym):
                    succ = successors(a, b, sym, ctx)
                    for s in succ:
                        if s.uid not in node_of:
                            node_of[s.uid] = s
                            explored.append(s)
                            if len(explored) > cap:
                                raise ResourceLimit(
                                    f"term compilation exceeded cap {cap}")
                    row.append(frozenset(s.uid for s in succ))
                rows[(a.uid, b.uid)] = tuple(row)

    def row_fn(q, r):
        row = rows.get((q, r))
        if row is not None:
            return row
        out = []
        for sym in range(nsym):
            succ = successors(node_of[q], node_of[r], sym, ctx)
            out.append(frozenset(s.uid for s in succ))
        return tuple(out)

    roots = {uid for uid, node in node_of.items() if is_root(node, ctx)}
    return TreeAutomaton(alphabet, frozenset(node_of), frozenset(leaves),
                         row_fn, lambda q: q in roots, False, True, "term")
