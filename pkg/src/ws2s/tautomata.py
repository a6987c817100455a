"""Explicit bottom-up binary tree automata and their operation algebra.

States are interned integers from a global pool; composite states
(product pairs, subset tuples) are canonicalized before interning so
structurally equal states hash identically everywhere.  Transition
functions are closures evaluated per state pair and cached as a row of
successor sets indexed by symbol, which keeps huge product spaces
usable: only reachable rows are ever computed.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Optional

from .errors import AlphabetMismatch, NotDeterministic, ResourceLimit
from .formula import (EqEpsilon, EqPos, Formula, Sing, Subseteq, SuccLeft,
                      SuccRight, Var)
from .trees import Alphabet, BOTTOM, Tree


class StatePool:
    """Interns state descriptions to integer ids, thread-safely."""

    def __init__(self):
        self._lock = threading.Lock()
        self._ids: dict = {}
        self._keys: list = [None]

    def intern(self, key) -> int:
        with self._lock:
            sid = self._ids.get(key)
            if sid is None:
                sid = len(self._keys)
                self._ids[key] = sid
                self._keys.append(key)
            return sid

    def fresh(self, tag: str) -> int:
        with self._lock:
            sid = len(self._keys)
            self._keys.append(("base", tag, sid))
            return sid

    def key_of(self, sid: int):
        return self._keys[sid]


POOL = StatePool()


class TreeAutomaton:
    """Bottom-up binary TA: (states, delta, leaf states, root states).

    `delta_row(q, r)` returns the tuple of successor frozensets for every
    symbol of the alphabet; `deterministic`/`complete` are claims made by
    the constructors (validators below check them on small automata).
    """

    def __init__(self, alphabet: Alphabet, states: frozenset[int],
                 leaf_states: frozenset[int], row_fn: Callable,
                 root_fn: Callable[[int], bool], deterministic: bool,
                 complete: bool, kind: str = "ta"):
        self.alphabet = alphabet
        self.states = states
        self.leaf_states = leaf_states
        self._row_fn = row_fn
        self._root_fn = root_fn
        self._rows: dict[tuple[int, int], tuple] = {}
        self.deterministic = deterministic
        self.complete = complete
        self.kind = kind

    @property
    def state_count(self) -> int:
        return len(self.states)

    def delta_row(self, q: int, r: int) -> tuple:
        row = self._rows.get((q, r))
        if row is None:
            row = self._row_fn(q, r)
            self._rows[(q, r)] = row
        return row

    def delta(self, q: int, r: int, symbol: int) -> frozenset[int]:
        return self.delta_row(q, r)[symbol]

    def is_root(self, q: int) -> bool:
        return self._root_fn(q)

    @property
    def root_states(self) -> frozenset[int]:
        return frozenset(q for q in self.states if self._root_fn(q))

    def dump(self, max_states: int = 2000) -> str:
        """Golden-test text form: states, leaves, roots, transitions."""
        if self.state_count > max_states:
            raise ResourceLimit(f"dump of {self.state_count} states exceeds {max_states}")
        order = sorted(self.states)
        lines = [f"states {' '.join(map(str, order))}",
                 f"leaf {' '.join(map(str, sorted(self.leaf_states)))}",
                 f"root {' '.join(map(str, sorted(self.root_states)))}"]
        for q in order:
            for r in order:
                row = self.delta_row(q, r)
                for a, succ in enumerate(row):
                    if succ:
                        lines.append(
                            f"({q},{r}) -{self.alphabet.symbol_str(a)}-> "
                            f"{' '.join(map(str, sorted(succ)))}")
        return "\n".join(lines)


def _require_same_alphabet(a: TreeAutomaton, b: TreeAutomaton):
    if a.alphabet != b.alphabet:
        raise AlphabetMismatch("automata are over different alphabets")


# -- base automata ----------------------------------------------------------

# Registry so automata terms can resolve an atomic state back to its
# base automaton (root membership and transitions).
_STATE_AUTOMATON: dict[int, TreeAutomaton] = {}


def automaton_of_state(q: int) -> Optional[TreeAutomaton]:
    return _STATE_AUTOMATON.get(q)


def _register(aut: TreeAutomaton):
    for q in aut.states:
        _STATE_AUTOMATON[q] = aut
    return aut


def _table_automaton(alphabet: Alphabet, n_states: int, kind: str,
                     step: Callable, leaf: int, roots: set[int]) -> TreeAutomaton:
    """Deterministic complete TA from a local-index step function.

    `step(lq, rq, symbol) -> local index`; local indices are mapped to
    fresh pool ids so every mint is disjoint from all previous ones.
    """
    ids = [POOL.fresh(kind) for _ in range(n_states)]
    back = {sid: i for i, sid in enumerate(ids)}
    root_ids = frozenset(ids[i] for i in roots)
    nsym = alphabet.size

    def row_fn(q, r):
        lq, rq = back[q], back[r]
        return tuple(frozenset((ids[step(lq, rq, a)],)) for a in range(nsym))

    aut = TreeAutomaton(alphabet, frozenset(ids), frozenset((ids[leaf],)),
                        row_fn, lambda q: q in root_ids, True, True, kind)
    return _register(aut)


def base_sing(x: Var, alphabet: Alphabet) -> TreeAutomaton:
    """sing(x): 0 marks / exactly 1 / sink, root accepts exactly one."""
    # locals: 0 = no marks, 1 = one mark, 2 = sink
    def step(lq, rq, a):
        if lq == 2 or rq == 2:
            return 2
        total = lq + rq + alphabet.bit(a, x)
        return total if total <= 1 else 2

    return _table_automaton(alphabet, 3, f"sing({x.name})", step, 0, {1})


def base_eq_epsilon(x: Var, alphabet: Alphabet) -> TreeAutomaton:
    """x = {e}: mark exactly at the subtree root and nowhere else."""
    # locals: 0 = clean, 1 = marked at root, 2 = sink
    def step(lq, rq, a):
        if lq != 0 or rq != 0:
            return 2
        return 1 if alphabet.bit(a, x) else 0

    return _table_automaton(alphabet, 3, f"eqeps({x.name})", step, 0, {1})


def base_eq_pos(x: Var, pos: str, alphabet: Alphabet) -> TreeAutomaton:
    """x = {p}: single mark whose path from the subtree root spells p."""
    suffixes = [pos[i:] for i in range(len(pos) + 1)]  # includes '' and pos
    index = {s: i for i, s in enumerate(suffixes)}
    clean = len(suffixes)
    sink = clean + 1

    def step(lq, rq, a):
        if lq == sink or rq == sink:
            return sink
        if alphabet.bit(a, x):
            return index[""] if lq == clean and rq == clean else sink
        if lq == clean and rq == clean:
            return clean
        if rq == clean and lq < clean:
            ext = "L" + suffixes[lq]
            return index.get(ext, sink)
        if lq == clean and rq < clean:
            ext = "R" + suffixes[rq]
            return index.get(ext, sink)
        return sink

    return _table_automaton(alphabet, sink + 1, f"eqpos({x.name},{pos})",
                            step, clean, {index[pos]})


def base_subseteq(x: Var, y: Var, alphabet: Alphabet) -> TreeAutomaton:
    """x sub y: every x-mark is a y-mark."""
    # locals: 0 = ok, 1 = violated
    def step(lq, rq, a):
        if lq or rq:
            return 1
        return 1 if alphabet.bit(a, x) > alphabet.bit(a, y) else 0

    return _table_automaton(alphabet, 2, f"sub({x.name},{y.name})", step, 0, {0})


def _base_succ(x: Var, y: Var, alphabet: Alphabet, child: str) -> TreeAutomaton:
    # locals: 0 = consistent with root x-bit 0, 1 = same with bit 1, 2 = sink
    # A node's `child`-side subtree root must carry x iff the node carries y;
    # the other side must not carry x; the whole-tree root must not carry x.
    def step(lq, rq, a):
        if lq == 2 or rq == 2:
            return 2
        carrier, other = (lq, rq) if child == "L" else (rq, lq)
        if carrier != alphabet.bit(a, y) or other != 0:
            return 2
        return alphabet.bit(a, x)

    tag = f"succ{child}({x.name},{y.name})"
    return _table_automaton(alphabet, 3, tag, step, 0, {0})


def base_succ_left(x: Var, y: Var, alphabet: Alphabet) -> TreeAutomaton:
    """x = S1(y): x is exactly the left children of y's positions."""
    return _base_succ(x, y, alphabet, "L")


def base_succ_right(x: Var, y: Var, alphabet: Alphabet) -> TreeAutomaton:
    """x = S2(y): x is exactly the right children of y's positions."""
    return _base_succ(x, y, alphabet, "R")


def base_automaton(atom: Formula, alphabet: Alphabet) -> TreeAutomaton:
    """Fresh complete deterministic TA for an atomic formula.

    Every call mints disjoint states, so distinct atom occurrences never
    share state space.
    """
    if isinstance(atom, Sing):
        return base_sing(atom.x, alphabet)
    if isinstance(atom, EqEpsilon):
        return base_eq_epsilon(atom.x, alphabet)
    if isinstance(atom, EqPos):
        return base_eq_pos(atom.x, atom.pos, alphabet)
    if isinstance(atom, Subseteq):
        return base_subseteq(atom.x, atom.y, alphabet)
    if isinstance(atom, SuccLeft):
        return base_succ_left(atom.x, atom.y, alphabet)
    if isinstance(atom, SuccRight):
        return base_succ_right(atom.x, atom.y, alphabet)
    raise TypeError(f"no base automaton for {atom!r}")


# -- operations -------------------------------------------------------------


def _product(a: TreeAutomaton, b: TreeAutomaton, roots_by, kind: str,
             cap: int = 10**6) -> TreeAutomaton:
    _require_same_alphabet(a, b)
    if not (a.complete and b.complete):
        raise ValueError("product requires complete operands")
    if a.state_count * b.state_count > cap:
        raise ResourceLimit(
            f"product of {a.state_count}x{b.state_count} states exceeds cap {cap}")
    pair = {}

    def mk(qa, qb):
        sid = pair.get((qa, qb))
        if sid is None:
            sid = POOL.intern(("x", qa, qb))
            pair[(qa, qb)] = sid
        return sid

    states = frozenset(mk(qa, qb) for qa in a.states for qb in b.states)
    leaves = frozenset(mk(qa, qb) for qa in a.leaf_states for qb in b.leaf_states)
    nsym = a.alphabet.size

    def row_fn(q, r):
        _, qa, qb = POOL.key_of(q)
        _, ra, rb = POOL.key_of(r)
        rows_a = a.delta_row(qa, ra)
        rows_b = b.delta_row(qb, rb)
        return tuple(
            frozenset(mk(sa, sb) for sa in rows_a[i] for sb in rows_b[i])
            for i in range(nsym))

    def root_fn(q):
        _, qa, qb = POOL.key_of(q)
        return roots_by(a.is_root(qa), b.is_root(qb))

    det = a.deterministic and b.deterministic
    return TreeAutomaton(a.alphabet, states, leaves, row_fn, root_fn,
                         det, True, kind)


def intersect(a: TreeAutomaton, b: TreeAutomaton, cap: int = 10**6) -> TreeAutomaton:
    return _product(a, b, lambda x, y: x and y, "intersect", cap)


def union(a: TreeAutomaton, b: TreeAutomaton, cap: int = 10**6) -> TreeAutomaton:
    return _product(a, b, lambda x, y: x or y, "union", cap)


def complement(a: TreeAutomaton) -> TreeAutomaton:
    if not (a.deterministic and a.complete):
        raise NotDeterministic(
            "complement requires a deterministic, complete automaton")
    comp = TreeAutomaton(a.alphabet, a.states, a.leaf_states, a._row_fn,
                         lambda q: not a._root_fn(q), True, True, "complement")
    comp._rows = a._rows  # same transitions, share the cache
    return comp


def project(a: TreeAutomaton, vs: Iterable[Var]) -> TreeAutomaton:
    """Forget the bits of `vs`: transitions union over all re-instantiations."""
    vs = tuple(vs)
    if not vs:
        return a
    mask = a.alphabet.mask(vs)
    expansions = a.alphabet.submasks(mask)
    nsym = a.alphabet.size

    def row_fn(q, r):
        base_row = a.delta_row(q, r)
        out = []
        for sym in range(nsym):
            stripped = sym & ~mask
            acc = set()
            for sub in expansions:
                acc.update(base_row[stripped | sub])
            out.append(frozenset(acc))
        return tuple(out)

    return TreeAutomaton(a.alphabet, a.states, a.leaf_states, row_fn,
                         a._root_fn, False, a.complete, "project")


def determinize(a: TreeAutomaton, cap: int = 10**6) -> TreeAutomaton:
    """Subset construction, reachable part only; deterministic and complete."""
    nsym = a.alphabet.size
    subset_ids: dict[frozenset, int] = {}
    members: dict[int, frozenset] = {}
    explored: list[int] = []
    exploring = True

    def mk(sub: frozenset) -> int:
        sid = subset_ids.get(sub)
        if sid is None:
            sid = POOL.intern(("s", tuple(sorted(sub))))
            subset_ids[sub] = sid
            members[sid] = sub
            if exploring:
                explored.append(sid)
                if len(explored) > cap:
                    raise ResourceLimit(f"subset construction exceeded cap {cap}")
        return sid

    start_id = mk(frozenset(a.leaf_states))
    rows: dict[tuple[int, int], tuple] = {}
    i = 0
    while i < len(explored):
        q = explored[i]
        i += 1
        for r in explored[:i]:
            for left, right in ((q, r), (r, q)) if q != r else ((q, q),):
                row = []
                for sym in range(nsym):
                    acc = set()
                    for x in members[left]:
                        for y in members[right]:
                            acc.update(a.delta(x, y, sym))
                    row.append(frozenset((mk(frozenset(acc)),)))
                rows[(left, right)] = tuple(row)
    exploring = False

    states = frozenset(explored)
    root_members = {sid for sid, sub in members.items()
                    if any(a.is_root(x) for x in sub)}

    def row_fn(q, r):
        row = rows.get((q, r))
        if row is not None:
            return row
        out = []
        for sym in range(nsym):
            acc = set()
            for x in members[q]:
                for y in members[r]:
                    acc.update(a.delta(x, y, sym))
            out.append(frozenset((mk(frozenset(acc)),)))
        return tuple(out)

    return TreeAutomaton(a.alphabet, states, frozenset((start_id,)), row_fn,
                         lambda q: q in root_members, True, True, "determinize")


def reach(a: TreeAutomaton, start: Iterable[int],
          symbols: Optional[Iterable[int]] = None,
          deadline: Optional[float] = None) -> frozenset[int]:
    """Least fixpoint of states reachable from `start` via delta."""
    import time

    syms = tuple(symbols) if symbols is not None else tuple(a.alphabet.symbols())
    seen: set[int] = set(start)
    frontier = list(seen)
    processed: list[int] = []
    while frontier:
        if deadline is not None and time.monotonic() > deadline:
            from .errors import SolverTimeout
            raise SolverTimeout("reach fixpoint timed out")
        new: set[int] = set()
        for q in frontier:
            for r in processed + frontier:
                for left, right in ((q, r), (r, q)):
                    row = a.delta_row(left, right)
                    for sym in syms:
                        new.update(row[sym])
        processed.extend(frontier)
        frontier = [s for s in new if s not in seen]
        seen.update(frontier)
    return frozenset(seen)


def zero_derivative(a: TreeAutomaton) -> TreeAutomaton:
    """Saturate the leaf states with everything zero-symbol reachable."""
    leaves = reach(a, a.leaf_states, symbols=(a.alphabet.zero,))
    det = a.deterministic and len(leaves) == 1
    out = TreeAutomaton(a.alphabet, a.states, leaves, a._row_fn, a._root_fn,
                        det, a.complete, "zero_derivative")
    out._rows = a._rows
    return out


def is_empty(a: TreeAutomaton, deadline: Optional[float] = None) -> bool:
    reached = reach(a, a.leaf_states, deadline=deadline)
    return not any(a.is_root(q) for q in reached)


def reachable_count(a: TreeAutomaton) -> int:
    return len(reach(a, a.leaf_states))


def membership(a: TreeAutomaton, tree: Tree) -> bool:
    """Does the automaton accept the tree? Folds sets of reachable states."""

    def fold(pos: str) -> frozenset[int]:
        label = tree.labels[pos]
        if label is BOTTOM:
            return a.leaf_states
        left = fold(pos + "L")
        right = fold(pos + "R")
        acc = set()
        for q in left:
            for r in right:
                acc.update(a.delta(q, r, label))
        return frozenset(acc)

    return any(a.is_root(q) for q in fold(""))


# -- validators (test support) ----------------------------------------------


def check_deterministic(a: TreeAutomaton) -> bool:
    if len(a.leaf_states) != 1:
        return False
    return all(len(a.delta(q, r, s)) <= 1
               for q in a.states for r in a.states for s in a.alphabet.symbols())


def check_complete(a: TreeAutomaton) -> bool:
    if len(a.leaf_states) < 1:
        return False
    return all(len(a.delta(q, r, s)) >= 1
               for q in a.states for r in a.states for s in a.alphabet.symbols())
