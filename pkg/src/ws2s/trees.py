"""Symbols, finite binary trees and assignment encodings.

A symbol over the session variables is a total map var -> {0,1}, stored
as an int bitmask against the Alphabet's variable order; the zero symbol
is 0.  Positions are words over 'L'/'R' with '' as the root.  Trees are
finite partial maps from positions to symbol-or-bottom, with a prefix-
closed domain where every symbol node has both children and every bottom
node has none.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .errors import ResourceLimit
from .formula import Var

BOTTOM = None  # tree label for leaf nodes

Assignment = dict  # Var -> frozenset[str]


@dataclass(frozen=True)
class Alphabet:
    """Variable order fixing the bit layout of symbols."""

    vars: tuple[Var, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vars)})

    @property
    def size(self) -> int:
        return 1 << len(self.vars)

    def symbols(self) -> range:
        return range(self.size)

    @property
    def zero(self) -> int:
        return 0

    def bit(self, symbol: int, var: Var) -> int:
        return (symbol >> self._index[var]) & 1

    def mask(self, vs) -> int:
        m = 0
        for v in vs:
            m |= 1 << self._index[v]
        return m

    def make_symbol(self, bits: dict[Var, int]) -> int:
        if set(bits) != set(self.vars):
            raise ValueError("symbol must assign exactly the session variables")
        s = 0
        for v, b in bits.items():
            if b:
                s |= 1 << self._index[v]
        return s

    def symbol_bits(self, symbol: int) -> dict[Var, int]:
        return {v: self.bit(symbol, v) for v in self.vars}

    def symbol_str(self, symbol: int) -> str:
        return "".join(str(self.bit(symbol, v)) for v in self.vars)

    def submasks(self, mask: int) -> list[int]:
        """All subsets of the given bit mask (classic submask walk)."""
        subs = [0]
        s = mask
        while s:
            subs.append(s)
            s = (s - 1) & mask
        return subs


def alphabet_of(phi) -> Alphabet:
    """Session alphabet of a formula: all its variables, free and bound."""
    from .formula import all_vars

    return Alphabet(tuple(sorted(all_vars(phi), key=lambda v: v.uid)))


def project_symbol(symbol: Optional[int], vs, alphabet: Alphabet):
    """All symbols agreeing with `symbol` outside `vs`; bottom stays bottom."""
    if symbol is BOTTOM:
        return BOTTOM
    mask = alphabet.mask(vs)
    base = symbol & ~mask
    return frozenset(base | sub for sub in alphabet.submasks(mask))


class Tree:
    """Immutable finite binary tree labeled with symbols or bottom."""

    __slots__ = ("labels", "_hash")

    def __init__(self, labels: dict[str, Optional[int]]):
        self.labels = dict(labels)
        self._hash = None
        self._validate()

    def _validate(self):
        dom = self.labels
        if not dom:
            raise ValueError("tree domain must be non-empty")
        for pos, label in dom.items():
            if pos and pos[:-1] not in dom:
                raise ValueError(f"domain not prefix-closed at {pos!r}")
            has_l, has_r = pos + "L" in dom, pos + "R" in dom
            if label is BOTTOM:
                if has_l or has_r:
                    raise ValueError(f"bottom node {pos!r} must be a leaf")
            elif not (has_l and has_r):
                raise ValueError(f"symbol node {pos!r} must have both children")

    @staticmethod
    def bottom() -> "Tree":
        return Tree({"": BOTTOM})

    def __eq__(self, other):
        return isinstance(other, Tree) and self.labels == other.labels

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.labels.items()))
        return self._hash

    def positions(self) -> list[str]:
        return sorted(self.labels, key=lambda p: (len(p), p))

    def depth(self) -> int:
        return max(len(p) for p in self.labels)

    def dump(self, alphabet: Alphabet) -> str:
        """One node per line, '<position> <bits|⊥>', BFS order."""
        lines = []
        for pos in self.positions():
            label = self.labels[pos]
            shown = "⊥" if label is BOTTOM else alphabet.symbol_str(label)
            lines.append(f"{pos or 'e'} {shown}")
        return "\n".join(lines)

    def replace_leaf_with_zero_node(self, pos: str) -> "Tree":
        """Grow a bottom leaf into a zero-symbol node with two bottom kids."""
        if self.labels.get(pos, 0) is not BOTTOM:
            raise ValueError(f"{pos!r} is not a bottom leaf")
        labels = dict(self.labels)
        labels[pos] = 0
        labels[pos + "L"] = BOTTOM
        labels[pos + "R"] = BOTTOM
        return Tree(labels)


def decode(tree: Tree, alphabet: Alphabet) -> Assignment:
    """Assignment encoded by a tree: positions whose label sets each bit."""
    out = {v: set() for v in alphabet.vars}
    for pos, label in tree.labels.items():
        if label is BOTTOM:
            continue
        for v in alphabet.vars:
            if alphabet.bit(label, v):
                out[v].add(pos)
    return {v: frozenset(ps) for v, ps in out.items()}


def encode_min(assignment: Assignment, alphabet: Alphabet) -> Tree:
    """The least tree encoding the assignment; inverse of decode.

    Variables missing from the assignment default to the empty set.
    """
    marked = set()
    for v in alphabet.vars:
        marked |= set(assignment.get(v, ()))
    interior = set()
    for p in marked:
        for i in range(len(p) + 1):
            interior.add(p[:i])
    labels: dict[str, Optional[int]] = {}
    for p in interior:
        bits = {v: int(p in assignment.get(v, ())) for v in alphabet.vars}
        labels[p] = alphabet.make_symbol(bits)
    for p in list(interior):
        for child in (p + "L", p + "R"):
            if child not in interior:
                labels[child] = BOTTOM
    if not labels:
        return Tree.bottom()
    return Tree(labels)


def count_trees(alphabet_size: int, depth: int) -> int:
    """Number of trees with positions of length <= depth."""
    n = 1
    for _ in range(depth):
        n = 1 + alphabet_size * n * n
    return n


def enumerate_trees(alphabet: Alphabet, depth: int, cap: int = 200_000) -> Iterator[Tree]:
    """Yield every tree of the given maximum depth exactly once.

    Raises ResourceLimit if the total count would exceed the cap.
    """
    total = count_trees(alphabet.size, depth)
    if total > cap:
        raise ResourceLimit(f"would enumerate {total} trees (cap {cap})")

    def shapes(d: int) -> Iterator[dict[str, Optional[int]]]:
        yield {"": BOTTOM}
        if d <= 0:
            return
        subtrees = list(shapes(d - 1))
        for sym in alphabet.symbols():
            for left in subtrees:
                for right in subtrees:
                    labels = {"": sym}
                    for p, x in left.items():
                        labels["L" + p] = x
                    for p, x in right.items():
                        labels["R" + p] = x
                    yield labels

    for labels in shapes(depth):
        yield Tree(labels)


def is_zero_extension_of(tree: Tree, minimal: Tree) -> bool:
    """Test-oracle check: `tree` is `minimal` padded with zero-only subtrees."""
    for pos, label in minimal.labels.items():
        if label is BOTTOM:
            continue
        if tree.labels.get(pos) != label:
            return False
    for pos, label in tree.labels.items():
        if pos in minimal.labels and minimal.labels[pos] is not BOTTOM:
            continue
        if label is not BOTTOM and label != 0:
            return False
    return True
