"""WS2S abstract syntax, concrete-syntax parser, desugaring and antiprenexing.

Core connectives are subset/successor/singleton/constant atoms, ~, &, |,
and set-quantified ex2.  Derived forms (all2, =>, <=>, set equality and
inequality, emptiness) are separate AST nodes that ``desugar`` lowers to
the core.  Every variable in a well-formed formula either occurs only
free or is bound by exactly one quantifier; ``rename_apart`` enforces it.

Concrete grammar (UTF-8, '#' starts a line comment)::

    formula := 'ex2' vars ':' formula | 'all2' vars ':' formula | iff
    iff     := imp ('<=>' imp)*                 (left-assoc)
    imp     := or ('=>' or)*                    (right-assoc)
    or      := and ('|' and)*
    and     := neg ('&' neg)*
    neg     := '~' neg | '(' formula ')' | quantified | atom
    atom    := VAR 'sub' VAR | VAR '=' 'S1' '(' VAR ')' | VAR '=' 'S2' '(' VAR ')'
             | 'sing' '(' VAR ')' | VAR '=' '{' POS '}' | VAR '=' VAR
             | VAR '~=' VAR | VAR '=' 'empty'
    POS     := 'e' | [LR]+ ;  VAR := [A-Za-z][A-Za-z0-9_]*
    vars    := VAR (',' VAR)*

Quantifiers extend maximally to the right (also directly under '~').
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

from .errors import ParseError

_var_ids = itertools.count(1)


@dataclass(frozen=True)
class Var:
    """A second-order variable; identity is the unique id, not the name."""

    name: str
    uid: int = field(default_factory=lambda: next(_var_ids))

    def __repr__(self):
        return f"{self.name}#{self.uid}"


def fresh_var(name: str) -> Var:
    return Var(name)


@dataclass(frozen=True)
class Formula:
    pass


# -- core atoms ---------------------------------------------------------


@dataclass(frozen=True)
class Subseteq(Formula):
    x: Var
    y: Var


@dataclass(frozen=True)
class SuccLeft(Formula):
    """x = S1(y): x holds exactly the left children of y's positions."""

    x: Var
    y: Var


@dataclass(frozen=True)
class SuccRight(Formula):
    """x = S2(y): x holds exactly the right children of y's positions."""

    x: Var
    y: Var


@dataclass(frozen=True)
class Sing(Formula):
    x: Var


@dataclass(frozen=True)
class EqEpsilon(Formula):
    """x = {e}: x is exactly the root position."""

    x: Var


@dataclass(frozen=True)
class EqPos(Formula):
    """x = {p} for a fixed position word p over {L,R}."""

    x: Var
    pos: str


# -- core connectives ----------------------------------------------------


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    """ex2 over an ordered, duplicate-free tuple of variables."""

    vars: tuple[Var, ...]
    body: Formula


# -- sugar (lowered by desugar) ------------------------------------------


@dataclass(frozen=True)
class Forall(Formula):
    vars: tuple[Var, ...]
    body: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class EqSet(Formula):
    x: Var
    y: Var


@dataclass(frozen=True)
class NeqSet(Formula):
    x: Var
    y: Var


@dataclass(frozen=True)
class EqEmpty(Formula):
    x: Var


ATOM_TYPES = (Subseteq, SuccLeft, SuccRight, Sing, EqEpsilon, EqPos)


def is_atom(phi: Formula) -> bool:
    return isinstance(phi, ATOM_TYPES)


# -- variable bookkeeping -------------------------------------------------


def _atom_vars(phi: Formula) -> tuple[Var, ...]:
    if isinstance(phi, (Subseteq, SuccLeft, SuccRight, EqSet, NeqSet)):
        return (phi.x, phi.y)
    return (phi.x,)


def free_vars(phi: Formula) -> frozenset[Var]:
    if is_atom(phi) or isinstance(phi, (EqSet, NeqSet, EqEmpty)):
        return frozenset(_atom_vars(phi))
    if isinstance(phi, Not):
        return free_vars(phi.sub)
    if isinstance(phi, (And, Or, Implies, Iff)):
        return free_vars(phi.left) | free_vars(phi.right)
    if isinstance(phi, (Exists, Forall)):
        return free_vars(phi.body) - frozenset(phi.vars)
    raise TypeError(f"not a formula: {phi!r}")


def all_vars(phi: Formula) -> frozenset[Var]:
    """Every variable occurring in phi, free or quantified."""
    if is_atom(phi) or isinstance(phi, (EqSet, NeqSet, EqEmpty)):
        return frozenset(_atom_vars(phi))
    if isinstance(phi, Not):
        return all_vars(phi.sub)
    if isinstance(phi, (And, Or, Implies, Iff)):
        return all_vars(phi.left) | all_vars(phi.right)
    if isinstance(phi, (Exists, Forall)):
        return all_vars(phi.body) | frozenset(phi.vars)
    raise TypeError(f"not a formula: {phi!r}")


def is_ground(phi: Formula) -> bool:
    return not free_vars(phi)


# -- desugaring -----------------------------------------------------------


def desugar(phi: Formula) -> Formula:
    """Lower derived connectives/predicates to the core syntax.

    Idempotent: core formulas are rebuilt unchanged.  Emptiness uses a
    fresh quantified variable per occurrence.
    """
    if is_atom(phi):
        return phi
    if isinstance(phi, Not):
        return Not(desugar(phi.sub))
    if isinstance(phi, And):
        return And(desugar(phi.left), desugar(phi.right))
    if isinstance(phi, Or):
        return Or(desugar(phi.left), desugar(phi.right))
    if isinstance(phi, Exists):
        return Exists(phi.vars, desugar(phi.body))
    if isinstance(phi, Forall):
        return Not(Exists(phi.vars, Not(desugar(phi.body))))
    if isinstance(phi, Implies):
        return Or(Not(desugar(phi.left)), desugar(phi.right))
    if isinstance(phi, Iff):
        left, right = desugar(phi.left), desugar(phi.right)
        return And(Or(Not(left), right), Or(Not(right), left))
    if isinstance(phi, EqSet):
        return And(Subseteq(phi.x, phi.y), Subseteq(phi.y, phi.x))
    if isinstance(phi, NeqSet):
        return Not(desugar(EqSet(phi.x, phi.y)))
    if isinstance(phi, EqEmpty):
        fresh = fresh_var(phi.x.name + "_sup")
        return desugar(Forall((fresh,), Subseteq(phi.x, fresh)))
    raise TypeError(f"not a formula: {phi!r}")


def rename_apart(phi: Formula) -> Formula:
    """Give every quantifier binding a fresh variable id.

    Afterwards no id is bound twice and no id occurs both free and bound;
    free occurrences keep their original Var.
    """

    def walk(f: Formula, env: dict[Var, Var]) -> Formula:
        if is_atom(f) or isinstance(f, (EqSet, NeqSet, EqEmpty)):
            subst = {v: env.get(v, v) for v in _atom_vars(f)}
            return _replace_atom_vars(f, subst)
        if isinstance(f, Not):
            return Not(walk(f.sub, env))
        if isinstance(f, (And, Or, Implies, Iff)):
            return type(f)(walk(f.left, env), walk(f.right, env))
        if isinstance(f, (Exists, Forall)):
            inner = dict(env)
            new_vars = []
            for v in f.vars:
                nv = fresh_var(v.name)
                inner[v] = nv
                new_vars.append(nv)
            return type(f)(tuple(new_vars), walk(f.body, inner))
        raise TypeError(f"not a formula: {f!r}")

    return walk(phi, {})


def _replace_atom_vars(phi: Formula, subst: dict[Var, Var]) -> Formula:
    if isinstance(phi, (Subseteq, SuccLeft, SuccRight, EqSet, NeqSet)):
        return type(phi)(subst[phi.x], subst[phi.y])
    if isinstance(phi, EqPos):
        return EqPos(subst[phi.x], phi.pos)
    return type(phi)(subst[phi.x])


def check_renamed_apart(phi: Formula) -> bool:
    """True iff no var id is bound twice or both free and bound."""
    bound: set[Var] = set()

    def collect(f: Formula) -> bool:
        if isinstance(f, (Exists, Forall)):
            for v in f.vars:
                if v in bound:
                    return False
                bound.add(v)
            return collect(f.body)
        if isinstance(f, Not):
            return collect(f.sub)
        if isinstance(f, (And, Or, Implies, Iff)):
            return collect(f.left) and collect(f.right)
        return True

    return collect(phi) and not (free_vars(phi) & bound)


# -- antiprenexing ---------------------------------------------------------


def antiprenex(phi: Formula) -> Formula:
    """Push existential quantifiers toward the leaves, to a fixpoint.

    Expects a desugared, renamed-apart formula.  Applies: distribution
    over |, scope-shrinking over & (per variable), dropping vacuous
    binders, merging adjacent binders, and double-negation elimination.
    The result is logically equivalent.
    """
    if is_atom(phi):
        return phi
    if isinstance(phi, Not):
        sub = antiprenex(phi.sub)
        if isinstance(sub, Not):
            return sub.sub
        return Not(sub)
    if isinstance(phi, (And, Or)):
        return type(phi)(antiprenex(phi.left), antiprenex(phi.right))
    if isinstance(phi, Exists):
        body = antiprenex(phi.body)
        return _push_exists(tuple(dict.fromkeys(phi.vars)), body)
    raise TypeError(f"antiprenex expects a core formula, got {phi!r}")


def _push_exists(vs: tuple[Var, ...], body: Formula) -> Formula:
    vs = tuple(v for v in vs if v in free_vars(body))
    if not vs:
        return body
    if isinstance(body, Or):
        return Or(_push_exists(vs, body.left), _push_exists(vs, body.right))
    if isinstance(body, And):
        fl, fr = free_vars(body.left), free_vars(body.right)
        left_only = tuple(v for v in vs if v in fl and v not in fr)
        right_only = tuple(v for v in vs if v in fr and v not in fl)
        shared = tuple(v for v in vs if v in fl and v in fr)
        if left_only or right_only:
            inner = And(_push_exists(left_only, body.left),
                        _push_exists(right_only, body.right))
            return _push_exists(shared, inner) if shared else inner
        return Exists(vs, body)
    if isinstance(body, Not) and isinstance(body.sub, Not):
        return _push_exists(vs, body.sub.sub)
    if isinstance(body, Exists):
        merged = tuple(dict.fromkeys(vs + body.vars))
        return Exists(merged, body.body)
    return Exists(vs, body)


# -- concrete syntax: parser ----------------------------------------------

_KEYWORDS = {"ex2", "all2", "sub", "sing", "empty", "S1", "S2"}

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<comment>#[^\n]*)|(?P<nl>\n)"
    r"|(?P<op><=>|=>|~=|[()[\]{}:,=&|~])"
    r"|(?P<word>[A-Za-z][A-Za-z0-9_]*)"
)


@dataclass
class _Token:
    kind: str  # 'op', 'word', 'eof'
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}",
                             line, pos - line_start + 1)
        pos = m.end()
        if m.lastgroup == "nl":
            line += 1
            line_start = pos
            continue
        if m.lastgroup in ("ws", "comment"):
            continue
        tokens.append(_Token("op" if m.lastgroup == "op" else "word",
                             m.group(), line, m.start() - line_start + 1))
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.free: dict[str, Var] = {}

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}",
                             tok.line, tok.col)
        return tok

    def fail(self, msg: str):
        tok = self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def var_token(self) -> _Token:
        tok = self.next()
        if tok.kind != "word" or tok.text in _KEYWORDS:
            raise ParseError(f"expected a variable, found {tok.text or 'end of input'!r}",
                             tok.line, tok.col)
        return tok

    def lookup(self, name: str, env: dict[str, Var]) -> Var:
        if name in env:
            return env[name]
        if name not in self.free:
            self.free[name] = fresh_var(name)
        return self.free[name]

    # grammar levels

    def formula(self, env) -> Formula:
        tok = self.peek()
        if tok.text in ("ex2", "all2"):
            return self.quantified(env)
        return self.iff(env)

    def quantified(self, env) -> Formula:
        tok = self.next()
        names = [self.var_token().text]
        while self.peek().text == ",":
            self.next()
            names.append(self.var_token().text)
        self.expect(":")
        inner = dict(env)
        vs = []
        for name in names:
            v = fresh_var(name)
            inner[name] = v
            vs.append(v)
        body = self.formula(inner)
        cls = Exists if tok.text == "ex2" else Forall
        return cls(tuple(vs), body)

    def iff(self, env) -> Formula:
        f = self.imp(env)
        while self.peek().text == "<=>":
            self.next()
            f = Iff(f, self.imp(env))
        return f

    def imp(self, env) -> Formula:
        f = self.or_(env)
        if self.peek().text == "=>":
            self.next()
            return Implies(f, self.imp(env))
        return f

    def or_(self, env) -> Formula:
        f = self.and_(env)
        while self.peek().text == "|":
            self.next()
            f = Or(f, self.and_(env))
        return f

    def and_(self, env) -> Formula:
        f = self.neg(env)
        while self.peek().text == "&":
            self.next()
            f = And(f, self.neg(env))
        return f

    def neg(self, env) -> Formula:
        tok = self.peek()
        if tok.text == "~":
            self.next()
            return Not(self.neg(env))
        if tok.text == "(":
            self.next()
            f = self.formula(env)
            self.expect(")")
            return f
        if tok.text in ("ex2", "all2"):
            return self.quantified(env)
        return self.atom(env)

    def atom(self, env) -> Formula:
        tok = self.peek()
        if tok.text == "sing":
            self.next()
            self.expect("(")
            x = self.lookup(self.var_token().text, env)
            self.expect(")")
            return Sing(x)
        if tok.kind != "word" or tok.text in _KEYWORDS:
            self.fail(f"expected an atom, found {tok.text or 'end of input'!r}")
        x = self.lookup(self.var_token().text, env)
        op = self.next()
        if op.text == "sub":
            return Subseteq(x, self.lookup(self.var_token().text, env))
        if op.text == "~=":
            return NeqSet(x, self.lookup(self.var_token().text, env))
        if op.text != "=":
            raise ParseError(f"expected 'sub', '=' or '~=', found {op.text!r}",
                             op.line, op.col)
        rhs = self.peek()
        if rhs.text in ("S1", "S2"):
            self.next()
            self.expect("(")
            y = self.lookup(self.var_token().text, env)
            self.expect(")")
            return (SuccLeft if rhs.text == "S1" else SuccRight)(x, y)
        if rhs.text == "empty":
            self.next()
            return EqEmpty(x)
        if rhs.text == "{":
            self.next()
            word = self.next()
            if word.text == "e":
                pos = ""
            elif word.kind == "word" and re.fullmatch(r"[LR]+", word.text):
                pos = word.text
            else:
                raise ParseError(f"expected a position ('e' or [LR]+), found {word.text!r}",
                                 word.line, word.col)
            self.expect("}")
            if pos == "":
                return EqEpsilon(x)
            return EqPos(x, pos)
        return EqSet(x, self.lookup(self.var_token().text, env))


def parse(text: str) -> Formula:
    """Parse, desugar and rename apart a formula.

    Free variables are permitted and become free variables of the result.
    Raises ParseError with line/column on malformed input.
    """
    p = _Parser(text)
    f = p.formula({})
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"trailing input starting at {tok.text!r}", tok.line, tok.col)
    return rename_apart(desugar(f))


def parse_sugar(text: str) -> Formula:
    """Parse without desugaring or renaming; used by round-trip tests."""
    p = _Parser(text)
    f = p.formula({})
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"trailing input starting at {tok.text!r}", tok.line, tok.col)
    return f


# -- concrete syntax: printer ----------------------------------------------

# precedence: quantifier body < iff < imp < or < and < neg/atom
_PREC_Q, _PREC_IFF, _PREC_IMP, _PREC_OR, _PREC_AND, _PREC_NEG = range(6)


def to_text(phi: Formula) -> str:
    """Render back to concrete syntax; reparses to an alpha-equal formula.

    Bound names clashing with an enclosing scope are suffixed to keep the
    printed text unambiguous.
    """
    used: set[str] = {v.name for v in free_vars(phi)}
    names: dict[Var, str] = {}

    def name_of(v: Var) -> str:
        if v not in names:
            names[v] = v.name
        return names[v]

    def bind(v: Var) -> str:
        base = v.name
        cand = base
        n = 0
        while cand in used or cand in _KEYWORDS:
            n += 1
            cand = f"{base}_{n}"
        used.add(cand)
        names[v] = cand
        return cand

    def go(f: Formula, prec: int) -> str:
        if isinstance(f, Subseteq):
            return f"{name_of(f.x)} sub {name_of(f.y)}"
        if isinstance(f, SuccLeft):
            return f"{name_of(f.x)} = S1({name_of(f.y)})"
        if isinstance(f, SuccRight):
            return f"{name_of(f.x)} = S2({name_of(f.y)})"
        if isinstance(f, Sing):
            return f"sing({name_of(f.x)})"
        if isinstance(f, EqEpsilon):
            return f"{name_of(f.x)} = {{e}}"
        if isinstance(f, EqPos):
            return f"{name_of(f.x)} = {{{f.pos}}}"
        if isinstance(f, EqSet):
            return f"{name_of(f.x)} = {name_of(f.y)}"
        if isinstance(f, NeqSet):
            return f"{name_of(f.x)} ~= {name_of(f.y)}"
        if isinstance(f, EqEmpty):
            return f"{name_of(f.x)} = empty"
        if isinstance(f, Not):
            return "~ " + go(f.sub, _PREC_NEG)
        if isinstance(f, (And, Or)):
            op, level = ("&", _PREC_AND) if isinstance(f, And) else ("|", _PREC_OR)
            s = f"{go(f.left, level)} {op} {go(f.right, level)}"
            return f"({s})" if prec > level else s
        if isinstance(f, Implies):
            s = f"{go(f.left, _PREC_IMP + 1)} => {go(f.right, _PREC_IMP)}"
            return f"({s})" if prec > _PREC_IMP else s
        if isinstance(f, Iff):
            s = f"{go(f.left, _PREC_IFF)} <=> {go(f.right, _PREC_IFF + 1)}"
            return f"({s})" if prec > _PREC_IFF else s
        if isinstance(f, (Exists, Forall)):
            kw = "ex2" if isinstance(f, Exists) else "all2"
            bound = [bind(v) for v in f.vars]
            s = f"{kw} {', '.join(bound)}: {go(f.body, _PREC_Q)}"
            return f"({s})" if prec > _PREC_Q else s
        raise TypeError(f"not a formula: {f!r}")

    return go(phi, _PREC_Q)


def alpha_equal(a: Formula, b: Formula) -> bool:
    """Structural equality up to renaming of bound variables.

    Free variables must agree by name.
    """

    def go(f: Formula, g: Formula, env: dict[Var, Var]) -> bool:
        if type(f) is not type(g):
            return False
        if is_atom(f) or isinstance(f, (EqSet, NeqSet, EqEmpty)):
            if isinstance(f, EqPos) and f.pos != g.pos:
                return False
            pairs = zip(_atom_vars(f), _atom_vars(g))
            return all(env[x] is y if x in env else x.name == y.name
                       for x, y in pairs)
        if isinstance(f, Not):
            return go(f.sub, g.sub, env)
        if isinstance(f, (And, Or, Implies, Iff)):
            return go(f.left, g.left, env) and go(f.right, g.right, env)
        if isinstance(f, (Exists, Forall)):
            if len(f.vars) != len(g.vars):
                return False
            inner = dict(env)
            inner.update(zip(f.vars, g.vars))
            return go(f.body, g.body, inner)
        return False

    return go(a, b, {})
