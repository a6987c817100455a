"""Command-line front end: decide formulas, generate benchmark families,
run differential tests, emit CSV statistics.

Exit codes: 0 for SAT/VALID, 1 for UNSAT/INVALID, 2 for errors, caps and
timeouts.  CSV schema (fixed): family,n,engine,result,time_ms,term_nodes,
fixpoint_iterations,subsumption_prunes,automaton_states — the lazy engine
fills the term columns, the classical engine fills automaton_states.
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from typing import Optional

from . import classical, lazy, semantics
from .errors import OracleCapExceeded, ParseError, ResourceLimit, SolverTimeout
from .formula import (And, EqEpsilon, EqPos, Exists, Forall, Formula, Implies,
                      NeqSet, Not, Or, Sing, Subseteq, SuccLeft, SuccRight,
                      Var, desugar, free_vars, fresh_var, parse, rename_apart,
                      to_text, antiprenex)

CSV_HEADER = ("family,n,engine,result,time_ms,term_nodes,"
              "fixpoint_iterations,subsumption_prunes,automaton_states")


# -- benchmark families -------------------------------------------------------


def _edge(a: Var, b: Var, tag: str) -> Formula:
    """edge(a,b): some child of an a-position is covered by b."""
    zl = fresh_var(f"Z{tag}l")
    zr = fresh_var(f"Z{tag}r")
    left = Exists((zl,), And(SuccLeft(zl, a), Subseteq(zl, b)))
    right = Exists((zr,), And(SuccRight(zr, a), Subseteq(zr, b)))
    return Or(left, right)


def _conj(parts: list[Formula]) -> Formula:
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def gen_family(family: str, n: int) -> Formula:
    """The parametric benchmark formula (sugared form; not yet desugared)."""
    if family == "cnst":
        if n < 1:
            raise ValueError("cnst requires n >= 1")
        x = fresh_var("X")
        return Exists((x,), And(EqPos(x, "LR" * 4), EqPos(x, "LR" * n)))
    if family == "pt":
        if n < 1:
            raise ValueError("pt requires n >= 1")
        z1, z2 = fresh_var("Z1"), fresh_var("Z2")
        xs = [fresh_var(f"X{i}") for i in range(1, n + 1)]
        parts = [_edge(z1, xs[0], "a0")]
        parts += [_edge(xs[i], xs[i + 1], f"b{i}") for i in range(n - 1)]
        parts.append(_edge(xs[-1], z2, "c0"))
        return Forall((z1, z2), Exists(tuple(xs), _conj(parts)))
    if family == "sub":
        if n < 2:
            raise ValueError("sub requires n >= 2")
        xs = [fresh_var(f"X{i}") for i in range(1, n + 1)]
        x = fresh_var("X")
        parts = [Implies(Subseteq(xs[i], x),
                         Or(SuccLeft(xs[i + 1], x), SuccRight(xs[i + 1], x)))
                 for i in range(n - 1)]
        return Forall(tuple(xs), Exists((x,), _conj(parts)))
    if family == "horn":
        if n < 1:
            raise ValueError("horn requires n >= 1")
        x = fresh_var("X")
        xs = [fresh_var(f"X{i}") for i in range(1, n + 1)]
        if n == 1:
            # degenerate chain: no implications, a vacuously true matrix
            body = Subseteq(xs[0], xs[0])
        else:
            parts = [Implies(And(Subseteq(xs[i], x), NeqSet(xs[i], xs[i + 1])),
                             Subseteq(xs[i + 1], x))
                     for i in range(n - 1)]
            body = _conj(parts)
        return Exists((x,), Forall((xs[0],), Exists(tuple(xs[1:]), body)
                                   if n > 1 else body))
    raise ValueError(f"unknown family {family!r} (expected pt|cnst|sub|horn)")


def prepared(phi: Formula) -> Formula:
    """Desugar and rename apart a programmatically built formula."""
    return rename_apart(desugar(phi))


# -- random differential corpus ----------------------------------------------


def random_formula(rng: random.Random, max_vars: int = 3,
                   max_quantifiers: int = 2, max_size: int = 12) -> Formula:
    """One random core formula over at most `max_vars` variables."""
    names = ["X", "Y", "Z"][:max_vars]
    all_vs = [fresh_var(name) for name in names]

    state = {"size": 0, "quants": 0}

    def atom(scope: list[Var]) -> Formula:
        kind = rng.choice(["sub", "sub", "succl", "succr", "sing", "eps", "pos"])
        x = rng.choice(scope)
        y = rng.choice(scope)
        if kind == "sub":
            return Subseteq(x, y)
        if kind == "succl":
            return SuccLeft(x, y)
        if kind == "succr":
            return SuccRight(x, y)
        if kind == "sing":
            return Sing(x)
        if kind == "eps":
            return EqEpsilon(x)
        pos = "".join(rng.choice("LR") for _ in range(rng.randint(1, 2)))
        return EqPos(x, pos)

    def build(scope: list[Var], depth: int) -> Formula:
        state["size"] += 1
        roll = rng.random()
        if state["size"] >= max_size or depth >= 4 or roll < 0.35:
            return atom(scope)
        if roll < 0.5:
            return Not(build(scope, depth + 1))
        if roll < 0.65:
            return And(build(scope, depth + 1), build(scope, depth + 1))
        if roll < 0.8:
            return Or(build(scope, depth + 1), build(scope, depth + 1))
        if state["quants"] < max_quantifiers:
            state["quants"] += 1
            k = 1 if rng.random() < 0.8 else 2
            qvars = rng.sample(all_vs, k=min(k, len(all_vs)))
            return Exists(tuple(qvars), build(scope, depth + 1))
        return And(build(scope, depth + 1), build(scope, depth + 1))

    return rename_apart(build(all_vs, 0))


def _oracle_tractable(phi: Formula, depth: int, cap: int) -> bool:
    """Keep only corpus formulas the bounded oracle can sweep exactly."""
    from .trees import alphabet_of, decode, enumerate_trees

    alphabet = alphabet_of(phi)
    if alphabet.size > 8:
        return False
    try:
        for tree in enumerate_trees(alphabet, 2):
            semantics.satisfies(decode(tree, alphabet), phi, depth=depth, cap=cap)
    except OracleCapExceeded:
        return False
    return True


def build_corpus(seed: int, count: int, oracle_depth: int = 3,
                 oracle_cap: int = 400_000) -> list[Formula]:
    """Deterministic random corpus, filtered to oracle-tractable formulas."""
    rng = random.Random(seed)
    corpus: list[Formula] = []
    while len(corpus) < count:
        phi = random_formula(rng)
        if _oracle_tractable(phi, oracle_depth, oracle_cap):
            corpus.append(phi)
    return corpus


# -- decide plumbing -----------------------------------------------------------


def _engine_config(args, timeout: Optional[float]) -> lazy.EngineConfig:
    return lazy.EngineConfig(
        lazy_rt=not args.no_lazy_rt,
        subsumption=not args.no_subsumption,
        flatten=args.flatten,
        nondet_union=args.nondet_union,
        antiprenex=not args.no_antiprenex,
        term_cap=args.cap,
        timeout_s=timeout,
        trace=args.stats,
    )


def _decide_one(phi: Formula, engine: str, mode: str, args):
    """Returns (verdict, rows) where rows are CSV fragments per engine run."""
    rows = []
    verdicts = []
    timeout = args.timeout
    engines = ("lazy", "classical") if engine == "both" else (engine,)
    for name in engines:
        start = time.monotonic()
        if name == "lazy":
            cfg = _engine_config(args, timeout)
            stats: list = []
            if mode == "sat":
                verdict = lazy.decide_sat(phi, cfg, stats)
            else:
                verdict = lazy.decide_valid(phi, cfg, stats)
            st = stats[-1]
            rows.append((name, verdict, (time.monotonic() - start) * 1000.0,
                         st.term_nodes, st.fixpoint_iterations,
                         st.subsumption_prunes, None))
        else:
            cst = classical.ClassicalStats()
            phi2 = antiprenex(phi) if not args.no_antiprenex else phi
            if mode == "sat":
                verdict = classical.decide_sat(phi2, args.cap, timeout, cst)
            else:
                verdict = classical.decide_valid(phi2, args.cap, timeout, cst)
            rows.append((name, verdict, (time.monotonic() - start) * 1000.0,
                         None, None, None, cst.automaton_states))
        verdicts.append(verdict)
    if len(set(verdicts)) > 1:
        raise SolverError_Disagreement(engines, verdicts)
    return verdicts[0], rows


class SolverError_Disagreement(Exception):
    def __init__(self, engines, verdicts):
        super().__init__(
            "engine disagreement: " +
            ", ".join(f"{e}={v}" for e, v in zip(engines, verdicts)))


def _csv_row(family: str, n, row) -> str:
    engine, verdict, ms, nodes, iters, prunes, aut_states = row
    cells = [family, str(n) if n is not None else "", engine, verdict,
             f"{ms:.1f}",
             "" if nodes is None else str(nodes),
             "" if iters is None else str(iters),
             "" if prunes is None else str(prunes),
             "" if aut_states is None else str(aut_states)]
    return ",".join(cells)


# -- subcommands ---------------------------------------------------------------


def _cmd_decide(args) -> int:
    if args.file == "-":
        text = sys.stdin.read()
    else:
        with open(args.file, "r", encoding="utf-8") as fh:
            text = fh.read()
    phi = parse(text)
    verdict, rows = _decide_one(phi, args.engine, args.mode, args)
    print(verdict)
    if args.csv:
        print(CSV_HEADER)
        for row in rows:
            print(_csv_row("-", "", row))
    if args.stats:
        for row in rows:
            engine, v, ms, nodes, iters, prunes, aut = row
            detail = (f"term_nodes={nodes} fixpoint_iterations={iters} "
                      f"subsumption_prunes={prunes}" if engine == "lazy"
                      else f"automaton_states={aut}")
            print(f"# {engine}: {v} in {ms:.1f} ms  {detail}", file=sys.stderr)
    return 0 if verdict in (lazy.SAT, lazy.VALID) else 1


def _parse_n_range(args) -> list[int]:
    if args.n_range:
        a, _, b = args.n_range.partition("..")
        return list(range(int(a), int(b) + 1))
    if args.n is None:
        raise ValueError("one of --n or --n-range is required")
    return [args.n]


def _cmd_bench(args) -> int:
    ns = _parse_n_range(args)
    if args.csv:
        print(CSV_HEADER)
    for n in ns:
        phi = prepared(gen_family(args.family, n))
        verdict, rows = _decide_one(phi, args.engine, "sat", args)
        for row in rows:
            if args.csv:
                print(_csv_row(args.family, n, row))
            else:
                print(f"{args.family} n={n} {row[0]}: {row[1]} ({row[2]:.1f} ms)")
    return 0


def _cmd_gen(args) -> int:
    print(to_text(gen_family(args.family, args.n)))
    return 0


def _cmd_difftest(args) -> int:
    corpus = build_corpus(args.seed, args.count)
    failures = 0
    for i, phi in enumerate(corpus):
        got = {}
        got["classical"] = classical.decide_sat(phi, args.cap, args.timeout)
        for name, cfg in (
                ("lazy", lazy.EngineConfig(timeout_s=args.timeout)),
                ("lazy-eager-rt", lazy.EngineConfig(lazy_rt=False, timeout_s=args.timeout)),
                ("lazy-no-subsumption", lazy.EngineConfig(subsumption=False, timeout_s=args.timeout)),
                ("lazy-flatten", lazy.EngineConfig(flatten=True, timeout_s=args.timeout)),
                ("lazy-nondet-union", lazy.EngineConfig(nondet_union=True, timeout_s=args.timeout)),
        ):
            got[name] = lazy.decide_sat(phi, cfg)
        verdicts = set(got.values())
        status = "ok"
        if len(verdicts) > 1:
            failures += 1
            status = "DISAGREE " + str(got)
        else:
            verdict = verdicts.pop()
            try:
                witness = semantics.bounded_sat(phi, args.depth)
            except OracleCapExceeded:
                witness = None
                status = "ok (oracle capped)"
            if witness is not None and verdict != lazy.SAT:
                failures += 1
                status = f"ORACLE WITNESS vs {verdict}"
            if witness is None and status == "ok" and verdict == lazy.SAT \
                    and not free_vars(phi):
                status = "ok (sat, no shallow witness)"
        print(f"[{i}] {status}: {to_text(phi)}")
    print(f"{len(corpus)} formulas, {failures} failures")
    return 1 if failures else 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ws2s", description="WS2S satisfiability and validity solver")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_engine_flags(p):
        p.add_argument("--engine", choices=["lazy", "classical", "both"],
                       default="lazy")
        p.add_argument("--no-lazy-rt", action="store_true")
        p.add_argument("--no-subsumption", action="store_true")
        p.add_argument("--flatten", action="store_true")
        p.add_argument("--nondet-union", action="store_true")
        p.add_argument("--no-antiprenex", action="store_true")
        p.add_argument("--stats", action="store_true")
        p.add_argument("--csv", action="store_true")
        p.add_argument("--timeout", type=float, default=None, metavar="SEC")
        p.add_argument("--cap", type=int, default=1_000_000)

    p_decide = sub.add_parser("decide", help="decide a formula from a file or '-'")
    p_decide.add_argument("file")
    p_decide.add_argument("--mode", choices=["sat", "valid"], default="sat")
    add_engine_flags(p_decide)
    p_decide.set_defaults(fn=_cmd_decide)

    p_bench = sub.add_parser("bench", help="run a benchmark family")
    p_bench.add_argument("--family", choices=["pt", "cnst", "sub", "horn"],
                         required=True)
    p_bench.add_argument("--n", type=int)
    p_bench.add_argument("--n-range", metavar="A..B")
    add_engine_flags(p_bench)
    p_bench.set_defaults(fn=_cmd_bench)

    p_gen = sub.add_parser("gen", help="print a benchmark formula")
    p_gen.add_argument("--family", choices=["pt", "cnst", "sub", "horn"],
                       required=True)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.set_defaults(fn=_cmd_gen)

    p_diff = sub.add_parser("difftest", help="random differential testing")
    p_diff.add_argument("--count", type=int, default=25)
    p_diff.add_argument("--seed", type=int, default=0)
    p_diff.add_argument("--depth", type=int, default=2)
    p_diff.add_argument("--timeout", type=float, default=None)
    p_diff.add_argument("--cap", type=int, default=1_000_000)
    p_diff.set_defaults(fn=_cmd_difftest)

    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (ResourceLimit, SolverTimeout, OracleCapExceeded,
            SolverError_Disagreement, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
