"""Boolean CNF missions and their linear-inequality encoding.

A literal is a non-zero integer in DIMACS convention: ``+k`` means symbol
``k - 1`` must be observed, ``-k`` that it must not be.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError


@dataclass(frozen=True)
class CnfFormula:
    n_symbols: int
    clauses: tuple[frozenset[int], ...]

    def __post_init__(self):
        clauses = tuple(frozenset(int(l) for l in cl) for cl in self.clauses)
        for i, cl in enumerate(clauses):
            if not cl:
                raise ValueError(f"clause {i} is empty")
            for lit in cl:
                if lit == 0 or abs(lit) > self.n_symbols:
                    raise ValueError(f"clause {i}: literal {lit} outside 1..{self.n_symbols}")
                if -lit in cl:
                    raise ValueError(f"clause {i} contains both {abs(lit)} and -{abs(lit)}")
        object.__setattr__(self, "clauses", clauses)

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)


@dataclass(frozen=True, eq=False)
class SpecConstraints:
    a_phi: np.ndarray
    b_phi: np.ndarray


def encode_cnf(f: CnfFormula) -> SpecConstraints:
    """One row per clause: -1 for a positive literal, +1 for a negated one.

    The right-hand side is the number of negated literals minus one.
    """
    a = np.zeros((f.n_clauses, f.n_symbols), dtype=np.int64)
    b = np.zeros(f.n_clauses, dtype=np.int64)
    for i, clause in enumerate(f.clauses):
        for lit in clause:
            a[i, abs(lit) - 1] = 1 if lit < 0 else -1
        b[i] = sum(1 for lit in clause if lit < 0) - 1
    return SpecConstraints(a, b)


def eval_cnf(f: CnfFormula, x) -> bool:
    x = [bool(v) for v in x]
    if len(x) != f.n_symbols:
        raise ValueError(f"assignment has {len(x)} entries, formula has {f.n_symbols} symbols")
    return all(any(x[abs(l) - 1] == (l > 0) for l in cl) for cl in f.clauses)


def check_constraints(sc: SpecConstraints, x, tol: float = 0.0) -> bool:
    x = np.asarray(x, dtype=float)
    if sc.a_phi.shape[0] == 0:
        return True
    if x.shape != (sc.a_phi.shape[1],):
        raise ValueError("assignment length does not match the constraint matrix")
    return bool((sc.a_phi @ x <= sc.b_phi + tol).all())


def conjunction(n_symbols: int) -> CnfFormula:
    """Every symbol must be observed."""
    return CnfFormula(n_symbols, tuple(frozenset([k + 1]) for k in range(n_symbols)))


def at_least(symbols, k: int) -> list[frozenset[int]]:
    """Clauses forcing at least ``k`` of the given 0-based symbols to hold.

    At most ``len(symbols) - k`` may fail, so every subset of size
    ``len(symbols) - k + 1`` needs a true member.
    """
    symbols = list(symbols)
    if not 0 <= k <= len(symbols):
        raise ValueError("threshold outside 0..len(symbols)")
    if k == 0:
        return []
    width = len(symbols) - k + 1
    return [frozenset(s + 1 for s in combo) for combo in itertools.combinations(symbols, width)]


def random_formula(n_symbols: int, max_true: int, rng, n_clauses=None) -> tuple[CnfFormula, np.ndarray]:
    """Random satisfiable CNF of mixed clause shapes.

    A hidden witness with at most ``max_true`` true symbols is drawn first and
    every clause is made true under it. Returns ``(formula, witness)``.
    """
    if n_clauses is None:
        n_clauses = int(rng.integers(n_symbols // 2 + 1, n_symbols + 3))
    n_true = int(rng.integers(1, max(1, min(max_true, n_symbols)) + 1))
    witness = np.zeros(n_symbols, dtype=np.int64)
    witness[rng.choice(n_symbols, size=n_true, replace=False)] = 1
    clauses = []
    for _ in range(n_clauses):
        kind = rng.choice(["unit", "or", "avoid", "mixed"], p=[0.2, 0.4, 0.15, 0.25])
        width = 1 if kind == "unit" else int(rng.integers(2, min(4, n_symbols) + 1))
        syms = rng.choice(n_symbols, size=width, replace=False)
        if kind == "unit" or kind == "or":
            lits = [int(s) + 1 for s in syms]
        elif kind == "avoid":
            lits = [-(int(s) + 1) for s in syms]
        else:
            lits = [(int(s) + 1) * (1 if rng.random() < 0.5 else -1) for s in syms]
        if not any(witness[abs(l) - 1] == (l > 0) for l in lits):
            # flip one literal so the witness satisfies the clause
            j = int(rng.integers(len(lits)))
            s = abs(lits[j])
            lits[j] = s if witness[s - 1] else -s
        clauses.append(frozenset(lits))
    return CnfFormula(n_symbols, tuple(clauses)), witness


def parse_dimacs(text: str) -> CnfFormula:
    n_symbols = n_clauses = None
    clauses: list[frozenset[int]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError("header must read 'p cnf <symbols> <clauses>'", f"line {lineno}")
            try:
                n_symbols, n_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError("non-integer header field", f"line {lineno}") from None
            continue
        if n_symbols is None:
            raise ParseError("clause before 'p cnf' header", f"line {lineno}")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"bad literal {tok!r}", f"line {lineno}") from None
            if lit == 0:
                if not current:
                    raise ParseError("empty clause", f"line {lineno}")
                clauses.append(frozenset(current))
                current = []
            else:
                if abs(lit) > n_symbols:
                    raise ParseError(f"literal {lit} exceeds {n_symbols} symbols", f"line {lineno}")
                current.append(lit)
    if n_symbols is None:
        raise ParseError("missing 'p cnf' header")
    if current:
        raise ParseError("last clause not terminated by 0")
    if len(clauses) != n_clauses:
        raise ParseError(f"header announces {n_clauses} clauses, found {len(clauses)}")
    try:
        return CnfFormula(n_symbols, tuple(clauses))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def to_dimacs(f: CnfFormula) -> str:
    lines = [f"p cnf {f.n_symbols} {f.n_clauses}"]
    for cl in f.clauses:
        lits = sorted(cl, key=lambda l: (abs(l), l))
        lines.append(" ".join(map(str, lits)) + " 0")
    return "\n".join(lines) + "\n"


def load_dimacs(path) -> CnfFormula:
    return parse_dimacs(Path(path).read_text())
