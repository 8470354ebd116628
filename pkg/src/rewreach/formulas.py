"""Quantifier-free constraint formulas over terms.

Formulas are positive/negative equational literals combined with
conjunction and disjunction, plus the constants TRUE and FALSE.
Negation is pushed to the literals by ``negate``; there is no negation
node.  Literal sides are kept in canonical term form and oriented under
the fixed term order, so syntactically complementary literals are
recognizable by equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .errors import FormulaError
from .terms import Subst, Term, Var, apply_subst, renormalize, term_key, vars_of


@dataclass(frozen=True)
class TrueF:
    def __repr__(self):
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __repr__(self):
        return "false"


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class Lit:
    """An equation (positive) or disequation (negative) between terms."""

    lhs: Term
    rhs: Term
    positive: bool

    def __repr__(self):
        return f"{self.lhs!r} {'=' if self.positive else '=/='} {self.rhs!r}"


@dataclass(frozen=True)
class Conj:
    parts: tuple["Formula", ...]

    def __repr__(self):
        return " /\\ ".join(map(repr, self.parts))


@dataclass(frozen=True)
class Disj:
    parts: tuple["Formula", ...]

    def __repr__(self):
        return " \\/ ".join(f"({p!r})" for p in self.parts)


Formula = Union[TrueF, FalseF, Lit, Conj, Disj]


def lit(lhs: Term, rhs: Term, positive: bool = True) -> Formula:
    """Build a literal with canonical, order-oriented sides."""
    lhs, rhs = renormalize(lhs), renormalize(rhs)
    if term_key(rhs) < term_key(lhs):
        lhs, rhs = rhs, lhs
    if lhs == rhs:
        return TRUE if positive else FALSE
    return Lit(lhs, rhs, positive)


def eq(lhs: Term, rhs: Term) -> Formula:
    return lit(lhs, rhs, True)


def neq(lhs: Term, rhs: Term) -> Formula:
    return lit(lhs, rhs, False)


def conj(*parts: Formula) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, Conj):
            flat.extend(p.parts)
        elif p is FALSE or isinstance(p, FalseF):
            return FALSE
        elif p is TRUE or isinstance(p, TrueF):
            continue
        else:
            flat.append(p)
    out: list[Formula] = []
    for p in flat:
        if p not in out:
            out.append(p)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return Conj(tuple(out))


def disj(*parts: Formula) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, Disj):
            flat.extend(p.parts)
        elif p is TRUE or isinstance(p, TrueF):
            return TRUE
        elif p is FALSE or isinstance(p, FalseF):
            continue
        else:
            flat.append(p)
    out: list[Formula] = []
    for p in flat:
        if p not in out:
            out.append(p)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Disj(tuple(out))


def negate(f: Formula) -> Formula:
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    if isinstance(f, Lit):
        return Lit(f.lhs, f.rhs, not f.positive)
    if isinstance(f, Conj):
        return disj(*(negate(p) for p in f.parts))
    if isinstance(f, Disj):
        return conj(*(negate(p) for p in f.parts))
    raise FormulaError(f"cannot negate {f!r}")


def apply_subst_formula(f: Formula, s: Subst) -> Formula:
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Lit):
        return lit(apply_subst(f.lhs, s), apply_subst(f.rhs, s), f.positive)
    if isinstance(f, Conj):
        return conj(*(apply_subst_formula(p, s) for p in f.parts))
    if isinstance(f, Disj):
        return disj(*(apply_subst_formula(p, s) for p in f.parts))
    raise FormulaError(f"cannot substitute into {f!r}")


def formula_vars(f: Formula) -> frozenset[Var]:
    if isinstance(f, Lit):
        return vars_of(f.lhs) | vars_of(f.rhs)
    if isinstance(f, (Conj, Disj)):
        acc: frozenset[Var] = frozenset()
        for p in f.parts:
            acc |= formula_vars(p)
        return acc
    return frozenset()


def iter_literals(f: Formula) -> Iterator[Lit]:
    if isinstance(f, Lit):
        yield f
    elif isinstance(f, (Conj, Disj)):
        for p in f.parts:
            yield from iter_literals(p)


def to_dnf(f: Formula, max_clauses: int = 512) -> list[tuple[Lit, ...]]:
    """Disjunctive normal form as a list of literal conjunctions.

    TRUE is the single empty clause; FALSE is the empty list.  Clauses
    that contain a syntactic contradiction are pruned.  Raises
    FormulaError when the clause budget is exceeded.
    """
    clauses = _dnf(f, max_clauses)
    out: list[tuple[Lit, ...]] = []
    seen = set()
    for c in clauses:
        cl = _prune_clause(c)
        if cl is None:
            continue
        key = frozenset(cl)
        if key not in seen:
            seen.add(key)
            out.append(cl)
    return out


def _dnf(f: Formula, budget: int) -> list[tuple[Lit, ...]]:
    if isinstance(f, TrueF):
        return [()]
    if isinstance(f, FalseF):
        return []
    if isinstance(f, Lit):
        return [(f,)]
    if isinstance(f, Disj):
        out: list[tuple[Lit, ...]] = []
        for p in f.parts:
            out.extend(_dnf(p, budget))
            if len(out) > budget:
                raise FormulaError("DNF clause budget exceeded")
        return out
    if isinstance(f, Conj):
        acc: list[tuple[Lit, ...]] = [()]
        for p in f.parts:
            pcl = _dnf(p, budget)
            acc = [c1 + c2 for c1 in acc for c2 in pcl]
            if len(acc) > budget:
                raise FormulaError("DNF clause budget exceeded")
        return acc
    raise FormulaError(f"cannot normalize {f!r}")


def _prune_clause(lits: tuple[Lit, ...]) -> tuple[Lit, ...] | None:
    """Drop duplicate and trivially true literals; None for contradictions."""
    out: list[Lit] = []
    for l in lits:
        if l.lhs == l.rhs:
            if l.positive:
                continue
            return None
        if l in out:
            continue
        out.append(l)
    for l in out:
        if Lit(l.lhs, l.rhs, not l.positive) in out:
            return None
    return tuple(sorted(out, key=lambda l: (not l.positive, term_key(l.lhs), term_key(l.rhs))))
