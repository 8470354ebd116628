"""Constrained constructor patterns and their disjunctive closure.

A pattern atom is a constructor term together with a quantifier-free
constraint; a pattern predicate is a finite disjunction of atoms (the
empty disjunction is bottom).  Conjunction of predicates is compiled
away through unification, so it never appears in stored predicates.

``denotation_bounded`` is the testing-oracle semantics: the set of
canonical ground instances whose term size stays within the bound, with
every pattern and constraint variable enumerated up to that same bound.
Because the bound filters the final states, the set identities for
union and intersection hold exactly at every bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import PatternError
from .formulas import (
    TRUE,
    Formula,
    apply_subst_formula,
    conj,
    formula_vars,
)
from .groundterms import enumerate_ground
from .solver import NOT_PROVEN, SolverConfig, UNSAT, VALID, check_valid_implication, solve_sat
from .terms import (
    App,
    FreshGen,
    Term,
    Var,
    apply_subst,
    is_ctor_term,
    least_sort,
    mk_app,
    term_size,
    vars_of,
)
from .theory import RewriteTheory, check_condition, simplify
from .unify import match_modulo, unify_modulo


@dataclass(frozen=True)
class PatternAtom:
    """A constructor term constrained by a quantifier-free formula."""

    term: Term
    constraint: Formula = TRUE

    def __post_init__(self):
        if not is_ctor_term(self.term):
            raise PatternError(f"pattern is not a constructor term: {self.term!r}")

    def vars(self) -> frozenset[Var]:
        return vars_of(self.term) | formula_vars(self.constraint)


@dataclass(frozen=True)
class PatternPredicate:
    """Finite disjunction of pattern atoms; empty means bottom."""

    atoms: tuple[PatternAtom, ...] = ()
    complete: bool = True  # False when a truncated unifier set fed an intersection

    def is_bottom(self) -> bool:
        return not self.atoms

    def vars(self) -> frozenset[Var]:
        out: frozenset[Var] = frozenset()
        for a in self.atoms:
            out |= a.vars()
        return out


BOTTOM = PatternPredicate(())


def atom(term: Term, constraint: Formula = TRUE) -> PatternAtom:
    return PatternAtom(term, constraint)


def predicate(*atoms: PatternAtom, complete: bool = True) -> PatternPredicate:
    return PatternPredicate(tuple(atoms), complete)


def pp_or(*preds: PatternPredicate) -> PatternPredicate:
    atoms: list[PatternAtom] = []
    for p in preds:
        for a in p.atoms:
            if a not in atoms:
                atoms.append(a)
    return PatternPredicate(tuple(atoms), all(p.complete for p in preds))


def rename_atom(a: PatternAtom, ren: Mapping[Var, Term]) -> PatternAtom:
    return PatternAtom(apply_subst(a.term, ren), apply_subst_formula(a.constraint, ren))


def rename_predicate(p: PatternPredicate, ren: Mapping[Var, Term]) -> PatternPredicate:
    return PatternPredicate(tuple(rename_atom(a, ren) for a in p.atoms), p.complete)


# ---------------------------------------------------------------------------
# denotation (the brute-force oracle)


def denotation_bounded(
    pred: PatternPredicate | PatternAtom,
    th: RewriteTheory,
    size_bound: int,
    domains: Mapping[str, Sequence[Term]] | None = None,
) -> frozenset[Term]:
    """Ground instances of the predicate with result size within the bound.

    Enumerates ground constructor substitutions for all pattern and
    constraint variables up to ``size_bound`` per variable, keeps
    instances whose constraint evaluates true, and filters the resulting
    canonical terms by size.
    """
    if isinstance(pred, PatternAtom):
        pred = PatternPredicate((pred,))
    out: set[Term] = set()
    for a in pred.atoms:
        xs = sorted(a.vars(), key=lambda v: (v.name, v.sort))
        streams = [enumerate_ground(th.sig, x.sort, size_bound, domains) for x in xs]
        if any(not s for s in streams):
            continue
        for combo in itertools.product(*streams):
            rho = dict(zip(xs, combo))
            inst = simplify(apply_subst(a.term, rho), th)
            if term_size(inst) > size_bound:
                continue
            if check_condition(a.constraint, rho, th):
                out.add(inst)
    return frozenset(out)


# ---------------------------------------------------------------------------
# intersection and subsumption


def intersect(
    a1: PatternAtom,
    a2: PatternAtom,
    th: RewriteTheory,
    fresh: FreshGen | None = None,
    cfg: SolverConfig = SolverConfig(),
) -> PatternPredicate:
    """Intersection of two atoms as a disjunction over their unifiers.

    The second atom is renamed apart first.  Atoms whose combined
    constraint is refuted are pruned; UNKNOWN constraints are kept so
    that downstream reasoning stays an over-approximation.
    """
    fresh = fresh or FreshGen()
    shared = a1.vars() & a2.vars()
    if shared:
        a2 = rename_atom(a2, fresh.rename_disjoint(a2.vars(), avoid=a1.vars()))
    unifs = unify_modulo(a1.term, a2.term, fresh, split_bound=cfg.split_bound)
    atoms = []
    for alpha in unifs:
        t = apply_subst(a1.term, alpha)
        c = apply_subst_formula(conj(a1.constraint, a2.constraint), alpha)
        if solve_sat(c, th, cfg).kind == UNSAT:
            continue
        atoms.append(PatternAtom(t, c))
    return PatternPredicate(tuple(atoms), complete=unifs.complete)


def pp_and(
    p1: PatternPredicate,
    p2: PatternPredicate,
    th: RewriteTheory,
    fresh: FreshGen | None = None,
    cfg: SolverConfig = SolverConfig(),
) -> PatternPredicate:
    """Conjunction of predicates, distributed through atom intersections."""
    fresh = fresh or FreshGen()
    parts = [
        intersect(a1, a2, th, fresh, cfg) for a1 in p1.atoms for a2 in p2.atoms
    ]
    out = pp_or(*parts) if parts else BOTTOM
    if not (p1.complete and p2.complete and all(p.complete for p in parts)):
        out = PatternPredicate(out.atoms, complete=False)
    return out


@dataclass(frozen=True)
class SubsumeResult:
    verdict: str  # "yes" | "not-proven"
    matcher: Optional[dict[Var, Term]] = None

    @property
    def yes(self) -> bool:
        return self.verdict == "yes"


def subsumes(
    general: PatternAtom,
    specific: PatternAtom,
    th: RewriteTheory,
    cfg: SolverConfig = SolverConfig(),
    fresh: FreshGen | None = None,
) -> SubsumeResult:
    """Conservative subsumption: instance match plus constraint implication.

    YES guarantees the specific atom's instances are contained in the
    general atom's; NOT_PROVEN guarantees nothing.
    """
    fresh = fresh or FreshGen()
    if general.vars() & specific.vars():
        general = rename_atom(
            general, fresh.rename_disjoint(general.vars(), avoid=specific.vars())
        )
    for alpha in match_modulo(
        general.term, specific.term, fresh, protected=specific.vars()
    ):
        inst = apply_subst_formula(general.constraint, alpha)
        if check_valid_implication(specific.constraint, inst, th, cfg) == VALID:
            return SubsumeResult("yes", dict(alpha))
    return SubsumeResult("not-proven")


def pred_subsumes(
    general: PatternPredicate,
    specific: PatternAtom,
    th: RewriteTheory,
    cfg: SolverConfig = SolverConfig(),
    fresh: FreshGen | None = None,
) -> SubsumeResult:
    """A disjunction subsumes an atom when one of its disjuncts does."""
    for g in general.atoms:
        r = subsumes(g, specific, th, cfg, fresh)
        if r.yes:
            return r
    return SubsumeResult("not-proven")


# ---------------------------------------------------------------------------
# standard form


def to_standard_form(
    pred: PatternPredicate,
    th: RewriteTheory,
    fresh: FreshGen | None = None,
) -> PatternPredicate:
    """Rewrite every disjunct into a state-constructor application.

    A disjunct whose pattern is a State variable is expanded once per
    state constructor; anything else that is not already a constructor
    application is rejected.
    """
    if th.state_sort is None:
        raise PatternError("theory has no state sort")
    fresh = fresh or FreshGen()
    ctors = th.state_ctor_ops()
    if not ctors:
        raise PatternError("theory has no state constructors")
    out: list[PatternAtom] = []
    for a in pred.atoms:
        t = a.term
        if isinstance(t, App) and t.op in ctors:
            out.append(a)
            continue
        if isinstance(t, Var) and t.sort == th.state_sort:
            for op in ctors:
                args = [fresh.fresh_var(f"x{i + 1}", s) for i, s in enumerate(op.arg_sorts)]
                inst = mk_app(op, args)
                out.append(PatternAtom(inst, apply_subst_formula(a.constraint, {t: inst})))
            continue
        raise PatternError(
            f"pattern {t!r} cannot be put in standard form over sort {th.state_sort}"
        )
    return PatternPredicate(tuple(out), pred.complete)
