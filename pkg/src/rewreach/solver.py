"""Three-valued satisfiability and validity over the initial algebra.

Verdicts are SAT (with a checked ground witness), UNSAT, or UNKNOWN; the
callers decide what UNKNOWN means for them.  The decision layers, run
per DNF conjunct:

1. simplify literal sides, then syntactic tautology/contradiction checks;
2. case-split a literal whose side is rooted in a defined symbol with
   constructor arguments, by unifying that side against the matching
   equation left sides (bounded depth); the complementary branch keeps
   the root irreducible, where a defined-rooted canonical form can never
   equal a constructor canonical form;
3. solve constructor equalities by unification, disequalities by ground
   witness search;
4. bounded ground enumeration as a fallback; it proves UNSAT only when
   every variable ranges over a fully covered finite domain.

A SAT witness is always re-checked by evaluating the original conjunct,
so layer bugs can weaken the solver to UNKNOWN but not falsify SAT.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .errors import RewreachError
from .formulas import (
    Formula,
    FalseF,
    Lit,
    TrueF,
    apply_subst_formula,
    conj,
    formula_vars,
    lit,
    negate,
    to_dnf,
)
from .groundterms import enumerate_ground, finite_domain
from .terms import (
    App,
    FreshGen,
    Term,
    Var,
    apply_subst,
    is_ctor_term,
    renormalize,
    vars_of,
)
from .theory import RewriteTheory, check_condition, simplify
from .unify import UnifierSet, unify_equations, unify_modulo

SAT = "sat"
UNSAT = "unsat"
UNKNOWN = "unknown"

VALID = "valid"
NOT_PROVEN = "not-proven"


@dataclass(frozen=True)
class Verdict:
    kind: str
    witness: Optional[dict[Var, Term]] = None

    def __bool__(self):  # pragma: no cover
        raise TypeError("compare Verdict.kind explicitly")


@dataclass(frozen=True)
class SolverConfig:
    """Budgets for the layered decision procedure."""

    enum_size: int = 4          # ground witness enumeration size bound
    unfold_depth: int = 2       # defined-symbol case-split depth
    dnf_max: int = 512
    product_cap: int = 20_000   # max assignments tried per witness search
    split_bound: int = 4


def solve_sat(
    phi: Formula,
    th: RewriteTheory,
    cfg: SolverConfig = SolverConfig(),
    domains: Mapping[str, Sequence[Term]] | None = None,
) -> Verdict:
    """Layered satisfiability of a quantifier-free formula in the initial algebra."""
    return _solve_formula(phi, th, cfg, cfg.unfold_depth, domains)


def check_valid_implication(
    phi: Formula,
    psi: Formula,
    th: RewriteTheory,
    cfg: SolverConfig = SolverConfig(),
) -> str:
    """VALID iff ``phi /\\ not psi`` is unsatisfiable; NOT_PROVEN otherwise."""
    v = solve_sat(conj(phi, negate(psi)), th, cfg)
    return VALID if v.kind == UNSAT else NOT_PROVEN


# ---------------------------------------------------------------------------


def _solve_formula(phi, th, cfg, unfold_left, domains) -> Verdict:
    clauses = to_dnf(phi, cfg.dnf_max)
    if not clauses:
        return Verdict(UNSAT)
    any_unknown = False
    for clause in clauses:
        v = _solve_conjunct(list(clause), th, cfg, unfold_left, domains)
        if v.kind == SAT:
            return v
        if v.kind == UNKNOWN:
            any_unknown = True
    return Verdict(UNKNOWN) if any_unknown else Verdict(UNSAT)


def _prepare(lits, th) -> Optional[list[Lit]]:
    """Simplify literal sides; None when syntactically contradictory."""
    out: list[Lit] = []
    for l in lits:
        f = lit(simplify(l.lhs, th), simplify(l.rhs, th), l.positive)
        if isinstance(f, FalseF):
            return None
        if isinstance(f, TrueF):
            continue
        if f not in out:
            out.append(f)
    for f in out:
        if Lit(f.lhs, f.rhs, not f.positive) in out:
            return None
    return out


def _unfold_target(l: Lit) -> Optional[Term]:
    """A defined-rooted side with constructor arguments, if the literal has one."""
    for side in (l.lhs, l.rhs):
        if (
            isinstance(side, App)
            and not side.op.ctor
            and all(is_ctor_term(a) for a in side.args)
        ):
            return side
    return None


def _has_defined(t: Term) -> bool:
    return not is_ctor_term(t)


def _solve_conjunct(lits, th, cfg, unfold_left, domains) -> Verdict:
    prepared = _prepare(lits, th)
    if prepared is None:
        return Verdict(UNSAT)
    if not prepared:
        return Verdict(SAT, witness={})

    target = None
    if unfold_left > 0:
        for l in prepared:
            side = _unfold_target(l)
            if side is not None and _equations_unfoldable(side, th):
                target = (l, side)
                break
    if target is not None:
        return _unfold(prepared, target, th, cfg, unfold_left, domains)

    if all(is_ctor_term(l.lhs) and is_ctor_term(l.rhs) for l in prepared):
        return _ctor_solve(prepared, th, cfg, domains)
    return ground_oracle_sat(prepared, th, cfg.enum_size, domains, cfg)


def _equations_unfoldable(side: App, th) -> bool:
    """All equations for this symbol must have constructor-pattern left sides."""
    relevant = [
        e for e in th.equations if isinstance(e.lhs, App) and e.lhs.op == side.op
    ]
    return all(all(is_ctor_term(a) for a in e.lhs.args) for e in relevant)


def _unfold(prepared, target, th, cfg, unfold_left, domains) -> Verdict:
    """Case-split on whether a defined-rooted side reduces at its root.

    The reduce branches instantiate through a complete set of unifiers of
    the side against each matching equation left side (complete over
    ground constructor instances since constructors are free modulo the
    axioms); the remaining branch keeps the root irreducible, where the
    side can never equal a constructor term.
    """
    l0, side = target
    fresh = FreshGen()
    all_vars = set()
    for l in prepared:
        all_vars |= vars_of(l.lhs) | vars_of(l.rhs)

    branches: list[Formula] = []
    complete = True
    for eqn in th.equations:
        if not isinstance(eqn.lhs, App) or eqn.lhs.op != side.op:
            continue
        ren = fresh.rename_disjoint(
            vars_of(eqn.lhs) | vars_of(eqn.rhs) | formula_vars(eqn.cond),
            avoid=all_vars,
        )
        lhs_r = apply_subst(eqn.lhs, ren)
        unifs = unify_modulo(side, lhs_r, fresh, split_bound=cfg.split_bound)
        if not unifs.complete:
            complete = False
        for alpha in unifs:
            repl = apply_subst(apply_subst(eqn.rhs, ren), alpha)
            parts: list[Formula] = []
            for l in prepared:
                if l is l0:
                    kept = l.rhs if l.lhs == side else l.lhs
                    parts.append(lit(apply_subst(kept, alpha), repl, l.positive))
                else:
                    parts.append(
                        lit(
                            apply_subst(l.lhs, alpha),
                            apply_subst(l.rhs, alpha),
                            l.positive,
                        )
                    )
            if not isinstance(eqn.cond, TrueF):
                parts.append(
                    apply_subst_formula(apply_subst_formula(eqn.cond, ren), alpha)
                )
            branches.append(conj(*parts))

    any_unknown = not complete
    for br in branches:
        v = _solve_formula(br, th, cfg, unfold_left - 1, domains)
        if v.kind == SAT:
            return v
        if v.kind == UNKNOWN:
            any_unknown = True

    # irreducible branch: resolve only the target literal
    other = l0.rhs if l0.lhs == side else l0.lhs
    irr_impossible = False
    residual = [l for l in prepared if l is not l0]
    if is_ctor_term(other):
        if l0.positive:
            irr_impossible = True
        # negative literal holds outright in this branch
    else:
        residual.append(l0)
    if not irr_impossible:
        v = (
            _solve_conjunct(residual, th, cfg, unfold_left - 1, domains)
            if residual
            else Verdict(SAT, {})
        )
        if v.kind == SAT:
            w = dict(v.witness or {})
            if _complete_and_check(prepared, w, th, cfg, domains):
                return Verdict(SAT, w)
            any_unknown = True
        elif v.kind == UNKNOWN:
            any_unknown = True
    return Verdict(UNKNOWN) if any_unknown else Verdict(UNSAT)


def _complete_and_check(lits, witness, th, cfg, domains) -> bool:
    """Ground any leftover variables cheaply, then re-check the conjunct."""
    free: set[Var] = set()
    for l in lits:
        free |= vars_of(l.lhs) | vars_of(l.rhs)
    for w in list(witness.values()):
        free |= vars_of(w)
    missing = sorted(
        (v for v in free if v not in witness), key=lambda v: (v.name, v.sort)
    )
    for x in missing:
        cands = enumerate_ground(th.sig, x.sort, cfg.enum_size, domains)
        if not cands:
            return False
        witness[x] = cands[0]
    wit = {x: apply_subst(t, witness) for x, t in witness.items()}
    witness.clear()
    witness.update(wit)
    try:
        return check_condition(conj(*lits), witness, th)
    except RewreachError:
        return False


def _ctor_solve(prepared, th, cfg, domains) -> Verdict:
    """Constructor-literal conjunct: unify equalities, search disequalities."""
    eqs = [(l.lhs, l.rhs) for l in prepared if l.positive]
    diseqs = [l for l in prepared if not l.positive]
    unifs = (
        unify_equations(eqs, split_bound=cfg.split_bound)
        if eqs
        else UnifierSet([{}])
    )
    if not unifs.substs:
        return Verdict(UNSAT) if unifs.complete else Verdict(UNKNOWN)
    any_unknown = not unifs.complete
    for sigma in unifs:
        live: list[Lit] = []
        dead = False
        for d in diseqs:
            f = lit(apply_subst(d.lhs, sigma), apply_subst(d.rhs, sigma), False)
            if isinstance(f, FalseF):
                dead = True
                break
            if isinstance(f, Lit):
                live.append(f)
        if dead:
            continue
        v = _search_witness(prepared, sigma, live, th, cfg, domains)
        if v.kind == SAT:
            return v
        if v.kind == UNKNOWN:
            any_unknown = True
    return Verdict(UNKNOWN) if any_unknown else Verdict(UNSAT)


def _domain_for(x: Var, th, size_bound, domains, cfg) -> tuple[list[Term], bool]:
    """Candidate terms for one variable plus a fully-covered flag."""
    if domains and x.sort in domains:
        cands = sorted(
            {renormalize(t) for t in domains[x.sort]}, key=lambda t: repr(t)
        )
        return cands, False
    full = finite_domain(th.sig, x.sort)
    if full is not None:
        return full, True
    return enumerate_ground(th.sig, x.sort, size_bound), False


def _search_witness(original, sigma, live_diseqs, th, cfg, domains) -> Verdict:
    free: set[Var] = set()
    for d in live_diseqs:
        free |= vars_of(d.lhs) | vars_of(d.rhs)
    for t in sigma.values():
        free |= vars_of(t)
    for l in original:
        free |= {v for v in (vars_of(l.lhs) | vars_of(l.rhs)) if v not in sigma}
    free_sorted = sorted(free, key=lambda v: (v.name, v.sort))
    if not free_sorted:
        witness = dict(sigma)
        if _complete_and_check(original, witness, th, cfg, domains):
            return Verdict(SAT, witness)
        return Verdict(UNSAT)
    streams = []
    fully_covered = True
    for x in free_sorted:
        cands, covered = _domain_for(x, th, cfg.enum_size, domains, cfg)
        fully_covered = fully_covered and covered
        if not cands:
            return Verdict(UNKNOWN)
        streams.append(cands)
    total = 1
    for s in streams:
        total *= len(s)
    if total > cfg.product_cap:
        fully_covered = False
    tried = 0
    for combo in itertools.product(*streams):
        tried += 1
        if tried > cfg.product_cap:
            break
        rho = dict(zip(free_sorted, combo))
        witness = {x: apply_subst(t, rho) for x, t in sigma.items()}
        witness.update(rho)
        if _complete_and_check(original, witness, th, cfg, domains):
            return Verdict(SAT, witness)
    return Verdict(UNSAT) if fully_covered else Verdict(UNKNOWN)


def ground_oracle_sat(
    conjunct: Sequence[Lit],
    th: RewriteTheory,
    size_bound: int,
    domains: Mapping[str, Sequence[Term]] | None = None,
    cfg: SolverConfig = SolverConfig(),
) -> Verdict:
    """Exhaustive enumeration of ground constructor substitutions.

    SAT with a witness when one is found; UNSAT only when every variable
    ranges over a finite, fully enumerated domain; UNKNOWN otherwise.
    """
    conjunct = list(conjunct)
    free: set[Var] = set()
    for l in conjunct:
        free |= vars_of(l.lhs) | vars_of(l.rhs)
    free_sorted = sorted(free, key=lambda v: (v.name, v.sort))
    phi = conj(*conjunct)
    if not free_sorted:
        try:
            ok = check_condition(phi, {}, th)
        except RewreachError:
            return Verdict(UNKNOWN)
        return Verdict(SAT, {}) if ok else Verdict(UNSAT)
    streams = []
    fully_covered = True
    for x in free_sorted:
        cands, covered = _domain_for(x, th, size_bound, domains, cfg)
        fully_covered = fully_covered and covered
        if not cands:
            return Verdict(UNKNOWN)
        streams.append(cands)
    total = 1
    for s in streams:
        total *= len(s)
    if total > cfg.product_cap:
        fully_covered = False
    tried = 0
    for combo in itertools.product(*streams):
        tried += 1
        if tried > cfg.product_cap:
            break
        rho = dict(zip(free_sorted, combo))
        try:
            if check_condition(phi, rho, th):
                return Verdict(SAT, rho)
        except RewreachError:
            return Verdict(UNKNOWN)
    return Verdict(UNSAT) if fully_covered else Verdict(UNKNOWN)
