"""Rewrite theories: canonical forms, ground stepping, and validation.

A theory bundles a signature with oriented equations (simplification
rules applied modulo the structural axioms) and labeled rewrite rules.
Convergence, coherence, and sufficient completeness of the equations are
declared assumptions: they are trusted, surfaced as lint warnings, and a
step budget converts a wrong convergence declaration into an error
instead of a hang.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .errors import OracleError, RewriteBudgetError, TheoryError
from .formulas import (
    TRUE,
    Conj,
    Disj,
    FalseF,
    Formula,
    Lit,
    TrueF,
    apply_subst_formula,
    formula_vars,
)
from .terms import (
    App,
    FreshGen,
    Operator,
    Signature,
    Subst,
    Term,
    Var,
    apply_subst,
    is_ctor_term,
    is_ground,
    least_sort,
    mk_app,
    renormalize,
    subst_key,
    term_key,
    vars_of,
)
from .unify import match_modulo

DEFAULT_SIMPLIFY_BUDGET = 100_000


@dataclass(frozen=True)
class Equation:
    lhs: Term
    rhs: Term
    cond: Formula = TRUE


@dataclass(frozen=True)
class Rule:
    label: str
    lhs: Term
    rhs: Term
    cond: Formula = TRUE

    def rule_vars(self) -> frozenset[Var]:
        return vars_of(self.lhs) | vars_of(self.rhs) | formula_vars(self.cond)

    def rhs_only_vars(self) -> frozenset[Var]:
        return (vars_of(self.rhs) | formula_vars(self.cond)) - vars_of(self.lhs)


@dataclass(frozen=True)
class Assumptions:
    """Declared, trusted properties of the equational part."""

    convergent: bool = True
    coherent: bool = True
    sufficiently_complete: bool = True


@dataclass(frozen=True)
class RewriteTheory:
    name: str
    sig: Signature
    equations: tuple[Equation, ...]
    rules: tuple[Rule, ...]
    state_sort: Optional[str] = None
    bracket_twins: tuple[tuple[str, str], ...] = ()  # (plain ctor name, bracket name)
    assumptions: Assumptions = Assumptions()
    _caches: dict = field(
        default_factory=dict, compare=False, repr=False, hash=False
    )

    def twin_of(self, op_name: str) -> Optional[str]:
        for plain, bracket in self.bracket_twins:
            if plain == op_name:
                return bracket
        return None

    def state_ctor_ops(self) -> tuple[Operator, ...]:
        if self.state_sort is None:
            return ()
        return tuple(
            op
            for op in self.sig.ctor_ops
            if op.result_sort == self.state_sort
        )

    def _extended_equations(self) -> tuple[tuple[Equation, Equation], ...]:
        """Each equation paired with an extension variant for AC-headed sides.

        When an equation's left side is an application of an associative
        operator f, matching inside a larger f-collection needs a fresh
        collection variable absorbing the remaining elements.
        """
        key = "ext_eqs"
        if key not in self._caches:
            out = []
            counter = itertools.count(1)
            for eqn in self.equations:
                variants = [eqn]
                if isinstance(eqn.lhs, App) and eqn.lhs.op.assoc:
                    f = eqn.lhs.op
                    w = Var(f"wext#{next(counter)}", f.result_sort)
                    ext = Equation(
                        mk_app(f, (*eqn.lhs.args, w)),
                        mk_app(f, (eqn.rhs, w)),
                        eqn.cond,
                    )
                    if f.identity is not None:
                        variants = [ext]  # the plain match is the w = identity case
                    else:
                        variants = [eqn, ext]
                out.append(tuple(variants))
            self._caches[key] = tuple(out)
        return self._caches[key]


# ---------------------------------------------------------------------------
# simplification


def simplify(t: Term, th: RewriteTheory, budget: int = DEFAULT_SIMPLIFY_BUDGET) -> Term:
    """Innermost rewriting with the oriented equations to canonical form.

    Total on ground terms of a convergent theory; on open terms it is a
    sound partial simplification (equation instances whose condition
    cannot be decided are left alone).  Raises RewriteBudgetError when
    the step budget runs out.
    """
    cache = th._caches.setdefault("simp", {})
    counter = [budget]
    return _simplify(renormalize(t), th, cache, counter)


def _simplify(t: Term, th, cache, counter) -> Term:
    if isinstance(t, Var):
        return t
    hit = cache.get(t)
    if hit is not None:
        return hit
    cur = t
    while True:
        if isinstance(cur, App):
            new_args = tuple(_simplify(a, th, cache, counter) for a in cur.args)
            if any(n is not o for n, o in zip(new_args, cur.args)):
                cur = mk_app(cur.op, new_args)
                if isinstance(cur, Var):
                    break
        red = _root_reduce(cur, th, cache, counter)
        if red is None:
            break
        cur = red
        if isinstance(cur, Var):
            break
    if isinstance(t, App):
        cache[t] = cur
    return cur


def _root_reduce(t: Term, th: RewriteTheory, cache, counter) -> Optional[Term]:
    frozen = vars_of(t)
    for variants in th._extended_equations():
        for eqn in variants:
            for beta in match_modulo(eqn.lhs, t, protected=frozen):
                if not isinstance(eqn.cond, TrueF):
                    cond = apply_subst_formula(eqn.cond, beta)
                    if formula_vars(cond):
                        continue  # undecidable here; skip this redex
                    if not _eval_ground(cond, th, cache, counter):
                        continue
                counter[0] -= 1
                if counter[0] < 0:
                    raise RewriteBudgetError(
                        "simplification budget exceeded; convergence declaration suspect"
                    )
                return _simplify(apply_subst(eqn.rhs, beta), th, cache, counter)
    return None


def _eval_ground(f: Formula, th, cache, counter) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Lit):
        l = _simplify(renormalize(f.lhs), th, cache, counter)
        r = _simplify(renormalize(f.rhs), th, cache, counter)
        return (l == r) == f.positive
    if isinstance(f, Conj):
        return all(_eval_ground(p, th, cache, counter) for p in f.parts)
    if isinstance(f, Disj):
        return any(_eval_ground(p, th, cache, counter) for p in f.parts)
    raise TheoryError(f"cannot evaluate {f!r}")


def check_condition(phi: Formula, s: Subst, th: RewriteTheory) -> bool:
    """Decide a ground-instantiated condition by simplification.

    ``s`` must ground every variable of ``phi``.
    """
    inst = apply_subst_formula(phi, s)
    free = formula_vars(inst)
    if free:
        names = ", ".join(sorted(repr(v) for v in free))
        raise TheoryError(f"condition not ground under substitution: {names}")
    cache = th._caches.setdefault("simp", {})
    return _eval_ground(inst, th, cache, [DEFAULT_SIMPLIFY_BUDGET])


# ---------------------------------------------------------------------------
# ground stepping


def ground_step(
    t: Term,
    th: RewriteTheory,
    env: Mapping[str, Sequence[Term]] | None = None,
) -> list[tuple[str, dict[Var, Term], Term]]:
    """All one-step successors of a canonical ground state term.

    Rules apply at the root only (the theory is topmost).  Variables that
    occur only in a rule's right side or condition are instantiated from
    the per-sort domains in ``env``, except where a condition equation
    determines their value.  Results are simplified to canonical form.
    """
    env = env or {}
    out: list[tuple[str, dict[Var, Term], Term]] = []
    seen = set()
    for rule in th.rules:
        for beta in match_modulo(rule.lhs, t):
            for sigma in _complete_rule_subst(rule, dict(beta), th, env):
                if not isinstance(rule.cond, TrueF):
                    if not check_condition(rule.cond, sigma, th):
                        continue
                succ = simplify(apply_subst(rule.rhs, sigma), th)
                key = (rule.label, subst_key(sigma), succ)
                if key not in seen:
                    seen.add(key)
                    out.append((rule.label, sigma, succ))
    return out


def _complete_rule_subst(rule, beta, th, env):
    """Extend a left-side match to all rule variables."""
    missing = sorted(rule.rhs_only_vars() - set(beta), key=lambda v: v.name)
    if not missing:
        yield beta
        return
    # condition equations of the form  x = t  fix x once t is ground
    determined: dict[Var, Term] = {}
    pending = list(missing)
    progress = True
    while progress:
        progress = False
        for litf in _cond_equalities(rule.cond):
            for x, tm in ((litf.lhs, litf.rhs), (litf.rhs, litf.lhs)):
                if isinstance(x, Var) and x in pending:
                    inst = apply_subst(tm, {**beta, **determined})
                    if not vars_of(inst):
                        determined[x] = simplify(inst, th)
                        pending.remove(x)
                        progress = True
    base = {**beta, **determined}
    if not pending:
        yield base
        return
    domains = []
    for x in pending:
        dom = env.get(x.sort)
        if dom is None:
            raise OracleError(
                f"rule '{rule.label}': no environment domain for sort"
                f" {x.sort} of open variable {x!r}"
            )
        domains.append([renormalize(d) for d in dom])
    for combo in itertools.product(*domains):
        yield {**base, **dict(zip(pending, combo))}


def _cond_equalities(f: Formula):
    if isinstance(f, Lit) and f.positive:
        yield f
    elif isinstance(f, Conj):
        for p in f.parts:
            yield from _cond_equalities(p)


# ---------------------------------------------------------------------------
# validation


@dataclass
class LintReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_on_errors(self):
        if self.errors:
            raise TheoryError("; ".join(self.errors))

    def __str__(self):
        lines = [f"error: {e}" for e in self.errors]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) or "clean"


def inhabited_sorts(sig: Signature) -> frozenset[str]:
    """Sorts that have at least one ground constructor term."""
    done: set[str] = set()
    changed = True
    while changed:
        changed = False
        for op in sig.ctor_ops:
            if all(
                any(sig.sort_graph.leq(s2, s) for s2 in done) for s in op.arg_sorts
            ):
                for s in sig.sort_graph.sorts:
                    if sig.sort_graph.leq(op.result_sort, s) and s not in done:
                        done.add(s)
                        changed = True
    return frozenset(done)


def _state_reachable_arg_sorts(th: RewriteTheory) -> frozenset[str]:
    """Sorts whose constructor terms could contain a State-sorted subterm."""
    if th.state_sort is None:
        return frozenset()
    graph = th.sig.sort_graph
    bad: set[str] = {
        s for s in graph.sorts if graph.leq(th.state_sort, s) or graph.leq(s, th.state_sort)
    }
    changed = True
    while changed:
        changed = False
        for op in th.sig.ctor_ops:
            if any(a in bad for a in op.arg_sorts):
                for s in graph.sorts:
                    if graph.leq(op.result_sort, s) and s not in bad:
                        bad.add(s)
                        changed = True
    return frozenset(bad)


def validate_theory(th: RewriteTheory) -> LintReport:
    """Check every decidable theory requirement; warn on trusted ones.

    The structural axioms are derived from operator attributes, which by
    construction only admit regular and linear equations; the attribute
    combinations themselves are re-checked here.
    """
    rep = LintReport()
    sig = th.sig
    graph = sig.sort_graph

    for op in sig.operators:
        combo = (op.assoc, op.comm, op.identity is not None)
        allowed = {
            (False, False, False),
            (False, True, False),
            (True, False, True),
            (True, True, True),
            (True, True, False),
        }
        if combo not in allowed:
            rep.errors.append(
                f"operator '{op.name}': unsupported attribute combination"
            )

    missing = sorted(graph.sorts - inhabited_sorts(sig))
    for s in missing:
        rep.errors.append(f"sort {s} has no ground constructor term")

    for eqn in th.equations:
        if isinstance(eqn.lhs, Var):
            rep.errors.append(f"equation left side is a bare variable: {eqn.lhs!r}")
            continue
        extra = vars_of(eqn.rhs) - vars_of(eqn.lhs)
        if extra:
            rep.errors.append(
                f"equation for '{eqn.lhs.op.name}': right side has unbound"
                f" variables {sorted(v.name for v in extra)}"
            )
        extra_c = formula_vars(eqn.cond) - vars_of(eqn.lhs)
        if extra_c:
            rep.errors.append(
                f"equation for '{eqn.lhs.op.name}': condition has unbound"
                f" variables {sorted(v.name for v in extra_c)}"
            )

    if th.state_sort is not None and th.state_sort not in graph.sorts:
        rep.errors.append(f"state sort {th.state_sort} is not declared")

    for rule in th.rules:
        if not is_ctor_term(rule.lhs):
            rep.errors.append(
                f"rule '{rule.label}': left side is not a constructor term"
            )
        if th.state_sort is not None:
            for side, tm in (("left", rule.lhs), ("right", rule.rhs)):
                if least_sort(tm) != th.state_sort:
                    rep.errors.append(
                        f"rule '{rule.label}': {side} side has sort"
                        f" {least_sort(tm)}, expected {th.state_sort}"
                    )
        if isinstance(rule.lhs, Var):
            rep.warnings.append(
                f"rule '{rule.label}': left side is a bare variable"
            )
        cond_extra = formula_vars(rule.cond) - (vars_of(rule.lhs) | vars_of(rule.rhs))
        if cond_extra:
            rep.errors.append(
                f"rule '{rule.label}': condition variables"
                f" {sorted(v.name for v in cond_extra)} appear in neither side"
            )
        if rule.rhs_only_vars():
            rep.warnings.append(
                f"rule '{rule.label}' is an open-system rule (right-side-only"
                f" variables {sorted(v.name for v in rule.rhs_only_vars())})"
            )

    if th.state_sort is not None:
        bad = _state_reachable_arg_sorts(th)
        for op in sig.ctor_ops:
            if op.result_sort != th.state_sort:
                continue
            for i, s in enumerate(op.arg_sorts):
                if s in bad:
                    rep.errors.append(
                        f"state constructor '{op.name}': argument {i + 1} of sort"
                        f" {s} can contain State subterms (theory is not topmost)"
                    )

    if th.assumptions.convergent:
        rep.warnings.append("convergence of the equations is declared, not checked")
    if th.assumptions.coherent:
        rep.warnings.append("rule/equation coherence is declared, not checked")
    if th.assumptions.sufficiently_complete:
        rep.warnings.append(
            "sufficient completeness is declared, not checked (state terms are"
            " spot-checked during exploration)"
        )
    return rep
