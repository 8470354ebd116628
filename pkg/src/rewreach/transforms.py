"""Theory transformations: right-side abstraction and the stop extension.

The right-side abstraction rewrites every rule so its right side is a
constructor term, moving defined subterms into fresh-variable equations
in the condition; it leaves the reachable-state structure untouched.

The stop extension adds, for every state constructor, a bracketed twin
constructor and a rule that copies a state into its bracketed form.
Bracketed states have no successors, which turns invariance from an
initial-state set into a reachability question relative to the bracketed
terminating states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import TransformError
from .formulas import TRUE, Formula, TrueF, conj, eq, formula_vars
from .patterns import PatternAtom, PatternPredicate, rename_predicate
from .terms import (
    App,
    FreshGen,
    Operator,
    Signature,
    Term,
    Var,
    apply_subst,
    is_ctor_term,
    least_sort,
    mk_app,
    vars_of,
)
from .theory import RewriteTheory, Rule, validate_theory


def hat_transform(th: RewriteTheory, fresh: FreshGen | None = None) -> RewriteTheory:
    """Abstract every non-constructor right-side subterm into the condition.

    Each outermost non-constructor position p of a rule's right side is
    replaced by a fresh variable of the subterm's least sort, and the
    equation  x_p = subterm  is conjoined to the rule's condition.  Rules
    whose right side is already a constructor term are unchanged.
    """
    fresh = fresh or FreshGen()
    new_rules = []
    for rule in th.rules:
        if is_ctor_term(rule.rhs):
            new_rules.append(rule)
            continue
        taken = rule.rule_vars()
        bindings: list[Formula] = []

        def abstract(t: Term) -> Term:
            if isinstance(t, Var):
                return t
            if not t.op.ctor:
                x = fresh.fresh_var("a", least_sort(t))
                while x in taken:  # pragma: no cover - fresh names never collide
                    x = fresh.fresh_var("a", least_sort(t))
                bindings.append(eq(x, t))
                return x
            return mk_app(t.op, tuple(abstract(a) for a in t.args))

        rhs2 = abstract(rule.rhs)
        new_rules.append(
            Rule(rule.label, rule.lhs, rhs2, conj(rule.cond, *bindings))
        )
    return replace(th, rules=tuple(new_rules), _caches={})


def bracket_name(op_name: str) -> str:
    if op_name.startswith("<") and op_name.endswith(">"):
        return "[" + op_name[1:-1] + "]"
    return "[" + op_name + "]"


def stop_transform(th: RewriteTheory) -> tuple[RewriteTheory, PatternPredicate]:
    """Add a bracketed twin for each state constructor plus copy rules.

    Returns the extended theory and the terminating pattern predicate
    made of the bracketed patterns.  Refuses to run twice on a theory.
    """
    if th.bracket_twins:
        raise TransformError("theory already carries bracketed state constructors")
    if th.state_sort is None:
        raise TransformError("theory has no state sort")
    ctors = th.state_ctor_ops()
    if not ctors:
        raise TransformError("theory has no state constructors")
    twins = []
    new_ops = []
    for op in ctors:
        name = bracket_name(op.name)
        if th.sig.has_op(name):
            raise TransformError(f"operator name '{name}' already taken")
        twin = Operator(
            name, op.arg_sorts, op.result_sort, ctor=True, graph=th.sig.sort_graph
        )
        twins.append((op, twin))
        new_ops.append(twin)
    sig2 = Signature(th.sig.sort_graph, th.sig.operators + tuple(new_ops))
    stop_rules = []
    term_atoms = []
    for i, (op, twin) in enumerate(twins):
        xs = [Var(f"x{k + 1}", s) for k, s in enumerate(op.arg_sorts)]
        label = "stop" if len(twins) == 1 else f"stop-{i + 1}"
        stop_rules.append(Rule(label, mk_app(op, xs), mk_app(twin, xs)))
        term_atoms.append(PatternAtom(mk_app(twin, xs), TRUE))
    th2 = replace(
        th,
        sig=sig2,
        rules=th.rules + tuple(stop_rules),
        bracket_twins=tuple((op.name, twin.name) for op, twin in twins),
        _caches={},
    )
    return th2, PatternPredicate(tuple(term_atoms))


def bracket_lift(pred: PatternPredicate, th: RewriteTheory) -> PatternPredicate:
    """Replace each disjunct's state constructor by its bracketed twin.

    Constraints are carried over verbatim.  The input must be in standard
    form over the plain (angle) constructors.
    """
    out = []
    for a in pred.atoms:
        t = a.term
        if not isinstance(t, App):
            raise TransformError(f"pattern {t!r} is not in standard form")
        twin = th.twin_of(t.op.name)
        if twin is None:
            raise TransformError(
                f"no bracketed twin for state constructor '{t.op.name}'"
            )
        out.append(PatternAtom(mk_app(th.sig.op(twin), t.args), a.constraint))
    return PatternPredicate(tuple(out), pred.complete)


@dataclass(frozen=True)
class InvariantProblem:
    """Prove that every state reachable from ``start`` stays in ``always``."""

    name: str
    start: PatternPredicate
    always: PatternPredicate


@dataclass(frozen=True)
class InvariantGoals:
    """Everything needed to run an invariance proof.

    ``obligations`` are (start disjunct, invariant) inclusion checks;
    ``circularities`` are the conjectures to prove simultaneously over
    the stopped theory against ``terminating``.
    """

    problem: InvariantProblem
    theory: RewriteTheory
    terminating: PatternPredicate
    obligations: tuple[tuple[PatternAtom, PatternPredicate], ...]
    circularities: tuple["ReachabilityFormula", ...]  # noqa: F821  (prover type)
    renaming: dict


def invariant_to_goals(
    prob: InvariantProblem,
    th: RewriteTheory,
    fresh: FreshGen | None = None,
) -> InvariantGoals:
    """Reduce an invariance problem to reachability goals.

    Produces (i) one subsumption obligation per start-predicate disjunct
    against the invariant, and (ii) one circularity per invariant
    disjunct: the renamed disjunct must reach the bracketed invariant,
    relative to the bracketed terminating states of the stopped theory.
    """
    from .prover import ReachabilityFormula

    fresh = fresh or FreshGen()
    validate_theory(th).raise_on_errors()
    p = prob.always
    if prob.start.vars() & p.vars():
        p = rename_predicate(
            p, fresh.rename_disjoint(p.vars(), avoid=prob.start.vars())
        )
    th_stop, terminating = stop_transform(th)
    bracketed = bracket_lift(p, th_stop)
    ren = fresh.rename_disjoint(p.vars())
    p_renamed = rename_predicate(p, ren)
    circularities = tuple(
        ReachabilityFormula(f"G{i + 1}", lhs, bracketed.atoms)
        for i, lhs in enumerate(p_renamed.atoms)
    )
    obligations = tuple((a, p) for a in prob.start.atoms)
    return InvariantGoals(
        problem=prob,
        theory=th_stop,
        terminating=terminating,
        obligations=obligations,
        circularities=circularities,
        renaming={k: v for k, v in ren.items()},
    )
