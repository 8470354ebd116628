"""The two-rule proof system over reachability sequents, with search.

A sequent carries trusted axioms, pending circularities, one goal
formula, and the terminating-state predicate.  The step rule narrows the
goal's left side with every rule of the theory after strengthening its
constraint by the negated matches of the goal's targets; the axiom rule
summarizes runs by a trusted formula.  Circularities become usable as
axioms after the first step.

Search strategy, per goal: close by subsumption if possible, then try
each available axiom in order (backtracking across matchers and axioms),
then step.  Alpha-equivalent sequents are proved once.  All iteration
orders are deterministic, so identical inputs produce identical trees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import FormulaError, ProverError
from .formulas import (
    TRUE,
    Formula,
    TrueF,
    apply_subst_formula,
    conj,
    formula_vars,
    negate,
)
from .patterns import PatternAtom, PatternPredicate
from .solver import (
    NOT_PROVEN,
    SAT,
    UNKNOWN,
    UNSAT,
    VALID,
    SolverConfig,
    check_valid_implication,
    solve_sat,
)
from .terms import (
    App,
    FreshGen,
    Term,
    Var,
    apply_subst,
    is_ctor_term,
    vars_of,
)
from .theory import RewriteTheory, Rule, validate_theory
from .transforms import hat_transform
from .unify import match_modulo, unify_modulo


@dataclass(frozen=True)
class ReachabilityFormula:
    """lhs reaches some rhs disjunct on every terminating path."""

    name: str
    lhs: PatternAtom
    rhs: tuple[PatternAtom, ...]

    def __post_init__(self):
        for d in self.rhs:
            stray = formula_vars(d.constraint) - vars_of(d.term) - self.lhs.vars()
            if stray:
                names = ", ".join(sorted(v.name for v in stray))
                raise FormulaError(
                    f"formula {self.name}: target constraint variable(s) {names}"
                    " appear in neither the target pattern nor the left side"
                )

    @property
    def parameters(self) -> frozenset[Var]:
        rhs_vars: frozenset[Var] = frozenset()
        for d in self.rhs:
            rhs_vars |= d.vars()
        return self.lhs.vars() & rhs_vars


@dataclass(frozen=True)
class Sequent:
    axioms: tuple[ReachabilityFormula, ...]
    circularities: tuple[ReachabilityFormula, ...]
    goal: ReachabilityFormula
    terminating: PatternPredicate


@dataclass(frozen=True)
class StepEdge:
    rule_label: str
    unifier: tuple[tuple[Var, Term], ...]


@dataclass(frozen=True)
class StepApp:
    kind: str = field(default="step", init=False)
    edges: tuple[StepEdge, ...] = ()


@dataclass(frozen=True)
class AxiomApp:
    kind: str = field(default="axiom", init=False)
    axiom: str = ""
    matcher: tuple[tuple[Var, Term], ...] = ()


@dataclass(frozen=True)
class SubsumeApp:
    kind: str = field(default="subsume", init=False)
    disjunct: int = 0  # 1-based index into the goal's targets
    matcher: tuple[tuple[Var, Term], ...] = ()


@dataclass(frozen=True)
class VacuousApp:
    kind: str = field(default="vacuous", init=False)
    reason: str = ""


RuleApp = Union[StepApp, AxiomApp, SubsumeApp, VacuousApp]


@dataclass
class ProofTree:
    sequent: Sequent
    rule: RuleApp
    children: list["ProofTree"] = field(default_factory=list)

    def leaf_count(self) -> int:
        return 1 if not self.children else sum(c.leaf_count() for c in self.children)

    def rule_sequences(self) -> list[list[RuleApp]]:
        """Root-to-leaf rule annotations, for shape assertions."""
        if not self.children:
            return [[self.rule]]
        return [
            [self.rule] + seq for c in self.children for seq in c.rule_sequences()
        ]


PROVED = "proved"
STUCK = "stuck"
DEPTH_EXHAUSTED = "depth-exhausted"


@dataclass(frozen=True)
class ProverConfig:
    max_depth: int = 24
    solver: SolverConfig = SolverConfig()
    truncated_policy: str = "abort"  # or "warn"
    assume_unknown_sat: bool = True

    def __post_init__(self):
        if self.max_depth < 1:
            raise ProverError("max_depth must be at least 1")
        if self.truncated_policy not in ("abort", "warn"):
            raise ProverError("truncated_policy must be 'abort' or 'warn'")


@dataclass
class FormulaOutcome:
    formula: ReachabilityFormula
    verdict: str
    tree: Optional[ProofTree] = None


@dataclass
class ProveResult:
    outcomes: list[FormulaOutcome]
    trace: list[str]

    @property
    def proved(self) -> bool:
        return all(o.verdict == PROVED for o in self.outcomes)

    @property
    def verdict(self) -> str:
        if self.proved:
            return PROVED
        if any(o.verdict == DEPTH_EXHAUSTED for o in self.outcomes):
            return DEPTH_EXHAUSTED
        return STUCK


def _subst_tuple(s: Mapping[Var, Term]) -> tuple[tuple[Var, Term], ...]:
    return tuple(sorted(s.items(), key=lambda kv: (kv[0].name, kv[0].sort)))


# ---------------------------------------------------------------------------
# spec-level operations


def match_set(
    u: PatternAtom,
    targets: Sequence[PatternAtom],
    fresh: FreshGen | None = None,
) -> list[tuple[int, dict[Var, Term]]]:
    """Matches of each target pattern against the goal's left side.

    Only target variables outside the left side may be bound; left-side
    variables (pattern and constraint alike) are protected, which keeps
    parameters intact.
    """
    protected = u.vars()
    out: list[tuple[int, dict[Var, Term]]] = []
    for i, v in enumerate(targets):
        for beta in match_modulo(v.term, u.term, fresh, protected=protected):
            out.append((i, dict(beta)))
    return out


def unify_set(
    head: PatternAtom,
    th: RewriteTheory,
    fresh: FreshGen,
    cfg: ProverConfig,
    trace: Optional[list[str]] = None,
) -> list[tuple[Rule, dict[Var, Term], Formula]]:
    """Rule unifiers of the goal head whose combined constraint survives.

    Every rule is renamed apart first.  A unifier is dropped only when
    the solver refutes the combined constraint; UNKNOWN keeps it as a
    safe over-approximation (or raises, when so configured).
    """
    out = []
    for rule in th.rules:
        ren = fresh.rename_disjoint(rule.rule_vars(), avoid=head.vars())
        lhs = apply_subst(rule.lhs, ren)
        cond = apply_subst_formula(rule.cond, ren)
        rhs = apply_subst(rule.rhs, ren)
        unifs = unify_modulo(head.term, lhs, fresh, split_bound=cfg.solver.split_bound)
        if not unifs.complete:
            if cfg.truncated_policy == "abort":
                raise ProverError(
                    f"truncated unifier set for rule '{rule.label}';"
                    " rerun with truncated_policy='warn' to continue unsoundly-complete"
                )
            if trace is not None:
                trace.append(
                    f"warning: truncated unifier set for rule '{rule.label}'"
                )
        for alpha in unifs:
            combined = apply_subst_formula(conj(head.constraint, cond), alpha)
            verdict = solve_sat(combined, th, cfg.solver)
            if verdict.kind == UNSAT:
                continue
            if verdict.kind == UNKNOWN and not cfg.assume_unknown_sat:
                raise ProverError(
                    "undecided rule-constraint satisfiability with"
                    " assume_unknown_sat disabled"
                )
            out.append((replace(rule, lhs=lhs, rhs=rhs, cond=cond), dict(alpha), combined))
    return out


# ---------------------------------------------------------------------------
# search


class _Session:
    def __init__(self, th: RewriteTheory, terminating: PatternPredicate, cfg: ProverConfig):
        self.th = th
        self.terminating = terminating
        self.cfg = cfg
        self.fresh = FreshGen()
        self.memo: dict[str, ProofTree] = {}
        self.failed: dict[str, int] = {}  # key -> highest depth that failed
        self.stack: set[str] = set()
        self.trace: list[str] = []
        self.depth_hit = False

    def log(self, msg: str):
        self.trace.append(msg)


def _canonical_key(seq: Sequent) -> str:
    ordered: list[Var] = []
    seen: set[Var] = set()

    def collect_term(t: Term):
        if isinstance(t, Var):
            if t not in seen:
                seen.add(t)
                ordered.append(t)
        else:
            for a in t.args:
                collect_term(a)

    def collect_formula(f: Formula):
        from .formulas import Conj, Disj, Lit

        if isinstance(f, Lit):
            collect_term(f.lhs)
            collect_term(f.rhs)
        elif isinstance(f, (Conj, Disj)):
            for p in f.parts:
                collect_formula(p)

    def collect_atom(a: PatternAtom):
        collect_term(a.term)
        collect_formula(a.constraint)

    collect_atom(seq.goal.lhs)
    for d in seq.goal.rhs:
        collect_atom(d)
    ren = {v: Var(f"_{i}", v.sort) for i, v in enumerate(ordered)}
    lhs = PatternAtom(
        apply_subst(seq.goal.lhs.term, ren),
        apply_subst_formula(seq.goal.lhs.constraint, ren),
    )
    rhs = tuple(
        (repr(apply_subst(d.term, ren)), repr(apply_subst_formula(d.constraint, ren)))
        for d in seq.goal.rhs
    )
    ax = ",".join(sorted(a.name for a in seq.axioms))
    circ = ",".join(sorted(c.name for c in seq.circularities))
    return f"[{ax}|{circ}] {lhs.term!r} | {lhs.constraint!r} ->* {rhs}"


def prove_set(
    circularities: Sequence[ReachabilityFormula],
    th: RewriteTheory,
    terminating: PatternPredicate,
    cfg: ProverConfig = ProverConfig(),
) -> ProveResult:
    """Attempt to close every goal, with the goal set as circularities.

    The effort succeeds only if every formula closes.  Rules with
    non-constructor right sides are abstracted first (the transformation
    preserves the reachable-state structure).
    """
    rep = validate_theory(th)
    rep.raise_on_errors()
    if any(not is_ctor_term(r.rhs) for r in th.rules):
        th = hat_transform(th)
    session = _Session(th, terminating, cfg)
    circ = tuple(circularities)
    outcomes: list[FormulaOutcome] = []
    for f in circ:
        seq = Sequent(axioms=(), circularities=circ, goal=f, terminating=terminating)
        session.depth_hit = False
        tree = _prove(seq, cfg.max_depth, session)
        if tree is None:
            verdict = DEPTH_EXHAUSTED if session.depth_hit else STUCK
            outcomes.append(FormulaOutcome(f, verdict))
        else:
            outcomes.append(FormulaOutcome(f, PROVED, tree))
    return ProveResult(outcomes, session.trace)


def _prove(seq: Sequent, depth: int, s: _Session) -> Optional[ProofTree]:
    key = _canonical_key(seq)
    if key in s.memo:
        return s.memo[key]
    if s.failed.get(key, -1) >= depth:
        return None
    if key in s.stack:
        s.log(f"cycle on {seq.goal.name}")
        return None
    s.stack.add(key)
    try:
        tree = _attempt(seq, depth, s)
    finally:
        s.stack.discard(key)
    if tree is not None:
        s.memo[key] = tree
    else:
        s.failed[key] = max(s.failed.get(key, -1), depth)
    return tree


def _attempt(seq: Sequent, depth: int, s: _Session) -> Optional[ProofTree]:
    cfg = s.cfg
    goal = seq.goal
    u = goal.lhs

    if solve_sat(u.constraint, s.th, cfg.solver).kind == UNSAT:
        return ProofTree(seq, VacuousApp(reason="left side denotes no states"))

    matches = match_set(u, goal.rhs, s.fresh)
    for i, beta in matches:
        inst = apply_subst_formula(goal.rhs[i].constraint, beta)
        if check_valid_implication(u.constraint, inst, s.th, cfg.solver) == VALID:
            return ProofTree(seq, SubsumeApp(disjunct=i + 1, matcher=_subst_tuple(beta)))

    phi_prime = conj(
        u.constraint,
        *(
            negate(apply_subst_formula(goal.rhs[i].constraint, beta))
            for i, beta in matches
        ),
    )
    if matches and solve_sat(phi_prime, s.th, cfg.solver).kind == UNSAT:
        return ProofTree(seq, VacuousApp(reason="left side covered by targets"))

    if not seq.circularities:
        tree = _try_axioms(seq, depth, s)
        if tree is not None:
            return tree

    return _try_step(seq, phi_prime, depth, s)


def _try_axioms(seq: Sequent, depth: int, s: _Session) -> Optional[ProofTree]:
    cfg = s.cfg
    goal = seq.goal
    u = goal.lhs
    goal_rhs_vars: frozenset[Var] = frozenset()
    for d in goal.rhs:
        goal_rhs_vars |= d.vars()
    params = u.vars() & goal_rhs_vars

    for ax in seq.axioms:
        ren = s.fresh.rename_disjoint(
            ax.lhs.vars() | frozenset().union(frozenset(), *(d.vars() for d in ax.rhs)),
            avoid=u.vars() | goal_rhs_vars,
        )
        ax_lhs = PatternAtom(
            apply_subst(ax.lhs.term, ren),
            apply_subst_formula(ax.lhs.constraint, ren),
        )
        if formula_vars(ax_lhs.constraint) - vars_of(ax_lhs.term):
            s.log(f"axiom {ax.name}: constraint variables unmatched; skipped")
            continue
        ax_rhs = tuple(
            PatternAtom(apply_subst(d.term, ren), apply_subst_formula(d.constraint, ren))
            for d in ax.rhs
        )
        for alpha in match_modulo(ax_lhs.term, u.term, s.fresh, protected=u.vars()):
            if (
                check_valid_implication(
                    u.constraint,
                    apply_subst_formula(ax_lhs.constraint, alpha),
                    s.th,
                    cfg.solver,
                )
                != VALID
            ):
                s.log(f"axiom {ax.name}: constraint implication not proven")
                continue
            children_seqs = []
            param_ok = True
            for d in ax_rhs:
                child_lhs = PatternAtom(
                    apply_subst(d.term, alpha),
                    conj(u.constraint, apply_subst_formula(d.constraint, alpha)),
                )
                if child_lhs.vars() & goal_rhs_vars != params:
                    param_ok = False
                    break
                children_seqs.append(
                    Sequent(
                        axioms=seq.axioms,
                        circularities=(),
                        goal=ReachabilityFormula(goal.name, child_lhs, goal.rhs),
                        terminating=seq.terminating,
                    )
                )
            if not param_ok:
                s.log(f"axiom {ax.name}: parameter preservation fails; matcher skipped")
                continue
            subtrees = []
            ok = True
            for child in children_seqs:
                t = _prove(child, depth, s)
                if t is None:
                    ok = False
                    break
                subtrees.append(t)
            if ok:
                return ProofTree(
                    seq,
                    AxiomApp(axiom=ax.name, matcher=_subst_tuple(alpha)),
                    subtrees,
                )
    return None


def _try_step(
    seq: Sequent, phi_prime: Formula, depth: int, s: _Session
) -> Optional[ProofTree]:
    cfg = s.cfg
    goal = seq.goal
    u = goal.lhs

    if depth <= 0:
        s.depth_hit = True  # type: ignore[attr-defined]
        s.log(f"depth budget exhausted at {goal.name}")
        return None

    # side condition: the strengthened left side must be disjoint from the
    # terminating states, so every remaining state has a successor
    side_parts = []
    for t_atom in seq.terminating.atoms:
        ren = s.fresh.rename_disjoint(t_atom.vars(), avoid=u.vars())
        t_term = apply_subst(t_atom.term, ren)
        t_cond = apply_subst_formula(t_atom.constraint, ren)
        for gamma in unify_modulo(u.term, t_term, s.fresh, split_bound=cfg.solver.split_bound):
            side_parts.append(
                apply_subst_formula(conj(phi_prime, t_cond), gamma)
            )
    if side_parts:
        from .formulas import disj

        verdict = solve_sat(disj(*side_parts), s.th, cfg.solver)
        if verdict.kind != UNSAT:
            s.log(
                f"step blocked at {goal.name}: cannot refute overlap с"
                f" terminating states ({verdict.kind})"
            )
            return None

    head = PatternAtom(u.term, phi_prime)
    try:
        successors = unify_set(head, s.th, s.fresh, cfg, s.trace)
    except ProverError:
        raise
    goal_rhs_vars: frozenset[Var] = frozenset()
    for d in goal.rhs:
        goal_rhs_vars |= d.vars()
    params = u.vars() & goal_rhs_vars

    edges = []
    children = []
    for rule, alpha, combined in successors:
        child_lhs = PatternAtom(apply_subst(rule.rhs, alpha), combined)
        child_rhs = tuple(
            PatternAtom(apply_subst(d.term, alpha), apply_subst_formula(d.constraint, alpha))
            for d in goal.rhs
        )
        lhs_after = PatternAtom(
            apply_subst(u.term, alpha), apply_subst_formula(u.constraint, alpha)
        )
        rhs_after_vars: frozenset[Var] = frozenset()
        for d in child_rhs:
            rhs_after_vars |= d.vars()
        if lhs_after.vars() & rhs_after_vars != child_lhs.vars() & rhs_after_vars:
            s.log(
                f"step at {goal.name}: parameter preservation fails for rule"
                f" '{rule.label}'"
            )
            return None
        edges.append(StepEdge(rule.label, _subst_tuple(alpha)))
        children.append(
            Sequent(
                axioms=tuple(
                    dict.fromkeys(seq.axioms + seq.circularities)
                ),
                circularities=(),
                goal=ReachabilityFormula(goal.name, child_lhs, child_rhs),
                terminating=seq.terminating,
            )
        )

    subtrees = []
    for child in children:
        t = _prove(child, depth - 1, s)
        if t is None:
            s.log(f"step child failed at {goal.name}")
            return None
        subtrees.append(t)
    return ProofTree(seq, StepApp(edges=tuple(edges)), subtrees)
