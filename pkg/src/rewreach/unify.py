"""Matching and unification modulo the declared structural axioms.

Per-operator axiom support: free, commutative, associative+commutative
(with or without identity), and associative+identity.  AC problems are
solved by flattening plus a minimal-basis linear Diophantine method with
sort-constrained recombination; associative+identity problems by
fragment splitting bounded by a configurable split count, with a
truncation flag on the result when the bound was hit.

Matching is unification with the subject's variables (and any extra
protected variables) frozen: frozen variables behave as constants and
are never bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence

from .errors import UnifyBudgetError
from .terms import (
    App,
    FreshGen,
    Operator,
    SortGraph,
    Subst,
    Term,
    Var,
    apply_subst,
    compose_subst,
    least_sort,
    mk_app,
    renormalize,
    restrict_subst,
    subst_key,
    term_key,
    vars_of,
)

b_normalize = renormalize

DEFAULT_SPLIT_BOUND = 4
_BASIS_CAP = 200_000
_SUBSET_CAP = 16


@dataclass
class UnifierSet:
    """Set of unifiers, complete unless ``complete`` is False."""

    substs: list[dict[Var, Term]]
    complete: bool = True

    def __iter__(self):
        return iter(self.substs)

    def __len__(self):
        return len(self.substs)


MatchSet = UnifierSet


@lru_cache(maxsize=4096)
def diophantine_basis(
    lhs_coeffs: tuple[int, ...], rhs_coeffs: tuple[int, ...]
) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    """Minimal nonzero nonnegative solutions of  sum(a_i x_i) = sum(b_j y_j).

    Minimal solutions satisfy x_i <= max(b) and y_j <= max(a), so a bounded
    enumeration followed by a minimality filter is exact.
    """
    a, b = lhs_coeffs, rhs_coeffs
    if not a or not b:
        return ()
    bx, by = max(b), max(a)
    if (bx + 1) ** len(a) * (by + 1) ** len(b) > _BASIS_CAP:
        raise UnifyBudgetError("Diophantine enumeration bound exceeded")
    sols = []
    for xs in itertools.product(range(bx + 1), repeat=len(a)):
        lhs_val = sum(ai * xi for ai, xi in zip(a, xs))
        for ys in itertools.product(range(by + 1), repeat=len(b)):
            if (any(xs) or any(ys)) and lhs_val == sum(
                bj * yj for bj, yj in zip(b, ys)
            ):
                sols.append((xs, ys))
    minimal = []
    for s in sols:
        flat_s = s[0] + s[1]
        dominated = any(
            o != s and all(fo <= fs for fo, fs in zip(o[0] + o[1], flat_s))
            for o in sols
        )
        if not dominated:
            minimal.append(s)
    minimal.sort()
    return tuple(minimal)


class _FallbackGraph:
    """Used when a problem contains no application at all: sorts compare by name."""

    def leq(self, a, b):
        return a == b

    def glb_sorts(self, a, b):
        return ()


class _Ctx:
    """State threaded through one solver run."""

    __slots__ = ("fresh", "frozen", "graph", "split_bound", "complete")

    def __init__(self, fresh: FreshGen, frozen: frozenset[Var], graph, split_bound: int):
        self.fresh = fresh
        self.frozen = frozen
        self.graph = graph
        self.split_bound = split_bound
        self.complete = True


def _elements(t: Term, op: Operator) -> tuple[Term, ...]:
    if isinstance(t, App) and t.op == op:
        return t.args
    return (t,)


def _top_assoc_op(l: Term, r: Term) -> Optional[Operator]:
    for t in (l, r):
        if isinstance(t, App) and t.op.assoc:
            return t.op
    return None


def _splittable(e: Term, op: Operator, ctx: _Ctx) -> bool:
    """Can this element stand for any number of ``op`` collection slots?"""
    return (
        isinstance(e, Var)
        and e not in ctx.frozen
        and ctx.graph.leq(op.result_sort, e.sort)
    )


def _solve(eqs, sigma, ctx: _Ctx, splits) -> Iterator[dict[Var, Term]]:
    if not eqs:
        yield sigma
        return
    (l, r), rest = eqs[0], eqs[1:]
    l = apply_subst(l, sigma)
    r = apply_subst(r, sigma)
    if l == r:
        yield from _solve(rest, sigma, ctx, splits)
        return

    op = _top_assoc_op(l, r)
    if op is not None:
        le, re_ = _elements(l, op), _elements(r, op)
        if op.comm:
            yield from _solve_ac(op, le, re_, rest, sigma, ctx, splits)
        else:
            yield from _solve_assoc(op, le, re_, rest, sigma, ctx, splits)
        return

    if isinstance(l, Var) or isinstance(r, Var):
        if not isinstance(l, Var):
            l, r = r, l
        yield from _solve_var(l, r, rest, sigma, ctx, splits)
        return

    if l.op != r.op:
        return
    if l.op.comm:
        (a1, a2), (b1, b2) = l.args, r.args
        yield from _solve([(a1, b1), (a2, b2)] + rest, sigma, ctx, splits)
        yield from _solve([(a1, b2), (a2, b1)] + rest, sigma, ctx, splits)
    else:
        yield from _solve(list(zip(l.args, r.args)) + rest, sigma, ctx, splits)


def _bind(x, t, rest, sigma, ctx, splits):
    yield from _solve(rest, compose_subst(sigma, {x: t}), ctx, splits)


def _solve_var(x: Var, t: Term, rest, sigma, ctx: _Ctx, splits):
    if x in ctx.frozen:
        if isinstance(t, Var) and t not in ctx.frozen:
            yield from _solve_var(t, x, rest, sigma, ctx, splits)
        return
    if isinstance(t, Var):
        if ctx.graph.leq(t.sort, x.sort):
            yield from _bind(x, t, rest, sigma, ctx, splits)
        elif ctx.graph.leq(x.sort, t.sort):
            if t in ctx.frozen:
                return
            yield from _bind(t, x, rest, sigma, ctx, splits)
        elif t not in ctx.frozen:
            for s in ctx.graph.glb_sorts(x.sort, t.sort):
                z = ctx.fresh.fresh_var(x.name, s)
                yield from _solve(
                    rest, compose_subst(sigma, {x: z, t: z}), ctx, splits
                )
        return
    # non-associative application (associative tops were routed earlier)
    if x in vars_of(t):
        return
    if ctx.graph.leq(least_sort(t), x.sort):
        yield from _bind(x, t, rest, sigma, ctx, splits)


def _multiplicities(elems: Iterable[Term]) -> list[tuple[Term, int]]:
    out: list[tuple[Term, int]] = []
    for e in sorted(elems, key=term_key):
        if out and out[-1][0] == e:
            out[-1] = (e, out[-1][1] + 1)
        else:
            out.append((e, 1))
    return out


def _solve_ac(op, lelems, relems, rest, sigma, ctx: _Ctx, splits):
    # multisets are cancellative: drop syntactically equal elements pairwise
    lrem, rrem = list(lelems), list(relems)
    for e in list(lrem):
        if e in rrem:
            lrem.remove(e)
            rrem.remove(e)
    if not lrem and not rrem:
        yield from _solve(rest, sigma, ctx, splits)
        return
    if not lrem or not rrem:
        side = lrem or rrem
        if op.identity is None:
            return
        binds = {}
        for e in side:
            if _splittable(e, op, ctx):
                binds[e] = op.identity
            else:
                return
        yield from _solve(rest, compose_subst(sigma, binds), ctx, splits)
        return

    lmult, rmult = _multiplicities(lrem), _multiplicities(rrem)
    lterms = [e for e, _ in lmult]
    rterms = [e for e, _ in rmult]
    basis = diophantine_basis(
        tuple(m for _, m in lmult), tuple(m for _, m in rmult)
    )
    if len(basis) > _SUBSET_CAP:
        raise UnifyBudgetError(
            f"AC unification basis too large ({len(basis)} minimal solutions)"
        )
    lsplit = [_splittable(e, op, ctx) for e in lterms]
    rsplit = [_splittable(e, op, ctx) for e in rterms]
    elem_sort = op.arg_sorts[0]

    for mask in range(1, 1 << len(basis)):
        chosen = [basis[k] for k in range(len(basis)) if mask >> k & 1]
        ltot = [sum(c[0][i] for c in chosen) for i in range(len(lterms))]
        rtot = [sum(c[1][j] for c in chosen) for j in range(len(rterms))]
        if not (_totals_ok(ltot, lsplit, op) and _totals_ok(rtot, rsplit, op)):
            continue
        zvars = [ctx.fresh.fresh_var("z", elem_sort) for _ in chosen]
        eqs: list[tuple[Term, Term]] = []
        for terms, split_flags, coeff_side in (
            (lterms, lsplit, 0),
            (rterms, rsplit, 1),
        ):
            for i, e in enumerate(terms):
                parts: list[Term] = []
                for k, sol in enumerate(chosen):
                    parts.extend([zvars[k]] * sol[coeff_side][i])
                if split_flags[i]:
                    if not parts:
                        value: Term = op.identity  # type: ignore[assignment]
                    elif len(parts) == 1:
                        value = parts[0]
                    else:
                        value = mk_app(op, parts)
                    eqs.append((e, value))
                else:
                    eqs.append((e, parts[0]))
        yield from _solve(eqs + rest, sigma, ctx, splits)


def _totals_ok(totals, splittable, op) -> bool:
    for tot, spl in zip(totals, splittable):
        if spl:
            if tot == 0 and op.identity is None:
                return False
        elif tot != 1:
            return False
    return True


def _reflatten(seq: Sequence[Term], subst: Subst, op: Operator) -> tuple[Term, ...]:
    out: list[Term] = []
    for e in seq:
        e2 = apply_subst(e, subst) if subst else e
        if isinstance(e2, App) and e2.op == op:
            out.extend(e2.args)
        elif op.identity is not None and e2 == op.identity:
            continue
        else:
            out.append(e2)
    return tuple(out)


def _solve_assoc(op, lseq, rseq, rest, sigma, ctx: _Ctx, splits: dict):
    """Associative(+identity) sequence unification by bounded head splitting."""
    lseq, rseq = tuple(lseq), tuple(rseq)
    while lseq and rseq and lseq[0] == rseq[0]:
        lseq, rseq = lseq[1:], rseq[1:]
    while lseq and rseq and lseq[-1] == rseq[-1]:
        lseq, rseq = lseq[:-1], rseq[:-1]
    if not lseq and not rseq:
        yield from _solve(rest, sigma, ctx, splits)
        return
    if not lseq or not rseq:
        side = lseq or rseq
        if op.identity is None:
            return
        binds = {}
        for e in side:
            if _splittable(e, op, ctx):
                binds[e] = op.identity
            else:
                return
        yield from _solve(rest, compose_subst(sigma, binds), ctx, splits)
        return

    a, b = lseq[0], rseq[0]
    a_split = _splittable(a, op, ctx)
    b_split = _splittable(b, op, ctx)

    def descend(binds, new_l, new_r, new_splits):
        sigma2 = compose_subst(sigma, binds)
        yield from _solve_assoc(
            op,
            _reflatten(new_l, binds, op),
            _reflatten(new_r, binds, op),
            rest,
            sigma2,
            ctx,
            new_splits,
        )

    if a_split:
        if op.identity is not None:
            yield from descend({a: op.identity}, lseq[1:], rseq, splits)
        lineage = a.name.split("#", 1)[0]
        if splits.get(lineage, 0) < ctx.split_bound:
            a2 = ctx.fresh.fresh_var(a.name, a.sort)
            splits2 = dict(splits, **{lineage: splits.get(lineage, 0) + 1})
            yield from descend(
                {a: mk_app(op, (b, a2))}, (a2,) + lseq[1:], rseq[1:], splits2
            )
        else:
            ctx.complete = False
    if b_split:
        if op.identity is not None:
            yield from descend({b: op.identity}, lseq, rseq[1:], splits)
        lineage = b.name.split("#", 1)[0]
        if splits.get(lineage, 0) < ctx.split_bound:
            b2 = ctx.fresh.fresh_var(b.name, b.sort)
            splits2 = dict(splits, **{lineage: splits.get(lineage, 0) + 1})
            yield from descend(
                {b: mk_app(op, (a, b2))}, lseq[1:], (b2,) + rseq[1:], splits2
            )
        else:
            ctx.complete = False
    if not a_split and not b_split:
        for sigma2 in _solve([(a, b)], sigma, ctx, splits):
            yield from _solve_assoc(
                op,
                _reflatten(lseq[1:], sigma2, op),
                _reflatten(rseq[1:], sigma2, op),
                rest,
                sigma2,
                ctx,
                splits,
            )


# ---------------------------------------------------------------------------
# public entry points


def _graph_of(*terms: Term):
    for t in terms:
        for sub in _iter_apps(t):
            return sub.op._require_graph()
    return _FallbackGraph()


def _iter_apps(t: Term):
    if isinstance(t, App):
        yield t
        for a in t.args:
            yield from _iter_apps(a)


def unify_modulo(
    t1: Term,
    t2: Term,
    fresh: FreshGen | None = None,
    frozen: Iterable[Var] = (),
    split_bound: int = DEFAULT_SPLIT_BOUND,
    minimize: bool = True,
) -> UnifierSet:
    """A complete set of unifiers of ``t1`` and ``t2`` modulo the axioms.

    For problems involving associativity without commutativity the set is
    complete up to the split bound; ``complete`` is False when the bound
    was hit.  Frozen variables are never bound.
    """
    t1, t2 = renormalize(t1), renormalize(t2)
    return _run(
        [(t1, t2)],
        fresh,
        frozenset(frozen),
        split_bound,
        keep_vars=vars_of(t1) | vars_of(t2),
        minimize=minimize,
    )


def unify_equations(
    eqs: Sequence[tuple[Term, Term]],
    fresh: FreshGen | None = None,
    frozen: Iterable[Var] = (),
    split_bound: int = DEFAULT_SPLIT_BOUND,
    minimize: bool = True,
) -> UnifierSet:
    """Simultaneous unification of a system of equations."""
    eqs = [(renormalize(l), renormalize(r)) for l, r in eqs]
    keep: frozenset[Var] = frozenset()
    for l, r in eqs:
        keep |= vars_of(l) | vars_of(r)
    return _run(eqs, fresh, frozenset(frozen), split_bound, keep, minimize)


def match_modulo(
    pattern: Term,
    subject: Term,
    fresh: FreshGen | None = None,
    protected: Iterable[Var] | None = None,
    split_bound: int = DEFAULT_SPLIT_BOUND,
) -> MatchSet:
    """Complete set of matches beta with  subject =_B  pattern beta.

    The subject's variables plus any extra ``protected`` variables are
    treated as constants, so beta binds pattern variables only.
    """
    pattern, subject = renormalize(pattern), renormalize(subject)
    frozen = frozenset(vars_of(subject)) | frozenset(protected or ())
    res = _run(
        [(pattern, subject)],
        fresh,
        frozen,
        split_bound,
        keep_vars=vars_of(pattern) - frozen,
        minimize=False,
    )
    res.substs = [s for s in res.substs if apply_subst(pattern, s) == subject]
    return res


def _run(eqs, fresh, frozen, split_bound, keep_vars, minimize) -> UnifierSet:
    ctx = _Ctx(
        fresh or FreshGen(),
        frozen,
        _graph_of(*(t for eq in eqs for t in eq)),
        split_bound,
    )
    out: list[dict[Var, Term]] = []
    seen = set()
    for s in _solve(list(eqs), {}, ctx, {}):
        s2 = restrict_subst(s, keep_vars)
        key = subst_key(s2)
        if key not in seen:
            seen.add(key)
            out.append(s2)
    out.sort(key=subst_key)
    if minimize and 1 < len(out) <= 32:
        out = _minimize(out, sorted(keep_vars, key=lambda v: (v.name, v.sort)), ctx)
    return UnifierSet(out, ctx.complete)


def _minimize(substs, keep, ctx: _Ctx):
    """Drop unifiers that are instances of another member of the set."""
    n = len(substs)
    dropped = [False] * n
    for i in range(n):
        if dropped[i]:
            continue
        for j in range(n):
            if i == j or dropped[j]:
                continue
            if _is_instance_of(substs[i], substs[j], keep, ctx.split_bound):
                if j > i and _is_instance_of(substs[j], substs[i], keep, ctx.split_bound):
                    continue  # mutual renamings: keep the earlier one
                dropped[i] = True
                break
    return [s for k, s in enumerate(substs) if not dropped[k]]


def _is_instance_of(s, t, keep, split_bound) -> bool:
    """True when ``s`` agrees with ``t`` composed with some substitution."""
    rhs_terms = [apply_subst(x, s) for x in keep]
    frozen: frozenset[Var] = frozenset()
    for tm in rhs_terms:
        frozen |= vars_of(tm)
    eqs = [(apply_subst(x, t), rhs) for x, rhs in zip(keep, rhs_terms)]
    ctx = _Ctx(FreshGen(), frozen, _graph_of(*(tm for eq in eqs for tm in eq)), split_bound)
    try:
        for _ in _solve(eqs, {}, ctx, {}):
            return True
    except UnifyBudgetError:
        return False
    return False
