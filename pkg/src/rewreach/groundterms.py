"""Enumeration of canonical ground constructor terms by size.

Size is the measure from ``terms.term_size``: node count, with flattened
associative applications contributing nothing themselves, so the size of
a collection is the total size of its elements.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Mapping, Optional, Sequence

from .errors import RewreachError
from .terms import App, Operator, Signature, Term, Var, mk_app, term_key, term_size

_ENUM_CACHE: dict = {}


def enumerate_ground(
    sig: Signature,
    sort: str,
    max_size: int,
    domains: Mapping[str, Sequence[Term]] | None = None,
) -> list[Term]:
    """All canonical ground constructor terms of sort <= ``sort``.

    Deterministically ordered by (size, term order).  When ``domains``
    has an entry for ``sort``, that explicit list (filtered by size) is
    used instead of the signature-driven enumeration.
    """
    if domains and sort in domains:
        terms = [t for t in domains[sort] if term_size(t) <= max_size]
        return sorted(terms, key=lambda t: (term_size(t), term_key(t)))
    pool = _pool(sig, max_size)
    graph = sig.sort_graph
    out = [t for t in pool if graph.leq(_least(t), sort)]
    return sorted(out, key=lambda t: (term_size(t), term_key(t)))


def _least(t: Term) -> str:
    return t.sort if isinstance(t, Var) else t.op.result_sort


def _pool(sig: Signature, max_size: int) -> list[Term]:
    key = (sig, max_size)
    if key in _ENUM_CACHE:
        return _ENUM_CACHE[key]
    by_size: dict[int, set[Term]] = {k: set() for k in range(1, max_size + 1)}
    graph = sig.sort_graph
    for k in range(1, max_size + 1):
        for op in sig.ctor_ops:
            if op.arity == 0:
                if term_size(mk_app(op, ())) == k:
                    by_size[k].add(mk_app(op, ()))
                continue
            smaller = [t for j in range(1, k) for t in by_size[j]]
            if not smaller:
                continue
            slots = []
            ok = True
            for s in op.arg_sorts:
                cands = [t for t in smaller if graph.leq(_least(t), s)]
                if not cands:
                    ok = False
                    break
                slots.append(cands)
            if not ok:
                continue
            for combo in itertools.product(*slots):
                if sum(term_size(c) for c in combo) > k:
                    continue
                t = mk_app(op, combo)
                sz = term_size(t)
                if 1 <= sz <= max_size:
                    by_size[sz].add(t)
    pool = [t for k in range(1, max_size + 1) for t in by_size[k]]
    pool = sorted(set(pool), key=lambda t: (term_size(t), term_key(t)))
    _ENUM_CACHE[key] = pool
    return pool


def infinite_sorts(sig: Signature) -> frozenset[str]:
    """Sorts with unboundedly many ground constructor terms.

    A sort is infinite exactly when some constructor relevant to it lies
    on a cycle of the sort/operator dependency graph (given non-empty
    sorts).
    """
    graph = sig.sort_graph
    # edge: sort s -> sort s'  when some ctor op with result <= s has an
    # argument sort s'' with s' <= s''  (a term of sort s may contain a
    # direct subterm of sort s')
    deps: dict[str, set[str]] = {s: set() for s in graph.sorts}
    for op in sig.ctor_ops:
        for s in graph.sorts:
            if graph.leq(op.result_sort, s):
                for a in op.arg_sorts:
                    for s2 in graph.sorts:
                        if graph.leq(s2, a):
                            deps[s].add(s2)
    # a sort is infinite if it is on a cycle or can reach one
    on_cycle = {s for s in graph.sorts if s in _reachable_from(deps, s)}
    inf = {
        s
        for s in graph.sorts
        if s in on_cycle or (_reachable_from(deps, s) & on_cycle)
    }
    return frozenset(inf)


def _reachable_from(deps, src) -> set[str]:
    seen: set[str] = set()
    stack = list(deps[src])
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(deps[cur])
    return seen


def max_term_size(sig: Signature, sort: str) -> Optional[int]:
    """Largest ground constructor term size for a finite sort; None if infinite."""
    if sort in infinite_sorts(sig):
        return None
    memo: dict[str, Optional[int]] = {}

    def go(s: str, stack: frozenset[str]) -> Optional[int]:
        if s in memo:
            return memo[s]
        if s in stack:
            return None
        best: Optional[int] = None
        for op in sig.ctor_ops:
            if not sig.sort_graph.leq(op.result_sort, s):
                continue
            total = 0 if op.assoc else 1
            dead = False
            for a in op.arg_sorts:
                sub = go(a, stack | {s})
                if sub is None:
                    dead = True
                    break
                total += sub
            if not dead:
                best = total if best is None else max(best, total)
        memo[s] = best
        return best

    return go(sort, frozenset())


def finite_domain(sig: Signature, sort: str) -> Optional[list[Term]]:
    """The full ground constructor domain of a finite sort, else None."""
    cap = max_term_size(sig, sort)
    if cap is None:
        return None
    return enumerate_ground(sig, sort, cap)
