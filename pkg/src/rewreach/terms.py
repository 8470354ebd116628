"""Order-sorted signatures, terms, and substitutions.

Terms are immutable and are kept in a canonical form by the smart
constructor ``mk_app``: argument lists of associative operators are
flattened, identity elements are removed, and argument lists of
commutative operators are sorted under a fixed total order on terms.
Equality modulo the declared structural axioms (associativity,
commutativity, identity) is therefore plain structural equality.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .errors import SignatureError, SortError, TermError

Sort = str
Position = tuple[int, ...]


# ---------------------------------------------------------------------------
# sorts


@dataclass(frozen=True)
class SortGraph:
    """A finite set of sort names with a subsort partial order."""

    sorts: frozenset[str]
    subsort_pairs: frozenset[tuple[str, str]]  # (lower, upper)

    def __post_init__(self):
        for lo, hi in self.subsort_pairs:
            for s in (lo, hi):
                if s not in self.sorts:
                    raise SortError(f"subsort declaration uses undeclared sort '{s}'")
        ups: dict[str, set[str]] = {s: {s} for s in self.sorts}
        changed = True
        while changed:
            changed = False
            for lo, hi in self.subsort_pairs:
                new = ups[hi] - ups[lo]
                if new:
                    ups[lo] |= new
                    changed = True
        for s in self.sorts:
            for t in ups[s]:
                if t != s and s in ups[t]:
                    raise SortError(f"subsort cycle through '{s}' and '{t}'")
        object.__setattr__(self, "_ups", {s: frozenset(u) for s, u in ups.items()})

    def leq(self, lower: str, upper: str) -> bool:
        return upper in self._ups[lower]

    def upper_set(self, sort: str) -> frozenset[str]:
        return self._ups[sort]

    def comparable(self, a: str, b: str) -> bool:
        return self.leq(a, b) or self.leq(b, a)

    def glb_sorts(self, a: str, b: str) -> tuple[str, ...]:
        """Maximal sorts below both `a` and `b`, in name order."""
        lows = [s for s in sorted(self.sorts) if self.leq(s, a) and self.leq(s, b)]
        return tuple(s for s in lows if not any(s != t and self.leq(s, t) for t in lows))


def sort_graph(sorts: Iterable[str], pairs: Iterable[tuple[str, str]] = ()) -> SortGraph:
    return SortGraph(frozenset(sorts), frozenset(pairs))


# ---------------------------------------------------------------------------
# operators and signatures


@dataclass(frozen=True)
class Operator:
    """An operator declaration.

    ``name`` may contain underscores marking mixfix argument slots.  The
    supported attribute combinations are: none, comm, assoc+id,
    assoc+comm, assoc+comm+id.  ``identity``, when present, must be a
    ground constructor term of the (unique) argument sort.
    """

    name: str
    arg_sorts: tuple[str, ...]
    result_sort: str
    assoc: bool = False
    comm: bool = False
    identity: Optional["Term"] = None
    ctor: bool = False
    graph: Optional[SortGraph] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.assoc or self.comm:
            if len(self.arg_sorts) != 2:
                raise SignatureError(f"operator '{self.name}': assoc/comm requires arity 2")
            if self.arg_sorts[0] != self.arg_sorts[1]:
                raise SignatureError(
                    f"operator '{self.name}': assoc/comm argument sorts must agree"
                )
        if self.assoc and self.arg_sorts[0] != self.result_sort:
            raise SignatureError(
                f"operator '{self.name}': assoc requires argument and result sorts to agree"
            )
        if self.identity is not None and not self.assoc:
            raise SignatureError(
                f"operator '{self.name}': identity is only supported together with assoc"
            )

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)

    def _require_graph(self) -> SortGraph:
        if self.graph is None:
            raise SignatureError(
                f"operator '{self.name}' has not been attached to a signature"
            )
        return self.graph


@dataclass(frozen=True)
class Signature:
    """A sort graph plus operator declarations; constructors are flagged."""

    sort_graph: SortGraph
    operators: tuple[Operator, ...]

    def __post_init__(self):
        by_name: dict[str, Operator] = {}
        for op in self.operators:
            if op.name in by_name:
                raise SignatureError(f"duplicate operator name '{op.name}'")
            by_name[op.name] = op
            for s in (*op.arg_sorts, op.result_sort):
                if s not in self.sort_graph.sorts:
                    raise SignatureError(
                        f"operator '{op.name}' uses undeclared sort '{s}'"
                    )
            if op.graph is None:
                object.__setattr__(op, "graph", self.sort_graph)
            elif op.graph is not self.sort_graph:
                raise SignatureError(
                    f"operator '{op.name}' already belongs to a different signature"
                )
        object.__setattr__(self, "_by_name", by_name)
        for op in self.operators:
            if op.identity is not None:
                ident = op.identity
                if vars_of(ident):
                    raise SignatureError(f"operator '{op.name}': identity must be ground")
                if not is_ctor_term(ident):
                    raise SignatureError(
                        f"operator '{op.name}': identity must be a constructor term"
                    )
                if not self.sort_graph.leq(least_sort(ident), op.arg_sorts[0]):
                    raise SignatureError(
                        f"operator '{op.name}': identity sort is not below the argument sort"
                    )

    def op(self, name: str) -> Operator:
        try:
            return self._by_name[name]
        except KeyError:
            raise SignatureError(f"unknown operator '{name}'") from None

    def has_op(self, name: str) -> bool:
        return name in self._by_name

    @property
    def ctor_ops(self) -> tuple[Operator, ...]:
        return tuple(op for op in self.operators if op.ctor)

    def app(self, name: str, args: Sequence["Term"] = ()) -> "Term":
        return mk_app(self.op(name), args)


def signature(sorts, pairs, operators) -> Signature:
    return Signature(sort_graph(sorts, pairs), tuple(operators))


# ---------------------------------------------------------------------------
# terms


class Var:
    """A sorted variable."""

    __slots__ = ("name", "sort", "_hash")
    __match_args__ = ("name", "sort")

    def __init__(self, name: str, sort: str):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "sort", sort)
        object.__setattr__(self, "_hash", hash(("var", name, sort)))

    def __setattr__(self, *_):
        raise AttributeError("Var is immutable")

    def __eq__(self, other):
        return (
            self is other
            or (isinstance(other, Var) and self.name == other.name and self.sort == other.sort)
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.name}:{self.sort}"


class App:
    """An operator application in canonical form; build via ``mk_app``."""

    __slots__ = ("op", "args", "size", "_hash", "_vars", "_key")
    __match_args__ = ("op", "args")

    def __init__(self, op: Operator, args: tuple["Term", ...]):
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "args", args)
        sz = (0 if op.assoc else 1) + sum(term_size(a) for a in args)
        object.__setattr__(self, "size", max(sz, 1))
        object.__setattr__(self, "_hash", hash((op.name, op.result_sort, args)))
        object.__setattr__(self, "_vars", None)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, *_):
        raise AttributeError("App is immutable")

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, App)
            and self._hash == other._hash
            and self.op == other.op
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if not self.args:
            return self.op.name
        return f"{self.op.name}({', '.join(map(repr, self.args))})"


Term = Union[Var, App]


def term_size(t: Term) -> int:
    """Node count of a term, with flattened associative applications free.

    An element of a multiset or list therefore contributes its own size
    only, so the size of a collection is the total size of its elements.
    """
    return 1 if isinstance(t, Var) else t.size


def term_key(t: Term):
    """Total order key used to canonicalize commutative argument lists."""
    if isinstance(t, Var):
        return (0, t.sort, t.name)
    if t._key is None:
        object.__setattr__(
            t, "_key", (1, t.op.name, len(t.args), tuple(term_key(a) for a in t.args))
        )
    return t._key


def least_sort(t: Term) -> str:
    """The unique least sort of a well-formed term."""
    return t.sort if isinstance(t, Var) else t.op.result_sort


def vars_of(t: Term) -> frozenset[Var]:
    if isinstance(t, Var):
        return frozenset((t,))
    if t._vars is None:
        acc: frozenset[Var] = frozenset()
        for a in t.args:
            acc |= vars_of(a)
        object.__setattr__(t, "_vars", acc)
    return t._vars


def is_ground(t: Term) -> bool:
    return not vars_of(t)


def is_ctor_term(t: Term) -> bool:
    """True when every operator in the term is flagged as a constructor."""
    if isinstance(t, Var):
        return True
    return t.op.ctor and all(is_ctor_term(a) for a in t.args)


def mk_app(op: Operator, args: Sequence[Term]) -> Term:
    """Build an application, normalizing to canonical form.

    Flattens nested applications of the same associative operator,
    removes identity elements, and sorts the arguments of commutative
    operators.  Raises TermError on arity or sort violations.
    """
    graph = op._require_graph()
    args = tuple(args)
    if op.assoc:
        flat: list[Term] = []
        for a in args:
            if isinstance(a, App) and a.op == op:
                flat.extend(a.args)
            else:
                flat.append(a)
        if op.identity is not None:
            flat = [a for a in flat if a != op.identity]
        elem_sort = op.arg_sorts[0]
        for i, a in enumerate(flat):
            if not graph.leq(least_sort(a), elem_sort):
                raise TermError(
                    f"argument {i + 1} of '{op.name}' has sort {least_sort(a)},"
                    f" not below {elem_sort}",
                    position=(i,),
                )
        if not flat:
            if op.identity is not None:
                return op.identity
            raise TermError(f"associative operator '{op.name}' applied to no arguments")
        if len(flat) == 1:
            return flat[0]
        if op.comm:
            flat.sort(key=term_key)
        return App(op, tuple(flat))
    if len(args) != op.arity:
        raise TermError(
            f"operator '{op.name}' expects {op.arity} arguments, got {len(args)}"
        )
    for i, (a, s) in enumerate(zip(args, op.arg_sorts)):
        if not graph.leq(least_sort(a), s):
            raise TermError(
                f"argument {i + 1} of '{op.name}' has sort {least_sort(a)}, not below {s}",
                position=(i,),
            )
    if op.comm and term_key(args[0]) > term_key(args[1]):
        args = (args[1], args[0])
    return App(op, args)


def renormalize(t: Term) -> Term:
    """Bottom-up rebuild; the canonical-form representative of [t].

    Terms built through ``mk_app`` are already canonical, so this is a
    fixpoint on them.
    """
    if isinstance(t, Var):
        return t
    return mk_app(t.op, tuple(renormalize(a) for a in t.args))


def b_equal(t1: Term, t2: Term) -> bool:
    """Equality modulo the structural axioms (syntactic on canonical forms)."""
    return renormalize(t1) == renormalize(t2)


def check_well_formed(t: Term, sig: Signature, position: Position = ()) -> None:
    """Validate that a term only uses operators of ``sig``; raise TermError."""
    if isinstance(t, Var):
        if t.sort not in sig.sort_graph.sorts:
            raise TermError(f"variable {t!r} has undeclared sort", position=position)
        return
    if not sig.has_op(t.op.name) or sig.op(t.op.name) != t.op:
        raise TermError(f"unknown operator '{t.op.name}'", position=position)
    for i, a in enumerate(t.args):
        check_well_formed(a, sig, position + (i,))


# ---------------------------------------------------------------------------
# positions


def subterm_at(t: Term, pos: Position) -> Term:
    cur = t
    for i, idx in enumerate(pos):
        if isinstance(cur, Var) or idx >= len(cur.args):
            raise TermError("invalid position", position=pos[: i + 1])
        cur = cur.args[idx]
    return cur


def replace_at(t: Term, pos: Position, u: Term) -> Term:
    if not pos:
        return u
    if isinstance(t, Var) or pos[0] >= len(t.args):
        raise TermError("invalid position", position=pos[:1])
    idx = pos[0]
    new_args = list(t.args)
    new_args[idx] = replace_at(t.args[idx], pos[1:], u)
    return mk_app(t.op, new_args)


def positions(t: Term) -> Iterator[Position]:
    """All positions of ``t`` in pre-order, indexing flattened argument lists."""
    yield ()
    if isinstance(t, App):
        for i, a in enumerate(t.args):
            for p in positions(a):
                yield (i,) + p


# ---------------------------------------------------------------------------
# substitutions

Subst = Mapping[Var, Term]


def apply_subst(t: Term, s: Subst) -> Term:
    """Simultaneous replacement followed by re-normalization."""
    if not s:
        return t
    if isinstance(t, Var):
        return s.get(t, t)
    new_args = tuple(apply_subst(a, s) for a in t.args)
    if all(n is o for n, o in zip(new_args, t.args)):
        return t
    return mk_app(t.op, new_args)


def compose_subst(first: Subst, second: Subst) -> dict[Var, Term]:
    """The substitution equivalent to applying ``first`` then ``second``."""
    out: dict[Var, Term] = {}
    for x, tm in first.items():
        img = apply_subst(tm, second)
        if img != x:
            out[x] = img
    for x, tm in second.items():
        if x not in first and tm != x:
            out[x] = tm
    return out


def restrict_subst(s: Subst, keep: Iterable[Var]) -> dict[Var, Term]:
    keep = set(keep)
    return {x: tm for x, tm in s.items() if x in keep}


def subst_is_sort_preserving(s: Subst, graph: SortGraph) -> bool:
    return all(graph.leq(least_sort(tm), x.sort) for x, tm in s.items())


def subst_key(s: Subst):
    """Deterministic ordering key for sets of substitutions."""
    return tuple(
        (x.name, x.sort, term_key(tm))
        for x, tm in sorted(s.items(), key=lambda kv: (kv[0].name, kv[0].sort))
    )


class FreshGen:
    """Monotone fresh-variable source; confine one instance to one session."""

    def __init__(self, start: int = 0):
        self._n = start

    def fresh_var(self, base: str, sort: str) -> Var:
        base = base.split("#", 1)[0] or "v"
        self._n += 1
        return Var(f"{base}#{self._n}", sort)

    def rename_disjoint(
        self, xs: Iterable[Var], avoid: Iterable[Var] = ()
    ) -> dict[Var, Term]:
        """Sort-preserving bijective renaming of ``xs`` away from ``avoid``."""
        avoid_names = {v.name for v in avoid} | {v.name for v in xs}
        out: dict[Var, Term] = {}
        for x in sorted(xs, key=lambda v: (v.name, v.sort)):
            while True:
                cand = self.fresh_var(x.name, x.sort)
                if cand.name not in avoid_names:
                    break
            avoid_names.add(cand.name)
            out[x] = cand
        return out
