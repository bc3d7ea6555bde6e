"""Core MLN data model: terms, atoms, constraints, formulas and domains.

Everything here is immutable. Logical variables carry the name of the domain
they range over; constants are plain strings.
"""

from __future__ import annotations

import enum
import itertools
import string
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np


@dataclass(frozen=True, order=True)
class Var:
    name: str
    domain: str

    def __str__(self) -> str:
        return self.name


Term = Union[Var, str]
Substitution = Mapping[Var, str]


def occurrence_letter(index: int) -> str:
    """0 -> 'a', 25 -> 'z', 26 -> 'aa', ..."""
    letters = string.ascii_lowercase
    out = ""
    index += 1
    while index:
        index, rem = divmod(index - 1, 26)
        out = letters[rem] + out
    return out


@dataclass(frozen=True)
class CloneTag:
    formula: int
    occurrence: int  # index among same-predicate occurrences in the formula
    signature: tuple[Var, ...]

    def label(self, values: Sequence[str] | None = None) -> str:
        inner = values if values is not None else [v.name for v in self.signature]
        return f"{self.formula}{occurrence_letter(self.occurrence)}<{','.join(inner)}>"


@dataclass(frozen=True)
class PredicateId:
    name: str
    tag: CloneTag | None = None

    @property
    def is_clone(self) -> bool:
        return self.tag is not None

    @property
    def base(self) -> PredicateId:
        return PredicateId(self.name) if self.tag else self

    def __str__(self) -> str:
        return self.name if self.tag is None else f"{self.name}_{self.tag.label()}"


@dataclass(frozen=True)
class GroundAtom:
    pred: PredicateId
    args: tuple[str, ...] = ()
    # constants bound to the clone signature; empty for original atoms
    sig: tuple[str, ...] = ()

    @property
    def is_clone(self) -> bool:
        return self.pred.tag is not None

    def __str__(self) -> str:
        head = self.pred.name
        if self.pred.tag is not None:
            head += "_" + self.pred.tag.label(self.sig)
        return f"{head}({','.join(self.args)})" if self.args else head


@dataclass(frozen=True)
class Atom:
    pred: PredicateId
    args: tuple[Term, ...] = ()

    @property
    def variables(self) -> tuple[Var, ...]:
        """Logical variables of the atom. For clones this is the full signature."""
        if self.pred.tag is not None:
            return self.pred.tag.signature
        seen: dict[Var, None] = {}
        for t in self.args:
            if isinstance(t, Var):
                seen.setdefault(t)
        return tuple(seen)

    @property
    def is_ground(self) -> bool:
        return not self.variables

    def ground(self, subst: Substitution) -> GroundAtom:
        args = tuple(subst[t] if isinstance(t, Var) else t for t in self.args)
        sig = tuple(subst[v] for v in self.pred.tag.signature) if self.pred.tag else ()
        return GroundAtom(self.pred, args, sig)

    def __str__(self) -> str:
        head = str(self.pred)
        return f"{head}({','.join(str(a) for a in self.args)})" if self.args else head


# -- constraints -------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    """``left = right`` or ``left != right``; ``left`` is always a variable."""

    left: Var
    right: Term
    equal: bool

    @classmethod
    def make(cls, a: Term, b: Term, equal: bool) -> Comparison:
        if not isinstance(a, Var):
            a, b = b, a
        if not isinstance(a, Var):
            raise ValueError("a comparison needs at least one logical variable")
        if isinstance(b, Var) and (b.name, b.domain) < (a.name, a.domain):
            a, b = b, a
        return cls(a, b, equal)

    @property
    def variables(self) -> tuple[Var, ...]:
        return (self.left, self.right) if isinstance(self.right, Var) else (self.left,)

    def holds(self, assignment: Substitution) -> bool:
        lhs = assignment[self.left]
        rhs = assignment[self.right] if isinstance(self.right, Var) else self.right
        return (lhs == rhs) == self.equal

    def sort_key(self) -> tuple:
        var_var = isinstance(self.right, Var)
        return (var_var, self.left.name, not self.equal, str(self.right))

    def __str__(self) -> str:
        return f"{self.left} {'=' if self.equal else '!='} {self.right}"


def eq(a: Term, b: Term) -> Comparison:
    return Comparison.make(a, b, True)


def neq(a: Term, b: Term) -> Comparison:
    return Comparison.make(a, b, False)


@dataclass(frozen=True)
class Constraint:
    conjuncts: frozenset[Comparison] = frozenset()

    @classmethod
    def of(cls, *comparisons: Comparison) -> Constraint:
        return cls(frozenset(comparisons))

    @property
    def is_trivial(self) -> bool:
        return not self.conjuncts

    @property
    def variables(self) -> frozenset[Var]:
        return frozenset(v for c in self.conjuncts for v in c.variables)

    def holds(self, assignment: Substitution) -> bool:
        return all(c.holds(assignment) for c in self.conjuncts)

    def __and__(self, other: Constraint) -> Constraint:
        return Constraint(self.conjuncts | other.conjuncts)

    def sorted(self) -> list[Comparison]:
        return sorted(self.conjuncts, key=Comparison.sort_key)

    def __str__(self) -> str:
        return ", ".join(str(c) for c in self.sorted()) if self.conjuncts else "true"


TRUE = Constraint()


def solution_tuples(
    constraint: Constraint, variables: Sequence[Var], domains: Mapping[str, Sequence[str]]
) -> list[tuple[str, ...]]:
    """Like :func:`solutions` but returns value tuples aligned with ``variables``."""
    missing = constraint.variables - set(variables)
    if missing:
        raise ValueError(f"constraint mentions variables outside scope: {sorted(v.name for v in missing)}")
    candidates: list[list[str]] = []
    for v in variables:
        values = list(domains[v.domain])
        for c in constraint.conjuncts:
            if c.left == v and not isinstance(c.right, Var):
                values = [x for x in values if (x == c.right) == c.equal]
        candidates.append(values)
    pairwise = [c for c in constraint.conjuncts if isinstance(c.right, Var)]
    if not pairwise:
        return list(itertools.product(*candidates))
    pos = {v: i for i, v in enumerate(variables)}
    checks = [(pos[c.left], pos[c.right], c.equal) for c in pairwise]
    return [
        t
        for t in itertools.product(*candidates)
        if all((t[i] == t[j]) == equal for i, j, equal in checks)
    ]


def solutions(
    constraint: Constraint, variables: Sequence[Var], domains: Mapping[str, Sequence[str]]
) -> list[dict[Var, str]]:
    """All assignments of ``variables`` satisfying ``constraint``, in lexicographic
    order of the declared constant order of each domain."""
    variables = tuple(variables)
    return [dict(zip(variables, t)) for t in solution_tuples(constraint, variables, domains)]


def is_satisfiable(constraint: Constraint, variables: Sequence[Var], domains) -> bool:
    return bool(solution_tuples(constraint, variables, domains))


# -- formulas ----------------------------------------------------------------


class Hard(enum.Enum):
    HARD = "hard"

    def __repr__(self) -> str:
        return "HARD"


HARD = Hard.HARD
Weight = Union[float, Hard]


@dataclass(frozen=True)
class Not:
    arg: "Body"


@dataclass(frozen=True)
class And:
    args: tuple["Body", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Body", ...]


@dataclass(frozen=True)
class Implies:
    left: "Body"
    right: "Body"


@dataclass(frozen=True)
class Iff:
    left: "Body"
    right: "Body"


Body = Union[Atom, GroundAtom, Not, And, Or, Implies, Iff]


def leaves(body: Body) -> Iterator:
    """Atom occurrences in left-to-right textual order."""
    if isinstance(body, (Atom, GroundAtom)):
        yield body
    elif isinstance(body, Not):
        yield from leaves(body.arg)
    elif isinstance(body, (And, Or)):
        for a in body.args:
            yield from leaves(a)
    else:
        yield from leaves(body.left)
        yield from leaves(body.right)


def map_leaves(body: Body, fn: Callable) -> Body:
    if isinstance(body, (Atom, GroundAtom)):
        return fn(body)
    if isinstance(body, Not):
        return Not(map_leaves(body.arg, fn))
    if isinstance(body, And):
        return And(tuple(map_leaves(a, fn) for a in body.args))
    if isinstance(body, Or):
        return Or(tuple(map_leaves(a, fn) for a in body.args))
    return type(body)(map_leaves(body.left, fn), map_leaves(body.right, fn))


def map_occurrences(body: Body, fn: Callable[[int, Atom], Body]) -> Body:
    """Like :func:`map_leaves` but passes the left-to-right occurrence index."""
    counter = itertools.count()
    return map_leaves(body, lambda a: fn(next(counter), a))


def evaluate(body: Body, value: Callable):
    """Evaluate ``body``; ``value`` maps a leaf to a bool or a boolean array."""
    if isinstance(body, (Atom, GroundAtom)):
        return value(body)
    if isinstance(body, Not):
        return np.logical_not(evaluate(body.arg, value))
    if isinstance(body, And):
        out = evaluate(body.args[0], value)
        for a in body.args[1:]:
            out = np.logical_and(out, evaluate(a, value))
        return out
    if isinstance(body, Or):
        out = evaluate(body.args[0], value)
        for a in body.args[1:]:
            out = np.logical_or(out, evaluate(a, value))
        return out
    left = evaluate(body.left, value)
    right = evaluate(body.right, value)
    if isinstance(body, Implies):
        return np.logical_or(np.logical_not(left), right)
    return np.equal(left, right)


def body_variables(body: Body) -> tuple[Var, ...]:
    seen: dict[Var, None] = {}
    for atom in leaves(body):
        for v in atom.variables:
            seen.setdefault(v)
    return tuple(seen)


@dataclass(frozen=True)
class WeightedFormula:
    id: int
    weight: Weight
    body: Body
    constraint: Constraint = TRUE

    @property
    def is_hard(self) -> bool:
        return self.weight is HARD

    @cached_property
    def variables(self) -> tuple[Var, ...]:
        """Logical variables in order of first appearance in the body."""
        return body_variables(self.body)


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"!{self.atom}"


@dataclass(frozen=True)
class DomainDecl:
    name: str
    constants: tuple[str, ...]

    def __post_init__(self):
        if not self.constants:
            raise ValueError(f"domain {self.name} is empty")
        if len(set(self.constants)) != len(self.constants):
            raise ValueError(f"domain {self.name} has repeated constants")

    @property
    def size(self) -> int:
        return len(self.constants)


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    domains: tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.domains)


@dataclass(frozen=True)
class Mln:
    domains: tuple[DomainDecl, ...]
    predicates: tuple[PredicateDecl, ...]
    formulas: tuple[WeightedFormula, ...] = ()
    evidence: tuple[Literal, ...] = ()

    @cached_property
    def domain_map(self) -> dict[str, tuple[str, ...]]:
        return {d.name: d.constants for d in self.domains}

    @cached_property
    def predicate_map(self) -> dict[str, PredicateDecl]:
        return {p.name: p for p in self.predicates}

    def formula(self, fid: int) -> WeightedFormula:
        for f in self.formulas:
            if f.id == fid:
                return f
        raise KeyError(fid)


def constants_of(mln: Mln) -> set[str]:
    """Constants mentioned explicitly in formulas, constraints and evidence.

    Domain declarations do not count: a domain listing ``{a, b}`` mentions no
    constant as far as shattering is concerned.
    """
    found: set[str] = set()
    for f in mln.formulas:
        for atom in leaves(f.body):
            found.update(t for t in atom.args if not isinstance(t, Var))
        for c in f.constraint.conjuncts:
            if not isinstance(c.right, Var):
                found.add(c.right)
    for lit in mln.evidence:
        found.update(t for t in lit.atom.args if not isinstance(t, Var))
    return found
