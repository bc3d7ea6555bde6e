"""First-order cloning and the relax/recover state of equivalences."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, replace
from typing import Container, Iterable, Mapping

from .errors import EquivalenceStateError
from .grounding import DEFAULT_MAX_ATOMS, GroundFormula, GroundModel, GroundModelBuilder, ground_evidence
from .mln import (
    HARD,
    Atom,
    CloneTag,
    Constraint,
    GroundAtom,
    Iff,
    Mln,
    PredicateId,
    WeightedFormula,
    eq,
    map_occurrences,
    solution_tuples,
)


class Status(enum.Enum):
    RELAXED = "relaxed"
    RECOVERED = "recovered"


@dataclass(frozen=True)
class Equivalence:
    """``constraint, original <=> clone`` plus its compensation state.

    ``w`` is the weight of the unit ``w : C, original`` (one unit per distinct
    original grounding) and ``w_prime`` that of ``w' : C, clone``.
    """

    id: int
    constraint: Constraint
    original: Atom
    clone: Atom
    status: Status = Status.RELAXED
    w: float = 0.0
    w_prime: float = 0.0
    n: int = 1
    n_prime: int = 1
    # id of the unsplit equivalence this one was carved from
    source: int | None = None

    @property
    def is_relaxed(self) -> bool:
        return self.status is Status.RELAXED

    @property
    def variables(self):
        return self.clone.variables

    @property
    def ratio(self) -> float:
        """Ground equivalences per original grounding (n'/n)."""
        return self.n_prime / self.n

    def solutions(self, domains: Mapping[str, tuple[str, ...]]) -> list[tuple[str, ...]]:
        return solution_tuples(self.constraint, self.variables, domains)

    def groundings(self, domains: Mapping[str, tuple[str, ...]]) -> list[tuple[GroundAtom, GroundAtom]]:
        variables = self.variables
        out = []
        for values in self.solutions(domains):
            subst = dict(zip(variables, values))
            out.append((self.original.ground(subst), self.clone.ground(subst)))
        return out

    def __str__(self) -> str:
        prefix = "" if self.constraint.is_trivial else f"{self.constraint}, "
        return f"{prefix}{self.original} <=> {self.clone}"


def count_groundings(eqv: Equivalence, domains) -> tuple[int, int]:
    """(distinct original groundings, distinct clone groundings)."""
    pairs = eqv.groundings(domains)
    return len({a for a, _ in pairs}), len({b for _, b in pairs})


@dataclass(frozen=True)
class RelaxedModel:
    source: Mln
    # source formulas with every atom occurrence replaced by its clone
    formulas: tuple[WeightedFormula, ...]
    equivalences: tuple[Equivalence, ...]

    @property
    def domains(self) -> dict[str, tuple[str, ...]]:
        return self.source.domain_map

    @property
    def base(self) -> Mln:
        return replace(self.source, formulas=self.formulas)

    def equivalence(self, eq_id: int) -> Equivalence:
        for e in self.equivalences:
            if e.id == eq_id:
                return e
        raise EquivalenceStateError(f"unknown equivalence id {eq_id}")

    @property
    def relaxed(self) -> list[Equivalence]:
        return [e for e in self.equivalences if e.is_relaxed]

    @property
    def recovered(self) -> list[Equivalence]:
        return [e for e in self.equivalences if not e.is_relaxed]

    def compensating_atoms(self) -> list[tuple[float, Constraint, Atom]]:
        """Derived view: ``(w, C, a)`` and ``(w', C, a')`` for each relaxed equivalence."""
        out = []
        for e in self.relaxed:
            out.append((e.w, e.constraint, e.original))
            out.append((e.w_prime, e.constraint, e.clone))
        return out

    def with_equivalences(self, equivalences: Iterable[Equivalence]) -> RelaxedModel:
        return replace(self, equivalences=tuple(equivalences))

    def with_weights(self, weights: Mapping[int, tuple[float, float]]) -> RelaxedModel:
        eqs = []
        for e in self.equivalences:
            if e.id in weights:
                w, wp = weights[e.id]
                e = replace(e, w=float(w), w_prime=float(wp))
            eqs.append(e)
        return self.with_equivalences(eqs)

    def ground(self, include_compensation: bool = True, max_atoms: int = DEFAULT_MAX_ATOMS) -> GroundModel:
        """Ground distribution semantics of the relaxed model.

        Recovered equivalences become hard ground equivalences; relaxed ones
        contribute their compensating units (unless ``include_compensation``
        is false, which yields the bare relaxed model).
        """
        builder = GroundModelBuilder(max_atoms)
        domains = self.domains
        for f in self.formulas:
            builder.add_groundings(f, domains)
        for gf in ground_evidence(self.source):
            builder.add(gf)
        for e in self.equivalences:
            pairs = e.groundings(domains)
            if not e.is_relaxed:
                for a, b in pairs:
                    builder.add(GroundFormula(HARD, Iff(a, b)))
            elif include_compensation:
                for a in dict.fromkeys(a for a, _ in pairs):
                    builder.add(GroundFormula(e.w, a))
                for b in dict.fromkeys(b for _, b in pairs):
                    builder.add(GroundFormula(e.w_prime, b))
        return builder.build()


def clone_atom(atom: Atom, formula: WeightedFormula, occurrence: int) -> Atom:
    tag = CloneTag(formula.id, occurrence, formula.variables)
    return Atom(PredicateId(atom.pred.name, tag), atom.args)


def clone_all(mln: Mln, only: Container[tuple[int, int]] | None = None) -> RelaxedModel:
    """Clone every atom occurrence of every formula and relax all equivalences.

    ``only`` restricts cloning to the given ``(formula id, position)`` pairs,
    where position counts all atom occurrences left to right. The clone name
    instead numbers occurrences per predicate (``smokes_2b`` is the second
    ``smokes`` in formula 2). Evidence is left on the original atoms. Equivalence ids follow
    formula order, then left-to-right occurrence order.
    """
    formulas = []
    equivalences = []
    ids = itertools.count()
    domains = mln.domain_map
    for f in mln.formulas:
        pending = []
        seen: dict[str, int] = {}

        def swap(k: int, atom: Atom, f=f, pending=pending, seen=seen) -> Atom:
            # the tag numbers occurrences of the same predicate within the formula
            nth = seen.get(atom.pred.name, 0)
            seen[atom.pred.name] = nth + 1
            if only is not None and (f.id, k) not in only:
                return atom
            clone = clone_atom(atom, f, nth)
            pending.append((atom, clone))
            return clone

        body = map_occurrences(f.body, swap)
        formulas.append(replace(f, body=body))
        for original, clone in pending:
            e = Equivalence(next(ids), f.constraint, original, clone)
            n, n_prime = count_groundings(e, domains)
            equivalences.append(replace(e, n=max(n, 1), n_prime=max(n_prime, 1), source=e.id))
    return RelaxedModel(mln, tuple(formulas), tuple(equivalences))


def recover(rm: RelaxedModel, eq_id: int) -> RelaxedModel:
    """Drop the compensating atoms of ``eq_id`` and reinstate the equivalence."""
    e = rm.equivalence(eq_id)
    if not e.is_relaxed:
        raise EquivalenceStateError(f"equivalence {eq_id} is already recovered")
    return _replace_eq(rm, replace(e, status=Status.RECOVERED, w=0.0, w_prime=0.0))


def relax(rm: RelaxedModel, eq_id: int, w0: float = 0.0, w0_prime: float = 0.0) -> RelaxedModel:
    e = rm.equivalence(eq_id)
    if e.is_relaxed:
        raise EquivalenceStateError(f"equivalence {eq_id} is already relaxed")
    return _replace_eq(rm, replace(e, status=Status.RELAXED, w=float(w0), w_prime=float(w0_prime)))


def _replace_eq(rm: RelaxedModel, new: Equivalence) -> RelaxedModel:
    return rm.with_equivalences(new if e.id == new.id else e for e in rm.equivalences)


def ground_split_map(rm: RelaxedModel) -> tuple[RelaxedModel, list[int]]:
    """Split every equivalence into its ground instances (Ground RCR granularity).

    Each ground equivalence is written as a constrained equivalence binding
    every clone variable to a constant, so n = n' = 1. The original-side
    weight is rescaled by n/n' so the ground distribution is unchanged.
    Also returns, per new equivalence, the id it was split from.
    """
    domains = rm.domains
    out = []
    parents = []
    ids = itertools.count()
    for e in rm.equivalences:
        variables = e.variables
        w = e.w * e.n / e.n_prime
        for values in e.solutions(domains):
            binding = Constraint(frozenset(eq(v, c) for v, c in zip(variables, values)))
            out.append(replace(e, id=next(ids), constraint=binding, w=w, n=1, n_prime=1, source=e.source))
            parents.append(e.id)
    return rm.with_equivalences(out), parents


def ground_split(rm: RelaxedModel) -> RelaxedModel:
    return ground_split_map(rm)[0]
