"""Grounding: first-order model -> ground formulas over an indexed atom set."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

from .errors import CapacityError
from .mln import (
    HARD,
    Body,
    GroundAtom,
    Mln,
    Not,
    Weight,
    WeightedFormula,
    evaluate,
    leaves,
    map_leaves,
    solution_tuples,
)
from .parser import format_body, format_weight

DEFAULT_MAX_ATOMS = 10**6


@dataclass(frozen=True)
class GroundFormula:
    weight: Weight
    body: Body
    # formula id the grounding came from; None for evidence and derived units
    source: int | None = None
    substitution: tuple[tuple[str, str], ...] = ()

    @property
    def is_hard(self) -> bool:
        return self.weight is HARD

    @cached_property
    def occurrences(self) -> tuple[GroundAtom, ...]:
        return tuple(leaves(self.body))

    @cached_property
    def atoms(self) -> tuple[GroundAtom, ...]:
        return tuple(dict.fromkeys(self.occurrences))

    def __str__(self) -> str:
        return f"{format_weight(self.weight)} {format_body(self.body)}"


@dataclass(frozen=True)
class GroundModel:
    atoms: tuple[GroundAtom, ...]
    formulas: tuple[GroundFormula, ...]

    @cached_property
    def index(self) -> dict[GroundAtom, int]:
        return {a: i for i, a in enumerate(self.atoms)}

    @property
    def provenance(self) -> list[tuple[int | None, dict[str, str]]]:
        return [(f.source, dict(f.substitution)) for f in self.formulas]

    def __len__(self) -> int:
        return len(self.formulas)


class GroundModelBuilder:
    """Accumulates ground formulas, indexing atoms in first-seen order."""

    def __init__(self, max_atoms: int = DEFAULT_MAX_ATOMS):
        self.max_atoms = max_atoms
        self.atoms: dict[GroundAtom, int] = {}
        self.formulas: list[GroundFormula] = []

    def add_atom(self, atom: GroundAtom) -> int:
        idx = self.atoms.get(atom)
        if idx is None:
            if len(self.atoms) >= self.max_atoms:
                raise CapacityError(f"ground atom count exceeds the limit of {self.max_atoms}")
            idx = self.atoms[atom] = len(self.atoms)
        return idx

    def add(self, formula: GroundFormula) -> None:
        for atom in formula.occurrences:
            self.add_atom(atom)
        self.formulas.append(formula)

    def add_groundings(self, f: WeightedFormula, domains: Mapping[str, tuple[str, ...]]) -> None:
        variables = f.variables
        names = tuple(v.name for v in variables)
        for values in solution_tuples(f.constraint, variables, domains):
            subst = dict(zip(variables, values))
            body = map_leaves(f.body, lambda a: a.ground(subst))
            self.add(GroundFormula(f.weight, body, f.id, tuple(zip(names, values))))

    def build(self) -> GroundModel:
        return GroundModel(tuple(self.atoms), tuple(self.formulas))


def ground_evidence(mln: Mln) -> list[GroundFormula]:
    out = []
    for lit in mln.evidence:
        atom = lit.atom.ground({})
        out.append(GroundFormula(HARD, atom if lit.positive else Not(atom)))
    return out


def ground(mln: Mln, max_atoms: int = DEFAULT_MAX_ATOMS) -> GroundModel:
    """Replace every formula by all its groundings; evidence becomes hard units."""
    builder = GroundModelBuilder(max_atoms)
    domains = mln.domain_map
    for f in mln.formulas:
        builder.add_groundings(f, domains)
    for gf in ground_evidence(mln):
        builder.add(gf)
    return builder.build()


def weight_of_world(gm: GroundModel, world: Mapping[GroundAtom, bool]) -> float:
    """Log-weight of a complete world; ``-inf`` if a hard formula is violated."""
    missing = [a for a in gm.atoms if a not in world]
    if missing:
        raise ValueError(f"world does not assign {len(missing)} atoms, e.g. {missing[0]}")
    total = 0.0
    for f in gm.formulas:
        sat = bool(evaluate(f.body, world.__getitem__))
        if f.is_hard:
            if not sat:
                return -math.inf
        elif sat:
            total += f.weight
    return total


def verify_disconnected(gm: GroundModel) -> tuple[bool, tuple[GroundAtom, int, int] | None]:
    """Check that no ground atom occurs in two distinct ground formulas.

    Returns ``(True, None)`` or ``(False, (atom, i, j))`` naming the first shared
    atom found and the indices of two formulas containing it.
    """
    first_seen: dict[GroundAtom, int] = {}
    for i, f in enumerate(gm.formulas):
        for atom in f.atoms:
            j = first_seen.setdefault(atom, i)
            if j != i:
                return False, (atom, j, i)
    return True, None


def format_ground_model(gm: GroundModel) -> str:
    return "".join(f"{f}\n" for f in gm.formulas)


def atoms_of(formulas: Iterable[GroundFormula]) -> set[GroundAtom]:
    return {a for f in formulas for a in f.atoms}
