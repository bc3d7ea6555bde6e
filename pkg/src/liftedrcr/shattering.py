"""Preemptive shattering of atoms and partitioning of equivalences.

An atom is split by every combination of per-variable constant cases
(``X = k`` for each mentioned constant ``k``, or ``X`` different from all of
them) and every equality pattern among its same-sorted variables. Each clone
cell refines exactly one original cell, which yields equivalences that are
count-normalized and equiprobable for every choice of shared compensating
weights.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .engine import CompiledModel
from .errors import NotCountNormalizedError
from .exact import DEFAULT_MAX_CLUSTER, sigmoid_array
from .mln import Atom, Constraint, GroundAtom, Var, constants_of, eq, neq, solution_tuples
from .relaxation import Equivalence, RelaxedModel

Domains = Mapping[str, Sequence[str]]


@dataclass(frozen=True)
class ConstrainedAtom:
    constraint: Constraint
    atom: Atom

    def groundings(self, domains: Domains) -> list[GroundAtom]:
        variables = self.atom.variables
        return [self.atom.ground(dict(zip(variables, t))) for t in solution_tuples(self.constraint, variables, domains)]

    def __str__(self) -> str:
        return f"{self.constraint}, {self.atom}" if not self.constraint.is_trivial else str(self.atom)


@dataclass(frozen=True)
class AtomPartition:
    source: Atom
    cells: tuple[ConstrainedAtom, ...]


def set_partitions(items: Sequence) -> Iterator[list[list]]:
    """All set partitions of ``items``; blocks keep input order."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def _typed_partitions(variables: Sequence[Var]) -> Iterator[list[list[Var]]]:
    by_domain: dict[str, list[Var]] = {}
    for v in variables:
        by_domain.setdefault(v.domain, []).append(v)
    for combo in itertools.product(*(list(set_partitions(vs)) for vs in by_domain.values())):
        yield [block for part in combo for block in part]


def simplify(constraint: Constraint) -> Constraint:
    """Drop conjuncts entailed by a satisfiable constraint's constant bindings.

    Only valid for satisfiable input: once a variable is bound to a constant,
    its other comparisons are either implied or would have made it unsatisfiable.
    """
    bound = {c.left for c in constraint.conjuncts if c.equal and not isinstance(c.right, Var)}
    keep = []
    for c in constraint.conjuncts:
        if isinstance(c.right, Var):
            if c.left in bound or c.right in bound:
                continue
        elif c.left in bound and not c.equal:
            continue
        keep.append(c)
    return Constraint(frozenset(keep))


def _relevant_constants(K: Iterable[str], domain: Sequence[str]) -> list[str]:
    ks = set(K)
    return [c for c in domain if c in ks]


def shatter_atom(atom: Atom, K: Iterable[str], domains: Domains) -> AtomPartition:
    """Partition the groundings of ``atom`` by constant and equality cases."""
    K = set(K)
    variables = atom.variables
    options = []
    for v in variables:
        ks = _relevant_constants(K, domains[v.domain])
        cases = [(eq(v, k),) for k in ks] + [tuple(neq(v, k) for k in ks)]
        options.append(cases)
    patterns = []
    for blocks in _typed_partitions(variables):
        comps = [eq(b[0], x) for b in blocks for x in b[1:]]
        for b1, b2 in itertools.combinations(blocks, 2):
            if b1[0].domain == b2[0].domain:
                comps.append(neq(b1[0], b2[0]))
        patterns.append(comps)
    cells = []
    seen = set()
    for choice in itertools.product(*options):
        c_a = [c for case in choice for c in case]
        for c_b in patterns:
            full = Constraint(frozenset(c_a + c_b))
            if not solution_tuples(full, variables, domains):
                continue
            simple = simplify(full)
            if simple not in seen:
                seen.add(simple)
                cells.append(ConstrainedAtom(simple, atom))
    return AtomPartition(atom, tuple(cells))


def check_count_normalized(pairs: Iterable[tuple[GroundAtom, GroundAtom]]) -> tuple[int, int]:
    """Count check on an explicit set of ground equivalences.

    Returns ``(n, n')``; raises :class:`NotCountNormalizedError` with a witness
    ``((atom, count), (atom, count))`` if two originals occur a different
    number of times.
    """
    pairs = list(pairs)
    counts = Counter(a for a, _ in pairs)
    clones = {b for _, b in pairs}
    if len(clones) != len(pairs):
        raise NotCountNormalizedError("clone groundings are not distinct")
    if not counts:
        return 0, 0
    (a0, c0), *rest = counts.items()
    for a, c in rest:
        if c != c0:
            raise NotCountNormalizedError(
                f"{a0} occurs in {c0} ground equivalences but {a} in {c}", ((a0, c0), (a, c))
            )
    return len(counts), len(clones)


def compute_counts(eqv: Equivalence, domains: Domains) -> tuple[int, int]:
    """Original count n and clone count n', verifying count-normalization."""
    return check_count_normalized(eqv.groundings(domains))


def _implies(clone_cell: Constraint, orig_cell: Constraint, clone_vars, orig_vars, domains) -> bool:
    pos = [clone_vars.index(v) for v in orig_vars]
    for t in solution_tuples(clone_cell, clone_vars, domains):
        if not orig_cell.holds({v: t[p] for v, p in zip(orig_vars, pos)}):
            return False
    return True


def partition_equivalence(eqv: Equivalence, K: Iterable[str], domains: Domains) -> list[Equivalence]:
    """Split ``eqv`` into count-normalized, strongly equiprobable pieces.

    Returned equivalences keep ``eqv.id`` as their ``source``; callers assign
    fresh ids (see :func:`partition_model`).
    """
    K = set(K)
    orig_vars = eqv.original.variables
    clone_vars = eqv.clone.variables
    if not set(orig_vars) <= set(clone_vars):
        raise ValueError("clone must contain every variable of the original atom")
    orig_cells = shatter_atom(eqv.original, K, domains).cells
    clone_cells = shatter_atom(eqv.clone, K, domains).cells
    out = []
    for cc in clone_cells:
        full = cc.constraint & eqv.constraint
        if not solution_tuples(full, clone_vars, domains):
            continue
        constraint = simplify(full)
        matches = [
            oc for oc in orig_cells if _implies(constraint, oc.constraint, clone_vars, orig_vars, domains)
        ]
        if len(matches) != 1:
            raise AssertionError(f"clone cell {constraint} refines {len(matches)} original cells")
        piece = replace(eqv, constraint=constraint, source=eqv.source if eqv.source is not None else eqv.id)
        n, n_prime = compute_counts(piece, domains)
        out.append(replace(piece, n=n, n_prime=n_prime))
    return out


def partition_model(rm: RelaxedModel, K: Iterable[str] | None = None) -> RelaxedModel:
    """Partition every equivalence of ``rm``; K defaults to the model's constants."""
    if K is None:
        K = constants_of(rm.source)
    domains = rm.domains
    pieces = []
    for e in rm.equivalences:
        pieces.extend(partition_equivalence(e, K, domains))
    return rm.with_equivalences(replace(p, id=i) for i, p in enumerate(pieces))


# -- strong equiprobability ----------------------------------------------------


@dataclass
class EquiprobabilityReport:
    passed: bool
    worst_spread: float
    trials: int
    # worst spread per equivalence id
    spreads: dict[int, float]


def equiprobability_report(
    rm: RelaxedModel,
    equivalences: Sequence[Equivalence] | None = None,
    trials: int = 20,
    seed: int = 0,
    tol: float = 1e-9,
    weight_range: float = 2.0,
    max_cluster: int = DEFAULT_MAX_CLUSTER,
) -> EquiprobabilityReport:
    """Worst within-class marginal spread under random shared compensations.

    For each trial every relaxed equivalence of ``rm`` receives a weight pair
    drawn uniformly from ``[-weight_range, weight_range]``; the originals and
    the clones of each checked equivalence must then share one marginal.
    """
    targets = list(rm.equivalences if equivalences is None else equivalences)
    spreads = {e.id: 0.0 for e in targets}
    if trials <= 0 or not targets:
        return EquiprobabilityReport(True, 0.0, max(trials, 0), spreads)
    compiled = CompiledModel(rm, max_cluster=max_cluster)
    domains = rm.domains
    groups = []
    for e in targets:
        pairs = e.groundings(domains)
        ov = np.unique([compiled.var_of[compiled.index[a]] for a, _ in pairs])
        cv = np.unique([compiled.var_of[compiled.index[b]] for _, b in pairs])
        groups.append((e.id, ov, cv))
    rng = np.random.default_rng(seed)
    m = compiled.num_cells
    for _ in range(trials):
        compiled.set_weights(
            rng.uniform(-weight_range, weight_range, m), rng.uniform(-weight_range, weight_range, m)
        )
        probs = sigmoid_array(compiled.forest.all_log_odds())
        for eid, ov, cv in groups:
            s = max(np.ptp(probs[ov]) if len(ov) else 0.0, np.ptp(probs[cv]) if len(cv) else 0.0)
            spreads[eid] = max(spreads[eid], float(s))
    worst = max(spreads.values())
    return EquiprobabilityReport(worst <= tol, worst, trials, spreads)


def check_strong_equiprobability(
    rm: RelaxedModel, eqv: Equivalence, trials: int = 20, seed: int = 0, tol: float = 1e-9, **kw
) -> EquiprobabilityReport:
    return equiprobability_report(rm, [eqv], trials=trials, seed=seed, tol=tol, **kw)
