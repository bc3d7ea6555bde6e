"""Compile a relaxed model into an exact engine with mutable compensations.

The ground structure (cloned formulas, evidence, recovered equivalences) is
fixed at compile time; compensating weights only enter as per-variable unit
biases, so compensation iterations never recompile.

Recovered equivalences are either kept as hard ``a <=> a'`` factors, or (the
default) realised by merging each clone grounding into its original's
variable, which gives the same distribution with fewer variables.
"""

from __future__ import annotations

import numpy as np

from .exact import DEFAULT_MAX_CLUSTER, FactorGraph, JunctionForest, formula_factor, sigmoid
from .grounding import DEFAULT_MAX_ATOMS, GroundFormula, GroundModelBuilder, ground_evidence
from .mln import HARD, GroundAtom, Iff
from .relaxation import Equivalence, RelaxedModel


class CompiledModel:
    def __init__(
        self,
        rm: RelaxedModel,
        merge: bool = True,
        max_cluster: int = DEFAULT_MAX_CLUSTER,
        max_atoms: int = DEFAULT_MAX_ATOMS,
    ):
        self.model = rm
        domains = rm.domains
        builder = GroundModelBuilder(max_atoms)
        for f in rm.formulas:
            builder.add_groundings(f, domains)
        for gf in ground_evidence(rm.source):
            builder.add(gf)
        groundings = {e.id: e.groundings(domains) for e in rm.equivalences}
        for pairs in groundings.values():
            for a, b in pairs:
                builder.add_atom(a)
                builder.add_atom(b)
        atoms = list(builder.atoms)
        index = builder.atoms
        parent = list(range(len(atoms)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        formulas = list(builder.formulas)
        for e in rm.equivalences:
            if e.is_relaxed:
                continue
            for a, b in groundings[e.id]:
                if merge:
                    ra, rb = find(index[a]), find(index[b])
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
                else:
                    formulas.append(GroundFormula(HARD, Iff(a, b)))
        roots = [find(i) for i in range(len(atoms))]
        compact: dict[int, int] = {}
        for r in roots:
            compact.setdefault(r, len(compact))
        self.atoms: list[GroundAtom] = atoms
        self.index: dict[GroundAtom, int] = index
        self.var_of = np.array([compact[r] for r in roots], dtype=np.int64)
        labels = [atoms[r] for r in compact]
        var_of = self.var_of
        factors = [formula_factor(f, lambda a: int(var_of[index[a]])) for f in formulas]
        self.graph = FactorGraph(len(compact), factors, labels)
        self.forest = JunctionForest(self.graph, max_cluster)

        self.cells: list[Equivalence] = rm.relaxed
        self.pairs: list[np.ndarray] = []
        orig_cell, orig_var, clone_cell, clone_var = [], [], [], []
        for j, e in enumerate(self.cells):
            pv = np.array(
                [(var_of[index[a]], var_of[index[b]]) for a, b in groundings[e.id]], dtype=np.int64
            ).reshape(-1, 2)
            self.pairs.append(pv)
            ov = np.unique(pv[:, 0])
            cv = np.unique(pv[:, 1])
            orig_cell.extend([j] * len(ov))
            orig_var.extend(ov.tolist())
            clone_cell.extend([j] * len(cv))
            clone_var.extend(cv.tolist())
        self._orig_cell = np.array(orig_cell, dtype=np.int64)
        self._orig_var = np.array(orig_var, dtype=np.int64)
        self._clone_cell = np.array(clone_cell, dtype=np.int64)
        self._clone_var = np.array(clone_var, dtype=np.int64)
        self.w = np.array([e.w for e in self.cells], dtype=float)
        self.w_prime = np.array([e.w_prime for e in self.cells], dtype=float)
        self.apply()

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def set_weights(self, w: np.ndarray, w_prime: np.ndarray) -> None:
        self.w = np.asarray(w, dtype=float).copy()
        self.w_prime = np.asarray(w_prime, dtype=float).copy()
        self.apply()

    def apply(self) -> None:
        n = self.graph.num_vars
        bias = np.bincount(self._orig_var, weights=self.w[self._orig_cell], minlength=n)
        bias += np.bincount(self._clone_var, weights=self.w_prime[self._clone_cell], minlength=n)
        self.forest.set_biases(bias)

    def representative(self, j: int, which: int = 0) -> tuple[int, int]:
        """Variable ids of the chosen grounding (default: first solution) of cell ``j``."""
        a, b = self.pairs[j][which]
        return int(a), int(b)

    def log_odds(self, var: int) -> float:
        return self.forest.log_odds(var)

    def atom_log_odds(self, atom: GroundAtom) -> float:
        return self.forest.log_odds(int(self.var_of[self.index[atom]]))

    def marginal(self, atom: GroundAtom) -> float:
        return sigmoid(self.atom_log_odds(atom))

    def marginals(self, atoms=None) -> dict[GroundAtom, float]:
        lo = self.forest.all_log_odds()
        wanted = self.atoms if atoms is None else atoms
        return {a: sigmoid(lo[self.var_of[self.index[a]]]) for a in wanted}

    def original_atoms(self) -> list[GroundAtom]:
        return [a for a in self.atoms if not a.is_clone]

    def log_z(self) -> float:
        return self.forest.log_z()

    def updated_model(self) -> RelaxedModel:
        weights = {e.id: (self.w[j], self.w_prime[j]) for j, e in enumerate(self.cells)}
        return self.model.with_weights(weights)
