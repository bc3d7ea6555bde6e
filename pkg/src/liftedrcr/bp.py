"""Loopy belief propagation on a ground model, used as an independent oracle.

Plain sum-product with a flooding schedule. Messages are binary and kept as
log-odds. Every atom *occurrence* in a ground formula is its own port, so a
formula mentioning the same atom twice talks to it over two edges; this is
the factor graph that cloning every occurrence produces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentModelError
from .exact import MarginalTable, logsumexp, sigmoid
from .grounding import GroundModel
from .mln import GroundAtom, PredicateId, evaluate, map_occurrences

MESSAGE_CAP = 700.0


@dataclass
class BPResult:
    table: MarginalTable
    converged: bool
    iterations: int


def _port_table(formula) -> tuple[np.ndarray, list[GroundAtom]]:
    atoms: list[GroundAtom] = []

    def port(k: int, atom: GroundAtom) -> GroundAtom:
        atoms.append(atom)
        return GroundAtom(PredicateId(f"#{k}"), ())

    body = map_occurrences(formula.body, port)
    k = len(atoms)
    grid = np.indices((2,) * k, dtype=np.int8).astype(bool)
    sat = np.asarray(evaluate(body, lambda a: grid[int(a.pred.name[1:])]), dtype=bool)
    if formula.is_hard:
        table = np.where(sat, 0.0, -np.inf)
    else:
        table = np.where(sat, float(formula.weight), 0.0)
    return table, atoms


def bp_oracle(
    gm: GroundModel, iters: int = 1000, tol: float = 1e-12, damping: float = 0.5
) -> BPResult:
    """Approximate marginals of every atom of ``gm`` by loopy BP."""
    idx = gm.index
    tables = []
    port_var = []  # per factor: variable id of each port
    for f in gm.formulas:
        t, atoms = _port_table(f)
        tables.append(t)
        port_var.append(np.array([idx[a] for a in atoms], dtype=np.int64))
    n = len(gm.atoms)
    offsets = np.cumsum([0] + [len(p) for p in port_var])
    all_ports = np.concatenate(port_var) if port_var else np.zeros(0, dtype=np.int64)
    to_var = np.zeros(len(all_ports))  # factor -> variable, per port
    converged = False
    it = 0
    for it in range(1, iters + 1):
        total = np.bincount(all_ports, weights=to_var, minlength=n)
        to_fac = total[all_ports] - to_var
        new = np.empty_like(to_var)
        for fi, t in enumerate(tables):
            lo, hi = offsets[fi], offsets[fi + 1]
            k = hi - lo
            psi = t
            for j in range(k):
                shape = [1] * k
                shape[j] = 2
                psi = psi + np.array([0.0, to_fac[lo + j]]).reshape(shape)
            for j in range(k):
                shape = [1] * k
                shape[j] = 2
                excl = psi - np.array([0.0, to_fac[lo + j]]).reshape(shape)
                pair = logsumexp(excl, tuple(a for a in range(k) if a != j)) if k > 1 else excl
                if pair[0] == -np.inf and pair[1] == -np.inf:
                    raise InconsistentModelError("a hard formula is unsatisfiable")
                with np.errstate(invalid="ignore"):
                    new[lo + j] = np.clip(pair[1] - pair[0], -MESSAGE_CAP, MESSAGE_CAP)
        new = (1.0 - damping) * to_var + damping * new
        change = float(np.max(np.abs(new - to_var))) if len(new) else 0.0
        to_var = new
        if change < tol:
            converged = True
            break
    belief = np.bincount(all_ports, weights=to_var, minlength=n)
    marg = {a: sigmoid(float(belief[i])) for i, a in enumerate(gm.atoms)}
    return BPResult(MarginalTable(marg, float("nan")), converged, it)
