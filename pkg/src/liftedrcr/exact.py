"""Exact inference on ground models.

Two independent engines:

* :func:`brute_force` enumerates every world (the oracle);
* :class:`JunctionForest` compiles a min-fill bucket tree per connected
  component and calibrates it with a collect/distribute pass, giving all
  single-variable marginals and log Z at once. Per-variable unit biases can
  be changed between calibrations without recompiling, and only the
  components whose biases changed are recalibrated.

All arithmetic is in log space; ``-inf`` encodes a violated hard formula.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import CapacityError, InconsistentModelError
from .grounding import GroundFormula, GroundModel
from .mln import GroundAtom, evaluate

DEFAULT_MAX_CLUSTER = 20
DEFAULT_MAX_BRUTE_ATOMS = 25


@dataclass(frozen=True)
class Factor:
    scope: tuple[int, ...]  # sorted, distinct variable ids
    table: np.ndarray  # log-space, one binary axis per scope entry


@dataclass
class FactorGraph:
    num_vars: int
    factors: list[Factor]
    labels: list[Hashable]

    def __post_init__(self):
        for f in self.factors:
            if f.table.shape != (2,) * len(f.scope):
                raise ValueError("factor table does not match its scope")
            if any(not 0 <= v < self.num_vars for v in f.scope):
                raise ValueError("factor scope outside the variable set")


@dataclass
class MarginalTable:
    marginals: dict[Hashable, float]
    log_z: float

    def prob(self, atom: Hashable, value: bool = True) -> float:
        p = self.marginals[atom]
        return p if value else 1.0 - p


def formula_factor(formula: GroundFormula, var_of: Callable[[GroundAtom], int]) -> Factor:
    """Tabulate a ground formula over the distinct variables it mentions."""
    scope = tuple(sorted({var_of(a) for a in formula.occurrences}))
    pos = {v: i for i, v in enumerate(scope)}
    grid = np.indices((2,) * len(scope), dtype=np.int8).astype(bool)
    sat = np.asarray(evaluate(formula.body, lambda a: grid[pos[var_of(a)]]), dtype=bool)
    if formula.is_hard:
        table = np.where(sat, 0.0, -np.inf)
    else:
        table = np.where(sat, float(formula.weight), 0.0)
    return Factor(scope, table)


def factor_graph(gm: GroundModel) -> FactorGraph:
    idx = gm.index
    factors = [formula_factor(f, idx.__getitem__) for f in gm.formulas]
    return FactorGraph(len(gm.atoms), factors, list(gm.atoms))


# -- log-space helpers -------------------------------------------------------


def logsumexp(a: np.ndarray, axes: tuple[int, ...] | None = None) -> np.ndarray:
    if axes == ():
        return a
    m = np.max(a, axis=axes, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axes, keepdims=True)) + m
    return np.squeeze(out, axis=axes) if axes is not None else out.reshape(())


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def sigmoid_array(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


# -- brute force -------------------------------------------------------------


def brute_force(gm: GroundModel, max_atoms: int = DEFAULT_MAX_BRUTE_ATOMS) -> MarginalTable:
    """Exact marginals and log Z by summing over all 2^n worlds."""
    n = len(gm.atoms)
    if n > max_atoms:
        raise CapacityError(f"{n} ground atoms exceed the brute-force limit of {max_atoms}")
    idx = gm.index
    low = min(n, 16)
    low_bits = (np.arange(2**low)[:, None] >> np.arange(low)[None, :]) & 1
    low_weights = low_bits.T.astype(float)
    log_z = -np.inf
    log_true = np.full(n, -np.inf)
    for high in range(2 ** (n - low)):
        bits = np.empty((2**low, n), dtype=bool)
        bits[:, :low] = low_bits
        for j in range(low, n):
            bits[:, j] = (high >> (j - low)) & 1
        logw = np.zeros(2**low)
        for f in gm.formulas:
            sat = evaluate(f.body, lambda a: bits[:, idx[a]])
            if f.is_hard:
                logw[~sat] = -np.inf
            else:
                logw += f.weight * sat
        block = logsumexp(logw, (0,))
        if block == -np.inf:
            continue
        log_z = np.logaddexp(log_z, block)
        scaled = np.exp(logw - block)
        with np.errstate(divide="ignore"):
            log_true[:low] = np.logaddexp(log_true[:low], np.log(low_weights @ scaled) + block)
        for j in range(low, n):
            # high bits are constant within a block
            if (high >> (j - low)) & 1:
                log_true[j] = np.logaddexp(log_true[j], block)
    if log_z == -np.inf:
        raise InconsistentModelError("every world violates a hard formula")
    probs = np.exp(log_true - log_z)
    return MarginalTable({a: float(probs[i]) for i, a in enumerate(gm.atoms)}, float(log_z))


# -- compiled variable elimination -------------------------------------------


def min_fill_order(variables: Sequence[int], neighbours: dict[int, set[int]]) -> tuple[list[int], list[tuple[int, ...]]]:
    """Greedy min-fill elimination; ties go to the smaller variable id.

    Returns the order and, for each eliminated variable, its cluster
    (the variable plus its neighbours at elimination time), sorted.
    """
    adj = {v: set(neighbours.get(v, ())) for v in variables}

    def fill(v: int) -> int:
        nb = list(adj[v])
        missing = 0
        for i, a in enumerate(nb):
            na = adj[a]
            for b in nb[i + 1 :]:
                if b not in na:
                    missing += 1
        return missing

    score = {v: fill(v) for v in variables}
    heap = [(s, v) for v, s in score.items()]
    heapq.heapify(heap)
    done: set[int] = set()
    order: list[int] = []
    clusters: list[tuple[int, ...]] = []
    while heap:
        s, v = heapq.heappop(heap)
        if v in done or s != score[v]:
            continue
        done.add(v)
        nb = adj.pop(v)
        order.append(v)
        clusters.append(tuple(sorted(nb | {v})))
        nbl = list(nb)
        for i, a in enumerate(nbl):
            adj[a].discard(v)
            for b in nbl[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
        affected = set(nb)
        for a in nb:
            affected |= adj[a]
        for a in affected:
            new = fill(a)
            if new != score[a]:
                score[a] = new
                heapq.heappush(heap, (new, a))
    return order, clusters


class _Component:
    __slots__ = (
        "vars", "order", "cluster", "parent", "children", "factors", "shapes",
        "bias_shape", "dirty", "log_odds", "log_z", "const",
    )


def _aligned_shape(scope: Sequence[int], cluster: Sequence[int]) -> tuple[int, ...]:
    s = set(scope)
    return tuple(2 if v in s else 1 for v in cluster)


class JunctionForest:
    """Compiled exact engine over a fixed factor-graph structure.

    ``bias[v]`` adds a unit factor ``[0, bias[v]]`` on variable ``v``. Changing
    biases marks the owning component stale; marginals are recomputed lazily.
    """

    def __init__(self, fg: FactorGraph, max_cluster: int = DEFAULT_MAX_CLUSTER):
        self.fg = fg
        self.num_vars = fg.num_vars
        self.bias = np.zeros(fg.num_vars)
        n = fg.num_vars
        parent = list(range(n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        neighbours: dict[int, set[int]] = {}
        constant = 0.0
        const_factors: list[int] = []
        for fi, f in enumerate(fg.factors):
            if not f.scope:
                const_factors.append(fi)
                constant += float(f.table)
                continue
            r = find(f.scope[0])
            for v in f.scope[1:]:
                parent[find(v)] = r
            for v in f.scope:
                neighbours.setdefault(v, set()).update(u for u in f.scope if u != v)
        self.constant = constant
        groups: dict[int, list[int]] = {}
        for v in range(n):
            groups.setdefault(find(v), []).append(v)
        self.components: list[_Component] = []
        self.component_of = np.empty(n, dtype=np.int64)
        self.position = np.empty(n, dtype=np.int64)
        for _, members in sorted(groups.items(), key=lambda kv: kv[1][0]):
            comp = _Component()
            comp.vars = members
            comp.order, clusters = min_fill_order(members, neighbours)
            widest = max(len(c) for c in clusters)
            if widest > max_cluster:
                raise CapacityError(
                    f"elimination cluster of {widest} variables exceeds the limit of {max_cluster}"
                )
            rank = {v: i for i, v in enumerate(comp.order)}
            comp.cluster = clusters
            comp.parent = []
            comp.children = [[] for _ in comp.order]
            for i, (v, c) in enumerate(zip(comp.order, clusters)):
                rest = [rank[u] for u in c if u != v]
                p = min(rest) if rest else -1
                comp.parent.append(p)
                if p >= 0:
                    comp.children[p].append(i)
            comp.factors = [[] for _ in comp.order]
            comp.bias_shape = [_aligned_shape((v,), c) for v, c in zip(comp.order, clusters)]
            comp.dirty = True
            comp.log_odds = np.zeros(len(members))
            comp.log_z = 0.0
            ci = len(self.components)
            for i, v in enumerate(comp.order):
                self.component_of[v] = ci
                self.position[v] = i
            self.components.append(comp)
        for fi, f in enumerate(fg.factors):
            if not f.scope:
                continue
            comp = self.components[self.component_of[f.scope[0]]]
            home = min(self.position[v] for v in f.scope)
            comp.factors[home].append((f.table.reshape(_aligned_shape(f.scope, comp.cluster[home]))))

    # -- bias management
    def set_bias(self, var: int, value: float) -> None:
        if self.bias[var] != value:
            self.bias[var] = value
            self.components[self.component_of[var]].dirty = True

    def set_biases(self, values: np.ndarray) -> None:
        changed = np.nonzero(self.bias != values)[0]
        self.bias = np.array(values, dtype=float)
        for ci in set(self.component_of[changed].tolist()):
            self.components[ci].dirty = True

    # -- queries
    def log_odds(self, var: int) -> float:
        comp = self.components[self.component_of[var]]
        if comp.dirty:
            self._calibrate(comp)
        return float(comp.log_odds[self.position[var]])

    def marginal(self, var: int) -> float:
        return sigmoid(self.log_odds(var))

    def all_log_odds(self) -> np.ndarray:
        out = np.empty(self.num_vars)
        for comp in self.components:
            if comp.dirty:
                self._calibrate(comp)
            out[comp.order] = comp.log_odds
        return out

    def log_z(self) -> float:
        total = self.constant
        for comp in self.components:
            if comp.dirty:
                self._calibrate(comp)
            total += comp.log_z
        return total

    def table(self, queries: Iterable[int] | None = None) -> MarginalTable:
        wanted = range(self.num_vars) if queries is None else queries
        labels = self.fg.labels
        marg = {labels[v]: self.marginal(v) for v in wanted}
        return MarginalTable(marg, self.log_z())

    def _calibrate(self, comp: _Component) -> None:
        order, clusters, parent, children = comp.order, comp.cluster, comp.parent, comp.children
        m = len(order)
        base: list[np.ndarray] = []
        up: list[np.ndarray | None] = [None] * m
        for i, v in enumerate(order):
            shape = (2,) * len(clusters[i])
            b = np.zeros(shape)
            bias = self.bias[v]
            if bias:
                b = b + np.array([0.0, bias]).reshape(comp.bias_shape[i])
            for t in comp.factors[i]:
                b = b + t
            base.append(b)
            psi = b
            for c in children[i]:
                psi = psi + up[c].reshape(_sep_shape(clusters[c], order[c], clusters[i]))
            axis = clusters[i].index(v)
            up[i] = logsumexp(psi, (axis,))
        root_value = float(up[m - 1])
        if root_value == -np.inf:
            raise InconsistentModelError("every world violates a hard formula")
        comp.log_z = root_value
        down: list[np.ndarray | float] = [0.0] * m
        log_odds = np.empty(m)
        for i in range(m - 1, -1, -1):
            v = order[i]
            cl = clusters[i]
            own = base[i]
            if parent[i] >= 0:
                own = own + np.reshape(down[i], _sep_shape(cl, v, cl))
            kids = children[i]
            incoming = [up[c].reshape(_sep_shape(clusters[c], order[c], cl)) for c in kids]
            # prefix/suffix sums so each child's message excludes its own
            prefix = [own]
            for msg in incoming:
                prefix.append(prefix[-1] + msg)
            belief = prefix[-1]
            suffix = None
            for k in range(len(kids) - 1, -1, -1):
                c = kids[k]
                excl = prefix[k] if suffix is None else prefix[k] + suffix
                keep = set(clusters[c]) - {order[c]}
                axes = tuple(j for j, u in enumerate(cl) if u not in keep)
                down[c] = logsumexp(excl, axes)
                suffix = incoming[k] if suffix is None else suffix + incoming[k]
            axis = cl.index(v)
            others = tuple(j for j in range(len(cl)) if j != axis)
            pair = logsumexp(belief, others) if others else belief
            log_odds[i] = pair[1] - pair[0] if np.isfinite(pair).any() else 0.0
        comp.log_odds = log_odds
        comp.dirty = False


def _sep_shape(child_cluster: Sequence[int], child_var: int, cluster: Sequence[int]) -> tuple[int, ...]:
    return _aligned_shape([u for u in child_cluster if u != child_var], cluster)


def ve_marginals(
    fg: FactorGraph, queries: Iterable[Hashable] | None = None, max_cluster: int = DEFAULT_MAX_CLUSTER
) -> MarginalTable:
    """Exact marginals of ``queries`` (labels; all variables if None) and log Z."""
    forest = JunctionForest(fg, max_cluster)
    pos = {label: i for i, label in enumerate(fg.labels)}
    wanted = None if queries is None else [pos[q] for q in queries]
    return forest.table(wanted)


def representative_marginals(
    gm: GroundModel,
    pairs: Sequence[tuple[GroundAtom, GroundAtom]],
    max_cluster: int = DEFAULT_MAX_CLUSTER,
) -> list[tuple[float, float]]:
    """Batched exact marginals for (original, clone) representative pairs."""
    idx = gm.index
    for a, b in pairs:
        if a not in idx or b not in idx:
            raise KeyError(f"pair ({a}, {b}) is not in the ground model")
    forest = JunctionForest(factor_graph(gm), max_cluster)
    return [(forest.marginal(idx[a]), forest.marginal(idx[b])) for a, b in pairs]
