"""Fixed-point iteration for compensating weights.

Both modes share one update. For a relaxed equivalence with original count
``n`` and clone count ``n'`` and representative marginals ``p = Pr(a_g)``,
``q = Pr(a'_g)``::

    w_new  = (n'/n) * (logit(q) - w')
    w'_new = logit(p) - (n/n') * w

Ground equivalences have ``n = n' = 1``. The lifted ``w`` is the total bias on
one original grounding, i.e. ``n'/n`` copies of the per-grounding weight,
which is why the second line rescales it before subtracting.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import CompiledModel
from .exact import DEFAULT_MAX_CLUSTER, sigmoid
from .errors import NotCountNormalizedError
from .relaxation import Equivalence, RelaxedModel, ground_split
from .shattering import check_count_normalized


class Schedule(enum.Enum):
    SEQUENTIAL = "seq"
    SIMULTANEOUS = "sim"


class Mode(enum.Enum):
    GROUND = "ground"
    LIFTED = "lifted"


@dataclass(frozen=True)
class CompensationParams:
    damping: float = 0.5
    tol: float = 1e-8
    max_iters: int = 1000
    schedule: Schedule = Schedule.SEQUENTIAL
    clamp: float = 1e-12
    # which grounding of each cell is queried: 0 = first solution, -1 = last
    representative: int = 0

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.clamp < 0.5:
            raise ValueError("clamp must lie in (0, 0.5)")


# -- scalar helpers ------------------------------------------------------------


def logit_bound(eps: float) -> float:
    return math.log1p(-eps) - math.log(eps)


def logit(p: float, eps: float = 1e-12) -> float:
    p = float(p)
    if p > 0.5:
        # 1 - p is exact here, which keeps logit(p) == -logit(1 - p)
        return -logit(1.0 - p, eps)
    p = max(p, eps)
    return math.log(p) - math.log1p(-p)


def clip_log_odds(x: float, eps: float = 1e-12) -> float:
    """Log-odds as returned by the engine, clamped like :func:`logit`."""
    b = logit_bound(eps)
    return min(max(float(x), -b), b)


def sym_kl(p: float, q: float, eps: float = 1e-12) -> float:
    """Symmetrised KL between Bernoulli(p) and Bernoulli(q)."""
    p = min(max(float(p), eps), 1.0 - eps)
    q = min(max(float(q), eps), 1.0 - eps)
    return (p - q) * (logit(p, eps) - logit(q, eps))


def kld3(p: float, q: float, r: float, eps: float = 1e-12) -> float:
    return sym_kl(p, q, eps) + sym_kl(p, r, eps) + sym_kl(q, r, eps)


def per_grounding_sum(eq: Equivalence, w: float, w_prime: float) -> float:
    """``w + w'`` as seen by a single ground equivalence of ``eq``."""
    return (eq.n / eq.n_prime) * w + w_prime


def weak_equivalence_residual(eq: Equivalence, p: float, q: float, eps: float = 1e-12) -> float:
    return kld3(p, q, sigmoid(per_grounding_sum(eq, eq.w, eq.w_prime)), eps)


# -- trace ---------------------------------------------------------------------


@dataclass
class CompensationTrace:
    eq_ids: list[int]
    w: list[np.ndarray] = field(default_factory=list)
    w_prime: list[np.ndarray] = field(default_factory=list)
    delta: list[np.ndarray] = field(default_factory=list)
    residual: list[np.ndarray] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.delta)

    @property
    def max_deltas(self) -> list[float]:
        return [float(d.max()) if d.size else 0.0 for d in self.delta]

    @property
    def final_residuals(self) -> dict[int, float]:
        if not self.residual:
            return {}
        return dict(zip(self.eq_ids, self.residual[-1].tolist()))

    def peak_residuals(self) -> dict[int, float]:
        if not self.residual:
            return {}
        return dict(zip(self.eq_ids, np.max(self.residual, axis=0).tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["iter", "eq_id", "w", "w_prime", "delta", "residual"])
        for it in range(self.iterations):
            for j, eid in enumerate(self.eq_ids):
                out.writerow([
                    it + 1, eid, repr(float(self.w[it][j])), repr(float(self.w_prime[it][j])),
                    repr(float(self.delta[it][j])), repr(float(self.residual[it][j])),
                ])
        return buf.getvalue()


# -- steps ---------------------------------------------------------------------


def _new_weights(e: Equivalence, w: float, wp: float, lo: float, lo_p: float) -> tuple[float, float]:
    ratio = e.n_prime / e.n
    return ratio * (lo_p - wp), lo - w / ratio


def _damp(old: float, new: float, lam: float) -> float:
    return new if lam == 1.0 else (1.0 - lam) * old + lam * new


def step(compiled: CompiledModel, params: CompensationParams) -> np.ndarray:
    """One sweep over all relaxed cells; returns the per-cell max |Δw|."""
    lam, eps, which = params.damping, params.clamp, params.representative
    cells = compiled.cells
    w, wp = compiled.w.copy(), compiled.w_prime.copy()
    delta = np.zeros(len(cells))
    if params.schedule is Schedule.SIMULTANEOUS:
        lo = compiled.forest.all_log_odds()
        for j, e in enumerate(cells):
            a, b = compiled.representative(j, which)
            nw, nwp = _new_weights(e, w[j], wp[j], clip_log_odds(lo[a], eps), clip_log_odds(lo[b], eps))
            nw, nwp = _damp(w[j], nw, lam), _damp(wp[j], nwp, lam)
            delta[j] = max(abs(nw - w[j]), abs(nwp - wp[j]))
            compiled.w[j], compiled.w_prime[j] = nw, nwp
        compiled.apply()
    else:
        for j, e in enumerate(cells):
            a, b = compiled.representative(j, which)
            lo_a = clip_log_odds(compiled.log_odds(a), eps)
            lo_b = clip_log_odds(compiled.log_odds(b), eps)
            nw, nwp = _new_weights(e, w[j], wp[j], lo_a, lo_b)
            nw, nwp = _damp(w[j], nw, lam), _damp(wp[j], nwp, lam)
            delta[j] = max(abs(nw - w[j]), abs(nwp - wp[j]))
            compiled.w[j], compiled.w_prime[j] = nw, nwp
            compiled.apply()
    return delta


def residuals(compiled: CompiledModel, params: CompensationParams) -> np.ndarray:
    lo = compiled.forest.all_log_odds()
    out = np.empty(compiled.num_cells)
    for j, e in enumerate(compiled.cells):
        a, b = compiled.representative(j, params.representative)
        r = sigmoid(per_grounding_sum(e, compiled.w[j], compiled.w_prime[j]))
        out[j] = kld3(sigmoid(lo[a]), sigmoid(lo[b]), r, params.clamp)
    return out


def check_counts(rm: RelaxedModel) -> None:
    """Every relaxed cell must be count-normalized with the counts it records."""
    domains = rm.domains
    for e in rm.relaxed:
        n, n_prime = check_count_normalized(e.groundings(domains))
        if (n, n_prime) != (e.n, e.n_prime):
            raise NotCountNormalizedError(
                f"equivalence {e.id} records counts ({e.n}, {e.n_prime}) but has ({n}, {n_prime})"
            )


def needs_split(rm: RelaxedModel) -> bool:
    domains = rm.domains
    return any(len(e.solutions(domains)) != 1 for e in rm.relaxed)


def iterate(compiled: CompiledModel, params: CompensationParams) -> CompensationTrace:
    """Run steps on an already compiled model until max |Δw| < tol."""
    trace = CompensationTrace([e.id for e in compiled.cells])
    for _ in range(params.max_iters):
        delta = step(compiled, params)
        trace.w.append(compiled.w.copy())
        trace.w_prime.append(compiled.w_prime.copy())
        trace.delta.append(delta)
        trace.residual.append(residuals(compiled, params))
        if not delta.size or delta.max() < params.tol:
            trace.converged = True
            break
    return trace


def run_compensation(
    rm: RelaxedModel,
    params: CompensationParams | None = None,
    mode: Mode = Mode.LIFTED,
    max_cluster: int = DEFAULT_MAX_CLUSTER,
) -> tuple[RelaxedModel, CompensationTrace, CompiledModel]:
    """Iterate compensations to a fixed point (or ``max_iters``).

    In GROUND mode a model whose relaxed equivalences have several groundings
    is first split into ground equivalences. In LIFTED mode the counts of
    every relaxed equivalence are verified first.
    """
    params = params or CompensationParams()
    if mode is Mode.GROUND:
        if needs_split(rm):
            rm = ground_split(rm)
    else:
        check_counts(rm)
    compiled = CompiledModel(rm, max_cluster=max_cluster)
    trace = iterate(compiled, params)
    return compiled.updated_model(), trace, compiled
