"""Residual scoring and the relax / compensate / recover outer loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .compensation import (
    CompensationParams,
    CompensationTrace,
    Mode,
    check_counts,
    iterate,
    kld3,
    per_grounding_sum,
)
from .engine import CompiledModel
from .errors import CapacityError, EquivalenceStateError
from .exact import DEFAULT_MAX_CLUSTER, sigmoid
from .grounding import DEFAULT_MAX_ATOMS
from .mln import GroundAtom, Mln
from .relaxation import Equivalence, RelaxedModel, clone_all, ground_split, recover
from .shattering import equiprobability_report, partition_model


@dataclass(frozen=True)
class RecoveryPolicy:
    heuristic: str = "residual"
    batch: int = 1
    # stop once this share of ground equivalences is recovered ...
    fraction: float | None = None
    # ... or once this many (first-order) equivalences are recovered
    count: int | None = None
    # largest elimination cluster the exact engine may build
    max_cluster: int = DEFAULT_MAX_CLUSTER
    # score by the largest residual seen during compensation, not the last
    accumulated: bool = False
    # re-check equiprobability of the relaxed cells after every recovery
    debug_equiprobability: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.heuristic != "residual":
            raise ValueError(f"unknown heuristic {self.heuristic!r}")
        if self.batch < 1:
            raise ValueError("batch must be at least 1")
        if self.fraction is not None and not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        if self.count is not None and self.count < 0:
            raise ValueError("count must be nonnegative")
        if self.fraction is not None and self.count is not None:
            raise ValueError("give a fraction or a count, not both")


def score(eq: Equivalence, p: float, q: float, w: float, w_prime: float, eps: float = 1e-12) -> float:
    """``n' * KLD3(p, q, sigmoid(w + w'))`` with per-grounding weights."""
    return eq.n_prime * kld3(p, q, sigmoid(per_grounding_sum(eq, w, w_prime)), eps)


def scores(compiled: CompiledModel, params: CompensationParams) -> dict[int, float]:
    lo = compiled.forest.all_log_odds()
    out = {}
    for j, e in enumerate(compiled.cells):
        a, b = compiled.representative(j, params.representative)
        out[e.id] = score(e, sigmoid(lo[a]), sigmoid(lo[b]), compiled.w[j], compiled.w_prime[j], params.clamp)
    return out


def select(candidates: dict[int, float], k: int) -> list[int]:
    """Top ``k`` ids by score; ties go to the smaller id."""
    return [eid for eid, _ in sorted(candidates.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def recovered_share(rm: RelaxedModel) -> float:
    total = sum(e.n_prime for e in rm.equivalences)
    if total == 0:
        return 1.0
    return sum(e.n_prime for e in rm.recovered) / total


@dataclass
class RcrResult:
    marginals: dict[GroundAtom, float]
    audit: list[dict]
    converged: bool
    recovered_fraction: float
    truncated: bool
    model: RelaxedModel
    trace: CompensationTrace
    iterations: int
    equiprobability: list[float] = field(default_factory=list)

    def audit_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=False) + "\n" for r in self.audit)

    @property
    def recovered(self) -> list[Equivalence]:
        return self.model.recovered


def relaxed_model(mln: Mln, mode: Mode) -> RelaxedModel:
    rm = clone_all(mln)
    return partition_model(rm) if mode is Mode.LIFTED else ground_split(rm)


def _done(rm: RelaxedModel, policy: RecoveryPolicy) -> bool:
    if not rm.relaxed:
        return True
    if policy.count is not None:
        return len(rm.recovered) >= policy.count
    target = policy.fraction or 0.0
    return recovered_share(rm) >= target - 1e-12


def rcr(
    mln: Mln,
    policy: RecoveryPolicy | None = None,
    params: CompensationParams | None = None,
    mode: Mode = Mode.LIFTED,
    max_atoms: int = DEFAULT_MAX_ATOMS,
) -> RcrResult:
    """Relax every equivalence, compensate, then recover until the budget is spent.

    If recovering makes the model too large for the exact engine, the last
    model that fit is kept and ``truncated`` is set.
    """
    policy = policy or RecoveryPolicy(fraction=0.0)
    params = params or CompensationParams()
    rm = relaxed_model(mln, mode)
    if mode is Mode.LIFTED:
        check_counts(rm)
    compiled = CompiledModel(rm, max_cluster=policy.max_cluster, max_atoms=max_atoms)
    trace = iterate(compiled, params)
    total_iters = trace.iterations
    audit = [_audit_row(0, None, None, trace, rm)]
    checks: list[float] = []
    truncated = False
    step = 0
    while not _done(rm, policy):
        step += 1
        current = compiled.updated_model()
        sc = scores(compiled, params)
        if policy.accumulated:
            peak = trace.peak_residuals()
            sc = {e.id: e.n_prime * peak.get(e.id, 0.0) for e in compiled.cells}
        chosen = select(sc, policy.batch)
        nxt = current
        for eid in chosen:
            nxt = recover(nxt, eid)
        try:
            nxt_compiled = CompiledModel(nxt, max_cluster=policy.max_cluster, max_atoms=max_atoms)
        except CapacityError:
            truncated = True
            break
        rm, compiled = nxt, nxt_compiled
        trace = iterate(compiled, params)
        total_iters += trace.iterations
        for eid in chosen:
            audit.append(_audit_row(step, eid, sc[eid], trace, rm))
        if policy.debug_equiprobability and rm.relaxed:
            rep = equiprobability_report(rm, trials=5, seed=policy.seed + step, max_cluster=policy.max_cluster)
            checks.append(rep.worst_spread)
            if not rep.passed:
                raise EquivalenceStateError(f"relaxed cells lost equiprobability after step {step}")
    final = compiled.updated_model()
    marginals = compiled.marginals(compiled.original_atoms())
    return RcrResult(
        marginals, audit, trace.converged, recovered_share(final), truncated, final, trace, total_iters, checks
    )


def _audit_row(step: int, eid: int | None, sc: float | None, trace: CompensationTrace, rm: RelaxedModel) -> dict:
    return {
        "step": step,
        "recovered_eq": eid,
        "score": sc,
        "converged": trace.converged,
        "iters": trace.iterations,
        "ground_equivs_recovered_cum": sum(e.n_prime for e in rm.recovered),
    }
