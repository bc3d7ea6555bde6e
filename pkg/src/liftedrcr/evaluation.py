"""Approximation error against exact marginals, and recovery-level sweeps."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from typing import Mapping, Sequence

from .compensation import CompensationParams, Mode, sym_kl
from .errors import MLNError
from .exact import DEFAULT_MAX_CLUSTER, MarginalTable, factor_graph, ve_marginals
from .grounding import ground, ground_evidence
from .mln import GroundAtom, Mln
from .recovery import RecoveryPolicy, rcr

CSV_VERSION = 1


def _as_dict(t: MarginalTable | Mapping[GroundAtom, float]) -> Mapping[GroundAtom, float]:
    return t.marginals if isinstance(t, MarginalTable) else t


def kl_metrics(
    approx: MarginalTable | Mapping[GroundAtom, float],
    exact: MarginalTable | Mapping[GroundAtom, float],
    query: Sequence[GroundAtom],
    eps: float = 1e-12,
) -> tuple[float, dict[GroundAtom, float]]:
    """Summed symmetric Bernoulli KL over ``query`` and its per-atom terms."""
    a, e = _as_dict(approx), _as_dict(exact)
    missing = [q for q in query if q not in a or q not in e]
    if missing:
        raise ValueError(f"{len(missing)} query atoms missing from a table, e.g. {missing[0]}")
    per = {q: sym_kl(a[q], e[q], eps) for q in query}
    return sum(per.values()), per


def query_atoms(mln: Mln) -> list[GroundAtom]:
    """Original ground atoms that are not fixed by evidence."""
    observed = {gf.occurrences[0] for gf in ground_evidence(mln)}
    return [a for a in ground(mln).atoms if not a.is_clone and a not in observed]


def exact_marginals(mln: Mln, max_cluster: int = DEFAULT_MAX_CLUSTER) -> MarginalTable:
    return ve_marginals(factor_graph(ground(mln)), max_cluster=max_cluster)


@dataclass
class EvalRow:
    model: str
    sizes: str
    target: float
    recovered_fraction: float
    raw_kl: float
    normalized_kl: float
    iterations: int
    converged: bool
    truncated: bool
    wall_time: float
    error: str = ""


def _run_point(args) -> tuple[float, float, int, bool, bool, float, str]:
    mln, frac, params, mode, max_cluster, exact, query = args
    t0 = time.perf_counter()
    try:
        res = rcr(mln, RecoveryPolicy(fraction=frac, max_cluster=max_cluster), params, mode)
    except MLNError as err:
        return frac, float("nan"), 0, False, False, time.perf_counter() - t0, f"{type(err).__name__}: {err}"
    raw, _ = kl_metrics(res.marginals, exact, query)
    return res.recovered_fraction, raw, res.iterations, res.converged, res.truncated, time.perf_counter() - t0, ""


def sweep(
    mln: Mln,
    grid: Sequence[float],
    params: CompensationParams | None = None,
    mode: Mode = Mode.LIFTED,
    name: str = "model",
    workers: int = 1,
    max_cluster: int = DEFAULT_MAX_CLUSTER,
) -> list[EvalRow]:
    """Run RCR at each recovery level in ``grid`` and score it against exact marginals.

    Errors are normalised by the fully relaxed (0%) run, which is always
    computed even if 0 is not in the grid. Rows follow grid order.
    """
    params = params or CompensationParams()
    exact = exact_marginals(mln, max_cluster)
    query = query_atoms(mln)
    sizes = ";".join(f"{d.name}={len(d.constants)}" for d in mln.domains)
    levels = [0.0] + [float(g) for g in grid]
    jobs = [(mln, f, params, mode, max_cluster, exact.marginals, query) for f in levels]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    base = results[0][1]
    rows = []
    for f, (frac, raw, iters, conv, trunc, wall, err) in zip(levels[1:], results[1:]):
        if base > 0:
            norm = 100.0 * raw / base
        else:
            norm = 0.0 if raw == 0 else float("inf")
        rows.append(EvalRow(name, sizes, f, frac, raw, norm, iters, conv, trunc, wall, err))
    return rows


def rows_to_csv(rows: Sequence[EvalRow]) -> str:
    buf = io.StringIO()
    buf.write(f"# liftedrcr sweep v{CSV_VERSION}\n")
    out = csv.writer(buf, lineterminator="\n")
    out.writerow([f.name for f in fields(EvalRow)])
    for r in rows:
        out.writerow([repr(v) if isinstance(v, float) else v for v in astuple(r)])
    return buf.getvalue()
