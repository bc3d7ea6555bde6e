import math

import numpy as np
import pytest

from liftedrcr.bp import bp_oracle
from liftedrcr.compensation import (
    CompensationParams, Mode, Schedule, kld3, logit, run_compensation, sym_kl, weak_equivalence_residual,
)
from liftedrcr.engine import CompiledModel
from liftedrcr.errors import NotCountNormalizedError
from liftedrcr.exact import brute_force, sigmoid
from liftedrcr.generators import smokers
from liftedrcr.grounding import ground
from liftedrcr.relaxation import clone_all, ground_split_map, recover
from liftedrcr.shattering import partition_model

import corpus
from oracles import three_way


def unit_pair():
    return clone_all(corpus.load("unit_pair"), only={(2, 0)})


def test_logit_examples():
    assert logit(0.5) == 0.0
    assert logit(sigmoid(2.8)) == pytest.approx(2.8, abs=1e-9)
    assert logit(1.0) == pytest.approx(27.631, abs=1e-3)
    assert logit(0.0) == -logit(1.0)


def test_kld3_matches_direct_formula():
    assert kld3(0.5, 0.5, 0.5) == 0.0
    assert kld3(0.9, 0.5, 0.5) == pytest.approx(three_way(0.9, 0.5, 0.5), rel=1e-12)
    assert kld3(0.9, 0.5, 0.5) > 0
    assert sym_kl(0.9, 0.5) == pytest.approx(0.4 * math.log(9), rel=1e-12)


def test_unit_clause_fixed_point_is_exact():
    rm, trace, compiled = run_compensation(unit_pair(), CompensationParams(damping=1.0, tol=1e-12))
    e = rm.equivalences[0]
    assert trace.converged
    assert e.w == pytest.approx(1.5, abs=1e-9)
    assert e.w_prime == pytest.approx(1.3, abs=1e-9)
    exact = brute_force(ground(corpus.load("unit_pair"))).marginals
    for atom, p in compiled.marginals().items():
        assert p == pytest.approx(sigmoid(2.8), abs=1e-12)
    assert list(exact.values())[0] == pytest.approx(sigmoid(2.8), abs=1e-12)
    p, q = compiled.marginals().values()
    assert weak_equivalence_residual(e, p, q) < 1e-12


def test_first_damped_iterate():
    _, trace, _ = run_compensation(unit_pair(), CompensationParams(damping=0.5, max_iters=1))
    assert trace.w[0][0] == pytest.approx(0.75, abs=1e-12)
    assert trace.w_prime[0][0] == pytest.approx(0.65, abs=1e-12)


def test_converged_input_takes_one_iteration():
    rm = unit_pair().with_weights({0: (1.5, 1.3)})
    _, trace, _ = run_compensation(rm, CompensationParams(damping=1.0))
    assert trace.converged and trace.iterations == 1
    assert trace.max_deltas[0] < 1e-12


def test_damping_neutrality():
    rm = partition_model(clone_all(smokers(2)))
    params = CompensationParams(tol=1e-12, max_iters=5000)
    fixed, trace, _ = run_compensation(rm, params)
    assert trace.converged
    _, again, _ = run_compensation(fixed, CompensationParams(damping=1.0, max_iters=1))
    assert again.max_deltas[0] < 1e-9


@pytest.mark.parametrize("name", ["smokers_2", "sick_death", "p_r", "xor_loop", "two_domains", "reflexive"])
def test_converged_residuals_are_small(name):
    rm = partition_model(clone_all(corpus.load(name)))
    _, trace, _ = run_compensation(rm, CompensationParams(tol=1e-8, max_iters=5000))
    assert trace.converged
    assert max(trace.final_residuals.values()) < 1e-6


def test_representative_choice_is_immaterial():
    rm = partition_model(clone_all(smokers(3)))
    a = run_compensation(rm, CompensationParams(max_iters=40, representative=0))[1]
    b = run_compensation(rm, CompensationParams(max_iters=40, representative=-1))[1]
    assert np.max(np.abs(np.array(a.w) - np.array(b.w))) < 1e-9
    assert np.max(np.abs(np.array(a.w_prime) - np.array(b.w_prime))) < 1e-9


def test_lifted_update_scales_by_clone_ratio():
    rm = clone_all(smokers(2))
    e = rm.equivalences[4]
    assert (e.n, e.n_prime) == (2, 4)
    params = CompensationParams(damping=1.0, max_iters=1, schedule=Schedule.SIMULTANEOUS)
    compiled = CompiledModel(rm)
    a, b = compiled.representative(4)
    lo_clone = compiled.log_odds(b)
    _, trace, _ = run_compensation(rm, params)
    assert trace.w[0][4] == pytest.approx(2 * lo_clone, abs=1e-12)
    split, parents = ground_split_map(rm)
    _, gtrace, _ = run_compensation(split, params, Mode.GROUND)
    mine = [j for j, p in enumerate(parents) if p == 4]
    for j in mine:
        assert gtrace.w[0][j] == pytest.approx(trace.w[0][4] / 2, abs=1e-12)


def _trajectory_gap(rm, iters=60):
    split, parents = ground_split_map(rm)
    params = CompensationParams(schedule=Schedule.SIMULTANEOUS, max_iters=iters, tol=1e-300)
    _, lt, lc = run_compensation(rm, params, Mode.LIFTED)
    _, gt, gc = run_compensation(split, params, Mode.GROUND)
    pos = {e.id: j for j, e in enumerate(lc.cells)}
    cell = np.array([pos[parents[e.id]] for e in gc.cells])
    scale = np.array([lc.cells[j].n / lc.cells[j].n_prime for j in cell])
    assert lt.iterations == gt.iterations == iters
    gap = 0.0
    for it in range(iters):
        gap = max(gap, np.max(np.abs(lt.w[it][cell] * scale - gt.w[it])))
        gap = max(gap, np.max(np.abs(lt.w_prime[it][cell] - gt.w_prime[it])))
    return gap


@pytest.mark.parametrize("size", [2, 3, 4])
def test_lifted_trajectory_equals_ground_trajectory(size):
    rm = partition_model(clone_all(smokers(size)))
    assert _trajectory_gap(rm) < 1e-9
    assert _trajectory_gap(recover(rm, 2)) < 1e-9


def test_disconnecting_relaxation_is_exact():
    m = corpus.load("chain_constants")
    # clone p(b) in the first formula only: the model splits at p(b)
    rm = clone_all(m, only={(1, 1)})
    _, trace, compiled = run_compensation(rm, CompensationParams(tol=1e-13, max_iters=5000))
    assert trace.converged
    exact = brute_force(ground(m)).marginals
    for atom, p in exact.items():
        assert compiled.marginal(atom) == pytest.approx(p, abs=1e-9)


@pytest.mark.parametrize("mode", list(Mode))
def test_fully_relaxed_matches_bp(mode):
    m = smokers(2)
    rm = clone_all(m)
    if mode is Mode.LIFTED:
        rm = partition_model(rm)
    _, trace, compiled = run_compensation(rm, CompensationParams(tol=1e-12, max_iters=5000), mode)
    assert trace.converged
    bp = bp_oracle(ground(m))
    for atom, p in bp.table.marginals.items():
        assert compiled.marginal(atom) == pytest.approx(p, abs=1e-6)


def test_oscillating_model_needs_damping():
    rm = partition_model(clone_all(corpus.load(corpus.OSCILLATING)))
    _, undamped, _ = run_compensation(rm, CompensationParams(damping=1.0, max_iters=300))
    assert not undamped.converged
    _, damped, compiled = run_compensation(rm, CompensationParams(damping=0.5))
    assert damped.converged
    assert all(0 <= p <= 1 for p in compiled.marginals().values())


def test_lifted_mode_rejects_bad_counts():
    rm = clone_all(smokers(2))
    bad = rm.with_equivalences(
        [e if e.id != 4 else type(e)(**{**e.__dict__, "n": 3}) for e in rm.equivalences]
    )
    with pytest.raises(NotCountNormalizedError):
        run_compensation(bad)


def test_trace_csv():
    _, trace, _ = run_compensation(unit_pair(), CompensationParams(max_iters=2))
    lines = trace.to_csv().splitlines()
    assert lines[0] == "iter,eq_id,w,w_prime,delta,residual"
    assert lines[1].startswith("1,0,0.75,0.65,")
    assert len(lines) == 3


def test_params_validation():
    with pytest.raises(ValueError):
        CompensationParams(damping=0.0)
    with pytest.raises(ValueError):
        CompensationParams(tol=0)
