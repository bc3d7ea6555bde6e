import json

import pytest

from liftedrcr.bp import bp_oracle
from liftedrcr.compensation import CompensationParams, Mode, kld3
from liftedrcr.engine import CompiledModel
from liftedrcr.exact import brute_force, factor_graph, sigmoid, ve_marginals
from liftedrcr.generators import smokers
from liftedrcr.grounding import ground
from liftedrcr.recovery import RecoveryPolicy, rcr, recovered_share, score, scores, select
from liftedrcr.relaxation import Equivalence, clone_all
from liftedrcr.mln import TRUE
from liftedrcr.shattering import partition_model

import corpus
from oracles import sigmoid as ref_sigmoid, three_way

TIGHT = CompensationParams(tol=1e-12, max_iters=5000)


def _eq(n, n_prime):
    return Equivalence(0, TRUE, None, None, n=n, n_prime=n_prime)


def test_score_examples():
    assert score(_eq(1, 1), 0.5, 0.5, 0.0, 0.0) == 0.0
    one = score(_eq(1, 1), 0.9, 0.4, 0.2, 0.1)
    four = score(_eq(4, 4), 0.9, 0.4, 0.2, 0.1)
    assert four == pytest.approx(4 * one, rel=1e-12)
    assert one == pytest.approx(three_way(0.9, 0.4, ref_sigmoid(0.3)), rel=1e-12)


def test_scores_match_independent_recomputation():
    rm = partition_model(clone_all(smokers(3)))
    rm = rm.with_weights({e.id: (0.1 * e.id, -0.05 * e.id) for e in rm.equivalences})
    compiled = CompiledModel(rm)
    got = scores(compiled, CompensationParams())
    exact = ve_marginals(factor_graph(rm.ground())).marginals
    for e in rm.equivalences:
        a, b = e.groundings(rm.domains)[0]
        r = ref_sigmoid(e.w * e.n / e.n_prime + e.w_prime)
        expected = e.n_prime * three_way(exact[a], exact[b], r)
        assert got[e.id] == pytest.approx(expected, rel=1e-9, abs=1e-15)
    ranking = select(got, len(got))
    assert ranking == sorted(got, key=lambda i: (-got[i], i))


def test_ties_go_to_smaller_id():
    assert select({3: 1.0, 1: 1.0, 2: 0.5}, 2) == [1, 3]
    assert select({3: 5.0, 1: 5.0, 2: 2.5}, 1) == select({3: 1.0, 1: 1.0, 2: 0.5}, 1)


@pytest.mark.parametrize("mode", list(Mode))
@pytest.mark.parametrize("name", ["smokers_2", "sick_death", "p_r_evidence", "reflexive", "exclusive_choice"])
def test_spectrum_endpoints(name, mode):
    m = corpus.load(name)
    gm = ground(m)
    zero = rcr(m, RecoveryPolicy(fraction=0.0), TIGHT, mode)
    bp = bp_oracle(gm).table.marginals
    for atom, p in zero.marginals.items():
        assert p == pytest.approx(bp[atom], abs=1e-6)
    full = rcr(m, RecoveryPolicy(fraction=1.0), TIGHT, mode)
    exact = brute_force(gm).marginals
    assert full.recovered_fraction == 1.0
    for atom, p in full.marginals.items():
        assert p == pytest.approx(exact[atom], abs=1e-9)


def test_intermediate_budget_beats_full_relaxation():
    m = smokers(5)
    exact = ve_marginals(factor_graph(ground(m))).marginals

    def kl(res):
        return sum(kld3(res.marginals[a], exact[a], exact[a]) for a in exact)

    assert kl(rcr(m, RecoveryPolicy(fraction=0.5))) <= kl(rcr(m, RecoveryPolicy(fraction=0.0)))


def test_audit_log_and_determinism():
    m = smokers(3)
    a = rcr(m, RecoveryPolicy(count=3))
    b = rcr(m, RecoveryPolicy(count=3))
    assert a.audit_jsonl() == b.audit_jsonl()
    assert a.marginals == b.marginals
    rows = [json.loads(line) for line in a.audit_jsonl().splitlines()]
    assert [r["step"] for r in rows] == [0, 1, 2, 3]
    assert set(rows[1]) == {"step", "recovered_eq", "score", "converged", "iters", "ground_equivs_recovered_cum"}
    cum = [r["ground_equivs_recovered_cum"] for r in rows]
    assert cum == sorted(cum) and cum[0] == 0
    assert len(a.recovered) == 3


def test_batch_recovers_several_per_step():
    res = rcr(smokers(2), RecoveryPolicy(count=4, batch=2))
    assert [r["step"] for r in res.audit] == [0, 1, 1, 2, 2]


def test_capacity_truncates_and_keeps_last_result():
    m = smokers(4)
    res = rcr(m, RecoveryPolicy(fraction=1.0, max_cluster=3))
    assert res.truncated
    assert 0.0 <= res.recovered_fraction < 1.0
    assert set(res.marginals) == set(ground(m).atoms)


def test_accumulated_residual_flag_runs():
    res = rcr(smokers(3), RecoveryPolicy(count=2, accumulated=True))
    assert len(res.recovered) == 2


def test_debug_equiprobability_recheck():
    res = rcr(smokers(3), RecoveryPolicy(count=2, debug_equiprobability=True))
    assert len(res.equiprobability) == 2
    assert max(res.equiprobability) <= 1e-9


def test_recovered_share_counts_ground_equivalences():
    rm = partition_model(clone_all(smokers(2)))
    total = sum(e.n_prime for e in rm.equivalences)
    assert total == 2 + 2 + 4 + 4 + 4
    assert recovered_share(rm) == 0.0


def test_policy_validation():
    with pytest.raises(ValueError):
        RecoveryPolicy(fraction=1.5)
    with pytest.raises(ValueError):
        RecoveryPolicy(fraction=0.5, count=2)
    with pytest.raises(ValueError):
        RecoveryPolicy(heuristic="random")
