import math

import pytest

from liftedrcr.errors import InconsistentModelError
from liftedrcr.evaluation import EvalRow, kl_metrics, query_atoms, rows_to_csv, sweep
from liftedrcr.generators import generate_model, model_text, smokers
from liftedrcr.grounding import ground
from liftedrcr.mln import GroundAtom, PredicateId

import corpus

A = GroundAtom(PredicateId("p"), ())
B = GroundAtom(PredicateId("q"), ())


def test_kl_metrics():
    raw, per = kl_metrics({A: 0.3, B: 0.6}, {A: 0.3, B: 0.6}, [A, B])
    assert raw == 0.0
    raw, per = kl_metrics({A: 0.9}, {A: 0.5}, [A])
    assert raw == pytest.approx(0.4 * math.log(9), rel=1e-12)
    with pytest.raises(ValueError):
        kl_metrics({A: 0.9}, {B: 0.5}, [A])


def test_query_atoms_skip_evidence():
    m = corpus.load("hard_evidence")
    q = {str(a) for a in query_atoms(m)}
    assert "p(a)" not in q and "q(b)" not in q and "p(b)" in q


def test_generators():
    assert len(ground(smokers(2)).formulas) == 6
    assert len(ground(smokers(1)).formulas) == 2
    assert len(generate_model("smokers_drinkers", 2).formulas) == 3
    assert len(generate_model("symmetric_smokers", 2).formulas) == 3
    assert "p27" in model_text("smokers", 27)
    with pytest.raises(ValueError):
        generate_model("nope", 2)


def test_sweep_endpoints():
    rows = sweep(smokers(2), [0.0, 1.0], name="smokers")
    assert rows[0].normalized_kl == 100.0
    assert rows[1].normalized_kl == 0.0
    assert rows[1].raw_kl <= 1e-9


def test_sweep_rows_follow_grid_and_are_deterministic():
    grid = [1.0, 0.0, 0.5]
    a = sweep(smokers(3), grid)
    b = sweep(smokers(3), grid, workers=2)
    assert [r.target for r in a] == grid

    def strip(rows):
        return [r.__dict__ | {"wall_time": 0.0} for r in rows]

    assert strip(a) == strip(b)


def test_csv_has_versioned_header():
    text = rows_to_csv([EvalRow("m", "P=2", 0.0, 0.0, 1.0, 100.0, 3, True, False, 0.1)])
    lines = text.splitlines()
    assert lines[0] == "# liftedrcr sweep v1"
    assert lines[1].startswith("model,sizes,target,recovered_fraction,raw_kl,normalized_kl")


def test_failed_points_are_marked():
    from liftedrcr.parser import parse_mln

    m = parse_mln("domain P = {a, b}\npredicate p(P)\n1.0 p(X)\n")
    rows = sweep(m, [0.5], max_cluster=20)
    assert rows[0].error == ""
    with pytest.raises(InconsistentModelError):
        sweep(parse_mln("predicate p()\nhard p()\nhard !p()\n"), [0.5])
