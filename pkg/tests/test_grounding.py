import itertools
import math

import pytest

from liftedrcr.errors import CapacityError
from liftedrcr.generators import smokers
from liftedrcr.grounding import ground, verify_disconnected, weight_of_world
from liftedrcr.parser import parse_mln

import corpus


def test_smokers_two_people():
    gm = ground(smokers(2))
    assert len(gm.formulas) == 6
    assert len(gm.atoms) == 8


def test_smokers_one_person():
    assert len(ground(smokers(1)).formulas) == 2


def test_provenance():
    gm = ground(smokers(2))
    assert gm.provenance[0] == (1, {"X": "a"})
    assert gm.provenance[-1] == (2, {"X": "b", "Y": "b"})


def test_constraint_filters_groundings():
    m = parse_mln("domain P = {a, b, c}\npredicate f(P, P)\n1 X != Y, f(X, Y)\n")
    assert len(ground(m).formulas) == 6


def test_evidence_becomes_hard_unit():
    gm = ground(corpus.load("hard_evidence"))
    assert sum(f.is_hard for f in gm.formulas) == 2


def test_weight_of_world_matches_hand_count():
    gm = ground(smokers(1))
    atoms = {str(a): a for a in gm.atoms}
    for bits in itertools.product((False, True), repeat=3):
        s, c, f = bits
        world = {atoms["smokes(a)"]: s, atoms["cancer(a)"]: c, atoms["friends(a,a)"]: f}
        expected = 1.3 * ((not s) or c) + 1.5 * (not (s and f) or s)
        assert math.isclose(weight_of_world(gm, world), expected)


def test_hard_violation_is_minus_inf():
    gm = ground(parse_mln("predicate p()\nhard p()\n"))
    assert weight_of_world(gm, {gm.atoms[0]: False}) == -math.inf


def test_capacity():
    with pytest.raises(CapacityError):
        ground(smokers(5), max_atoms=10)


def test_verify_disconnected_reports_witness():
    gm = ground(smokers(2))
    ok, witness = verify_disconnected(gm)
    assert not ok
    atom, i, j = witness
    assert atom in gm.formulas[i].atoms and atom in gm.formulas[j].atoms
