import pytest
from hypothesis import given, settings, strategies as st

from liftedrcr.errors import ParseError
from liftedrcr.mln import (
    HARD, And, Atom, Constraint, DomainDecl, Iff, Implies, Literal, Mln, Not, Or, PredicateDecl,
    PredicateId, Var, WeightedFormula, body_variables, eq, neq,
)
from liftedrcr.parser import parse_mln, print_mln

SMOKERS = """\
domain Person = {a, b}
predicate smokes(Person)
predicate cancer(Person)
predicate friends(Person, Person)
1.3 smokes(X) => cancer(X)
1.5 smokes(X) ^ friends(X,Y) => smokes(Y)
"""


def test_smokers_parses():
    m = parse_mln(SMOKERS)
    assert [f.id for f in m.formulas] == [1, 2]
    assert m.formulas[0].weight == 1.3
    assert m.domain_map == {"Person": ("a", "b")}
    x = Var("X", "Person")
    assert m.formulas[0].body == Implies(Atom(PredicateId("smokes"), (x,)), Atom(PredicateId("cancer"), (x,)))


def test_hard_constraint_and_evidence():
    m = parse_mln("domain P = {a, b}\npredicate f(P, P)\nhard X != Y, f(X, Y) => f(Y, X)\nevidence !f(a,b)\n")
    f = m.formulas[0]
    assert f.weight is HARD
    assert f.constraint == Constraint.of(neq(Var("X", "P"), Var("Y", "P")))
    assert m.evidence == (Literal(Atom(PredicateId("f"), ("a", "b")), False),)


def test_sized_domain_uses_mentioned_constants_first():
    m = parse_mln("domain P = 3\npredicate p(P)\n1 p(bob)\n")
    assert m.domain_map["P"] == ("bob", "p1", "p2")


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("domain P = {a}\npredicate p(P)\n1 p(X\n", 3, 6),
        ("domain P = {a}\npredicate p(P)\n1 q(X)\n", 3, 3),
        ("domain P = {a}\npredicate p(P)\n1 p(X, Y)\n", 3, 3),
        ("domain P = {a}\npredicate p(P)\n1 p(X) # p(X)\n", 3, 8),
        ("domain P = {a}\npredicate p(P)\nevidence p(X)\n", 3, 12),
        ("predicate p(Q)\n", 1, 1),
    ],
)
def test_errors_carry_position(text, line, col):
    with pytest.raises(ParseError) as info:
        parse_mln(text)
    assert info.value.line == line
    assert info.value.column == col


def test_type_clash_is_a_parse_error():
    text = "domain P = {a}\ndomain Q = {b}\npredicate p(P)\npredicate q(Q)\n1 p(X) => q(X)\n"
    with pytest.raises(ParseError):
        parse_mln(text)


# -- round trip --------------------------------------------------------------

P = "P"
VARS = [Var("X", P), Var("Y", P), Var("Z", P)]
PREDS = {"p": 1, "q": 2, "r": 0}

terms = st.one_of(st.sampled_from(VARS), st.sampled_from(["a", "b"]))


@st.composite
def atoms(draw):
    name = draw(st.sampled_from(sorted(PREDS)))
    return Atom(PredicateId(name), tuple(draw(terms) for _ in range(PREDS[name])))


def _flat(cls, args):
    out = []
    for a in args:
        out.extend(a.args if isinstance(a, cls) else [a])
    return cls(tuple(out))


bodies = st.recursive(
    atoms(),
    lambda sub: st.one_of(
        sub.map(Not),
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: _flat(And, xs)),
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: _flat(Or, xs)),
        st.tuples(sub, sub).map(lambda t: Implies(*t)),
        st.tuples(sub, sub).map(lambda t: Iff(*t)),
    ),
    max_leaves=6,
)
weights = st.one_of(st.just(HARD), st.floats(-5, 5, allow_nan=False).map(lambda w: round(w, 3)))


@st.composite
def models(draw):
    formulas = []
    for i in range(draw(st.integers(1, 3))):
        body = draw(bodies)
        used = sorted(body_variables(body))
        cons = Constraint()
        if used:
            local = st.sampled_from(used)
            comps = draw(st.lists(st.tuples(local, st.one_of(local, st.sampled_from(["a", "b"])), st.booleans()), max_size=2))
            cons = Constraint.of(*[eq(a, b) if e else neq(a, b) for a, b, e in comps if a != b])
        formulas.append(WeightedFormula(i + 1, draw(weights), body, cons))
    preds = tuple(PredicateDecl(n, (P,) * k) for n, k in sorted(PREDS.items()))
    ev = tuple(Literal(Atom(PredicateId("p"), (c,)), pos) for c, pos in draw(
        st.lists(st.tuples(st.sampled_from(["a", "b"]), st.booleans()), max_size=2, unique_by=lambda t: t[0])
    ))
    return Mln((DomainDecl(P, ("a", "b", "c")),), preds, tuple(formulas), ev)


@settings(max_examples=150, deadline=None)
@given(models())
def test_print_parse_round_trip(m):
    assert parse_mln(print_mln(m)) == m
