"""Benchmark model generators.

``smokers`` is the two-formula friends-and-smokers model. The other two are
representative variants built on it (a drinking rule, a symmetry rule); their
weights are defaults of this package and not reference values.
"""

from __future__ import annotations

import string

from .parser import parse_mln
from .mln import Mln

SMOKERS = """\
1.3 smokes(X) => cancer(X)
1.5 smokes(X) ^ friends(X,Y) => smokes(Y)
"""

# representative variant: smokers plus a drinking rule
DRINKERS_RULE = "1.1 drinks(X) ^ friends(X,Y) => drinks(Y)\n"
# representative variant: smokers plus a symmetry rule
SYMMETRY_RULE = "0.8 friends(X,Y) => friends(Y,X)\n"

MODELS = ("smokers", "smokers_drinkers", "symmetric_smokers")


def person_names(size: int) -> list[str]:
    if size <= 26:
        return list(string.ascii_lowercase[:size])
    return [f"p{i}" for i in range(1, size + 1)]


def _header(size: int, drinks: bool) -> str:
    people = ", ".join(person_names(size))
    lines = [
        f"domain Person = {{{people}}}",
        "predicate smokes(Person)",
        "predicate cancer(Person)",
        "predicate friends(Person, Person)",
    ]
    if drinks:
        lines.append("predicate drinks(Person)")
    return "\n".join(lines) + "\n"


def model_text(name: str, size: int) -> str:
    if size < 1:
        raise ValueError("domain size must be at least 1")
    if name == "smokers":
        return _header(size, False) + SMOKERS
    if name == "smokers_drinkers":
        return _header(size, True) + SMOKERS + DRINKERS_RULE
    if name == "symmetric_smokers":
        return _header(size, False) + SMOKERS + SYMMETRY_RULE
    raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")


def generate_model(name: str, size: int) -> Mln:
    return parse_mln(model_text(name, size))


def smokers(size: int) -> Mln:
    return generate_model("smokers", size)
