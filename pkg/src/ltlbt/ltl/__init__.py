from .formula import (
    Always,
    And,
    Atom,
    Eventually,
    FalseF,
    Formula,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    atoms_of,
    is_nnf,
    to_nnf,
)
from .parser import LTLSyntaxError, parse_formula
from .buchi import (
    BuchiAutomaton,
    Edge,
    accepts_constant_word,
    build_buchi,
    distance_to_accepting,
    stutter_accepting,
)
from .lasso import LassoWord, accepts_lasso, formula_holds_on_lasso

__all__ = [
    "Always",
    "And",
    "Atom",
    "BuchiAutomaton",
    "Edge",
    "Eventually",
    "FalseF",
    "Formula",
    "LTLSyntaxError",
    "LassoWord",
    "Next",
    "Not",
    "Or",
    "Release",
    "TrueF",
    "Until",
    "accepts_constant_word",
    "accepts_lasso",
    "atoms_of",
    "build_buchi",
    "distance_to_accepting",
    "formula_holds_on_lasso",
    "is_nnf",
    "parse_formula",
    "stutter_accepting",
    "to_nnf",
]
