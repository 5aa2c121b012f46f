"""Built-in knowledge bases for the Go/BCI win-rate agent.

Six input variables describe one move: the consecutive-move distances of the
attention (ALD), left-brain-activation (BALD), stress (SLD), and fatigue
(FLD) indicators, the engine simulation count behind the predicted move
(SN), and the top-move matching degree (TMR).  The single output variable is
the win rate (WR) with terms VeryLow / Low / High / VeryHigh.

Two rule-base flavours are provided:

* :func:`default_controller` carries the single hand-authored all-Low rule;
  inputs outside its antecedent raise ``NoRuleFired`` downstream, which is
  the honest answer for a sparse expert rule base.
* :func:`covering_controller` adds a generated rule base that fires on every
  in-domain input, which synthetic-data generation and learning experiments
  need.
"""

from __future__ import annotations

from importlib import resources

from .fml import (
    Clause,
    FuzzyController,
    FuzzyTerm,
    FuzzyVariable,
    Rule,
    RuleBase,
    TrapezoidShape,
    parse_fml,
)

DEFAULT_KB_RESOURCE = "winrate_kb.xml"

_DISTANCE_TERMS = (
    ("Low", 0.0, 0.0, 0.5, 1.0),
    ("Medium", 0.5, 1.0, 3.0, 4.0),
    ("High", 3.0, 4.0, 10.0, 10.0),
)

_TERMS = {
    "ALD": _DISTANCE_TERMS,
    "BALD": _DISTANCE_TERMS,
    "SLD": _DISTANCE_TERMS,
    "FLD": _DISTANCE_TERMS,
    "SN": (
        ("Low", 0.0, 0.0, 128.0, 512.0),
        ("High", 128.0, 512.0, 2048.0, 2048.0),
    ),
    "TMR": (
        ("Low", 0.0, 0.0, 0.8, 0.9),
        ("High", 0.8, 0.9, 1.0, 1.0),
    ),
    "WR": (
        ("VeryLow", 0.0, 0.0, 0.35, 0.4),
        ("Low", 0.35, 0.4, 0.5, 0.6),
        ("High", 0.5, 0.6, 0.7, 0.8),
        ("VeryHigh", 0.7, 0.8, 1.0, 1.0),
    ),
}

_DOMAINS = {
    "ALD": (0.0, 10.0),
    "BALD": (0.0, 10.0),
    "SLD": (0.0, 10.0),
    "FLD": (0.0, 10.0),
    "SN": (0.0, 2048.0),
    "TMR": (0.0, 1.0),
    "WR": (0.0, 1.0),
}

INPUT_NAMES = ("ALD", "BALD", "SLD", "FLD", "SN", "TMR")
OUTPUT_NAME = "WR"


def _build_variable(name: str, var_type: str) -> FuzzyVariable:
    left, right = _DOMAINS[name]
    terms = tuple(
        FuzzyTerm(name=t, shape=TrapezoidShape(p1, p2, p3, p4))
        for t, p1, p2, p3, p4 in _TERMS[name]
    )
    return FuzzyVariable(
        name=name, domain_left=left, domain_right=right, var_type=var_type, terms=terms
    )


def input_variables() -> tuple[FuzzyVariable, ...]:
    return tuple(_build_variable(name, "input") for name in INPUT_NAMES)


def win_rate_variable() -> FuzzyVariable:
    return _build_variable(OUTPUT_NAME, "output")


def all_low_rule() -> Rule:
    """The hand-authored rule: every feature Low implies WR Low."""
    return Rule(
        name="Rule1",
        antecedent=tuple(Clause(name, "Low") for name in INPUT_NAMES),
        consequent=(Clause(OUTPUT_NAME, "Low"),),
        connector="and",
        weight=1.0,
        operator="MIN",
    )


def default_controller() -> FuzzyController:
    return FuzzyController(
        name="",
        knowledge_base=input_variables() + (win_rate_variable(),),
        rule_base=RuleBase(name="RuleBase1", rules=(all_low_rule(),)),
        ip="localhost",
    )


def covering_rule_base(variables: tuple[FuzzyVariable, ...]) -> RuleBase:
    """Generate a rule base that fires on every in-domain input.

    Rules are the cross products of three variable pairs — (ALD, BALD),
    (SLD, FLD), (SN, TMR) — so any input activates at least one rule in each
    block (every variable covers its domain, hence has a positive term).
    Consequents follow a fixed heuristic: stable indicators (low distances),
    a well-simulated prediction, and a high matching degree all push the win
    rate up.
    """
    by_name = {v.name: v for v in variables}
    output = by_name[OUTPUT_NAME]
    n_out = len(output.terms)
    rules = []
    for left_name, right_name, invert in (
        ("ALD", "BALD", True),
        ("SLD", "FLD", True),
        ("SN", "TMR", False),
    ):
        left, right = by_name[left_name], by_name[right_name]
        for i, lt in enumerate(left.terms):
            for j, rt in enumerate(right.terms):
                score = (
                    i / (len(left.terms) - 1) + j / (len(right.terms) - 1)
                ) / 2.0
                if invert:
                    score = 1.0 - score
                out_term = output.terms[round(score * (n_out - 1))]
                rules.append(
                    Rule(
                        name=f"Rule{len(rules) + 1}",
                        antecedent=(
                            Clause(left_name, lt.name),
                            Clause(right_name, rt.name),
                        ),
                        consequent=(Clause(OUTPUT_NAME, out_term.name),),
                    )
                )
    return RuleBase(name="RuleBase1", rules=tuple(rules))


def covering_controller() -> FuzzyController:
    variables = input_variables() + (win_rate_variable(),)
    return FuzzyController(
        name="",
        knowledge_base=variables,
        rule_base=covering_rule_base(variables),
        ip="localhost",
    )


def default_kb_text() -> str:
    """UTF-8 text of the shipped default knowledge-base file."""
    return (
        resources.files("pfml").joinpath("data", DEFAULT_KB_RESOURCE).read_text("utf-8")
    )


def load_default_controller() -> FuzzyController:
    """Parse the shipped knowledge-base fixture file."""
    return parse_fml(default_kb_text())
