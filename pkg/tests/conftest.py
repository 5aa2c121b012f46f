import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pfml import kb
from pfml.fml import (
    Clause,
    FuzzyController,
    FuzzyTerm,
    FuzzyVariable,
    Rule,
    RuleBase,
    TrapezoidShape,
)

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def table_controller():
    """The shipped hand-authored controller (single all-Low rule)."""
    return kb.default_controller()


@pytest.fixture(scope="session")
def covering():
    """Controller whose generated rule base fires on every input."""
    return kb.covering_controller()


def build_random_controller(rng: np.random.Generator) -> FuzzyController:
    """A random valid controller with tied-boundary variables."""
    n_inputs = int(rng.integers(1, 5))
    names = [f"V{i}" for i in range(n_inputs)] + ["OUT"]
    variables = []
    for name in names:
        left = float(np.round(rng.uniform(-5.0, 5.0), 3))
        right = left + float(np.round(rng.uniform(1.0, 20.0), 3))
        n_terms = int(rng.integers(1, 5))
        interior = np.sort(rng.uniform(left, right, size=2 * (n_terms - 1)))
        bounds = [left, left, *(float(v) for v in interior), right, right]
        terms = tuple(
            FuzzyTerm(
                name=f"T{k}",
                shape=TrapezoidShape(
                    bounds[2 * k], bounds[2 * k + 1], bounds[2 * k + 2], bounds[2 * k + 3]
                ),
            )
            for k in range(n_terms)
        )
        extra = {"note": f"gen-{rng.integers(0, 100)}"} if rng.random() < 0.3 else {}
        variables.append(
            FuzzyVariable(
                name=name,
                domain_left=left,
                domain_right=right,
                var_type="output" if name == "OUT" else "input",
                terms=terms,
                extra=extra,
            )
        )
    out_var = variables[-1]
    rules = []
    for r in range(int(rng.integers(0, 6))):
        chosen = rng.choice(n_inputs, size=int(rng.integers(1, n_inputs + 1)), replace=False)
        antecedent = tuple(
            Clause(
                variables[v].name,
                variables[v].terms[rng.integers(0, len(variables[v].terms))].name,
            )
            for v in chosen
        )
        consequent = (
            Clause(out_var.name, out_var.terms[rng.integers(0, len(out_var.terms))].name),
        )
        connector = "and" if rng.random() < 0.8 else "or"
        rules.append(
            Rule(
                name=f"Rule{r + 1}",
                antecedent=antecedent,
                consequent=consequent,
                connector=connector,
                weight=float(np.round(rng.uniform(0.0, 1.0), 4)),
                operator="MIN" if connector == "and" else "MAX",
            )
        )
    return FuzzyController(
        name="generated",
        knowledge_base=tuple(variables),
        rule_base=RuleBase(name="RuleBase1", rules=tuple(rules)),
        ip="localhost",
    )
