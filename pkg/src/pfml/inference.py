"""Mamdani inference over trapezoid knowledge bases.

Pipeline: fuzzify crisp inputs, fire rules (weight times MIN for ``and``
rules, weight times MAX for ``or`` rules), clip each consequent term at its
best rule activation, aggregate by MAX, and defuzzify by centroid over a
fixed 1001-point midpoint sampling of the output domain.  Everything here is
a pure function of immutable controllers, so callers may evaluate many
inputs concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .fml import FuzzyController, FuzzyVariable, TrapezoidShape
from . import kb

GRID_POINTS = 1001


class InferenceError(Exception):
    """Base class for inference failures."""


class OutOfDomain(InferenceError):
    """A crisp value lies outside its variable's domain."""


class NoRuleFired(InferenceError):
    """No rule produced a positive activation for the given input."""


class UnknownVariable(InferenceError):
    """A rule or input references a variable the controller does not declare."""


class UnknownTerm(InferenceError):
    """A rule references a term its variable does not declare."""


class IncompleteInput(InferenceError):
    """The crisp input omits one of the controller's input variables."""


class EmptyDataset(InferenceError):
    """An evaluation was requested over zero records."""


@dataclass(frozen=True)
class InferenceResult:
    crisp_output: float
    label: str
    fired_rules: tuple[tuple[str, float], ...]


def trapezoid_membership(shape: TrapezoidShape, x: float) -> float:
    """Membership degree of ``x`` under a trapezoid.

    Zero left of p1 and right of p4, a linear ramp on [p1,p2] and [p3,p4],
    and one on [p2,p3].  A degenerate edge (p1 == p2 or p3 == p4) is
    vertical: membership at the shared abscissa is 1.
    """
    p1, p2, p3, p4 = shape.p1, shape.p2, shape.p3, shape.p4
    if x < p1 or x > p4:
        return 0.0
    if p2 <= x <= p3:
        return 1.0
    if x < p2:
        return (x - p1) / (p2 - p1)
    return (p4 - x) / (p4 - p3)


def trapezoid_membership_grid(shape: TrapezoidShape, xs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`trapezoid_membership` over an array of abscissae."""
    return trapezoid_grid(
        np.asarray(xs, dtype=float), shape.p1, shape.p2, shape.p3, shape.p4
    )


def trapezoid_grid(xs, p1, p2, p3, p4) -> np.ndarray:
    """Trapezoid membership with broadcastable parameters.

    Produces bitwise the same values as the scalar form: the left and right
    ramp expressions are identical, the plateau clips to exactly 1.0, and
    degenerate edges resolve to step functions.
    """
    left_den = np.where(p2 > p1, p2 - p1, 1.0)
    left = np.where(p2 > p1, (xs - p1) / left_den, (xs >= p2).astype(float))
    right_den = np.where(p4 > p3, p4 - p3, 1.0)
    right = np.where(p4 > p3, (p4 - xs) / right_den, (xs <= p3).astype(float))
    return np.clip(np.minimum(left, right), 0.0, 1.0)


@lru_cache(maxsize=64)
def midpoint_grid(left: float, right: float, points: int = GRID_POINTS) -> np.ndarray:
    """Midpoints of ``points`` equal subintervals of [left, right]."""
    step = (right - left) / points
    xs = left + (np.arange(points) + 0.5) * step
    xs.flags.writeable = False
    return xs


def fuzzify(variable: FuzzyVariable, x: float) -> dict[str, float]:
    """Membership degree of ``x`` in each term, in declaration order."""
    if not variable.domain_left <= x <= variable.domain_right:
        raise OutOfDomain(
            f"{variable.name}={x!r} outside [{variable.domain_left}, {variable.domain_right}]"
        )
    return {t.name: trapezoid_membership(t.shape, x) for t in variable.terms}


# Degrees this close count as tied, so the declaration-order tie-break still
# engages at shared term boundaries where the two ramp expressions differ in
# the last ulps.
LABEL_TIE_TOLERANCE = 1e-12


def linguistic_label(variable: FuzzyVariable, x: float) -> str:
    """Name of the term with maximal membership at ``x``.

    Ties (within :data:`LABEL_TIE_TOLERANCE`) break toward the earliest
    declared term, which makes labeling deterministic on shared boundaries.
    """
    degrees = fuzzify(variable, x)
    best_name, best_degree = None, -1.0
    for name, degree in degrees.items():
        if degree > best_degree + LABEL_TIE_TOLERANCE:
            best_name, best_degree = name, degree
    return best_name


def fire_rules(
    controller: FuzzyController, inputs: Mapping[str, float]
) -> list[tuple]:
    """Activation degree of every rule for one crisp input.

    Returns ``(rule, degree)`` pairs in rule order; rules with zero
    activation are included with degree 0.  Values supplied for names the
    knowledge base does not declare are ignored.
    """
    degrees: dict[str, dict[str, float]] = {}
    for var in controller.input_variables:
        if var.name not in inputs:
            raise IncompleteInput(f"no value supplied for input variable {var.name!r}")
        degrees[var.name] = fuzzify(var, inputs[var.name])
    fired = []
    for rule in controller.rule_base.rules:
        clause_degrees = []
        for clause in rule.antecedent:
            if clause.variable not in degrees:
                raise UnknownVariable(
                    f"rule {rule.name!r} references {clause.variable!r}, "
                    "which is not an input variable of the knowledge base"
                )
            term_degrees = degrees[clause.variable]
            if clause.term not in term_degrees:
                raise UnknownTerm(
                    f"rule {rule.name!r} references unknown term {clause.term!r} "
                    f"of {clause.variable!r}"
                )
            clause_degrees.append(term_degrees[clause.term])
        if not clause_degrees:
            raise InferenceError(f"rule {rule.name!r} has an empty antecedent")
        if rule.connector == "or":
            combined = max(clause_degrees)
        else:
            combined = min(clause_degrees)
        fired.append((rule, rule.weight * combined))
    return fired


def defuzzify_centroid(
    output_variable: FuzzyVariable, activations: Mapping[str, float]
) -> float:
    """Centroid of the clip-aggregated output surface.

    Each term's membership is clipped at its activation, the clipped terms
    are aggregated by MAX, and the centroid integral is evaluated by the
    midpoint rule on :data:`GRID_POINTS` uniform samples of the domain.
    Raises :class:`NoRuleFired` when every activation is zero, or when the
    activated terms have zero mass on the sampling grid (possible only for
    spike-like degenerate terms that fall between grid points).
    """
    known = {t.name for t in output_variable.terms}
    for name in activations:
        if name not in known:
            raise UnknownTerm(f"unknown output term {name!r}")
    if not any(a > 0.0 for a in activations.values()):
        raise NoRuleFired("all rule activations are zero")
    xs = midpoint_grid(output_variable.domain_left, output_variable.domain_right)
    agg = np.zeros_like(xs)
    for term in output_variable.terms:
        act = activations.get(term.name, 0.0)
        if act > 0.0:
            agg = np.maximum(agg, np.minimum(act, trapezoid_membership_grid(term.shape, xs)))
    den = np.sum(agg)
    if den == 0.0:
        raise NoRuleFired("activated terms have zero mass on the sampling grid")
    return float(np.sum(xs * agg) / den)


def output_variable(controller: FuzzyController) -> FuzzyVariable:
    outputs = controller.output_variables
    if len(outputs) != 1:
        raise InferenceError(
            f"controller must declare exactly one output variable, found {len(outputs)}"
        )
    return outputs[0]


def infer(controller: FuzzyController, inputs: Mapping[str, float]) -> InferenceResult:
    """Run the full Mamdani pipeline for one crisp input.

    Deterministic: the same controller and input always produce the same
    result.  Propagates :class:`OutOfDomain` and :class:`NoRuleFired`.
    """
    out = output_variable(controller)
    fired = fire_rules(controller, inputs)
    activations = {t.name: 0.0 for t in out.terms}
    for rule, degree in fired:
        for clause in rule.consequent:
            if clause.variable != out.name:
                raise UnknownVariable(
                    f"rule {rule.name!r} concludes on {clause.variable!r}, "
                    f"not the output variable {out.name!r}"
                )
            if clause.term not in activations:
                raise UnknownTerm(
                    f"rule {rule.name!r} concludes on unknown term {clause.term!r}"
                )
            if degree > activations[clause.term]:
                activations[clause.term] = degree
    crisp = defuzzify_centroid(out, activations)
    return InferenceResult(
        crisp_output=crisp,
        label=linguistic_label(out, crisp),
        fired_rules=tuple((rule.name, degree) for rule, degree in fired),
    )


# Mapping from controller input-variable names to feature-record attributes.
FEATURE_FIELDS = {
    "ALD": "ald",
    "BALD": "bald",
    "SLD": "sld",
    "FLD": "fld",
    "SN": "sn",
    "TMR": "tmr",
}


def record_inputs(controller: FuzzyController, record) -> dict[str, float]:
    """Crisp input dict for a per-move feature record."""
    inputs = {}
    for var in controller.input_variables:
        attr = FEATURE_FIELDS.get(var.name)
        if attr is None:
            raise IncompleteInput(
                f"feature records carry no value for input variable {var.name!r}"
            )
        inputs[var.name] = getattr(record, attr)
    return inputs


def semantic_accuracy(controller: FuzzyController, records) -> float:
    """Fraction of records whose inferred win-rate label matches the label
    of the desired output.

    A record for which no rule fires counts as a mismatch.
    """
    if not records:
        raise EmptyDataset("no records to evaluate")
    out = output_variable(controller)
    hits = 0
    for record in records:
        desired_label = linguistic_label(out, record.desired_output)
        try:
            result = infer(controller, record_inputs(controller, record))
        except NoRuleFired:
            continue
        if result.label == desired_label:
            hits += 1
    return hits / len(records)


def mean_squared_error(controller: FuzzyController, records) -> float:
    """Mean squared error between inferred and desired win rates.

    Scalar-path counterpart of ``pso.fitness``: records for which no rule
    fires contribute the worst-case squared error of 1.0.
    """
    if not records:
        raise EmptyDataset("no records to evaluate")
    total = 0.0
    for record in records:
        try:
            crisp = infer(controller, record_inputs(controller, record)).crisp_output
        except NoRuleFired:
            total += 1.0
            continue
        total += (crisp - record.desired_output) ** 2
    return total / len(records)


_SITUATION_PHRASES = {
    "VeryLow": "Black may be at a disadvantage",
    "Low": "The winner still hasn't been determined",
    "High": "Black is at an advantage",
    "VeryHigh": "Black may win",
}


def situation_phrase(black_win_rate: float) -> str:
    """Short game-situation phrase for a Black-perspective win rate.

    The four phrases map one-to-one onto the four standard win-rate terms.
    """
    label = linguistic_label(kb.win_rate_variable(), black_win_rate)
    return _SITUATION_PHRASES[label]
