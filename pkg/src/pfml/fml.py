"""Document model, parser, serializer, and validator for the trapezoid-only
FML dialect used throughout this toolkit.

The XML vocabulary is deliberately small: a ``FuzzyController`` holds a
``KnowledgeBase`` of ``FuzzyVariable``/``FuzzyTerm``/``TrapezoidShape``
elements and a mamdani ``RuleBase`` of ``Rule`` elements with
``Antecedent``/``Consequent``/``Clause`` children.  Only trapezoid membership
shapes are accepted; any other shape element is rejected loudly rather than
skipped.  Unknown extra *attributes* are carried through opaquely so that
annotated knowledge-base files survive a parse/serialize round trip.

All model classes are frozen dataclasses: controllers are immutable after
construction and safe to share across threads.  Invariants are not enforced
at construction time; :func:`validate_controller` reports them as data.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field


class FmlError(Exception):
    """Base class for FML document errors."""


class ParseError(FmlError):
    """The document is malformed or missing required structure."""


class UnsupportedShape(ParseError):
    """A membership-shape element other than TrapezoidShape was found."""


# Feature variables with these names are expected to use these exact domains,
# so knowledge bases stay interchangeable across sessions and learners.
STANDARD_FEATURE_DOMAINS = {
    "ALD": (0.0, 10.0),
    "BALD": (0.0, 10.0),
    "SLD": (0.0, 10.0),
    "FLD": (0.0, 10.0),
    "SN": (0.0, 2048.0),
    "TMR": (0.0, 1.0),
    "WR": (0.0, 1.0),
}


@dataclass(frozen=True)
class TrapezoidShape:
    """Four ordered abscissae; membership ramps up on [p1,p2], is 1 on
    [p2,p3] and ramps down on [p3,p4]."""

    p1: float
    p2: float
    p3: float
    p4: float
    extra: dict[str, str] = field(default_factory=dict)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p1, self.p2, self.p3, self.p4)


@dataclass(frozen=True)
class FuzzyTerm:
    name: str
    shape: TrapezoidShape
    hedge: str = "Normal"
    extra: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class FuzzyVariable:
    name: str
    domain_left: float
    domain_right: float
    var_type: str  # "input" or "output"
    terms: tuple[FuzzyTerm, ...]
    scale: str = ""
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def term(self, name: str) -> FuzzyTerm:
        for t in self.terms:
            if t.name == name:
                return t
        raise KeyError(name)


@dataclass(frozen=True)
class Clause:
    variable: str
    term: str


@dataclass(frozen=True)
class Rule:
    name: str
    antecedent: tuple[Clause, ...]
    consequent: tuple[Clause, ...]
    connector: str = "and"
    weight: float = 1.0
    operator: str = "MIN"
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "antecedent", tuple(self.antecedent))
        object.__setattr__(self, "consequent", tuple(self.consequent))


@dataclass(frozen=True)
class RuleBase:
    name: str
    rules: tuple[Rule, ...]
    rule_base_type: str = "mamdani"
    activation_method: str = "MIN"
    and_method: str = "MIN"
    or_method: str = "MAX"
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))


@dataclass(frozen=True)
class FuzzyController:
    name: str
    knowledge_base: tuple[FuzzyVariable, ...]
    rule_base: RuleBase
    ip: str = "localhost"
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "knowledge_base", tuple(self.knowledge_base))

    def variable(self, name: str) -> FuzzyVariable:
        for v in self.knowledge_base:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def input_variables(self) -> tuple[FuzzyVariable, ...]:
        return tuple(v for v in self.knowledge_base if v.var_type == "input")

    @property
    def output_variables(self) -> tuple[FuzzyVariable, ...]:
        return tuple(v for v in self.knowledge_base if v.var_type == "output")


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validate_controller."""

    code: str
    location: str
    message: str


# --------------------------------------------------------------------------
# parsing


def _req(elem: ET.Element, attr: str) -> str:
    value = elem.get(attr)
    if value is None:
        raise ParseError(f"<{elem.tag}> missing required attribute {attr!r}")
    return value


def _real(elem: ET.Element, attr: str) -> float:
    raw = _req(elem, attr)
    try:
        return float(raw)
    except ValueError:
        raise ParseError(
            f"<{elem.tag}> attribute {attr!r} is not a decimal real: {raw!r}"
        ) from None


def _extras(elem: ET.Element, known: tuple[str, ...]) -> dict[str, str]:
    return {k: v for k, v in elem.attrib.items() if k not in known}


def _enum(elem: ET.Element, attr: str, allowed: tuple[str, ...]) -> str:
    value = _req(elem, attr)
    if value not in allowed:
        raise ParseError(
            f"<{elem.tag}> attribute {attr!r} must be one of {allowed}, got {value!r}"
        )
    return value


def _parse_shape(elem: ET.Element) -> TrapezoidShape:
    if elem.tag != "TrapezoidShape":
        raise UnsupportedShape(f"<{elem.tag}> is not a supported membership shape")
    params = tuple(_real(elem, f"Param{i}") for i in (1, 2, 3, 4))
    return TrapezoidShape(
        *params, extra=_extras(elem, ("Param1", "Param2", "Param3", "Param4"))
    )


def _parse_term(elem: ET.Element) -> FuzzyTerm:
    name = _req(elem, "name")
    hedge = elem.get("hedge", "Normal")
    children = list(elem)
    if not children:
        raise ParseError(f"<FuzzyTerm> {name!r} has no membership shape")
    if len(children) > 1:
        raise ParseError(f"<FuzzyTerm> {name!r} has more than one membership shape")
    return FuzzyTerm(
        name=name,
        shape=_parse_shape(children[0]),
        hedge=hedge,
        extra=_extras(elem, ("name", "hedge")),
    )


def _parse_variable(elem: ET.Element) -> FuzzyVariable:
    name = _req(elem, "name")
    var_type = _enum(elem, "type", ("input", "output"))
    terms = []
    for child in elem:
        if child.tag != "FuzzyTerm":
            raise ParseError(f"unexpected <{child.tag}> inside <FuzzyVariable> {name!r}")
        terms.append(_parse_term(child))
    return FuzzyVariable(
        name=name,
        domain_left=_real(elem, "domainleft"),
        domain_right=_real(elem, "domainright"),
        var_type=var_type,
        terms=tuple(terms),
        scale=elem.get("scale", ""),
        extra=_extras(elem, ("name", "domainleft", "domainright", "scale", "type")),
    )


def _parse_clause(elem: ET.Element, rule_name: str) -> Clause:
    variable = term = None
    for child in elem:
        if child.tag == "Variable":
            variable = (child.text or "").strip()
        elif child.tag == "Term":
            term = (child.text or "").strip()
        else:
            raise ParseError(f"unexpected <{child.tag}> inside <Clause> of rule {rule_name!r}")
    if variable is None or term is None:
        raise ParseError(f"<Clause> of rule {rule_name!r} needs <Variable> and <Term>")
    return Clause(variable=variable, term=term)


def _parse_clause_list(elem: ET.Element, rule_name: str) -> tuple[Clause, ...]:
    clauses = []
    for child in elem:
        if child.tag != "Clause":
            raise ParseError(f"unexpected <{child.tag}> inside <{elem.tag}> of rule {rule_name!r}")
        clauses.append(_parse_clause(child, rule_name))
    if not clauses:
        raise ParseError(f"<{elem.tag}> of rule {rule_name!r} has no clauses")
    return tuple(clauses)


def _parse_rule(elem: ET.Element) -> Rule:
    name = _req(elem, "name")
    connector = _enum(elem, "connector", ("and", "or"))
    operator = _enum(elem, "operator", ("MIN", "MAX"))
    weight = _real(elem, "weight")
    antecedent = consequent = None
    for child in elem:
        if child.tag == "Antecedent":
            antecedent = _parse_clause_list(child, name)
        elif child.tag == "Consequent":
            consequent = _parse_clause_list(child, name)
        else:
            raise ParseError(f"unexpected <{child.tag}> inside <Rule> {name!r}")
    if antecedent is None or consequent is None:
        raise ParseError(f"<Rule> {name!r} needs <Antecedent> and <Consequent>")
    return Rule(
        name=name,
        antecedent=antecedent,
        consequent=consequent,
        connector=connector,
        weight=weight,
        operator=operator,
        extra=_extras(elem, ("name", "connector", "weight", "operator")),
    )


def _parse_rule_base(elem: ET.Element) -> RuleBase:
    activation = _enum(elem, "activationMethod", ("MIN",))
    and_method = _enum(elem, "andMethod", ("MIN",))
    or_method = _enum(elem, "orMethod", ("MAX",))
    rules = []
    for child in elem:
        if child.tag != "Rule":
            raise ParseError(f"unexpected <{child.tag}> inside <RuleBase>")
        rules.append(_parse_rule(child))
    return RuleBase(
        name=_req(elem, "name"),
        rules=tuple(rules),
        rule_base_type=_req(elem, "type"),
        activation_method=activation,
        and_method=and_method,
        or_method=or_method,
        extra=_extras(
            elem, ("name", "type", "activationMethod", "andMethod", "orMethod")
        ),
    )


def parse_fml(text: str) -> FuzzyController:
    """Parse an FML document into a :class:`FuzzyController`.

    Declaration order of variables, terms, rules, and clauses is preserved,
    and numeric attributes are parsed as decimal reals.  The result is not
    validated; run :func:`validate_controller` for invariant checks.

    Raises :class:`ParseError` for malformed XML (with line information),
    missing required attributes, or unknown elements, and
    :class:`UnsupportedShape` for non-trapezoid membership shapes.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc
    if root.tag != "FuzzyController":
        raise ParseError(f"root element must be <FuzzyController>, got <{root.tag}>")
    variables: list[FuzzyVariable] = []
    rule_base: RuleBase | None = None
    for child in root:
        if child.tag == "KnowledgeBase":
            for v in child:
                if v.tag != "FuzzyVariable":
                    raise ParseError(f"unexpected <{v.tag}> inside <KnowledgeBase>")
                variables.append(_parse_variable(v))
        elif child.tag == "RuleBase":
            rule_base = _parse_rule_base(child)
        else:
            raise ParseError(f"unexpected <{child.tag}> inside <FuzzyController>")
    if rule_base is None:
        rule_base = RuleBase(name="RuleBase1", rules=())
    return FuzzyController(
        name=root.get("name", ""),
        knowledge_base=tuple(variables),
        rule_base=rule_base,
        ip=root.get("ip", "localhost"),
        extra=_extras(root, ("name", "ip")),
    )


# --------------------------------------------------------------------------
# serialization


def _fmt(value: float) -> str:
    """Shortest decimal string that parses back to exactly the same float."""
    if math.isfinite(value) and value == int(value) and abs(value) <= 1e15:
        return str(int(value))
    return repr(float(value))


def serialize_fml(controller: FuzzyController) -> str:
    """Render a controller as an FML document.

    ``parse_fml(serialize_fml(c))`` is structurally equal to ``c`` for any
    valid controller, including term order, exact numeric parameters, and
    opaque extra attributes.
    """
    root = ET.Element("FuzzyController", {"ip": controller.ip, "name": controller.name})
    root.attrib.update(controller.extra)
    kb = ET.SubElement(root, "KnowledgeBase")
    for var in controller.knowledge_base:
        v_el = ET.SubElement(
            kb,
            "FuzzyVariable",
            {
                "domainleft": _fmt(var.domain_left),
                "domainright": _fmt(var.domain_right),
                "name": var.name,
                "scale": var.scale,
                "type": var.var_type,
            },
        )
        v_el.attrib.update(var.extra)
        for term in var.terms:
            t_el = ET.SubElement(v_el, "FuzzyTerm", {"name": term.name, "hedge": term.hedge})
            t_el.attrib.update(term.extra)
            s_el = ET.SubElement(
                t_el,
                "TrapezoidShape",
                {f"Param{i + 1}": _fmt(p) for i, p in enumerate(term.shape.as_tuple())},
            )
            s_el.attrib.update(term.shape.extra)
    rb = controller.rule_base
    rb_el = ET.SubElement(
        root,
        "RuleBase",
        {
            "activationMethod": rb.activation_method,
            "andMethod": rb.and_method,
            "orMethod": rb.or_method,
            "name": rb.name,
            "type": rb.rule_base_type,
        },
    )
    rb_el.attrib.update(rb.extra)
    for rule in rb.rules:
        r_el = ET.SubElement(
            rb_el,
            "Rule",
            {
                "name": rule.name,
                "connector": rule.connector,
                "weight": _fmt(rule.weight),
                "operator": rule.operator,
            },
        )
        r_el.attrib.update(rule.extra)
        for tag, clauses in (("Antecedent", rule.antecedent), ("Consequent", rule.consequent)):
            list_el = ET.SubElement(r_el, tag)
            for clause in clauses:
                c_el = ET.SubElement(list_el, "Clause")
                ET.SubElement(c_el, "Variable").text = clause.variable
                ET.SubElement(c_el, "Term").text = clause.term
    ET.indent(root, space="  ")
    return '<?xml version="1.0"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


# --------------------------------------------------------------------------
# validation


def _positive_at(shape: TrapezoidShape, x: float) -> bool:
    # Membership is positive strictly inside (p1, p4); a degenerate vertical
    # edge (p1 == p2 or p3 == p4) also makes the shared abscissa positive.
    return (
        shape.p1 < x < shape.p4
        or (x == shape.p1 == shape.p2)
        or (x == shape.p4 == shape.p3)
    )


def _coverage_gap(variable: FuzzyVariable) -> float | None:
    """Return an x in the domain with zero membership in every term, or None.

    Membership is piecewise linear with breakpoints at the shape parameters,
    and a ramp is zero only at a breakpoint; so the domain is fully covered
    iff every breakpoint and every midpoint between consecutive breakpoints
    has positive membership somewhere.  This makes the check exact.
    """
    left, right = variable.domain_left, variable.domain_right
    points = {left, right}
    for term in variable.terms:
        for p in term.shape.as_tuple():
            if left <= p <= right:
                points.add(p)
    ordered = sorted(points)
    probes = list(ordered)
    for a, b in zip(ordered, ordered[1:]):
        probes.append(a + (b - a) / 2)
    for x in sorted(probes):
        if not any(_positive_at(t.shape, x) for t in variable.terms):
            return x
    return None


def _validate_variable(var: FuzzyVariable) -> list[Violation]:
    out = []
    loc = f"variable {var.name!r}"

    def bad(code, msg):
        out.append(Violation(code, loc, msg))

    if var.var_type not in ("input", "output"):
        bad("InvalidVarType", f"type must be 'input' or 'output', got {var.var_type!r}")
    if not var.domain_left < var.domain_right:
        bad("InvalidDomain", f"domain [{var.domain_left}, {var.domain_right}] is empty")
    standard = STANDARD_FEATURE_DOMAINS.get(var.name)
    if standard is not None and (var.domain_left, var.domain_right) != standard:
        bad(
            "NonstandardDomain",
            f"{var.name} must use domain [{standard[0]}, {standard[1]}], "
            f"got [{var.domain_left}, {var.domain_right}]",
        )
    if not var.terms:
        bad("NoTerms", "variable declares no terms")
        return out
    seen = set()
    for term in var.terms:
        t_loc = f"{loc}, term {term.name!r}"
        if not term.name:
            out.append(Violation("EmptyName", loc, "term with empty name"))
        if term.name in seen:
            out.append(Violation("DuplicateTermName", loc, f"duplicate term {term.name!r}"))
        seen.add(term.name)
        p1, p2, p3, p4 = term.shape.as_tuple()
        if not (p1 <= p2 <= p3 <= p4):
            out.append(
                Violation(
                    "NonMonotoneParams",
                    t_loc,
                    f"trapezoid parameters ({_fmt(p1)}, {_fmt(p2)}, {_fmt(p3)}, {_fmt(p4)}) "
                    "must be nondecreasing",
                )
            )
        for p in term.shape.as_tuple():
            if not (var.domain_left <= p <= var.domain_right):
                out.append(
                    Violation(
                        "ParamOutOfDomain",
                        t_loc,
                        f"abscissa {_fmt(p)} outside domain "
                        f"[{_fmt(var.domain_left)}, {_fmt(var.domain_right)}]",
                    )
                )
                break
    if var.domain_left < var.domain_right:
        gap = _coverage_gap(var)
        if gap is not None:
            bad("CoverageGap", f"no term has positive membership at x = {gap!r}")
    return out


def _validate_rule(rule: Rule, controller: FuzzyController) -> list[Violation]:
    out = []
    loc = f"rule {rule.name!r}"

    def bad(code, msg):
        out.append(Violation(code, loc, msg))

    if rule.connector not in ("and", "or"):
        bad("InvalidConnector", f"connector must be 'and' or 'or', got {rule.connector!r}")
    if rule.operator not in ("MIN", "MAX"):
        bad("InvalidOperator", f"operator must be 'MIN' or 'MAX', got {rule.operator!r}")
    if not 0.0 <= rule.weight <= 1.0:
        bad("WeightOutOfRange", f"weight {rule.weight!r} outside [0, 1]")
    if not rule.antecedent:
        bad("EmptyAntecedent", "rule has no antecedent clauses")
    if not rule.consequent:
        bad("EmptyConsequent", "rule has no consequent clauses")
    for side, clauses, wanted in (
        ("antecedent", rule.antecedent, "input"),
        ("consequent", rule.consequent, "output"),
    ):
        for clause in clauses:
            if not clause.variable or not clause.term:
                bad("EmptyClause", f"{side} clause with empty variable or term name")
                continue
            try:
                var = controller.variable(clause.variable)
            except KeyError:
                bad("UnknownVariable", f"{side} references unknown variable {clause.variable!r}")
                continue
            if var.var_type != wanted:
                code = "NotAnInput" if wanted == "input" else "NotAnOutput"
                bad(code, f"{side} clause references {wanted}-side variable {clause.variable!r}")
            try:
                var.term(clause.term)
            except KeyError:
                bad(
                    "UnknownTerm",
                    f"{side} references unknown term {clause.term!r} of {clause.variable!r}",
                )
    return out


def validate_controller(controller: FuzzyController) -> list[Violation]:
    """Collect every invariant violation in the controller.

    An empty list means the controller is valid: monotone in-domain
    trapezoids, unique names, full domain coverage per variable, rules
    referencing existing input/output variables and terms, weights in [0,1],
    and the standard feature domains for the reserved variable names.
    Pure and idempotent; violations are data, not exceptions.
    """
    out: list[Violation] = []
    seen = set()
    for var in controller.knowledge_base:
        if var.name in seen:
            out.append(
                Violation(
                    "DuplicateVariableName",
                    "knowledge base",
                    f"duplicate variable {var.name!r}",
                )
            )
        seen.add(var.name)
        out.extend(_validate_variable(var))
    rb = controller.rule_base
    if rb.rule_base_type != "mamdani":
        out.append(
            Violation(
                "InvalidRuleBaseType",
                f"rule base {rb.name!r}",
                f"type must be 'mamdani', got {rb.rule_base_type!r}",
            )
        )
    for attr, wanted in (("activation_method", "MIN"), ("and_method", "MIN"), ("or_method", "MAX")):
        if getattr(rb, attr) != wanted:
            out.append(
                Violation(
                    "InvalidMethod",
                    f"rule base {rb.name!r}",
                    f"{attr} must be {wanted!r}, got {getattr(rb, attr)!r}",
                )
            )
    seen_rules = set()
    for rule in rb.rules:
        if rule.name in seen_rules:
            out.append(
                Violation(
                    "DuplicateRuleName", f"rule base {rb.name!r}", f"duplicate rule {rule.name!r}"
                )
            )
        seen_rules.add(rule.name)
        out.extend(_validate_rule(rule, controller))
    return out
