#!/usr/bin/env python3
"""Knowledge-base files: parse, validate, edit, and round-trip.

The toolkit describes fuzzy controllers in a small FML dialect.  This script
loads the shipped default knowledge base, pokes at its structure, shows what
the validator reports for a broken variant, and proves the parse/serialize
round trip.
"""

import dataclasses

from pfml import kb
from pfml.fml import parse_fml, serialize_fml, validate_controller

controller = kb.load_default_controller()
print("variables:", ", ".join(v.name for v in controller.knowledge_base))
print("rules:", ", ".join(r.name for r in controller.rule_base.rules))

ald = controller.variable("ALD")
print("\nALD terms:")
for term in ald.terms:
    print(f"  {term.name:8s} {term.shape.as_tuple()}")

print("\nvalidator on the shipped file:", validate_controller(controller) or "clean")

# Break a trapezoid (non-monotone abscissae) and watch the validator object.
low = ald.terms[0]
broken_low = dataclasses.replace(
    low, shape=dataclasses.replace(low.shape, p3=9.0, p4=1.0)
)
broken_ald = dataclasses.replace(ald, terms=(broken_low,) + ald.terms[1:])
broken = dataclasses.replace(
    controller, knowledge_base=(broken_ald,) + controller.knowledge_base[1:]
)
print("\nvalidator on a broken variant:")
for violation in validate_controller(broken):
    print(f"  {violation.code} at {violation.location}: {violation.message}")

# Round trip: the serialized document parses back to an equal controller.
text = serialize_fml(controller)
assert parse_fml(text) == controller
print("\nround trip OK; document starts with:")
print("\n".join(text.splitlines()[:6]))
