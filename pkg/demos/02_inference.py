#!/usr/bin/env python3
"""Mamdani inference: fuzzification, rule firing, defuzzification, labels.

Runs the covering controller over a sweep of inputs, prints the inferred
win rate with its linguistic label and game-situation phrase, and plots the
membership functions plus the inference response to one varying feature.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pfml import kb
from pfml.inference import fuzzify, infer, situation_phrase, trapezoid_membership_grid

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

controller = kb.covering_controller()

print("fuzzification of ALD = 0.75:", fuzzify(controller.variable("ALD"), 0.75))

scenarios = {
    "calm, engine-endorsed move": dict(ALD=0.2, BALD=0.3, SLD=0.1, FLD=0.2, SN=1500.0, TMR=1.0),
    "mood swing, off-book move": dict(ALD=6.0, BALD=5.5, SLD=7.0, FLD=4.0, SN=300.0, TMR=0.0),
    "middling everything": dict(ALD=2.0, BALD=2.0, SLD=2.0, FLD=2.0, SN=512.0, TMR=0.85),
}
print()
for name, inputs in scenarios.items():
    result = infer(controller, inputs)
    print(f"{name:32s} WR={result.crisp_output:.3f}  {result.label:9s} "
          f'"{situation_phrase(result.crisp_output)}"')

# Membership functions of every variable.
fig, axes = plt.subplots(4, 2, figsize=(10, 10))
for ax, variable in zip(axes.flat, controller.knowledge_base):
    xs = np.linspace(variable.domain_left, variable.domain_right, 400)
    for term in variable.terms:
        ax.plot(xs, trapezoid_membership_grid(term.shape, xs), label=term.name)
    ax.set_title(variable.name)
    ax.legend(fontsize=7)
axes.flat[-1].axis("off")
fig.tight_layout()
fig.savefig(OUT / "membership_functions.png", dpi=120)
print(f"\nwrote {OUT / 'membership_functions.png'}")

# Response of the inferred win rate to the top-move matching degree.
tmrs = np.linspace(0.0, 1.0, 101)
wrs = [
    infer(controller, dict(ALD=1.0, BALD=1.0, SLD=1.0, FLD=1.0, SN=800.0, TMR=float(t))).crisp_output
    for t in tmrs
]
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(tmrs, wrs)
ax.set_xlabel("top-move matching degree (TMR)")
ax.set_ylabel("inferred win rate")
ax.set_title("win rate response to TMR, other features fixed")
fig.tight_layout()
fig.savefig(OUT / "tmr_response.png", dpi=120)
print(f"wrote {OUT / 'tmr_response.png'}")
