#!/usr/bin/env python3
"""Swarm learning end to end: recover a hidden controller from its session.

A hidden controller (the default fuzzy sets perturbed by up to 15 percent)
generates a synthetic session; the learner starts from the unperturbed sets
and tunes all 26 free trapezoid parameters against the session's desired
outputs.  Prints the before/after report and plots the fitness history.

The full-scale run uses 3000 generations; the demo uses 600 to stay quick.
"""

import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pfml import kb
from pfml.dataio import build_report, generate_synthetic_session, write_report
from pfml.preprocess import session_features
from pfml.pso import (
    ParameterEncoding,
    SwarmConfig,
    decode_parameters,
    encode_parameters,
    learn,
    repair_position,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

template = kb.covering_controller()
encoding = ParameterEncoding.from_controller(template)
rng = np.random.default_rng(2024)
hidden_position = repair_position(
    encode_parameters(template) * rng.uniform(0.85, 1.15, size=encoding.dimension), encoding
)
hidden = decode_parameters(hidden_position, template)

bundle = generate_synthetic_session(
    seed=2024, move_count=30, samples_per_move=12, hidden_controller=hidden
)
records = session_features(bundle, focus_color="Black")
print(f"{len(records)} training records from the hidden controller's session")

config = SwarmConfig(particle_count=20, generations=600, seed=3)
result = learn(
    template,
    records,
    config,
    progress=lambda g, f: print(f"  generation {g:4d}: gbest fitness {f:.3e}")
    if g % 100 == 0
    else None,
)
print(f"\nfitness: {result.initial_fitness:.3e} -> {result.final_fitness:.3e} "
      f"({result.final_fitness / result.initial_fitness:.1%} of the starting error)")

report = build_report(template, result.learned_controller, records, game_id="demo")
write_report(report, OUT / "report.json")
print(f"semantic accuracy: {report.semantic_accuracy_before:.3f} -> "
      f"{report.semantic_accuracy_after:.3f}")
print(f"wrote {OUT / 'report.json'}")

fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogy(result.history)
ax.set_xlabel("generation")
ax.set_ylabel("global-best fitness (MSE)")
ax.set_title("swarm learning progress")
fig.tight_layout()
fig.savefig(OUT / "fitness_history.png", dpi=120)
print(f"wrote {OUT / 'fitness_history.png'}")

learned_ald = result.learned_controller.variable("ALD")
hidden_ald = hidden.variable("ALD")
print("\nALD fuzzy sets (learned vs hidden):")
for learned_term, hidden_term in zip(learned_ald.terms, hidden_ald.terms):
    got = ", ".join(f"{v:.2f}" for v in learned_term.shape.as_tuple())
    want = ", ".join(f"{v:.2f}" for v in hidden_term.shape.as_tuple())
    print(f"  {learned_term.name:8s} learned [{got}]   hidden [{want}]")
