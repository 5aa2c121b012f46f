#!/usr/bin/env python3
"""From raw session files to training records.

Generates a synthetic session bundle (indicator stream, move list, engine
predictions), saves it to disk, loads it back through the validating loader,
and walks the preprocessing pipeline: window averages, consecutive-move
distances, and the final feature records.
"""

import tempfile
from pathlib import Path

from pfml import kb
from pfml.dataio import generate_synthetic_session, load_session, save_session, save_training_set
from pfml.preprocess import (
    absolute_timestamps,
    consecutive_distances,
    per_move_average,
    session_features,
)

bundle = generate_synthetic_session(
    seed=42, move_count=16, samples_per_move=15, hidden_controller=kb.covering_controller()
)

workdir = Path(tempfile.mkdtemp(prefix="pfml_demo_"))
save_session(bundle, workdir / "session")
bundle = load_session(workdir / "session")
print(f"session bundle in {workdir / 'session'}")
print(f"  {len(bundle.samples)} indicator samples, {len(bundle.moves)} moves, "
      f"{len(bundle.predictions)} prediction records")

timed = absolute_timestamps(bundle.samples, bundle.meta)
averaged = per_move_average(timed, bundle.moves, bundle.meta)
print("\nper-move window averages (first five):")
print("  move  attn   lbrain rbrain stress fatigue  n")
for row in averaged[:5]:
    print(f"  {row.move:4d}  {row.attention:5.2f}  {row.left_brain:5.2f}  "
          f"{row.right_brain:5.2f}  {row.stress:5.2f}  {row.fatigue:6.2f}  {row.sample_count}")

distances = consecutive_distances(averaged)
print("\nconsecutive-move distances (first five):")
print("  move   ALD    BALD   SLD    FLD")
for row in distances[:5]:
    print(f"  {row.move:4d}  {row.ald:5.2f}  {row.bald:5.2f}  {row.sld:5.2f}  {row.fld:5.2f}")

records = session_features(bundle, focus_color="Black")
save_training_set(records, workdir / "train.csv")
print(f"\n{len(records)} Black-move training records -> {workdir / 'train.csv'}")
print("  move   ALD    BALD   SLD    FLD     SN     TMR    DO")
for r in records[:6]:
    print(f"  {r.move:4d}  {r.ald:5.2f}  {r.bald:5.2f}  {r.sld:5.2f}  {r.fld:5.2f}  "
          f"{r.sn:6.0f}  {r.tmr:5.2f}  {r.desired_output:.3f}")
