"""Session bundle file formats, loaders with validation, the synthetic
session generator, and report/training-set writers.

A session bundle is a directory of four files:

* ``meta.json`` — ``app_started_at`` (ISO 8601, millisecond precision),
  ``board_size``, ``perspective`` ("Black" or "Mover": whose win rate the
  desired output expresses).
* ``bci.csv`` — header ``t_ms,attention,left_brain,right_brain,stress,fatigue``;
  elapsed milliseconds plus the five indicator values in [0, 10].
* ``moves.csv`` — header ``move,played_at,color,position``; SGF-style
  two-letter coordinates, move numbers consecutive from 1, timestamps
  strictly increasing.
* ``predictions.json`` — array of ``{"move": n, "top5": [{"position",
  "simulations", "win_rate"}, ...]}`` in engine rank order, at most five
  entries per move.

Loaders reject exactly the inputs that violate the type invariants, with
row-level diagnostics: value-range problems raise :class:`RangeError`,
structural problems raise :class:`SchemaError`.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .fml import FuzzyController, _fmt
from .inference import (
    NoRuleFired,
    infer,
    linguistic_label,
    mean_squared_error,
    output_variable,
    record_inputs,
    semantic_accuracy,
)
from .preprocess import (
    BLACK,
    WHITE,
    IndicatorSample,
    MoveEvent,
    MoveFeatureRecord,
    MovePrediction,
    PredictionRecord,
    SessionMeta,
    absolute_timestamps,
    consecutive_distances,
    per_move_average,
)

BCI_HEADER = ["t_ms", "attention", "left_brain", "right_brain", "stress", "fatigue"]
MOVES_HEADER = ["move", "played_at", "color", "position"]
TRAINING_HEADER = ["move", "ald", "bald", "sld", "fld", "sn", "tmr", "desired_output"]
HISTORY_HEADER = ["generation", "gbest_fitness"]

META_FILE = "meta.json"
BCI_FILE = "bci.csv"
MOVES_FILE = "moves.csv"
PREDICTIONS_FILE = "predictions.json"

# Domains each training-record field must satisfy (matching the standard
# feature variables).
_RECORD_DOMAINS = {
    "ald": (0.0, 10.0),
    "bald": (0.0, 10.0),
    "sld": (0.0, 10.0),
    "fld": (0.0, 10.0),
    "sn": (0.0, 2048.0),
    "tmr": (0.0, 1.0),
    "desired_output": (0.0, 1.0),
}


class DataError(Exception):
    """Base class for bundle/report file errors."""


class MissingFile(DataError):
    """A required bundle file is absent."""


class SchemaError(DataError):
    """A file has the wrong header, structure, or cross-references."""


class RangeError(DataError):
    """A value lies outside its permitted interval."""


class IoError(DataError):
    """The underlying filesystem operation failed."""


@dataclass(frozen=True)
class SessionBundle:
    meta: SessionMeta
    samples: tuple[IndicatorSample, ...]
    moves: tuple[MoveEvent, ...]
    predictions: tuple[PredictionRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "moves", tuple(self.moves))
        object.__setattr__(self, "predictions", tuple(self.predictions))


@dataclass(frozen=True)
class MoveOutcome:
    move: int
    inferred_wr: float | None
    desired_wr: float
    inferred_label: str | None
    desired_label: str
    match: bool


@dataclass(frozen=True)
class EvaluationReport:
    game_id: str
    record_count: int
    semantic_accuracy_before: float
    semantic_accuracy_after: float
    fitness_before: float
    fitness_after: float
    per_move: tuple[MoveOutcome, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_move", tuple(self.per_move))


# --------------------------------------------------------------------------
# session loading


def _float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise SchemaError(f"{where}: {raw!r} is not a decimal real") from None


def _int(raw, where: str) -> int:
    try:
        return int(raw)
    except (ValueError, TypeError):
        raise SchemaError(f"{where}: {raw!r} is not an integer") from None


def _datetime(raw: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(raw)
    except ValueError:
        raise SchemaError(f"{where}: {raw!r} is not an ISO 8601 timestamp") from None


def _read_csv(path: Path, header: list[str]):
    rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))
    if not rows or rows[0] != header:
        raise SchemaError(f"{path.name}: expected header {','.join(header)!r}")
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path.name}: row {i}: expected {len(header)} fields")
        yield i, row


def _load_meta(path: Path) -> SessionMeta:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: invalid JSON: {exc}") from exc
    for key in ("app_started_at", "board_size", "perspective"):
        if key not in raw:
            raise SchemaError(f"{path.name}: missing key {key!r}")
    perspective = raw["perspective"]
    if perspective not in (BLACK, "Mover"):
        raise SchemaError(f"{path.name}: perspective must be 'Black' or 'Mover'")
    board_size = _int(raw["board_size"], path.name)
    if board_size < 1:
        raise RangeError(f"{path.name}: board_size must be positive")
    return SessionMeta(
        app_started_at=_datetime(raw["app_started_at"], path.name),
        board_size=board_size,
        perspective=perspective,
    )


def _load_samples(path: Path) -> list[IndicatorSample]:
    samples = []
    previous_t = None
    for i, row in _read_csv(path, BCI_HEADER):
        where = f"{path.name}: row {i}"
        t = _int(row[0], where)
        if t < 0:
            raise RangeError(f"{where}: elapsed time {t} is negative")
        if previous_t is not None and t < previous_t:
            raise SchemaError(f"{where}: samples are not sorted by t_ms")
        previous_t = t
        values = []
        for name, raw in zip(BCI_HEADER[1:], row[1:]):
            v = _float(raw, where)
            if not 0.0 <= v <= 10.0:
                raise RangeError(f"{where}: {name}={raw} outside [0, 10]")
            values.append(v)
        samples.append(IndicatorSample(t, *values))
    return samples


def _load_moves(path: Path) -> list[MoveEvent]:
    moves = []
    for i, row in _read_csv(path, MOVES_HEADER):
        where = f"{path.name}: row {i}"
        number = _int(row[0], where)
        if number != len(moves) + 1:
            raise SchemaError(f"{where}: move numbers must be consecutive from 1")
        played_at = _datetime(row[1], where)
        if moves and played_at <= moves[-1].played_at:
            raise SchemaError(f"{where}: move timestamps must be strictly increasing")
        color = row[2]
        if color not in (BLACK, WHITE):
            raise SchemaError(f"{where}: color must be 'Black' or 'White'")
        position = row[3]
        if not position or any(ch.isspace() for ch in position):
            raise SchemaError(f"{where}: empty or malformed position {position!r}")
        moves.append(MoveEvent(number, played_at, color, position))
    return moves


def _load_predictions(path: Path, move_numbers: set[int]) -> list[PredictionRecord]:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: invalid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError(f"{path.name}: top-level value must be an array")
    records = []
    seen = set()
    for k, entry in enumerate(raw, start=1):
        where = f"{path.name}: entry {k}"
        if not isinstance(entry, dict) or "move" not in entry or "top5" not in entry:
            raise SchemaError(f"{where}: expected an object with 'move' and 'top5'")
        move = _int(entry["move"], where)
        if move not in move_numbers:
            raise SchemaError(f"{where}: references move {move} absent from moves.csv")
        if move in seen:
            raise SchemaError(f"{where}: duplicate prediction for move {move}")
        seen.add(move)
        top5 = entry["top5"]
        if not isinstance(top5, list) or len(top5) > 5:
            raise SchemaError(f"{where}: top5 must be an array of at most five entries")
        candidates = []
        for item in top5:
            if not isinstance(item, dict):
                raise SchemaError(f"{where}: top5 entries must be objects")
            for key in ("position", "simulations", "win_rate"):
                if key not in item:
                    raise SchemaError(f"{where}: top5 entry missing {key!r}")
            simulations = _int(item["simulations"], where)
            if simulations < 0:
                raise RangeError(f"{where}: simulations must be nonnegative")
            win_rate = item["win_rate"]
            if not isinstance(win_rate, (int, float)) or not 0.0 <= win_rate <= 1.0:
                raise RangeError(f"{where}: win_rate {win_rate!r} outside [0, 1]")
            candidates.append(
                MovePrediction(str(item["position"]), simulations, float(win_rate))
            )
        records.append(PredictionRecord(move, tuple(candidates)))
    return records


def load_session(directory) -> SessionBundle:
    """Load and fully validate a session bundle directory."""
    directory = Path(directory)
    for name in (META_FILE, BCI_FILE, MOVES_FILE, PREDICTIONS_FILE):
        if not (directory / name).is_file():
            raise MissingFile(f"{directory}: missing {name}")
    meta = _load_meta(directory / META_FILE)
    samples = _load_samples(directory / BCI_FILE)
    moves = _load_moves(directory / MOVES_FILE)
    if moves and moves[0].played_at < meta.app_started_at:
        raise SchemaError(
            f"{MOVES_FILE}: first move predates app start {meta.app_started_at.isoformat()}"
        )
    predictions = _load_predictions(
        directory / PREDICTIONS_FILE, {m.move for m in moves}
    )
    return SessionBundle(meta, tuple(samples), tuple(moves), tuple(predictions))


# --------------------------------------------------------------------------
# session writing


def _iso(dt: datetime) -> str:
    return dt.isoformat(timespec="milliseconds")


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def save_session(bundle: SessionBundle, directory) -> None:
    """Write a bundle as the four session files (creating the directory).

    Output is deterministic: identical bundles produce byte-identical files.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {directory}: {exc}") from exc
    meta = {
        "app_started_at": _iso(bundle.meta.app_started_at),
        "board_size": bundle.meta.board_size,
        "perspective": bundle.meta.perspective,
    }
    _write_text(directory / META_FILE, json.dumps(meta, indent=2) + "\n")

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(BCI_HEADER)
    for s in bundle.samples:
        writer.writerow(
            [s.t_ms] + [_fmt(v) for v in (s.attention, s.left_brain, s.right_brain, s.stress, s.fatigue)]
        )
    _write_text(directory / BCI_FILE, out.getvalue())

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(MOVES_HEADER)
    for m in bundle.moves:
        writer.writerow([m.move, _iso(m.played_at), m.color, m.position])
    _write_text(directory / MOVES_FILE, out.getvalue())

    payload = [
        {
            "move": p.move,
            "top5": [
                {
                    "position": c.position,
                    "simulations": c.simulations,
                    "win_rate": c.win_rate,
                }
                for c in p.top_five
            ],
        }
        for p in bundle.predictions
    ]
    _write_text(directory / PREDICTIONS_FILE, json.dumps(payload, indent=2) + "\n")


# --------------------------------------------------------------------------
# synthetic sessions


def generate_synthetic_session(
    seed: int,
    move_count: int,
    samples_per_move: int,
    hidden_controller: FuzzyController,
) -> SessionBundle:
    """Generate a deterministic synthetic session.

    Indicator streams are a clipped random walk sampled inside every move
    window, move times are jittered, and each move's rank-1 win rate is the
    hidden controller's own inference on that move's derived features, so a
    learner fed this session has an attainable target.  The hidden
    controller's rule base must cover the whole feature space (see
    ``kb.covering_controller``); a sparse rule base would raise
    ``NoRuleFired`` here.  Identical arguments reproduce identical bundles.
    """
    if move_count < 2:
        raise ValueError("move_count must be at least 2")
    if samples_per_move < 1:
        raise ValueError("samples_per_move must be at least 1")
    rng = np.random.default_rng(seed)
    meta = SessionMeta(
        app_started_at=datetime(2019, 1, 1, 0, 0, 0), board_size=19, perspective="Mover"
    )
    letters = "abcdefghijklmnopqrs"[: meta.board_size]

    def coord() -> str:
        return letters[rng.integers(0, len(letters))] + letters[rng.integers(0, len(letters))]

    times = np.cumsum(rng.integers(8_000, 30_000, size=move_count))
    moves = tuple(
        MoveEvent(
            move=i + 1,
            played_at=meta.app_started_at + timedelta(milliseconds=int(times[i])),
            color=BLACK if i % 2 == 0 else WHITE,
            position=coord(),
        )
        for i in range(move_count)
    )

    samples = []
    level = rng.uniform(2.0, 8.0, size=5)
    window_start = 0
    for t_end in times:
        width = t_end - window_start
        offsets = window_start + (np.arange(samples_per_move) + 0.5) * width / samples_per_move
        for t in offsets:
            level = np.clip(level + rng.normal(0.0, 0.6, size=5), 0.0, 10.0)
            samples.append(IndicatorSample(int(t), *(float(v) for v in np.round(level, 4))))
        window_start = t_end

    timed = absolute_timestamps(samples, meta)
    per_move = per_move_average(timed, moves, meta)
    distances = consecutive_distances(per_move)

    predictions = []
    for move, dist in zip(moves, distances):
        simulations = int(rng.integers(16, 2049))
        coin = rng.random()
        if coin < 0.55:
            rank, tmr = 0, 1.0
        elif coin < 0.8:
            rank, tmr = int(rng.integers(1, 5)), float(rng.uniform(0.3, 0.99))
        else:
            rank, tmr = None, 0.0
        inputs = {
            "ALD": dist.ald,
            "BALD": dist.bald,
            "SLD": dist.sld,
            "FLD": dist.fld,
            "SN": float(simulations),
            "TMR": tmr,
        }
        top_wr = infer(hidden_controller, inputs).crisp_output

        candidates: list[str] = []
        while len(candidates) < 5:
            c = coord()
            if c != move.position and c not in candidates:
                candidates.append(c)
        win_rates = [top_wr]
        sim_counts = [simulations]
        for _ in range(4):
            win_rates.append(win_rates[-1] * float(rng.uniform(0.7, 0.98)))
            sim_counts.append(max(1, int(sim_counts[-1] * rng.uniform(0.4, 0.95))))
        entries = []
        for k in range(5):
            position, win_rate = candidates[k], win_rates[k]
            if rank is not None and k == rank:
                position = move.position
                # recomputing the matching degree from the files recovers tmr
                win_rate = top_wr if k == 0 else tmr * top_wr
            entries.append(MovePrediction(position, sim_counts[k], win_rate))
        predictions.append(PredictionRecord(move.move, tuple(entries)))

    return SessionBundle(meta, tuple(samples), moves, tuple(predictions))


# --------------------------------------------------------------------------
# training sets, histories, reports


def save_training_set(records, path) -> None:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRAINING_HEADER)
    for r in records:
        writer.writerow(
            [r.move] + [_fmt(getattr(r, f)) for f in TRAINING_HEADER[1:]]
        )
    _write_text(Path(path), out.getvalue())


def load_training_set(path) -> list[MoveFeatureRecord]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"missing training set {path}")
    records = []
    for i, row in _read_csv(path, TRAINING_HEADER):
        where = f"{path.name}: row {i}"
        move = _int(row[0], where)
        values = {}
        for name, raw in zip(TRAINING_HEADER[1:], row[1:]):
            v = _float(raw, where)
            lo, hi = _RECORD_DOMAINS[name]
            if not lo <= v <= hi:
                raise RangeError(f"{where}: {name}={raw} outside [{_fmt(lo)}, {_fmt(hi)}]")
            values[name] = v
        records.append(MoveFeatureRecord(move=move, **values))
    return records


def write_history(history, path) -> None:
    """Write the per-generation global-best fitness trace as CSV."""
    lines = [",".join(HISTORY_HEADER)]
    lines.extend(f"{g},{repr(float(f))}" for g, f in enumerate(history))
    _write_text(Path(path), "\n".join(lines) + "\n")


def build_report(
    before: FuzzyController,
    after: FuzzyController,
    records,
    game_id: str = "session",
) -> EvaluationReport:
    """Before/after evaluation of two controllers over the same records.

    Refuses controllers with different variable structures.  Per-move rows
    reflect the *after* controller; a move for which no rule fires carries
    null inference fields and counts as a mismatch.
    """

    def signature(controller):
        return [
            (v.name, v.domain_left, v.domain_right, v.var_type, tuple(t.name for t in v.terms))
            for v in controller.knowledge_base
        ]

    if signature(before) != signature(after):
        raise SchemaError("knowledge bases have different variable structures")
    records = list(records)
    out_var = output_variable(after)
    per_move = []
    for record in records:
        desired_label = linguistic_label(out_var, record.desired_output)
        try:
            result = infer(after, record_inputs(after, record))
        except NoRuleFired:
            per_move.append(
                MoveOutcome(record.move, None, record.desired_output, None, desired_label, False)
            )
            continue
        per_move.append(
            MoveOutcome(
                move=record.move,
                inferred_wr=result.crisp_output,
                desired_wr=record.desired_output,
                inferred_label=result.label,
                desired_label=desired_label,
                match=result.label == desired_label,
            )
        )
    return EvaluationReport(
        game_id=game_id,
        record_count=len(records),
        semantic_accuracy_before=semantic_accuracy(before, records),
        semantic_accuracy_after=semantic_accuracy(after, records),
        fitness_before=mean_squared_error(before, records),
        fitness_after=mean_squared_error(after, records),
        per_move=tuple(per_move),
    )


def write_report(report: EvaluationReport, path) -> None:
    """Write a report as JSON with a stable key order.

    The ``semantic_accuracy_definition`` key records that accuracy means
    label agreement between inferred and desired win rates, since that
    definition is a convention of this toolkit.
    """
    payload = {
        "game_id": report.game_id,
        "record_count": report.record_count,
        "semantic_accuracy_before": report.semantic_accuracy_before,
        "semantic_accuracy_after": report.semantic_accuracy_after,
        "fitness_before": report.fitness_before,
        "fitness_after": report.fitness_after,
        "semantic_accuracy_definition": "label-match",
        "per_move": [
            {
                "move": row.move,
                "inferred_wr": row.inferred_wr,
                "desired_wr": row.desired_wr,
                "inferred_label": row.inferred_label,
                "desired_label": row.desired_label,
                "match": row.match,
            }
            for row in report.per_move
        ],
    }
    _write_text(Path(path), json.dumps(payload, indent=2) + "\n")


def read_report(path) -> EvaluationReport:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"missing report {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: invalid JSON: {exc}") from exc
    try:
        return EvaluationReport(
            game_id=raw["game_id"],
            record_count=raw["record_count"],
            semantic_accuracy_before=raw["semantic_accuracy_before"],
            semantic_accuracy_after=raw["semantic_accuracy_after"],
            fitness_before=raw["fitness_before"],
            fitness_after=raw["fitness_after"],
            per_move=tuple(
                MoveOutcome(
                    move=row["move"],
                    inferred_wr=row["inferred_wr"],
                    desired_wr=row["desired_wr"],
                    inferred_label=row["inferred_label"],
                    desired_label=row["desired_label"],
                    match=row["match"],
                )
                for row in raw["per_move"]
            ),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path.name}: malformed report: {exc}") from exc
