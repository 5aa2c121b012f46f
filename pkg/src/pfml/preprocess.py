"""Per-move feature extraction from indicator streams and engine predictions.

The indicator stream is aligned to move windows, averaged per move, and
turned into consecutive-move distances; SN, TMR, and the desired output come
from the engine's top-five prediction records.  Window semantics: the
samples averaged for move j are those recorded while the player was thinking
about move j, i.e. the half-open interval [previous event, this move), where
the event before move 1 is the indicator app start.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

BLACK = "Black"
WHITE = "White"

INDICATOR_FIELDS = ("attention", "left_brain", "right_brain", "stress", "fatigue")


class PreprocessError(Exception):
    """Base class for preprocessing failures."""


class NegativeElapsed(PreprocessError):
    """An indicator sample has negative elapsed milliseconds."""


class UnorderedMoves(PreprocessError):
    """Move timestamps are not strictly increasing."""


class FlaggedInput(PreprocessError):
    """A per-move record with an empty sample window was passed downstream."""


class EmptyResult(PreprocessError):
    """No usable training records remain."""


@dataclass(frozen=True)
class IndicatorSample:
    """One indicator frame: elapsed milliseconds since app start plus the
    five indicator values, each in [0, 10]."""

    t_ms: int
    attention: float
    left_brain: float
    right_brain: float
    stress: float
    fatigue: float


@dataclass(frozen=True)
class MoveEvent:
    move: int
    played_at: datetime
    color: str
    position: str


@dataclass(frozen=True)
class SessionMeta:
    app_started_at: datetime
    board_size: int = 19
    perspective: str = "Mover"  # whose win rate the desired output expresses


@dataclass(frozen=True)
class PerMoveIndicators:
    """Window averages of the five indicators for one move; sample_count 0
    flags the record as unusable."""

    move: int
    attention: float
    left_brain: float
    right_brain: float
    stress: float
    fatigue: float
    sample_count: int


@dataclass(frozen=True)
class MoveDistances:
    """Absolute consecutive-move indicator distances; move 1 is 0 by
    definition.  BALD uses the left-brain activation level only, since the
    right-brain indicator mirrors it."""

    move: int
    ald: float
    bald: float
    sld: float
    fld: float


@dataclass(frozen=True)
class MovePrediction:
    position: str
    simulations: int
    win_rate: float


@dataclass(frozen=True)
class PredictionRecord:
    """Engine prediction for one move: up to five candidate moves in engine
    rank order."""

    move: int
    top_five: tuple[MovePrediction, ...]

    def __post_init__(self):
        object.__setattr__(self, "top_five", tuple(self.top_five))


@dataclass(frozen=True)
class MoveFeatureRecord:
    """One training row: the six crisp features plus the desired output."""

    move: int
    ald: float
    bald: float
    sld: float
    fld: float
    sn: float
    tmr: float
    desired_output: float


def absolute_timestamps(
    samples: Sequence[IndicatorSample], meta: SessionMeta
) -> list[tuple[datetime, IndicatorSample]]:
    """Attach absolute times: app start plus elapsed milliseconds."""
    timed = []
    for sample in samples:
        if sample.t_ms < 0:
            raise NegativeElapsed(f"sample with negative elapsed time {sample.t_ms}")
        timed.append((meta.app_started_at + timedelta(milliseconds=sample.t_ms), sample))
    return timed


def per_move_average(
    timed_samples: Sequence[tuple[datetime, IndicatorSample]],
    moves: Sequence[MoveEvent],
    meta: SessionMeta,
) -> list[PerMoveIndicators]:
    """Average each indicator over every move's thinking window.

    Emits exactly one record per move.  An empty window yields averages of
    0.0 with sample_count 0, flagging the record as unusable.
    """
    if not moves:
        raise UnorderedMoves("no moves supplied")
    for earlier, later in zip(moves, moves[1:]):
        if later.played_at <= earlier.played_at:
            raise UnorderedMoves(
                f"move {later.move} does not come after move {earlier.move}"
            )

    out = []
    i = 0
    window_start = meta.app_started_at
    for move in moves:
        values: list[IndicatorSample] = []
        while i < len(timed_samples) and timed_samples[i][0] < move.played_at:
            if timed_samples[i][0] >= window_start:
                values.append(timed_samples[i][1])
            i += 1
        if values:
            means = [
                sum(getattr(s, name) for s in values) / len(values)
                for name in INDICATOR_FIELDS
            ]
        else:
            means = [0.0] * len(INDICATOR_FIELDS)
        out.append(PerMoveIndicators(move.move, *means, sample_count=len(values)))
        window_start = move.played_at
    return out


def consecutive_distances(per_move: Sequence[PerMoveIndicators]) -> list[MoveDistances]:
    """Absolute indicator differences between consecutive moves.

    The first record's distances are 0 by definition, so output arity equals
    input arity.  Rejects flagged (empty-window) records.
    """
    for record in per_move:
        if record.sample_count == 0:
            raise FlaggedInput(f"move {record.move} has no indicator samples")
    out = []
    for previous, current in zip((None,) + tuple(per_move), per_move):
        if previous is None:
            out.append(MoveDistances(current.move, 0.0, 0.0, 0.0, 0.0))
        else:
            out.append(
                MoveDistances(
                    current.move,
                    ald=abs(current.attention - previous.attention),
                    bald=abs(current.left_brain - previous.left_brain),
                    sld=abs(current.stress - previous.stress),
                    fld=abs(current.fatigue - previous.fatigue),
                )
            )
    return out


def compute_tmr(prediction: PredictionRecord, actual_position: str) -> float:
    """Matching degree between the played move and the engine's top five.

    1.0 for the engine's first choice; for a deeper rank k, the ratio of
    rank-k to rank-1 win rate clamped to [0, 1]; 0.0 when the move is absent
    from the list.
    """
    top = prediction.top_five
    if not top:
        raise PreprocessError(f"prediction for move {prediction.move} is empty")
    if top[0].position == actual_position:
        return 1.0
    for candidate in top[1:]:
        if candidate.position == actual_position:
            if top[0].win_rate <= 0.0:
                return 0.0
            return max(0.0, min(1.0, candidate.win_rate / top[0].win_rate))
    return 0.0


SN_MAX = 2048.0


def build_training_set(
    distances: Sequence[MoveDistances],
    predictions: Sequence[PredictionRecord],
    moves: Sequence[MoveEvent],
    focus_color: str,
) -> list[MoveFeatureRecord]:
    """Assemble one feature record per focus-color move.

    SN is the rank-1 prediction's simulation count clamped to [0, 2048], TMR
    the matching degree against the played position, and the desired output
    the rank-1 win rate.  Moves lacking distances or a prediction are
    excluded with a logged warning.
    """
    dist_by_move = {d.move: d for d in distances}
    pred_by_move = {p.move: p for p in predictions}
    out = []
    for move in moves:
        if move.color != focus_color:
            continue
        dist = dist_by_move.get(move.move)
        pred = pred_by_move.get(move.move)
        if dist is None:
            log.warning("move %d skipped: no usable indicator distances", move.move)
            continue
        if pred is None or not pred.top_five:
            log.warning("move %d skipped: no engine prediction", move.move)
            continue
        top = pred.top_five[0]
        out.append(
            MoveFeatureRecord(
                move=move.move,
                ald=dist.ald,
                bald=dist.bald,
                sld=dist.sld,
                fld=dist.fld,
                sn=float(min(max(top.simulations, 0), SN_MAX)),
                tmr=compute_tmr(pred, move.position),
                desired_output=top.win_rate,
            )
        )
    if not out:
        raise EmptyResult(f"no usable {focus_color} moves in session")
    return out


def session_features(bundle, focus_color: str = BLACK) -> list[MoveFeatureRecord]:
    """Full pipeline from a session bundle to training records.

    Moves with empty indicator windows are dropped before the distance step,
    so a distance after a dropped move measures the change since the last
    usable move.
    """
    timed = absolute_timestamps(bundle.samples, bundle.meta)
    per_move = per_move_average(timed, bundle.moves, bundle.meta)
    usable = []
    for record in per_move:
        if record.sample_count == 0:
            log.warning("move %d has an empty indicator window; dropped", record.move)
        else:
            usable.append(record)
    if not usable:
        raise EmptyResult("every move window is empty")
    distances = consecutive_distances(usable)
    return build_training_set(distances, bundle.predictions, bundle.moves, focus_color)
