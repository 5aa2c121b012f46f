"""Command-line surface composing the pipeline end to end.

Subcommands: ``parse`` (validate a knowledge base), ``infer`` (one crisp
inference), ``preprocess`` (session bundle to training CSV), ``learn`` (PSO
tuning), ``eval`` (before/after report), and ``gen`` (synthetic session).
Exit codes: 0 on success, 1 on validation or data errors (message on
stderr), 2 on usage errors.  Every subcommand accepts ``--json`` to print
one machine-parseable JSON object on stdout instead of prose.  The
``PFML_THREADS`` environment variable bounds internal parallelism
(0 = auto).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, kb, pso
from .fml import FmlError, parse_fml, serialize_fml, validate_controller
from .inference import InferenceError, infer, situation_phrase
from .preprocess import BLACK, WHITE, PreprocessError, session_features

_INPUT_FLAGS = ("ald", "bald", "sld", "fld", "sn", "tmr")


def _threads() -> int:
    raw = os.environ.get("PFML_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise SystemExit(f"pfml: invalid PFML_THREADS value {raw!r}") from None
    if value < 0:
        raise SystemExit(f"pfml: PFML_THREADS must be nonnegative, got {value}")
    return value if value > 0 else 1


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(human)


def _load_controller(path: str, require_valid: bool = True):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise dataio.IoError(f"cannot read {path}: {exc}") from exc
    controller = parse_fml(text)
    if require_valid:
        violations = validate_controller(controller)
        if violations:
            details = "; ".join(f"{v.code} at {v.location}" for v in violations[:5])
            raise FmlError(f"{path}: {len(violations)} violations ({details})")
    return controller


def _cmd_parse(args) -> int:
    text = Path(args.kb).read_text(encoding="utf-8")
    controller = parse_fml(text)
    violations = validate_controller(controller)
    if args.json:
        print(
            json.dumps(
                {
                    "violations": [
                        {"code": v.code, "location": v.location, "message": v.message}
                        for v in violations
                    ],
                    "count": len(violations),
                }
            )
        )
    else:
        print(f"{len(violations)} violations")
        for v in violations:
            print(f"  {v.code} at {v.location}: {v.message}")
    return 0 if not violations else 1


def _cmd_infer(args) -> int:
    controller = _load_controller(args.kb)
    inputs = {flag.upper(): getattr(args, flag) for flag in _INPUT_FLAGS}
    result = infer(controller, inputs)
    phrase = situation_phrase(result.crisp_output)
    _emit(
        args,
        {"win_rate": result.crisp_output, "label": result.label, "phrase": phrase},
        f"win rate: {result.crisp_output:.6f}\nlabel: {result.label}\nsituation: {phrase}",
    )
    return 0


def _cmd_preprocess(args) -> int:
    bundle = dataio.load_session(args.session)
    records = session_features(bundle, focus_color=args.color)
    dataio.save_training_set(records, args.out)
    _emit(
        args,
        {"records": len(records), "out": args.out},
        f"wrote {len(records)} records to {args.out}",
    )
    return 0


def _cmd_learn(args) -> int:
    template = _load_controller(args.kb)
    records = dataio.load_training_set(args.train)
    config = pso.SwarmConfig(
        particle_count=args.particles,
        inertia_weight=args.inertia,
        cognitive=args.cognitive,
        social=args.social,
        generations=args.generations,
        seed=args.seed,
        velocity_clamp_fraction=args.clamp,
    )

    def progress(generation: int, gbest: float) -> None:
        if generation % 100 == 0 or generation == config.generations:
            print(f"generation {generation}: gbest fitness {gbest:.6g}", file=sys.stderr)

    result = pso.learn(template, records, config, threads=_threads(), progress=progress)
    Path(args.out).write_text(serialize_fml(result.learned_controller), encoding="utf-8")
    if args.history:
        dataio.write_history(result.history, args.history)
    _emit(
        args,
        {
            "initial_fitness": result.initial_fitness,
            "final_fitness": result.final_fitness,
            "generations": config.generations,
            "out": args.out,
            "history": args.history,
        },
        f"initial fitness: {result.initial_fitness:.6g}\n"
        f"final fitness: {result.final_fitness:.6g}\n"
        f"wrote {args.out}",
    )
    return 0


def _cmd_eval(args) -> int:
    before = _load_controller(args.kb_before)
    after = _load_controller(args.kb_after)
    records = dataio.load_training_set(args.train)
    report = dataio.build_report(before, after, records, game_id=args.game_id)
    dataio.write_report(report, args.report)
    _emit(
        args,
        {
            "semantic_accuracy_before": report.semantic_accuracy_before,
            "semantic_accuracy_after": report.semantic_accuracy_after,
            "fitness_before": report.fitness_before,
            "fitness_after": report.fitness_after,
            "report": args.report,
        },
        f"semantic accuracy: {report.semantic_accuracy_before:.3f} -> "
        f"{report.semantic_accuracy_after:.3f}\n"
        f"fitness: {report.fitness_before:.6g} -> {report.fitness_after:.6g}\n"
        f"wrote {args.report}",
    )
    return 0


def _cmd_gen(args) -> int:
    hidden = kb.covering_controller()
    if args.perturb:
        if not 0.0 < args.perturb < 1.0:
            raise ValueError("--perturb must be in (0, 1)")
        # jitter every free fuzzy-set parameter so the session's desired
        # outputs come from a controller the learner has to recover
        encoding = pso.ParameterEncoding.from_controller(hidden)
        rng = np.random.default_rng([args.seed, 1])
        jittered = pso.repair_position(
            pso.encode_parameters(hidden)
            * rng.uniform(1.0 - args.perturb, 1.0 + args.perturb, size=encoding.dimension),
            encoding,
        )
        hidden = pso.decode_parameters(jittered, hidden)
    bundle = dataio.generate_synthetic_session(
        seed=args.seed,
        move_count=args.moves,
        samples_per_move=args.samples_per_move,
        hidden_controller=hidden,
    )
    dataio.save_session(bundle, args.out)
    _emit(
        args,
        {"moves": len(bundle.moves), "samples": len(bundle.samples), "out": args.out},
        f"wrote synthetic session ({len(bundle.moves)} moves, "
        f"{len(bundle.samples)} samples) to {args.out}",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfml",
        description="Fuzzy win-rate agent: FML knowledge bases, Mamdani inference, "
        "feature preprocessing, and swarm learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="validate a knowledge-base file")
    p.add_argument("--kb", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_parse)

    p = sub.add_parser("infer", help="infer the win rate for one move's features")
    p.add_argument("--kb", required=True)
    for flag in _INPUT_FLAGS:
        p.add_argument(f"--{flag}", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_infer)

    p = sub.add_parser("preprocess", help="turn a session bundle into training records")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--color", choices=[BLACK, WHITE], default=BLACK)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_preprocess)

    p = sub.add_parser("learn", help="tune fuzzy-set parameters against a training set")
    p.add_argument("--kb", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.add_argument("--generations", type=int, default=3000)
    p.add_argument("--particles", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inertia", type=float, default=0.0)
    p.add_argument("--cognitive", type=float, default=2.0)
    p.add_argument("--social", type=float, default=2.0)
    p.add_argument("--clamp", type=float, default=0.2)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_learn)

    p = sub.add_parser("eval", help="before/after evaluation report")
    p.add_argument("--kb-before", required=True)
    p.add_argument("--kb-after", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--game-id", default="session")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_eval)

    p = sub.add_parser("gen", help="write a synthetic session bundle")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--moves", type=int, required=True)
    p.add_argument("--samples-per-move", type=int, default=20)
    p.add_argument("--perturb", type=float, default=0.0,
                   help="jitter the generating controller's fuzzy sets by this fraction")
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_gen)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except (FmlError, InferenceError, PreprocessError, dataio.DataError, pso.PsoError, ValueError) as exc:
        print(f"pfml: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"pfml: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
