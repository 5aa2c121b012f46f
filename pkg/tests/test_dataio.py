import json
from pathlib import Path

import pytest

from pfml import kb
from pfml.dataio import (
    BCI_FILE,
    META_FILE,
    MOVES_FILE,
    PREDICTIONS_FILE,
    EvaluationReport,
    MissingFile,
    MoveOutcome,
    RangeError,
    SchemaError,
    build_report,
    generate_synthetic_session,
    load_session,
    load_training_set,
    read_report,
    save_session,
    save_training_set,
    write_history,
    write_report,
)
from pfml.preprocess import MoveFeatureRecord, session_features


@pytest.fixture(scope="module")
def bundle():
    return generate_synthetic_session(
        seed=123, move_count=12, samples_per_move=8, hidden_controller=kb.covering_controller()
    )


@pytest.fixture()
def session_dir(bundle, tmp_path):
    directory = tmp_path / "session"
    save_session(bundle, directory)
    return directory


class TestGenerator:
    def test_deterministic_bundles(self, bundle):
        again = generate_synthetic_session(
            seed=123, move_count=12, samples_per_move=8, hidden_controller=kb.covering_controller()
        )
        assert again == bundle

    def test_byte_identical_files(self, bundle, tmp_path):
        save_session(bundle, tmp_path / "a")
        save_session(bundle, tmp_path / "b")
        for name in (META_FILE, BCI_FILE, MOVES_FILE, PREDICTIONS_FILE):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_indicators_within_range(self, bundle):
        for s in bundle.samples:
            for v in (s.attention, s.left_brain, s.right_brain, s.stress, s.fatigue):
                assert 0.0 <= v <= 10.0

    def test_round_trip_through_files(self, bundle, session_dir):
        assert load_session(session_dir) == bundle

    def test_every_move_has_prediction(self, bundle):
        assert {p.move for p in bundle.predictions} == {m.move for m in bundle.moves}

    def test_desired_outputs_are_learnable(self, bundle):
        # the hidden controller reproduces its own desired outputs exactly
        from pfml.inference import infer, record_inputs

        hidden = kb.covering_controller()
        records = session_features(bundle, "Black")
        for record in records:
            crisp = infer(hidden, record_inputs(hidden, record)).crisp_output
            assert crisp == pytest.approx(record.desired_output, abs=1e-9)

    def test_move_count_validated(self):
        with pytest.raises(ValueError):
            generate_synthetic_session(1, 1, 5, kb.covering_controller())


class TestLoadSession:
    def test_missing_file(self, session_dir):
        (session_dir / BCI_FILE).unlink()
        with pytest.raises(MissingFile, match="bci.csv"):
            load_session(session_dir)

    def test_indicator_out_of_range_cites_row(self, session_dir):
        lines = (session_dir / BCI_FILE).read_text().splitlines()
        parts = lines[3].split(",")
        parts[1] = "12.5"
        lines[3] = ",".join(parts)
        (session_dir / BCI_FILE).write_text("\n".join(lines) + "\n")
        with pytest.raises(RangeError, match="row 4"):
            load_session(session_dir)

    def test_unknown_prediction_move(self, session_dir):
        raw = json.loads((session_dir / PREDICTIONS_FILE).read_text())
        raw[0]["move"] = 999
        (session_dir / PREDICTIONS_FILE).write_text(json.dumps(raw))
        with pytest.raises(SchemaError, match="999"):
            load_session(session_dir)

    def test_wrong_header(self, session_dir):
        lines = (session_dir / BCI_FILE).read_text().splitlines()
        lines[0] = "time,a,b,c,d,e"
        (session_dir / BCI_FILE).write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match="header"):
            load_session(session_dir)

    def test_unsorted_samples(self, session_dir):
        lines = (session_dir / BCI_FILE).read_text().splitlines()
        lines[1], lines[2] = lines[2], lines[1]
        (session_dir / BCI_FILE).write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match="sorted"):
            load_session(session_dir)

    def test_nan_indicator_rejected(self, session_dir):
        lines = (session_dir / BCI_FILE).read_text().splitlines()
        parts = lines[1].split(",")
        parts[2] = "nan"
        lines[1] = ",".join(parts)
        (session_dir / BCI_FILE).write_text("\n".join(lines) + "\n")
        with pytest.raises(RangeError):
            load_session(session_dir)

    def test_nonconsecutive_moves(self, session_dir):
        lines = (session_dir / MOVES_FILE).read_text().splitlines()
        del lines[2]
        (session_dir / MOVES_FILE).write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match="consecutive"):
            load_session(session_dir)

    def test_bad_color(self, session_dir):
        lines = (session_dir / MOVES_FILE).read_text().splitlines()
        lines[1] = lines[1].replace("Black", "Green")
        (session_dir / MOVES_FILE).write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match="color"):
            load_session(session_dir)

    def test_bad_perspective(self, session_dir):
        raw = json.loads((session_dir / META_FILE).read_text())
        raw["perspective"] = "White"
        (session_dir / META_FILE).write_text(json.dumps(raw))
        with pytest.raises(SchemaError, match="perspective"):
            load_session(session_dir)

    def test_win_rate_out_of_range(self, session_dir):
        raw = json.loads((session_dir / PREDICTIONS_FILE).read_text())
        raw[0]["top5"][0]["win_rate"] = 1.2
        (session_dir / PREDICTIONS_FILE).write_text(json.dumps(raw))
        with pytest.raises(RangeError, match="win_rate"):
            load_session(session_dir)

    def test_top5_capped(self, session_dir):
        raw = json.loads((session_dir / PREDICTIONS_FILE).read_text())
        raw[0]["top5"] = raw[0]["top5"] * 2
        (session_dir / PREDICTIONS_FILE).write_text(json.dumps(raw))
        with pytest.raises(SchemaError, match="top5"):
            load_session(session_dir)


class TestTrainingSet:
    def test_round_trip(self, bundle, tmp_path):
        records = session_features(bundle, "Black")
        path = tmp_path / "train.csv"
        save_training_set(records, path)
        assert load_training_set(path) == records

    def test_missing(self, tmp_path):
        with pytest.raises(MissingFile):
            load_training_set(tmp_path / "absent.csv")

    def test_out_of_domain_value(self, tmp_path):
        path = tmp_path / "train.csv"
        save_training_set(
            [MoveFeatureRecord(1, 0.5, 0.5, 0.5, 0.5, 100.0, 0.5, 0.5)], path
        )
        path.write_text(path.read_text().replace(",100,", ",4096,"))
        with pytest.raises(RangeError, match="sn"):
            load_training_set(path)


class TestHistory:
    def test_layout(self, tmp_path):
        path = tmp_path / "hist.csv"
        write_history([0.5, 0.25, 0.25], path)
        assert path.read_text() == "generation,gbest_fitness\n0,0.5\n1,0.25\n2,0.25\n"


class TestReports:
    def _report(self):
        return EvaluationReport(
            game_id="demo",
            record_count=2,
            semantic_accuracy_before=0.5,
            semantic_accuracy_after=0.7,
            fitness_before=0.04,
            fitness_after=0.01,
            per_move=(
                MoveOutcome(1, 0.45, 0.47, "Low", "Low", True),
                MoveOutcome(3, 0.71, 0.55, "High", "Low", False),
            ),
        )

    def test_written_keys(self, tmp_path):
        path = tmp_path / "report.json"
        write_report(self._report(), path)
        text = path.read_text()
        assert '"semantic_accuracy_after": 0.7' in text
        raw = json.loads(text)
        assert list(raw)[:6] == [
            "game_id",
            "record_count",
            "semantic_accuracy_before",
            "semantic_accuracy_after",
            "fitness_before",
            "fitness_after",
        ]
        assert raw["semantic_accuracy_definition"] == "label-match"

    def test_round_trip(self, tmp_path):
        path = tmp_path / "report.json"
        report = self._report()
        write_report(report, path)
        assert read_report(path) == report

    def test_empty_per_move(self, tmp_path):
        report = EvaluationReport("empty", 0, 0.0, 0.0, 0.0, 0.0, ())
        path = tmp_path / "report.json"
        write_report(report, path)
        assert read_report(path) == report

    def test_build_report(self, bundle):
        records = session_features(bundle, "Black")
        before = kb.covering_controller()
        report = build_report(before, before, records, game_id="g1")
        assert report.record_count == len(records) == len(report.per_move)
        assert report.fitness_before == report.fitness_after
        assert 0.0 <= report.semantic_accuracy_after <= 1.0
        assert all(row.match == (row.inferred_label == row.desired_label) for row in report.per_move)

    def test_build_report_rejects_structure_mismatch(self, bundle):
        records = session_features(bundle, "Black")
        with pytest.raises(SchemaError, match="structure"):
            build_report(kb.covering_controller(), _drop_last_variable(), records)


def _drop_last_variable():
    import dataclasses

    controller = kb.covering_controller()
    return dataclasses.replace(
        controller, knowledge_base=controller.knowledge_base[1:]
    )
