import csv
import json
from pathlib import Path

import numpy as np
import pytest

from graspq.contacts import ContactParams
from graspq.detector import MeshRegistry
from graspq.errors import InvalidInputError, ParseError
from graspq.evaluation import (
    FrameRecord,
    confusion,
    confusion_by,
    correlate,
    evaluate_dataset,
    export_distributions,
    export_timeseries,
    first_detection_offset,
    implied_positive_fraction,
    load_sequence,
    run_sequence,
    write_frame_records,
)

from conftest import make_unit_cube
from graspq.geometry import save_mesh


def minimal_sequence_doc(n_frames=1, gt=True):
    frames = []
    for i in range(n_frames):
        frame = {
            "index": i,
            "hand_pose": [0.0] * 48,
            "hand_trans": [0.0, 0.0, 0.0],
            "object_pose": {"rotation": [1.0, 0, 0, 0], "translation": [1.0, 0.0, 0.0]},
        }
        if gt is not None:
            frame["gt_contact"] = False
        frames.append(frame)
    return {
        "sequence_id": "seq1",
        "subject_id": "sub1",
        "object_id": "cube",
        "object_mesh": "cube.obj",
        "hand_shape": {
            "global_scale": 1.0,
            "segment_scales": [1.0] * 15,
            "finger_radii": [0.008, 0.008, 0.008, 0.008, 0.010],
        },
        "frames": frames,
    }


@pytest.fixture
def dataset_dir(tmp_path):
    save_mesh(make_unit_cube(), tmp_path / "cube.obj")
    return tmp_path


def write_doc(path, doc):
    Path(path).write_text(json.dumps(doc))


class TestLoadSequence:
    def test_minimal_file(self, dataset_dir):
        path = dataset_dir / "s.json"
        write_doc(path, minimal_sequence_doc())
        seq = load_sequence(path)
        assert len(seq.frames) == 1
        assert seq.has_gt
        assert seq.mesh_path == dataset_dir / "cube.obj"

    def test_wrong_pose_length_names_field(self, dataset_dir):
        doc = minimal_sequence_doc()
        doc["frames"][0]["hand_pose"] = [0.0] * 47
        path = dataset_dir / "s.json"
        write_doc(path, doc)
        with pytest.raises(ParseError, match=r"frames\[0\]\.hand_pose"):
            load_sequence(path)

    def test_non_monotone_indices_rejected(self, dataset_dir):
        doc = minimal_sequence_doc(n_frames=2)
        doc["frames"][1]["index"] = 0
        path = dataset_dir / "s.json"
        write_doc(path, doc)
        with pytest.raises(ParseError, match="strictly increasing"):
            load_sequence(path)

    def test_missing_gt_allowed(self, dataset_dir):
        doc = minimal_sequence_doc(gt=None)
        path = dataset_dir / "s.json"
        write_doc(path, doc)
        seq = load_sequence(path)
        assert not seq.has_gt

    def test_missing_field_reported(self, dataset_dir):
        doc = minimal_sequence_doc()
        del doc["object_mesh"]
        path = dataset_dir / "s.json"
        write_doc(path, doc)
        with pytest.raises(ParseError, match="object_mesh"):
            load_sequence(path)

    def test_bad_quaternion_reported(self, dataset_dir):
        doc = minimal_sequence_doc()
        doc["frames"][0]["object_pose"]["rotation"] = [0.0, 0.0, 0.0, 0.0]
        path = dataset_dir / "s.json"
        write_doc(path, doc)
        with pytest.raises(ParseError, match=r"frames\[0\]\.object_pose"):
            load_sequence(path)


class TestRunSequence:
    def test_far_object_all_sentinel(self, dataset_dir):
        doc = minimal_sequence_doc(n_frames=3)
        path = dataset_dir / "s.json"
        write_doc(path, doc)
        seq = load_sequence(path)
        registry = MeshRegistry()
        registry.register_file(seq.object_id, seq.mesh_path)
        records = run_sequence(seq, ContactParams(), registry)
        assert len(records) == 3
        for r in records:
            assert (r.epsilon, r.volume, r.detected) == (-1.0, 0.0, False)

    def test_reproducible(self, dataset_dir):
        doc = minimal_sequence_doc(n_frames=2)
        path = dataset_dir / "s.json"
        write_doc(path, doc)
        seq = load_sequence(path)
        registry = MeshRegistry()
        registry.register_file(seq.object_id, seq.mesh_path)
        a = run_sequence(seq, ContactParams(), registry)
        b = run_sequence(seq, ContactParams(), registry)
        assert a == b

    def test_detection_flips_once_at_constructed_onset(self, suite_dir, suite_manifest):
        # approach -> grasp: detection turns on exactly once, at the
        # designed contact frame (+-1)
        for entry in suite_manifest["sequences"]:
            seq = load_sequence(suite_dir / entry["path"])
            registry = MeshRegistry()
            registry.register_file(seq.object_id, seq.mesh_path)
            records = run_sequence(seq, ContactParams(), registry)
            onset = entry["onset_frame"]
            approach = [r.detected for r in records if r.frame <= max(entry["grasp_frames"])]
            rises = sum(
                1 for prev, cur in zip(approach, approach[1:]) if cur and not prev
            )
            assert rises == 1, entry["sequence_id"]
            first = next(r.frame for r in records if r.detected)
            assert abs(first - onset) <= 1, entry["sequence_id"]


def rec(sid, frame, detected, gt, eps=0.0, vol=0.0):
    return FrameRecord(sid, frame, eps, vol, detected, gt)


class TestConfusion:
    def test_direct_counts(self):
        records = [
            rec("s", 0, True, True),
            rec("s", 1, False, True),
            rec("s", 2, False, False),
            rec("s", 3, True, False),
        ]
        cm = confusion(records)
        assert (cm.tp, cm.fn, cm.tn, cm.fp) == (1, 1, 1, 1)
        assert cm.tp_pct == 50.0 and cm.fn_pct == 50.0
        assert cm.tn_pct == 50.0 and cm.fp_pct == 50.0
        assert cm.accuracy_pct == 50.0

    def test_all_correct(self):
        records = [rec("s", i, i % 2 == 0, i % 2 == 0) for i in range(10)]
        cm = confusion(records)
        assert cm.accuracy_pct == 100.0
        assert cm.fp_pct == 0.0 and cm.fn_pct == 0.0

    def test_rate_identities_exact_on_counts(self):
        rng = np.random.default_rng(0)
        records = [
            rec("s", i, bool(rng.integers(2)), bool(rng.integers(2)))
            for i in range(500)
        ]
        cm = confusion(records)
        assert cm.tp_pct + cm.fn_pct == pytest.approx(100.0, abs=1e-12)
        assert cm.tn_pct + cm.fp_pct == pytest.approx(100.0, abs=1e-12)
        assert cm.accuracy_pct == pytest.approx(
            100.0 * (cm.tp + cm.tn) / cm.total, abs=1e-12
        )

    def test_rounded_row_sums_within_slack(self):
        # emitted rows keep the class-rate pair sums in [99.8, 100.0] after
        # 1-decimal rounding
        rng = np.random.default_rng(1)
        for _ in range(50):
            records = [
                rec("s", i, bool(rng.integers(2)), bool(rng.integers(2)))
                for i in range(int(rng.integers(20, 400)))
            ]
            cm = confusion(records)
            if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
                continue
            for a, b in ((cm.tp_pct, cm.fn_pct), (cm.tn_pct, cm.fp_pct)):
                rounded = round(a, 1) + round(b, 1)
                assert 99.8 <= rounded <= 100.0 + 1e-9

    def test_grouped_additivity(self):
        rng = np.random.default_rng(2)
        records = [
            rec(f"s{i % 3}", i, bool(rng.integers(2)), bool(rng.integers(2)))
            for i in range(200)
        ]
        groups = {"s0": "obj_a", "s1": "obj_b", "s2": "obj_a"}
        out = confusion_by(records, groups)
        total = out["obj_a"] + out["obj_b"]
        overall = out["Overall"]
        assert (total.tp, total.tn, total.fp, total.fn) == (
            overall.tp, overall.tn, overall.fp, overall.fn,
        )

    def test_missing_gt_rejected(self):
        with pytest.raises(InvalidInputError):
            confusion([rec("s", 0, True, None)])


class TestFirstDetectionOffset:
    def test_early_detection_negative(self):
        records = [rec("s", i, i >= 10, i >= 14) for i in range(20)]
        assert first_detection_offset(records) == -4

    def test_aligned_zero(self):
        records = [rec("s", i, i >= 5, i >= 5) for i in range(10)]
        assert first_detection_offset(records) == 0

    def test_no_detection_excluded(self):
        records = [rec("s", i, False, i >= 5) for i in range(10)]
        assert first_detection_offset(records) is None

    def test_requires_gt_positive(self):
        records = [rec("s", i, False, False) for i in range(5)]
        with pytest.raises(InvalidInputError):
            first_detection_offset(records)


class TestCorrelate:
    def test_exact_line(self):
        x = np.arange(10.0)
        out = correlate(x, 2.0 * x + 1.0)
        assert out.pearson_r == pytest.approx(1.0, abs=1e-12)
        assert out.slope == pytest.approx(2.0, abs=1e-12)
        assert out.intercept == pytest.approx(1.0, abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(InvalidInputError):
            correlate([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])

    def test_matches_covariance_formula_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rng.normal(size=30)
            y = rng.normal(size=30) + 0.5 * x
            out = correlate(x, y)
            r_oracle = np.corrcoef(x, y)[0, 1]
            slope_oracle, intercept_oracle = np.polyfit(x, y, 1)
            assert abs(out.pearson_r - r_oracle) < 1e-12
            assert abs(out.slope - slope_oracle) < 1e-10
            assert abs(out.intercept - intercept_oracle) < 1e-10

    def test_too_few_points(self):
        with pytest.raises(InvalidInputError):
            correlate([1.0], [2.0])


class TestImpliedPositiveFraction:
    def test_reference_overall_row(self):
        # consistency identity on an externally reported accuracy row
        p = implied_positive_fraction(91.8, 84.3, 89.3)
        assert abs(p - 2.0 / 3.0) < 0.01

    def test_exact_composition(self):
        # p * TP% + (1-p) * TN% reproduces the accuracy
        p = implied_positive_fraction(90.0, 80.0, 87.0)
        assert p == pytest.approx(0.7, abs=1e-12)

    def test_degenerate_row_rejected(self):
        with pytest.raises(InvalidInputError):
            implied_positive_fraction(80.0, 80.0, 80.0)


class TestExports:
    def test_distributions_sentinel_only_rows(self, tmp_path):
        records = [rec("s", i, False, False, eps=-1.0, vol=0.0) for i in range(5)]
        path = tmp_path / "d.csv"
        export_distributions(records, path)
        lines = path.read_text().strip().splitlines()
        assert lines == ["metric,gt,value"]

    def test_distributions_row_count(self, tmp_path):
        records = [
            rec("s", 0, True, True, eps=0.05, vol=0.03),
            rec("s", 1, False, False, eps=-1.0, vol=0.0),
            rec("s", 2, True, True, eps=0.0, vol=0.01),  # eps row + vol row
        ]
        path = tmp_path / "d.csv"
        export_distributions(records, path)
        rows = list(csv.DictReader(path.open()))
        n_eps = sum(1 for r in records if r.epsilon != -1.0)
        n_vol = sum(1 for r in records if r.volume != 0.0)
        assert len(rows) == n_eps + n_vol == 4

    def test_timeseries_skips_undetected(self, tmp_path):
        records = [rec("s", i, False, i >= 3) for i in range(6)]
        path = tmp_path / "t.csv"
        assert export_timeseries(records, path) is True
        assert path.read_text().strip().splitlines() == ["frame_offset,epsilon,volume"]

    def test_timeseries_offset_zero_at_onset(self, tmp_path):
        records = [
            rec("s", i, i >= 3, i >= 3, eps=0.1 if i >= 3 else -1.0, vol=0.2 if i >= 3 else 0.0)
            for i in range(6)
        ]
        path = tmp_path / "t.csv"
        export_timeseries(records, path)
        rows = list(csv.DictReader(path.open()))
        assert rows[0]["frame_offset"] == "0"
        assert len(rows) == 3

    def test_timeseries_without_gt_positive(self, tmp_path):
        records = [rec("s", i, True, False) for i in range(3)]
        assert export_timeseries(records, tmp_path / "t.csv") is False

    def test_frame_records_csv(self, tmp_path):
        records = [rec("s", 0, True, None, eps=0.25, vol=0.125)]
        path = tmp_path / "f.csv"
        write_frame_records(records, path)
        rows = list(csv.DictReader(path.open()))
        assert rows[0]["epsilon"] == "0.25"
        assert rows[0]["gt"] == ""
        assert rows[0]["detected"] == "1"


class TestEvaluateDataset:
    def test_writes_reports(self, dataset_dir):
        for k in range(2):
            doc = minimal_sequence_doc(n_frames=2)
            doc["sequence_id"] = f"seq{k}"
            doc["subject_id"] = f"sub{k}"
            write_doc(dataset_dir / f"seq{k}.json", doc)
        out = dataset_dir / "out"
        report = evaluate_dataset(
            sorted(dataset_dir.glob("seq*.json")), ContactParams(), out, threads=2
        )
        assert (out / "frames.csv").exists()
        assert (out / "report_by_object.csv").exists()
        assert (out / "report_by_subject.csv").exists()
        assert report.by_object is not None
        assert report.by_object["Overall"].total == 4

    def test_no_gt_skips_reports(self, dataset_dir):
        doc = minimal_sequence_doc(n_frames=2, gt=None)
        write_doc(dataset_dir / "seq0.json", doc)
        out = dataset_dir / "out"
        report = evaluate_dataset(
            [dataset_dir / "seq0.json"], ContactParams(), out, threads=1
        )
        assert (out / "frames.csv").exists()
        assert not (out / "report_by_object.csv").exists()
        assert report.by_object is None
        assert report.notices

    def test_duplicate_sequence_ids_rejected(self, dataset_dir):
        doc = minimal_sequence_doc()
        write_doc(dataset_dir / "a.json", doc)
        write_doc(dataset_dir / "b.json", doc)
        with pytest.raises(InvalidInputError):
            evaluate_dataset(
                [dataset_dir / "a.json", dataset_dir / "b.json"],
                ContactParams(),
                dataset_dir / "out",
            )
