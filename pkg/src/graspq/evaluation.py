"""Sequence evaluation: detection vs ground truth, accuracy tables and
metric exports.

A sequence interchange file is JSON with object/subject ids, a mesh path,
a hand shape and per-frame poses plus an optional boolean ground-truth
contact channel. The harness runs the detector over every frame, then
aggregates confusion tables per object / per subject, first-detection
offsets and metric distributions, all emitted as CSV.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contacts import ContactParams
from .detector import FrameInput, MeshRegistry, evaluate_frame
from .errors import InvalidInputError, ParseError
from .geometry import Pose
from .hand import HandPose, HandShape

FLOAT_FMT = "%.9g"


@dataclass(frozen=True)
class SequenceFrame:
    index: int
    hand_pose: HandPose
    object_pose: Pose
    gt_contact: bool | None


@dataclass(frozen=True)
class Sequence:
    sequence_id: str
    subject_id: str
    object_id: str
    mesh_path: Path
    hand_shape: HandShape
    frames: list

    @property
    def has_gt(self) -> bool:
        return all(f.gt_contact is not None for f in self.frames)


@dataclass(frozen=True)
class FrameRecord:
    sequence_id: str
    frame: int
    epsilon: float
    volume: float
    detected: bool
    gt: bool | None


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def tp_pct(self) -> float:
        pos = self.tp + self.fn
        return 100.0 * self.tp / pos if pos else 0.0

    @property
    def fn_pct(self) -> float:
        pos = self.tp + self.fn
        return 100.0 * self.fn / pos if pos else 0.0

    @property
    def tn_pct(self) -> float:
        neg = self.tn + self.fp
        return 100.0 * self.tn / neg if neg else 0.0

    @property
    def fp_pct(self) -> float:
        neg = self.tn + self.fp
        return 100.0 * self.fp / neg if neg else 0.0

    @property
    def accuracy_pct(self) -> float:
        return 100.0 * (self.tp + self.tn) / self.total if self.total else 0.0

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


# ---------------------------------------------------------------------------
# loading


def _require(doc, key, path, kind=None):
    if key not in doc:
        raise ParseError(f"missing field {key!r}", path)
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"field {key!r} has wrong type", f"{path}.{key}")
    return value


def _vector(doc, key, path, length):
    value = _require(doc, key, path, list)
    if len(value) != length:
        raise ParseError(
            f"expected {length} values, got {len(value)}", f"{path}.{key}"
        )
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ParseError("non-numeric entry", f"{path}.{key}") from None


def parse_hand_shape(doc, path="hand_shape") -> HandShape:
    try:
        return HandShape(
            global_scale=float(_require(doc, "global_scale", path)),
            segment_scales=np.asarray(_vector(doc, "segment_scales", path, 15)),
            finger_radii=np.asarray(_vector(doc, "finger_radii", path, 5)),
        )
    except InvalidInputError as exc:
        raise ParseError(str(exc), path) from exc


def parse_pose(doc, path) -> Pose:
    rotation = _vector(doc, "rotation", path, 4)
    translation = _vector(doc, "translation", path, 3)
    try:
        return Pose(np.asarray(rotation), np.asarray(translation))
    except InvalidInputError as exc:
        raise ParseError(str(exc), path) from exc


def load_sequence(path) -> Sequence:
    """Load and validate one interchange sequence file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IOError(f"cannot read sequence file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", str(path)) from exc

    sid = str(_require(doc, "sequence_id", str(path)))
    subject = str(_require(doc, "subject_id", str(path)))
    object_id = str(_require(doc, "object_id", str(path)))
    mesh = Path(str(_require(doc, "object_mesh", str(path))))
    if not mesh.is_absolute():
        mesh = path.parent / mesh
    shape = parse_hand_shape(_require(doc, "hand_shape", str(path), dict))

    frames = []
    raw_frames = _require(doc, "frames", str(path), list)
    last_index = None
    for i, fr in enumerate(raw_frames):
        fpath = f"frames[{i}]"
        if not isinstance(fr, dict):
            raise ParseError("frame must be an object", fpath)
        index = _require(fr, "index", fpath)
        if not isinstance(index, int):
            raise ParseError("index must be an integer", f"{fpath}.index")
        if last_index is not None and index <= last_index:
            raise ParseError(
                f"frame indices must be strictly increasing ({index} after {last_index})",
                f"{fpath}.index",
            )
        last_index = index
        theta = _vector(fr, "hand_pose", fpath, 48)
        trans = _vector(fr, "hand_trans", fpath, 3)
        try:
            hand_pose = HandPose(np.asarray(theta), np.asarray(trans))
        except InvalidInputError as exc:
            raise ParseError(str(exc), f"{fpath}.hand_pose") from exc
        obj_pose = parse_pose(
            _require(fr, "object_pose", fpath, dict), f"{fpath}.object_pose"
        )
        gt = fr.get("gt_contact")
        if gt is not None and not isinstance(gt, bool):
            raise ParseError("gt_contact must be a boolean", f"{fpath}.gt_contact")
        frames.append(SequenceFrame(index, hand_pose, obj_pose, gt))
    return Sequence(sid, subject, object_id, mesh, shape, frames)


# ---------------------------------------------------------------------------
# running


def run_sequence(
    seq: Sequence,
    params: ContactParams,
    registry: MeshRegistry,
    torque_scale: float | None = None,
    tau_epsilon: float = 0.0,
    tau_volume: float = 0.0,
    skeleton=None,
) -> list:
    """One FrameRecord per frame, in frame order."""
    records = []
    for frame in seq.frames:
        decision = evaluate_frame(
            FrameInput(seq.hand_shape, frame.hand_pose, seq.object_id, frame.object_pose),
            params,
            registry,
            torque_scale=torque_scale,
            tau_epsilon=tau_epsilon,
            tau_volume=tau_volume,
            skeleton=skeleton,
        )
        records.append(
            FrameRecord(
                seq.sequence_id,
                frame.index,
                decision.metrics.epsilon,
                decision.metrics.volume,
                decision.in_contact,
                frame.gt_contact,
            )
        )
    return records


# ---------------------------------------------------------------------------
# aggregation


def confusion(records) -> ConfusionMatrix:
    """Counts over records; every record must carry ground truth."""
    tp = tn = fp = fn = 0
    for r in records:
        if r.gt is None:
            raise InvalidInputError(
                f"record {r.sequence_id}:{r.frame} has no ground truth"
            )
        if r.gt and r.detected:
            tp += 1
        elif r.gt:
            fn += 1
        elif r.detected:
            fp += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, tn, fp, fn)


def confusion_by(records, group_of: dict) -> dict:
    """Per-group confusion matrices plus an 'Overall' row.

    `group_of` maps sequence_id to a group label (object or subject id).
    """
    grouped: dict = {}
    for r in records:
        grouped.setdefault(group_of[r.sequence_id], []).append(r)
    out = {g: confusion(rs) for g, rs in sorted(grouped.items())}
    overall = ConfusionMatrix(0, 0, 0, 0)
    for cm in out.values():
        overall = overall + cm
    out["Overall"] = overall
    return out


def first_detection_offset(records) -> int | None:
    """First detected frame minus first ground-truth contact frame.

    Returns None when the sequence never detects contact (the caller
    counts such exclusions). Requires at least one gt-positive frame.
    """
    gt_first = next((r.frame for r in records if r.gt), None)
    if gt_first is None:
        raise InvalidInputError("sequence has no ground-truth contact frame")
    det_first = next((r.frame for r in records if r.detected), None)
    if det_first is None:
        return None
    return det_first - gt_first


@dataclass(frozen=True)
class CorrelationResult:
    pearson_r: float
    slope: float
    intercept: float


def correlate(x, y) -> CorrelationResult:
    """Pearson correlation and least-squares line for paired samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInputError("inputs must be equal-length 1-D samples")
    if len(x) < 2:
        raise InvalidInputError("need at least two points")
    xm = x - x.mean()
    ym = y - y.mean()
    sxx = float(xm @ xm)
    syy = float(ym @ ym)
    if sxx == 0.0 or syy == 0.0:
        raise InvalidInputError("zero variance in input")
    sxy = float(xm @ ym)
    slope = sxy / sxx
    return CorrelationResult(
        pearson_r=sxy / math.sqrt(sxx * syy),
        slope=slope,
        intercept=float(y.mean() - slope * x.mean()),
    )


def implied_positive_fraction(tp_pct: float, tn_pct: float, accuracy_pct: float) -> float:
    """Positive-class share implied by a (TP%, TN%, accuracy%) report row.

    accuracy = p * TP% + (1 - p) * TN% solved for p; a consistency check
    for externally reported accuracy tables.
    """
    if tp_pct == tn_pct:
        raise InvalidInputError("row carries no class information (TP% == TN%)")
    return (accuracy_pct - tn_pct) / (tp_pct - tn_pct)


# ---------------------------------------------------------------------------
# CSV exports


def write_frame_records(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence_id", "frame", "epsilon", "volume", "detected", "gt"])
        for r in records:
            writer.writerow(
                [
                    r.sequence_id,
                    r.frame,
                    FLOAT_FMT % r.epsilon,
                    FLOAT_FMT % r.volume,
                    int(r.detected),
                    "" if r.gt is None else int(r.gt),
                ]
            )


def write_report(matrices: dict, path, group_column: str) -> None:
    """Accuracy table in the per-object / per-subject layout (1 decimal)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [group_column, "frames", "tp_pct", "tn_pct", "fp_pct", "fn_pct", "accuracy_pct"]
        )
        for group, cm in matrices.items():
            if group == "Overall":
                continue
            writer.writerow(_report_row(group, cm))
        writer.writerow(_report_row("Overall", matrices["Overall"]))


def _report_row(group, cm: ConfusionMatrix):
    return [
        group,
        cm.total,
        "%.1f" % cm.tp_pct,
        "%.1f" % cm.tn_pct,
        "%.1f" % cm.fp_pct,
        "%.1f" % cm.fn_pct,
        "%.1f" % cm.accuracy_pct,
    ]


def export_distributions(records, path) -> None:
    """Metric values split by ground truth, excluding sentinel values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "gt", "value"])
        for r in records:
            if r.epsilon != -1.0:
                writer.writerow(["epsilon", int(bool(r.gt)), FLOAT_FMT % r.epsilon])
            if r.volume != 0.0:
                writer.writerow(["volume", int(bool(r.gt)), FLOAT_FMT % r.volume])


def export_timeseries(records, path) -> bool:
    """Detected-contact frames only, indexed relative to ground-truth onset.

    Returns False (writing nothing) when the sequence has no gt-positive
    frame to anchor the offset.
    """
    gt_first = next((r.frame for r in records if r.gt), None)
    if gt_first is None:
        return False
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_offset", "epsilon", "volume"])
        for r in records:
            if r.detected:
                writer.writerow(
                    [r.frame - gt_first, FLOAT_FMT % r.epsilon, FLOAT_FMT % r.volume]
                )
    return True


# ---------------------------------------------------------------------------
# dataset orchestration


@dataclass
class DatasetReport:
    records: list
    by_object: dict | None
    by_subject: dict | None
    skipped_sequences: list
    notices: list


def evaluate_dataset(
    sequence_paths,
    params: ContactParams,
    out_dir,
    threads: int = 1,
    torque_scale: float | None = None,
    tau_epsilon: float = 0.0,
    tau_volume: float = 0.0,
    mesh_scale: float = 1.0,
    skeleton=None,
) -> DatasetReport:
    """Run every sequence, then write the full report bundle into out_dir.

    Outputs: frames.csv, report_by_object.csv, report_by_subject.csv,
    distributions.csv and one timeseries_<sequence_id>.csv per sequence
    with ground truth. Results are deterministic and independent of the
    thread count.
    """
    sequence_paths = sorted(Path(p) for p in sequence_paths)
    sequences = [load_sequence(p) for p in sequence_paths]
    ids = [s.sequence_id for s in sequences]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("duplicate sequence_id in dataset")

    registry = MeshRegistry()
    for seq in sequences:
        if seq.object_id not in registry:
            registry.register_file(seq.object_id, seq.mesh_path, scale=mesh_scale)

    def run(seq: Sequence):
        return run_sequence(
            seq,
            params,
            registry,
            torque_scale=torque_scale,
            tau_epsilon=tau_epsilon,
            tau_volume=tau_volume,
            skeleton=skeleton,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_sequence = list(pool.map(run, sequences))
    else:
        per_sequence = [run(seq) for seq in sequences]

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = [r for recs in per_sequence for r in recs]
    write_frame_records(records, out_dir / "frames.csv")

    notices = []
    with_gt = [s.sequence_id for s in sequences if s.has_gt]
    skipped = [s.sequence_id for s in sequences if not s.has_gt]
    if skipped:
        notices.append(
            "skipping accuracy reports for %d sequence(s) without ground truth: %s"
            % (len(skipped), ", ".join(skipped))
        )

    by_object = by_subject = None
    gt_records = [r for r in records if r.sequence_id in set(with_gt)]
    if gt_records:
        object_of = {s.sequence_id: s.object_id for s in sequences}
        subject_of = {s.sequence_id: s.subject_id for s in sequences}
        by_object = confusion_by(gt_records, object_of)
        by_subject = confusion_by(gt_records, subject_of)
        write_report(by_object, out_dir / "report_by_object.csv", "object")
        write_report(by_subject, out_dir / "report_by_subject.csv", "subject")
        export_distributions(gt_records, out_dir / "distributions.csv")
        for seq, recs in zip(sequences, per_sequence):
            if seq.has_gt:
                wrote = export_timeseries(
                    recs, out_dir / f"timeseries_{seq.sequence_id}.csv"
                )
                if not wrote:
                    notices.append(
                        f"sequence {seq.sequence_id}: no gt-positive frame, "
                        "timeseries skipped"
                    )
    elif not skipped:
        notices.append("dataset contains no sequences")
    return DatasetReport(records, by_object, by_subject, skipped, notices)
