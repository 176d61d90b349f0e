"""Raw recording -> sequence interchange conversion.

Raw layout (one directory per sequence):

    <root>/<subject>/<sequence>/meta.yml
        num_frames: int
        ycb_ids: [int, ...]        # objects present in the scene
        ycb_grasp_ind: int         # index into ycb_ids of the grasped one
        mano_sides: ["right"]      # or ["left"]
    <root>/<subject>/<sequence>/pose.npz
        pose_m: float32 (F, 1, 51) # 48 hand pose values + wrist translation
        pose_y: float32 (F, K, 7)  # per object: wxyz quaternion + translation

Pose channels pass through verbatim; floats are serialized at 9
significant digits, which reproduces float32 inputs exactly on re-read.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .schema import validate_sequence
from .ycb import YCB_CLASSES

POSE_LEN = 48


class ConversionError(Exception):
    pass


class LeftHandSequence(ConversionError):
    """Raised for left-handed recordings, which are skipped by policy."""


@dataclass(frozen=True)
class RawRecording:
    root: Path
    subject: str
    sequence: str

    @property
    def directory(self) -> Path:
        return self.root / self.subject / self.sequence

    def load(self):
        meta_path = self.directory / "meta.yml"
        pose_path = self.directory / "pose.npz"
        if not meta_path.exists():
            raise ConversionError(f"missing {meta_path}")
        if not pose_path.exists():
            raise ConversionError(f"missing {pose_path}")
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = yaml.safe_load(fh)
        with np.load(pose_path) as data:
            pose_m = np.asarray(data["pose_m"])
            pose_y = np.asarray(data["pose_y"])
        return meta, pose_m, pose_y


def _fmt(value: float) -> float:
    """Round-trip a float through 9 significant digits."""
    return float("%.9g" % float(value))


def read_labels(path) -> dict:
    """Label CSV with columns (frame, gt_contact) -> {frame: bool}."""
    labels = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].strip().lower() == "frame":
                continue
            if len(row) < 2:
                raise ConversionError(f"{path}:{lineno}: expected frame,gt_contact")
            try:
                labels[int(row[0])] = bool(int(row[1]))
            except ValueError as exc:
                raise ConversionError(f"{path}:{lineno}: {exc}") from exc
    return labels


def convert_sequence(
    raw: RawRecording,
    out_path,
    mesh_dir,
    labels_path=None,
    global_scale: float = 1.0,
    segment_scales=None,
    notice=print,
) -> Path | None:
    """Write one sequence interchange JSON; returns the output path.

    Left-handed recordings are skipped (returns None after a notice). The
    grasped object's mesh must exist as <mesh_dir>/<ycb_name>.obj.
    """
    meta, pose_m, pose_y = raw.load()
    sides = meta.get("mano_sides") or []
    if sides and sides[0] != "right":
        notice(
            f"skipping {raw.subject}/{raw.sequence}: left-handed sequence "
            "(only right-handed grasps are supported)"
        )
        raise LeftHandSequence(f"{raw.subject}/{raw.sequence}")

    num_frames = int(meta["num_frames"])
    ycb_ids = list(meta["ycb_ids"])
    grasp_ind = int(meta["ycb_grasp_ind"])
    if not 0 <= grasp_ind < len(ycb_ids):
        raise ConversionError(f"ycb_grasp_ind {grasp_ind} out of range")
    ycb_id = int(ycb_ids[grasp_ind])
    name = YCB_CLASSES.get(ycb_id)
    if name is None:
        raise ConversionError(f"unknown YCB class id {ycb_id}")
    mesh_path = Path(mesh_dir) / f"{name}.obj"
    if not mesh_path.exists():
        raise ConversionError(
            f"no mesh for YCB object {name!r}: expected {mesh_path}"
        )

    if pose_m.shape != (num_frames, 1, POSE_LEN + 3):
        raise ConversionError(
            f"pose_m has shape {pose_m.shape}, expected ({num_frames}, 1, {POSE_LEN + 3})"
        )
    if pose_y.shape[:2] != (num_frames, len(ycb_ids)) or pose_y.shape[2] != 7:
        raise ConversionError(
            f"pose_y has shape {pose_y.shape}, expected ({num_frames}, {len(ycb_ids)}, 7)"
        )

    labels = read_labels(labels_path) if labels_path else None
    if segment_scales is None:
        segment_scales = [1.0] * 15
    if len(segment_scales) != 15:
        raise ConversionError("segment_scales needs 15 values")
    if global_scale == 1.0 and all(s == 1.0 for s in segment_scales):
        notice(
            "note: dataset blend-shape parameters are reduced to default "
            "skeletal scales; pass --global-scale/--segment-scales to supply "
            "measured values"
        )

    out_path = Path(out_path)
    mesh_ref = os.path.relpath(mesh_path, out_path.parent)
    if mesh_ref.startswith(".."):
        mesh_ref = str(mesh_path.resolve())

    frames = []
    for f in range(num_frames):
        hand = pose_m[f, 0]
        obj = pose_y[f, grasp_ind]
        frame = {
            "index": f,
            "hand_pose": [_fmt(v) for v in hand[:POSE_LEN]],
            "hand_trans": [_fmt(v) for v in hand[POSE_LEN:]],
            "object_pose": {
                "rotation": [_fmt(v) for v in obj[:4]],
                "translation": [_fmt(v) for v in obj[4:]],
            },
        }
        if labels is not None:
            frame["gt_contact"] = labels.get(f, False)
        frames.append(frame)

    doc = {
        "sequence_id": f"{raw.subject}_{raw.sequence}",
        "subject_id": raw.subject,
        "object_id": name,
        "object_mesh": mesh_ref,
        "hand_shape": {
            "global_scale": float(global_scale),
            "segment_scales": [float(s) for s in segment_scales],
            "finger_radii": [0.008, 0.008, 0.008, 0.008, 0.010],
        },
        "frames": frames,
    }
    validate_sequence(doc)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return out_path
