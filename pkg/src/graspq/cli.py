"""Command-line interface.

Exit codes are the process-level contract: 0 success, 1 usage error,
2 input/parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contacts import ContactParams
from .detector import FrameInput, MeshRegistry, evaluate_frame
from .errors import ConfigurationError, GraspQError, NumericalError, ParseError
from .evaluation import evaluate_dataset, parse_hand_shape, parse_pose, _require, _vector
from .hand import HandPose
from .wrench import convex_hull_6d, epsilon_metric, read_wrenches, volume_metric

MESH_DIR_ENV = "GRASPQ_MESH_DIR"


@dataclass
class Config:
    """Runtime configuration; a missing or empty file means all defaults."""

    delta: float = 0.003
    dedup_radius: float = 0.008
    mu: float = 0.8
    cone_edges: int = 8
    torque_scale: str = "inverse_max_radius"  # or "fixed"
    lambda_fixed: float = 1.0
    tau_epsilon: float = 0.0
    tau_volume: float = 0.0
    mesh_dir: str | None = None
    mesh_scale: float = 1.0
    rest_skeleton: str | None = None
    threads: int | None = None

    _FIELD_MAP = {
        "delta": "delta",
        "dedup_radius": "dedup_radius",
        "mu": "mu",
        "cone_edges": "cone_edges",
        "torque_scale": "torque_scale",
        "lambda": "lambda_fixed",
        "tau_epsilon": "tau_epsilon",
        "tau_volume": "tau_volume",
        "mesh_dir": "mesh_dir",
        "mesh_scale": "mesh_scale",
        "rest_skeleton": "rest_skeleton",
        "threads": "threads",
    }

    @classmethod
    def load(cls, path) -> "Config":
        cfg = cls()
        if path is None:
            return cfg
        try:
            text = Path(path).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise IOError(f"cannot read config {path}: {exc}") from exc
        if not text:
            return cfg
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", str(path)) from exc
        if not isinstance(doc, dict):
            raise ParseError("config must be a JSON object", str(path))
        for key, value in doc.items():
            if key not in cls._FIELD_MAP:
                raise ParseError(f"unknown config key {key!r}", str(path))
            setattr(cfg, cls._FIELD_MAP[key], value)
        if cfg.torque_scale not in ("inverse_max_radius", "fixed"):
            raise ParseError(
                "torque_scale must be 'inverse_max_radius' or 'fixed'", str(path)
            )
        return cfg

    def contact_params(self) -> ContactParams:
        return ContactParams(
            tolerance=float(self.delta),
            dedup_radius=float(self.dedup_radius),
            mu=float(self.mu),
            cone_edges=int(self.cone_edges),
        )

    def torque_scale_value(self) -> float | None:
        """None selects the per-object 1 / max_radius normalization."""
        return float(self.lambda_fixed) if self.torque_scale == "fixed" else None

    def skeleton(self):
        """Rest skeleton override, or None for the bundled table."""
        if self.rest_skeleton is None:
            return None
        from .hand import load_rest_skeleton

        return load_rest_skeleton(self.rest_skeleton)

    def resolve_mesh_dir(self) -> Path | None:
        if self.mesh_dir:
            return Path(self.mesh_dir)
        env = os.environ.get(MESH_DIR_ENV)
        return Path(env) if env else None


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="graspq", description="Grasp-quality contact detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="evaluate a single scene file")
    p_detect.add_argument("--scene", required=True, help="scene JSON file")
    p_detect.add_argument("--config", default=None, help="config JSON file")

    p_eval = sub.add_parser("eval", help="evaluate a dataset directory")
    p_eval.add_argument("--dataset", required=True, help="directory of sequence files")
    p_eval.add_argument("--config", default=None, help="config JSON file")
    p_eval.add_argument("--out", required=True, help="output directory for reports")
    p_eval.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (default: config value or all cores)",
    )

    p_hull = sub.add_parser("hull", help="metrics for a wrench CSV file")
    p_hull.add_argument("--wrenches", required=True, help="CSV with 6 wrench columns")
    return parser


def _load_scene(path, cfg: Config):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IOError(f"cannot read scene {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", str(path)) from exc
    loc = str(path)
    shape = parse_hand_shape(_require(doc, "hand_shape", loc, dict))
    theta = _vector(doc, "hand_pose", loc, 48)
    trans = _vector(doc, "hand_trans", loc, 3)
    try:
        pose = HandPose(np.asarray(theta), np.asarray(trans))
    except GraspQError as exc:
        raise ParseError(str(exc), f"{loc}.hand_pose") from exc
    obj_pose = parse_pose(_require(doc, "object_pose", loc, dict), f"{loc}.object_pose")
    mesh_ref = str(_require(doc, "object_mesh", loc))
    mesh_path = Path(mesh_ref)
    if not mesh_path.is_absolute():
        local = Path(path).parent / mesh_path
        if local.exists():
            mesh_path = local
        else:
            mesh_dir = cfg.resolve_mesh_dir()
            if mesh_dir is not None and (mesh_dir / mesh_ref).exists():
                mesh_path = mesh_dir / mesh_ref
            else:
                mesh_path = local
    return FrameInput(shape, pose, mesh_ref, obj_pose), mesh_path


def cmd_detect(args) -> int:
    cfg = Config.load(args.config)
    frame, mesh_path = _load_scene(args.scene, cfg)
    registry = MeshRegistry()
    registry.register_file(frame.object_mesh_id, mesh_path, scale=cfg.mesh_scale)
    decision = evaluate_frame(
        frame,
        cfg.contact_params(),
        registry,
        torque_scale=cfg.torque_scale_value(),
        tau_epsilon=cfg.tau_epsilon,
        tau_volume=cfg.tau_volume,
        skeleton=cfg.skeleton(),
    )
    json.dump(
        {
            "epsilon": decision.metrics.epsilon,
            "volume": decision.metrics.volume,
            "in_contact": decision.in_contact,
            "contact_count": decision.contact_count,
        },
        sys.stdout,
    )
    sys.stdout.write("\n")
    return 0


def _sequence_files(dataset_dir: Path):
    """Sequence JSONs in the directory (files without sequence_id skipped)."""
    if not dataset_dir.is_dir():
        raise IOError(f"dataset directory {dataset_dir} does not exist")
    picked, skipped = [], []
    for path in sorted(dataset_dir.glob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            skipped.append(path.name)
            continue
        if isinstance(doc, dict) and "sequence_id" in doc:
            picked.append(path)
        else:
            skipped.append(path.name)
    return picked, skipped


def cmd_eval(args) -> int:
    cfg = Config.load(args.config)
    dataset = Path(args.dataset)
    paths, skipped = _sequence_files(dataset)
    if skipped:
        print("ignoring non-sequence files: %s" % ", ".join(skipped), file=sys.stderr)
    if not paths:
        raise IOError(f"no sequence files found in {dataset}")
    threads = args.threads or cfg.threads or os.cpu_count() or 1
    report = evaluate_dataset(
        paths,
        cfg.contact_params(),
        args.out,
        threads=int(threads),
        torque_scale=cfg.torque_scale_value(),
        tau_epsilon=cfg.tau_epsilon,
        tau_volume=cfg.tau_volume,
        mesh_scale=cfg.mesh_scale,
        skeleton=cfg.skeleton(),
    )
    for notice in report.notices:
        print(notice, file=sys.stderr)
    if report.by_object is not None:
        cm = report.by_object["Overall"]
        print(
            "overall frames=%d tp_pct=%.1f tn_pct=%.1f fp_pct=%.1f fn_pct=%.1f "
            "accuracy_pct=%.1f"
            % (cm.total, cm.tp_pct, cm.tn_pct, cm.fp_pct, cm.fn_pct, cm.accuracy_pct)
        )
    else:
        print("no ground truth: wrote frames.csv only")
    return 0


def cmd_hull(args) -> int:
    wrenches = read_wrenches(args.wrenches)
    hull = convex_hull_6d(wrenches)
    json.dump(
        {
            "epsilon": epsilon_metric(hull),
            "volume": volume_metric(hull),
            "facet_count": hull.facet_count,
            "full_dimensional": hull.full_dimensional,
        },
        sys.stdout,
    )
    sys.stdout.write("\n")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"detect": cmd_detect, "eval": cmd_eval, "hull": cmd_hull}
    try:
        return handlers[args.command](args)
    except (ParseError, ConfigurationError, IOError) as exc:
        print(f"graspq: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"graspq: numerical failure: {exc}", file=sys.stderr)
        return 3
    except GraspQError as exc:
        print(f"graspq: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
