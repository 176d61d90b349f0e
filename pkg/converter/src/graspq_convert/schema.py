"""JSON Schema for the sequence interchange format (the wire contract
between this converter and the grasp evaluation pipeline)."""

import jsonschema

_VEC = lambda n: {  # noqa: E731
    "type": "array", "items": {"type": "number"}, "minItems": n, "maxItems": n,
}

SEQUENCE_SCHEMA = {
    "type": "object",
    "required": [
        "sequence_id", "subject_id", "object_id", "object_mesh", "hand_shape", "frames",
    ],
    "properties": {
        "sequence_id": {"type": "string", "minLength": 1},
        "subject_id": {"type": "string", "minLength": 1},
        "object_id": {"type": "string", "minLength": 1},
        "object_mesh": {"type": "string", "minLength": 1},
        "hand_shape": {
            "type": "object",
            "required": ["global_scale", "segment_scales", "finger_radii"],
            "properties": {
                "global_scale": {"type": "number", "exclusiveMinimum": 0},
                "segment_scales": _VEC(15),
                "finger_radii": _VEC(5),
            },
        },
        "frames": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["index", "hand_pose", "hand_trans", "object_pose"],
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "hand_pose": _VEC(48),
                    "hand_trans": _VEC(3),
                    "object_pose": {
                        "type": "object",
                        "required": ["rotation", "translation"],
                        "properties": {
                            "rotation": _VEC(4),
                            "translation": _VEC(3),
                        },
                    },
                    "gt_contact": {"type": "boolean"},
                },
            },
        },
    },
}


def validate_sequence(doc) -> None:
    jsonschema.validate(doc, SEQUENCE_SCHEMA)
