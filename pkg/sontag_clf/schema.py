"""
Published JSON schema of experiment config files.
"""

_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
}

_INLINE_SYSTEM = {
    "type": "object",
    "required": ["n", "m", "f", "G"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "f": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "G": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        },
    },
}

_CATALOG_SYSTEM = {
    "type": "object",
    "required": ["catalog"],
    "additionalProperties": False,
    "properties": {"catalog": {"type": "string"}},
}

CHECKS = ("clf_check", "lambda_identity", "hjb_residuals", "value_consistency")

EXPERIMENT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ExperimentConfig",
    "type": "object",
    "required": ["system", "clf", "initial_states"],
    "additionalProperties": False,
    "properties": {
        "system": {"oneOf": [{"type": "string"}, _CATALOG_SYSTEM, _INLINE_SYSTEM]},
        "clf": {"type": "string", "minLength": 1},
        "weights": {
            "type": "object",
            "required": ["Q", "R"],
            "additionalProperties": False,
            "properties": {"Q": _MATRIX, "R": _MATRIX},
        },
        "initial_states": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["rk4_fixed", "rk45_adaptive"]},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "stop_norm": {"type": "number", "minimum": 0},
                "max_steps": {"type": "integer", "minimum": 1},
                "initial_step": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "r_min": {"type": "number", "exclusiveMinimum": 0},
                "r_max": {"type": "number", "exclusiveMinimum": 0},
                "eps_b": {"type": "number", "minimum": 0},
            },
        },
        "checks": {
            "type": "array",
            "uniqueItems": True,
            "items": {"enum": list(CHECKS)},
        },
        "output_dir": {"type": "string", "minLength": 1},
        "formats": {
            "type": "array",
            "uniqueItems": True,
            "minItems": 1,
            "items": {"enum": ["csv", "parquet"]},
        },
        "workers": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
}
