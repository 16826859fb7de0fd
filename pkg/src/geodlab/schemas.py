"""JSON schema dictionaries for every file format the CLI reads or writes.

The canonical definitions live here (importable at runtime for validation);
``scripts/export_schemas.py`` writes them under ``schemas/<version>/`` at the
repository root, and a test pins the exported copies to these dictionaries.
"""

from __future__ import annotations

SCHEMA_VERSION = "v1"

_POSITIVE_NUMBER = {"type": "number", "exclusiveMinimum": 0}

MANIFOLD_SCHEMA = {
    "$id": f"{SCHEMA_VERSION}/manifold",
    "type": "object",
    "properties": {
        "kind": {"enum": ["round_sphere", "ellipsoid", "flat_torus",
                          "torus_of_revolution"]},
        "params": {"type": "array", "items": _POSITIVE_NUMBER, "minItems": 1},
        "delta": _POSITIVE_NUMBER,
    },
    "required": ["kind", "params"],
    "additionalProperties": False,
}

POLYGON_SCHEMA = {
    "$id": f"{SCHEMA_VERSION}/polygon",
    "type": "object",
    "properties": {
        "manifold": MANIFOLD_SCHEMA,
        "vertices": {
            "type": "array",
            "minItems": 3,
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        },
        "homotopy_class": {"type": "array", "items": {"type": "integer"}},
    },
    "required": ["manifold", "vertices"],
    "additionalProperties": False,
}

GEODESIC_SCHEMA = {
    "$id": f"{SCHEMA_VERSION}/geodesic",
    "type": "object",
    "properties": {
        "polygon": POLYGON_SCHEMA,
        "length": {"type": "number"},
        "grad_norm": {"type": "number"},
        "method": {"enum": ["minimize", "sweepout", "newton", "manual"]},
        "converged": {"type": "boolean"},
    },
    "required": ["polygon", "length", "grad_norm", "method", "converged"],
    "additionalProperties": False,
}

SPECTRAL_SCHEMA = {
    "$id": f"{SCHEMA_VERSION}/spectral",
    "type": "object",
    "properties": {
        "index": {"type": "integer", "minimum": 0},
        "nullity": {"type": "integer", "minimum": 0},
        "poincare_matrix": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}},
        },
        "eigenvalues": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"},
                      "minItems": 2, "maxItems": 2},
        },
        "orientation_preserving": {"type": "boolean"},
        "bott_samples": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "z_arg": {"type": "number"},
                    "lambda": {"type": "integer", "minimum": 0},
                    "n": {"type": "integer", "minimum": 0},
                },
                "required": ["z_arg", "lambda", "n"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["index", "nullity", "poincare_matrix", "eigenvalues",
                 "orientation_preserving", "bott_samples"],
    "additionalProperties": False,
}

_COMMON_CONFIG = {
    "output": {"type": "string"},
    "seed": {"type": "integer"},
    "threads": {"type": "integer", "minimum": 1},
}

_MANIFOLD_CONFIG = {
    "manifold": {"type": "string"},
    "params": {"type": "array", "items": _POSITIVE_NUMBER},
    "delta": _POSITIVE_NUMBER,
}

CONFIG_SCHEMAS = {
    "find": {
        "$id": f"{SCHEMA_VERSION}/config-find",
        "type": "object",
        "properties": {
            **_COMMON_CONFIG,
            **_MANIFOLD_CONFIG,
            "method": {"enum": ["minimize", "sweepout", "newton"]},
            "n": {"type": "integer", "minimum": 3},
            "family_size": {"type": "integer", "minimum": 2},
            "grad_tol": _POSITIVE_NUMBER,
            "max_iters": {"type": "integer", "minimum": 1},
            "class": {"type": "array", "items": {"type": "integer"}},
            "seed_polygon": {"type": "string"},
            "length_bound": _POSITIVE_NUMBER,
        },
        "required": ["manifold", "params", "method"],
        "additionalProperties": False,
    },
    "spectrum": {
        "$id": f"{SCHEMA_VERSION}/config-spectrum",
        "type": "object",
        "properties": {
            **_COMMON_CONFIG,
            "input": {"type": "string"},
            "grid": {"type": "integer", "minimum": 8},
        },
        "required": ["input"],
        "additionalProperties": False,
    },
    "iterates": {
        "$id": f"{SCHEMA_VERSION}/config-iterates",
        "type": "object",
        "properties": {
            **_COMMON_CONFIG,
            "input": {"type": "string"},
            "n_max": {"type": "integer", "minimum": 1},
            "mode": {"enum": ["bott", "direct", "both"]},
            "prime": {"type": "boolean"},
        },
        "required": ["input"],
        "additionalProperties": False,
    },
    "series": {
        "$id": f"{SCHEMA_VERSION}/config-series",
        "type": "object",
        "properties": {
            **_COMMON_CONFIG,
            "space": {"type": "string"},
            "n": {"type": "integer", "minimum": 2},
            "degree": {"type": "integer", "minimum": 0},
        },
        "required": ["space", "n", "degree"],
        "additionalProperties": False,
    },
    "types": {
        "$id": f"{SCHEMA_VERSION}/config-types",
        "type": "object",
        "properties": {
            **_COMMON_CONFIG,
            "s": {"type": "integer", "minimum": 1},
            "p": {"anyOf": [{"type": "integer", "minimum": 2},
                            {"const": "rational"}]},
            "index": {
                "type": "object",
                "patternProperties": {r"^[0-9]+$": {"type": "integer", "minimum": 0}},
                "additionalProperties": False,
            },
        },
        "required": ["s", "index"],
        "additionalProperties": False,
    },
    "check-morse": {
        "$id": f"{SCHEMA_VERSION}/config-check-morse",
        "type": "object",
        "properties": {
            **_COMMON_CONFIG,
            "input": {"type": "string"},
            "r_star": {"type": "integer", "minimum": 0},
        },
        "required": ["input"],
        "additionalProperties": False,
    },
}

ALL_SCHEMAS = {
    "manifold": MANIFOLD_SCHEMA,
    "polygon": POLYGON_SCHEMA,
    "geodesic": GEODESIC_SCHEMA,
    "spectral": SPECTRAL_SCHEMA,
    **{f"config-{k}": v for k, v in CONFIG_SCHEMAS.items()},
}
