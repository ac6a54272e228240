"""JSON model configuration and deterministic number formatting."""

from __future__ import annotations

import json
import math
from typing import Any, Dict

import jsonschema

from .distributions import DistributionSpec
from .exponent import ModelParams, canonical_params

_LAW = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["exponential"]},
        "rate": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["kind", "rate"],
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "c": {"type": "number", "exclusiveMinimum": 0},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "lambda0": {"type": "number", "exclusiveMinimum": 0},
        "u": {"type": "number", "minimum": 0},
        "claims": _LAW,
        "shocks": _LAW,
    },
    "required": ["c", "rho", "delta", "lambda0", "u", "claims", "shocks"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def params_from_dict(data: Dict[str, Any], unsafe: bool = False) -> ModelParams:
    try:
        jsonschema.validate(data, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from None
    return ModelParams(
        c=float(data["c"]), rho=float(data["rho"]), delta=float(data["delta"]),
        lambda0=float(data["lambda0"]), u=float(data["u"]),
        claim_dist=DistributionSpec.from_dict(data["claims"]),
        shock_dist=DistributionSpec.from_dict(data["shocks"]),
        unsafe=unsafe,
    )


def params_to_dict(params: ModelParams) -> Dict[str, Any]:
    return {
        "c": params.c, "rho": params.rho, "delta": params.delta,
        "lambda0": params.lambda0, "u": params.u,
        "claims": params.claim_dist.to_dict(), "shocks": params.shock_dist.to_dict(),
    }


def load_params(path: str, unsafe: bool = False) -> ModelParams:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return params_from_dict(data, unsafe)


def canonical_config() -> Dict[str, Any]:
    return params_to_dict(canonical_params())


def fmt(x: float) -> str:
    """17 significant digits, which round-trips any double."""
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float printed by :func:`fmt`; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item(), indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
