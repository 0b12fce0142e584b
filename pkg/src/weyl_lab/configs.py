"""Loading, validation and canonical serialization of the JSON input files.

Three file kinds: symbol descriptions, perturbation descriptions and
experiment plans (which may reference the other two by path, resolved
relative to the plan file).  Reports embed a configuration digest: the
sha-256 of the canonical JSON (sorted keys, compact separators) of the fully
resolved request, so identical inputs are recognizable across runs and
machines.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .errors import ConfigError
from .geometry import SectorSpec
from .perturbation import PerturbationSpec
from .symbols import SymbolModel


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def config_digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays so json can serialize them."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise ConfigError(f"cannot serialize {type(obj).__name__} into a report")


def _read_json(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def load_symbol(source) -> SymbolModel:
    """SymbolModel from a path, a parsed dict, or an existing model."""
    if isinstance(source, SymbolModel):
        return source
    if isinstance(source, str):
        source = _read_json(source)
    return SymbolModel.from_json(source)


def load_perturbation(source) -> PerturbationSpec | None:
    if source is None or isinstance(source, PerturbationSpec):
        return source
    if isinstance(source, str):
        source = _read_json(source)
    return PerturbationSpec.from_json(source)


def load_sector(source) -> SectorSpec:
    if isinstance(source, SectorSpec):
        return source
    if isinstance(source, str):
        source = _read_json(source)
    return SectorSpec.from_json(source)


def load_plan(source, base_dir: str | None = None) -> dict:
    """Resolve a plan file into a flat dict with inline symbol/pert/sector objects.

    String values for "symbol"/"perturbation"/"sector(s)" are treated as
    paths relative to the plan file's directory.
    """
    if isinstance(source, str):
        base_dir = os.path.dirname(os.path.abspath(source))
        source = _read_json(source)
    if not isinstance(source, dict):
        raise ConfigError("plan must be a JSON object")
    plan = dict(source)

    def _resolve(value):
        if isinstance(value, str):
            path = value if os.path.isabs(value) else os.path.join(base_dir or ".", value)
            return _read_json(path)
        return value

    if "symbol" in plan:
        plan["symbol"] = _resolve(plan["symbol"])
    if plan.get("perturbation") is not None:
        plan["perturbation"] = _resolve(plan["perturbation"])
    if "sector" in plan:
        plan["sector"] = _resolve(plan["sector"])
    if "sectors" in plan:
        plan["sectors"] = [_resolve(s) for s in plan["sectors"]]
    return plan
