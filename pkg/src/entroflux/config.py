"""Run configuration: JSON schema plus semantic validation.

Every problem found is collected; :class:`ConfigurationError` carries the
full list in ``.errors``.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigurationError
from .models import MODEL_NAMES, MODEL_PARAMS, build_model

SCHEMA_VERSION = "entroflux/1"
JOBS = ("simulate", "lattice_compare", "certify", "feasibility_scan")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1}]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "schema": {"const": SCHEMA_VERSION},
    "job": {"enum": list(JOBS)},
    "model": _obj({"name": {"enum": list(MODEL_NAMES)}, "params": {"type": "object"}},
                  ["name"]),
    "entropy": _obj({"family": {"enum": ["logarithmic", "volume_filling", "population_power",
                                         "skt_log"]},
                     "c": _pos, "eps": {"type": "number", "minimum": 0}}),
    "grid": _obj({"M": {"type": "integer", "minimum": 2}, "L": _pos}),
    "time": _obj({"T": {"type": "number", "minimum": 0}, "tau": _pos}),
    "solver": _obj({"eps": {"type": "number", "minimum": 0}, "newton_tol": _pos,
                    "newton_max_iter": {"type": "integer", "minimum": 1},
                    "damping": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "max_halvings": {"type": "integer", "minimum": 0},
                    "fallback_eps": {"type": "number", "minimum": 0},
                    "max_fallbacks": {"type": "integer", "minimum": 0},
                    "flux_form": {"enum": ["face_average", "entropy"]}}),
    "ic": _obj({"kind": {"enum": ["constant", "step", "gaussian_bump", "perturbed_constant",
                                  "cosine"]},
                "params": _obj({"value": _vec, "left": _vec, "right": _vec, "x0": _num,
                                "base": _vec, "amplitude": _vec, "center": _num,
                                "width": _pos, "mode": _vec}),
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}}, ["kind"]),
    "output": _obj({"dir": {"type": "string"},
                    "snapshot_stride": {"type": "integer", "minimum": 1}}),
    "certify": _obj({"n_samples": {"type": "integer", "minimum": 1},
                     "margin": {"type": "number", "exclusiveMinimum": 0},
                     "seed": {"type": "integer", "minimum": 0},
                     "lower_bound": {"type": "boolean"}}),
    "lattice": _obj({"s": _pos, "beta": _pos,
                     "hs": {"type": "array", "items": _pos, "minItems": 2},
                     "T": _pos, "M_ref": {"type": "integer", "minimum": 2},
                     "tau_ref": _pos}),
    "feasibility": _obj({"params": {"type": "array",
                                    "items": {"type": "array", "items": _num,
                                              "minItems": 5, "maxItems": 5}},
                         "grid_resolution": {"type": "integer", "minimum": 64},
                         "random_count": {"type": "integer", "minimum": 0},
                         "random_seed": {"type": "integer", "minimum": 0}}),
}, ["schema"])


@dataclass
class RunConfig:
    job: str
    model_name: str
    model_params: dict
    entropy: dict
    M: int
    L: float
    T: float
    tau: float
    solver: dict
    ic_kind: str
    ic_params: dict
    seed: int
    out_dir: str
    snapshot_stride: int
    certify: dict
    lattice: dict
    feasibility: dict
    raw: dict = field(repr=False, default_factory=dict)
    sha256: str = ""

    def build_model(self):
        return build_model(self.model_name, _model_params(self.model_name, self.model_params))


def _model_params(name, params):
    p = dict(params)
    if name in ("skt", "power_population") and "alpha" in p:
        p["alpha"] = np.asarray(p["alpha"], dtype=float)
    return p


def _load(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    text = p.read_bytes()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from exc
    return data, hashlib.sha256(text).hexdigest()


def validate(data, job=None):
    """Return the list of all problems with a parsed JSON document."""
    errors, broken = [], set()
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for e in sorted(validator.iter_errors(data), key=lambda e: [str(x) for x in e.absolute_path]):
        path = list(e.absolute_path)
        where = "/".join(str(x) for x in path) or "<root>"
        errors.append(f"{where}: {e.message}")
        broken.add(str(path[0]) if path else "<root>")
    if not isinstance(data, dict):
        return errors
    # semantic checks only look at sections that passed the schema
    data = {k: v for k, v in data.items() if k not in broken}
    job = job or data.get("job")
    if job is None and "job" not in broken:
        errors.append("job: not given on the command line or in the config")
    elif data.get("job") not in (None, job):
        errors.append(f"job: config says {data['job']!r} but {job!r} was requested")
    if job in ("simulate", "certify") and "model" not in data and "model" not in broken:
        errors.append("model: required for this job")
    if job == "simulate":
        for key in ("grid", "time", "ic"):
            if key not in data and key not in broken:
                errors.append(f"{key}: required for simulate")
        if "time" in data and "tau" not in data["time"]:
            errors.append("time/tau: required for simulate")
    model = None
    if "model" in data:
        name = data["model"]["name"]
        params = data["model"].get("params", {})
        unknown = set(params) - MODEL_PARAMS[name]
        if unknown:
            errors.append(f"model/params: unknown keys for {name}: {', '.join(sorted(unknown))}")
        else:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    model = build_model(name, _model_params(name, params))
            except (ConfigurationError, ValueError, TypeError) as exc:
                errors.append(f"model/params: {exc}")
    if model is not None and "entropy" in data:
        from .entropy import build_entropy

        try:
            build_entropy(data["entropy"], model)
        except (ConfigurationError, ValueError, KeyError) as exc:
            errors.append(f"entropy: {exc}")
    if "model" in data and "ic" in data and job == "simulate":
        # the admissible set depends only on the model name
        errors.extend(_validate_ic(data, model or build_model(data["model"]["name"])))
    return errors


def _validate_ic(data, model):
    from .initial import build_initial
    from .solver import Grid1D

    ic = data["ic"]
    g = data.get("grid", {})
    try:
        grid = Grid1D(g.get("M", 64), g.get("L", 1.0))
        u = build_initial(ic["kind"], ic.get("params", {}), grid, model.domain, ic.get("seed", 0))
    except (ConfigurationError, ValueError) as exc:
        return [f"ic: {exc}"]
    if not np.all(np.isfinite(u)):
        return ["ic: initial state is not finite"]
    if ic["kind"] != "perturbed_constant" and not np.all(model.domain.contains(u, 0.0)):
        bad = int(np.argmin(model.domain.margin_to_boundary(u)))
        hint = ""
        if model.domain.kind == "simplex":
            hint = f" (sum of fractions {float(u[:, bad].sum()):.6g} must stay below 1)"
        return [f"ic: state in cell {bad} is not strictly inside the {model.domain.kind}{hint}"]
    return []


def parse_config(path, job=None, seed=None, out_dir=None):
    """Load, validate and normalize a configuration file.

    Raises
    ------
    ConfigurationError
        With ``.errors`` listing every problem found.
    """
    data, digest = _load(path)
    errors = validate(data, job)
    if errors:
        exc = ConfigurationError("invalid configuration:\n  " + "\n  ".join(errors))
        exc.errors = errors
        raise exc
    job = job or data["job"]
    model = data.get("model", {"name": "maxwell_stefan"})
    ic = data.get("ic", {"kind": "constant", "params": {"value": 0.25}})
    time = data.get("time", {})
    out = data.get("output", {})
    ic_seed = ic.get("seed", 0) if seed is None else int(seed)
    if not 0 <= ic_seed <= 2**64 - 1:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    tau = time.get("tau", 1e-3)
    return RunConfig(
        job=job, model_name=model["name"], model_params=model.get("params", {}),
        entropy=data.get("entropy", {}), M=data.get("grid", {}).get("M", 64),
        L=float(data.get("grid", {}).get("L", 1.0)), T=float(time.get("T", 0.0)),
        tau=float(tau), solver=data.get("solver", {}), ic_kind=ic["kind"],
        ic_params=ic.get("params", {}), seed=ic_seed,
        out_dir=out_dir or out.get("dir", "out"),
        snapshot_stride=out.get("snapshot_stride", 1), certify=data.get("certify", {}),
        lattice=data.get("lattice", {}), feasibility=data.get("feasibility", {}),
        raw=data, sha256=digest)


def steps_for(T, tau):
    return int(math.ceil(T / tau - 1e-9)) if T > 0 else 0
