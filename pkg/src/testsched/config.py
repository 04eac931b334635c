"""JSON configuration documents and shipped presets."""

import copy
import json
from importlib import resources

import jsonschema

from .belief import PriorSpec, SafetyRequirement
from .model import ConfigError, DTest, InnovationDist, ProblemSpec, State

_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}

PROBLEM_PROPERTIES = {
    "lambda_ref": _pos,
    "c_ref": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "eta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "gamma": {"type": "number", "minimum": 0, "maximum": 1},
    "horizon": _posint,
    "prior": {
        "type": ["object", "null"],
        "properties": {"mu": _pos, "sigma2": _pos},
        "required": ["mu", "sigma2"],
        "additionalProperties": False,
    },
    "innovation": {
        "type": ["object", "null"],
        "properties": {
            "values": {"type": "array", "items": {"type": "integer"}},
            "probs": {"type": "array", "items": {"type": "number", "minimum": 0}},
        },
        "required": ["values", "probs"],
        "additionalProperties": False,
    },
    "grid": {
        "type": "object",
        "properties": {"k_max": _posint, "n_max": _posint},
        "additionalProperties": False,
    },
    "beta_i": {
        "type": "object",
        "properties": {"min": {"type": "integer", "maximum": 0}, "max": {"type": "integer", "minimum": 0}},
        "additionalProperties": False,
    },
    "n_cap": _posint,
    "d_test": {
        "type": "object",
        "properties": {"value": _pos, "unit": {"type": "string"}},
        "required": ["value"],
        "additionalProperties": False,
    },
}

SIMULATION_SCHEMA = {
    "type": "object",
    "properties": {
        "start": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 3},
        "episodes": _posint,
        "seed": {"type": "integer", "minimum": 0},
        "mode": {"enum": ["belief", "fixed"]},
        "lambda_true": _pos,
    },
    "additionalProperties": False,
}

STUDY_SCHEMA = {
    "type": "object",
    "properties": {
        "gammas": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "c_refs": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
        "mus": {"type": "array", "items": _pos},
        "sigma2s": {"type": "array", "items": _pos},
        "t": _posint,
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "testsched configuration",
    "type": "object",
    "properties": dict(PROBLEM_PROPERTIES, simulation=SIMULATION_SCHEMA, study=STUDY_SCHEMA),
    "required": ["lambda_ref", "c_ref", "eta"],
    "additionalProperties": False,
}

PRESETS = ("table2", "fig1", "waymo_disengagement", "nhtsa_collision", "nhtsa_fatality")


def schema_subset(*extra):
    """Schema restricted to the problem fields plus the named extra sections."""
    sub = copy.deepcopy(CONFIG_SCHEMA)
    for key in ("simulation", "study"):
        if key not in extra:
            del sub["properties"][key]
    return sub


def _error_field(err):
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties":
        unknown = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return ".".join(filter(None, [path, unknown[0] if unknown else ""]))
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else ""
        return ".".join(filter(None, [path, missing]))
    return path or "<root>"


def validate(doc):
    """Check ``doc`` against the schema and the semantic constraints; raise ConfigError."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_error_field(err), err.message)
    to_spec(doc)
    return doc


def to_spec(doc) -> ProblemSpec:
    """Build a :class:`ProblemSpec`; the document is assumed schema-valid."""
    prior = doc.get("prior")
    inn = doc.get("innovation")
    grid = doc.get("grid", {})
    bi = doc.get("beta_i", {})
    dt = doc.get("d_test", {})
    if inn is not None and len(inn["values"]) != len(inn["probs"]):
        raise ConfigError("innovation.probs", "must have the same length as innovation.values")
    try:
        req = SafetyRequirement(doc["lambda_ref"], doc["c_ref"])
    except ValueError as exc:
        raise ConfigError("c_ref", str(exc)) from None
    return ProblemSpec(
        requirement=req,
        eta=doc["eta"],
        gamma=doc.get("gamma", 1.0),
        horizon=doc.get("horizon", 5),
        prior=PriorSpec(prior["mu"], prior["sigma2"]) if prior else None,
        innovation=InnovationDist(tuple(inn["values"]), tuple(inn["probs"])) if inn else InnovationDist(),
        k_max=grid.get("k_max", 50),
        n_max=grid.get("n_max", 50),
        beta_i_min=bi.get("min", -10),
        beta_i_max=bi.get("max", 20),
        n_cap=doc.get("n_cap", 200),
        d_test=DTest(dt.get("value", 1.0), dt.get("unit", "test")),
    )


def spec_to_doc(spec: ProblemSpec):
    """Canonical JSON-ready snapshot of a problem."""
    inn = spec.innovation
    return {
        "lambda_ref": spec.requirement.lambda_ref,
        "c_ref": spec.requirement.c_ref,
        "eta": spec.eta,
        "gamma": spec.gamma,
        "horizon": spec.horizon,
        "prior": {"mu": spec.prior.mu, "sigma2": spec.prior.sigma2} if spec.prior else None,
        "innovation": None if inn.is_trivial else {"values": list(inn.support), "probs": list(inn.probs)},
        "grid": {"k_max": spec.k_max, "n_max": spec.n_max},
        "beta_i": {"min": spec.beta_i_min, "max": spec.beta_i_max},
        "n_cap": spec.n_cap,
        "d_test": {"value": spec.d_test.value, "unit": spec.d_test.unit},
    }


def load(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    return validate(doc)


def load_preset(name):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("testsched").joinpath("presets", f"{name}.json").read_text(encoding="utf-8")
    return validate(json.loads(text))


def merge(base, override):
    """Recursive dict merge; ``override`` wins, ``None`` values replace."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def start_state(doc, spec):
    start = doc.get("simulation", {}).get("start")
    if start is None:
        return State(spec.k_lo, spec.n_lo, 0)
    return State(*start)
