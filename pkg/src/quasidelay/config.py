"""Model configuration files.

A configuration is a JSON object::

    {
      "species_count": 2,
      "period": 1.0,
      "growth": {"kind": "Linear", "coefficients": []},
      "rates":    [{"mean": 2.0, "cos": [], "sin": []}, {"mean": 1.0}],
      "delays":   [{"mean": 0.5}, {"mean": 1.3}],
      "mutation": [[{"mean": 0.9}, {"mean": 0.1}],
                   [{"mean": 0.1}, {"mean": 0.9}]]
    }

``growth.kind`` is one of Linear, Logistic, CustomPolynomial (coefficients
in increasing-power order). Each signal is ``mean + sum_k cos[k-1] *
cos(2 pi k t / period) + sin[k-1] * sin(2 pi k t / period)``; ``cos`` and
``sin`` may be omitted. ``mutation[j][i]`` is the probability that class j
produces class i. Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

from .model import GrowthFunction, GrowthKind, ModelSpec, PeriodicSignal, validate_model

_SIGNAL = {
    "type": "object",
    "properties": {
        "mean": {"type": "number"},
        "cos": {"type": "array", "items": {"type": "number"}},
        "sin": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["mean"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "species_count": {"type": "integer", "minimum": 2},
        "period": {"type": "number", "exclusiveMinimum": 0},
        "growth": {
            "type": "object",
            "properties": {
                "kind": {"enum": [k.value for k in GrowthKind]},
                "coefficients": {"type": "array", "items": {"type": "number"}},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "rates": {"type": "array", "items": _SIGNAL},
        "delays": {"type": "array", "items": _SIGNAL},
        "mutation": {"type": "array", "items": {"type": "array", "items": _SIGNAL}},
    },
    "required": ["species_count", "period", "growth", "rates", "delays", "mutation"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


class ConfigParseError(ConfigError):
    pass


class ConfigSchemaError(ConfigError):
    pass


class HypothesisError(ConfigError):
    def __init__(self, violations):
        super().__init__("model hypotheses violated: " + "; ".join(violations))
        self.violations = list(violations)


def _key_path(error) -> str:
    return "/".join(str(p) for p in error.absolute_path) or "<root>"


def spec_from_dict(doc: dict, validate: bool = True) -> ModelSpec:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigSchemaError(f"{_key_path(exc)}: {exc.message}") from None
    n = doc["species_count"]
    for key in ("rates", "delays", "mutation"):
        if len(doc[key]) != n:
            raise ConfigSchemaError(f"{key}: expected {n} entries (species_count), got {len(doc[key])}")
    for j, row in enumerate(doc["mutation"]):
        if len(row) != n:
            raise ConfigSchemaError(f"mutation/{j}: expected {n} entries, got {len(row)}")
    T = float(doc["period"])

    def sig(d):
        return PeriodicSignal(T, d["mean"], tuple(d.get("cos", ())), tuple(d.get("sin", ())))

    g = doc["growth"]
    kind = GrowthKind(g["kind"])
    if kind is GrowthKind.CUSTOM_POLYNOMIAL and not g.get("coefficients"):
        raise ConfigSchemaError("growth/coefficients: required for CustomPolynomial")
    growth = GrowthFunction(kind, tuple(g.get("coefficients", ())) if kind is GrowthKind.CUSTOM_POLYNOMIAL else ())
    spec = ModelSpec(
        species_count=n,
        period=T,
        growth=growth,
        rates=tuple(sig(d) for d in doc["rates"]),
        delays=tuple(sig(d) for d in doc["delays"]),
        mutation=tuple(tuple(sig(d) for d in row) for row in doc["mutation"]),
    )
    if validate:
        report = validate_model(spec)
        if not report.ok:
            raise HypothesisError(report.violations)
    return spec


def parse_config(path, validate: bool = True) -> ModelSpec:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return spec_from_dict(doc, validate)


def emit_config(spec: ModelSpec) -> dict:
    def sig(s: PeriodicSignal):
        return {"mean": s.mean_term, "cos": list(s.cosine_coeffs), "sin": list(s.sine_coeffs)}

    growth = {"kind": spec.growth.kind.value}
    if spec.growth.kind is GrowthKind.CUSTOM_POLYNOMIAL:
        growth["coefficients"] = list(spec.growth.coefficients)
    return {
        "species_count": spec.species_count,
        "period": spec.period,
        "growth": growth,
        "rates": [sig(s) for s in spec.rates],
        "delays": [sig(s) for s in spec.delays],
        "mutation": [[sig(s) for s in row] for row in spec.mutation],
    }


def write_config(spec: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(emit_config(spec), indent=2) + "\n")


def spec_digest(spec: ModelSpec) -> str:
    """SHA-256 of the canonical JSON form of the resolved model."""
    canonical = json.dumps(emit_config(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
