"""
JSON job configuration: schema, loading with line/field diagnostics, and
conversion to a ModelJob.

A config names either a built-in ``model`` (with optional ``regime`` and
``overrides``) or an inline ``system`` plus exactly one mode source,
``modes`` (explicit tables) or ``decomposer`` (spectral densities). Complex
numbers are written as ``[re, im]`` pairs; plain numbers are real.

Example::

    {
      "model": "spin_boson", "regime": "high",
      "method": "classical",
      "propagation": {"dt": 0.01, "t_final": 10},
      "lcu": {"eps": 0.05}
    }
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import algebra as alg
from .errors import ConfigError, DqmeError
from .generator import SystemSpec
from .models import MODELS, ModelJob, instantiate_model
from .modes import (
    BOSONIC,
    FERMIONIC,
    ExpMode,
    SpectralDensity,
    decompose_spectral_density,
    pair_conjugates,
)
from .propagate import PropagationConfig
from .qsim import LcuConfig
from .runner import METHODS

_number = {"type": "number"}
_complex = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}
_matrix = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": _complex}}
_mode = {
    "type": "object",
    "required": ["eta_re", "gamma_re"],
    "properties": {"eta_re": _number, "eta_im": _number, "gamma_re": _number,
                   "gamma_im": _number, "sigma": {"enum": [-1, 0, 1]}},
    "additionalProperties": False,
}
_density = {
    "type": "object",
    "required": ["kind", "params", "temperature", "K"],
    "properties": {"kind": {"enum": ["drude", "brownian", "lorentzian"]},
                   "params": {"type": "object", "additionalProperties": _number},
                   "temperature": _number,
                   "K": {"type": "integer", "minimum": 1}},
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dqmesq job",
    "type": "object",
    "properties": {
        "model": {"enum": list(MODELS)},
        "regime": {"enum": ["low", "high"]},
        "overrides": {"type": "object"},
        "system": {
            "type": "object",
            "required": ["H", "couplings"],
            "properties": {
                "H": _matrix,
                "couplings": {"type": "object", "minProperties": 1, "additionalProperties": _matrix},
                "statistics": {"enum": [BOSONIC, FERMIONIC]},
                "n_orbitals": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "modes": {"type": "object", "additionalProperties": {"type": "array", "minItems": 1,
                                                            "items": _mode}},
        "decomposer": {"type": "object", "additionalProperties": _density},
        "layout": {
            "type": "object",
            "properties": {"n_max": {"type": "integer", "minimum": 1},
                           "tier_cap": {"type": ["integer", "null"], "minimum": 0}},
            "additionalProperties": False,
        },
        "initial": {"oneOf": [{"type": "integer", "minimum": 0}, _matrix]},
        "observables": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "method": {"enum": list(METHODS)},
        "methods": {"type": "array", "items": {"enum": list(METHODS)}, "minItems": 2},
        "propagation": {
            "type": "object",
            "properties": {"dt": {"type": "number", "exclusiveMinimum": 0},
                           "t_final": {"type": "number", "exclusiveMinimum": 0},
                           "stride": {"type": "integer", "minimum": 1},
                           "method": {"enum": ["rk4", "dense-exponential"]}},
            "additionalProperties": False,
        },
        "lcu": {
            "type": "object",
            "properties": {"eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                           "dt": {"type": "number", "exclusiveMinimum": 0},
                           "backend": {"enum": ["exact", "trotter"]},
                           "sampled": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "required": ["parameter", "values"],
            "properties": {"parameter": {"enum": ["eps", "dt"]},
                           "values": {"type": "array", "items": {"type": "number"}},
                           "backend": {"enum": ["exact", "trotter"]}},
            "additionalProperties": False,
        },
        "gate": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "plot": {"type": "boolean"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _field(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def validate(doc: dict) -> dict:
    """Schema check plus the cross-field rules the schema cannot express."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message, field=_field(exc.absolute_path)) from None
    has_model = "model" in doc
    has_system = "system" in doc
    if has_model == has_system:
        raise ConfigError("give exactly one of 'model' or 'system'",
                          field="model" if has_model else "system")
    if has_system:
        sources = [k for k in ("modes", "decomposer") if k in doc]
        if not sources:
            raise ConfigError("an inline system needs a mode source ('modes' or 'decomposer')",
                              field="modes")
        if len(sources) > 1:
            raise ConfigError("give exactly one mode source", field=sources[1])
        src = doc[sources[0]]
        missing = set(doc["system"]["couplings"]) - set(src)
        if missing:
            raise ConfigError(f"no modes for coupling(s) {sorted(missing)}",
                              field=f"{sources[0]}.{sorted(missing)[0]}")
        extra = set(src) - set(doc["system"]["couplings"])
        if extra:
            raise ConfigError(f"modes for unknown coupling(s) {sorted(extra)}",
                              field=f"{sources[0]}.{sorted(extra)[0]}")
    else:
        for key in ("modes", "decomposer", "layout"):
            if key in doc:
                raise ConfigError(f"'{key}' applies to inline systems; use 'overrides' with a model",
                                  field=key)
    return doc


def loads(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("the config must be a JSON object", line=1)
    return validate(doc)


def load(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return loads(text)


def _as_complex(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _matrix_of(rows, name) -> np.ndarray:
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ConfigError("matrix must be square", field=name)
    return np.array([[_as_complex(x) for x in r] for r in rows], dtype=complex)


def _inline_modes(doc, stats):
    out = {}
    if "modes" in doc:
        for label, table in doc["modes"].items():
            modes = []
            for i, m in enumerate(table):
                sigma = m.get("sigma", 0 if stats == BOSONIC else None)
                if sigma is None or (stats == BOSONIC) != (sigma == 0):
                    raise ConfigError(f"sigma does not match {stats} statistics",
                                      field=f"modes.{label}.{i}.sigma")
                try:
                    modes.append(ExpMode(complex(m["eta_re"], m.get("eta_im", 0.0)),
                                         complex(m["gamma_re"], m.get("gamma_im", 0.0)), sigma))
                except ValueError as exc:
                    raise ConfigError(str(exc), field=f"modes.{label}.{i}") from None
            try:
                out[label] = pair_conjugates(modes)
            except DqmeError as exc:
                raise ConfigError(str(exc), field=f"modes.{label}") from None
        return out
    for label, spec in doc["decomposer"].items():
        try:
            J = SpectralDensity(spec["kind"], dict(spec["params"]), spec["temperature"])
            out[label] = decompose_spectral_density(J, spec["K"], stats)
        except (ValueError, DqmeError) as exc:
            raise ConfigError(str(exc), field=f"decomposer.{label}") from None
    return out


def _inline_job(doc) -> ModelJob:
    s = doc["system"]
    stats = s.get("statistics", BOSONIC)
    H = _matrix_of(s["H"], "system.H")
    couplings = {k: _matrix_of(v, f"system.couplings.{k}") for k, v in s["couplings"].items()}
    try:
        system = SystemSpec(H, couplings, stats, s.get("n_orbitals"))
    except (ValueError, DqmeError) as exc:
        raise ConfigError(str(exc), field="system") from None
    modesets = _inline_modes(doc, stats)
    d = system.dim
    fock = None
    if stats == BOSONIC:
        lay = doc.get("layout", {})
        K = sum(len(ms) for ms in modesets.values())
        fock = alg.FockLayout.uniform(K, lay.get("n_max", 3), lay.get("tier_cap"))
    init = doc.get("initial", 0)
    rho0 = np.zeros((d, d), dtype=complex)
    if isinstance(init, int):
        if init >= d:
            raise ConfigError(f"initial basis state {init} outside 0..{d - 1}", field="initial")
        rho0[init, init] = 1.0
    else:
        rho0 = _matrix_of(init, "initial")
    observables = tuple(doc.get("observables", ["P0"]))
    try:
        return ModelJob("inline", None, {}, system, modesets, fock, rho0, observables)
    except ValueError as exc:
        raise ConfigError(str(exc), field="initial") from None


def job_from_config(doc: dict, regime: str | None = None, model: str | None = None) -> ModelJob:
    """Build the ModelJob a (validated) config describes; ``regime``/``model`` override it."""
    if model is not None:
        doc = {k: v for k, v in doc.items() if k not in ("system", "modes", "decomposer", "layout")}
        doc["model"] = model
    if regime is not None:
        doc = dict(doc, regime=regime)
    if "model" in doc:
        overrides = dict(doc.get("overrides", {}))
        if "initial" in doc:
            overrides["initial"] = doc["initial"] if isinstance(doc["initial"], int) \
                else _matrix_of(doc["initial"], "initial")
        try:
            job = instantiate_model(doc["model"], overrides, doc.get("regime"))
        except DqmeError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), field="overrides") from None
        except ValueError as exc:
            raise ConfigError(str(exc), field="overrides") from None
        if "observables" in doc:
            job.observables = tuple(doc["observables"])
    else:
        job = _inline_job(doc)
    p = doc.get("propagation", {})
    if p:
        try:
            job.prop = replace(job.prop, **p)
        except ValueError as exc:
            raise ConfigError(str(exc), field="propagation") from None
    lcu = dict(doc.get("lcu", {}))
    if "seed" in doc:
        lcu["seed"] = doc["seed"]
    if lcu:
        try:
            job.lcu = replace(job.lcu, **lcu)
        except ValueError as exc:
            raise ConfigError(str(exc), field="lcu") from None
    try:
        job.observable_spec()
    except DqmeError as exc:
        raise ConfigError(str(exc), field="observables") from None
    return job


def to_pairs(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def modeset_to_table(ms) -> list:
    """Config-file representation of a ModeSet."""
    return [{"eta_re": float(m.eta.real), "eta_im": float(m.eta.imag),
             "gamma_re": float(m.gamma.real), "gamma_im": float(m.gamma.imag),
             "sigma": m.sigma} for m in ms.modes]
