"""Experiment configuration files (strict JSON).

Unknown keys are rejected so that a misspelt probability cannot silently
fall back to a default.  Relative problem paths resolve against the
directory of the configuration file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ParseError
from .generator import SHARED_KINDS, GeneratorParams

SCHEMA_VERSION = "distal.experiment/1"
DEFAULT_RATE_KS = (10, 50, 100, 500)

_PROB = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
_PROBS = {"oneOf": [_PROB, {"type": "array", "items": _PROB, "minItems": 1}]}
_POS = {"type": "number", "exclusiveMinimum": 0}
_ETA = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.25}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "problem": {
            "type": "object",
            "properties": {
                "file": {"type": "string"},
                "fixture": {"enum": ["p2"]},
                "generator": {
                    "type": "object",
                    "properties": {
                        "n": {"type": "integer", "minimum": 1},
                        "density": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        "n_s": {"type": "integer", "minimum": 1},
                        "private_dim": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                        "minItems": 2, "maxItems": 2},
                        "curvature": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                        "half_width": _POS,
                        "shared_kind": {"enum": list(SHARED_KINDS)},
                        "max_retries": {"type": "integer", "minimum": 1},
                    },
                    "additionalProperties": False,
                },
                "seed": {"type": "integer", "minimum": 0},
            },
            "oneOf": [{"required": ["file"]}, {"required": ["fixture"]},
                      {"required": ["generator"]}],
            "additionalProperties": False,
        },
        "activation": {
            "type": "object",
            "properties": {"beta": _PROBS, "gamma": _PROBS},
            "additionalProperties": False,
        },
        "algorithm": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["synchronous", "asynchronous"]},
                "eta": {"oneOf": [_ETA, {"type": "array", "items": _ETA, "minItems": 1}]},
                "max_iters": {"type": "integer", "minimum": 0},
                "feas_tol": _POS,
                "dist_tol": {"oneOf": [_POS, {"type": "null"}]},
                "v0": {"type": "number"},
                "lambda0": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "seeds": {
            "type": "object",
            "properties": {"master": {"type": "integer", "minimum": 0},
                           "runs": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "oracle": {
            "type": "object",
            "properties": {"enabled": {"type": "boolean"}, "tol": _POS},
            "additionalProperties": False,
        },
        "metrics_stride": {"type": "integer", "minimum": 1},
        "snapshot_stride": {"type": "integer", "minimum": 1},
        "rate_ks": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "rate_slack": {"type": "number", "minimum": 1},
    },
    "required": ["schema", "problem"],
    "additionalProperties": False,
}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a Monte Carlo experiment.

    Exactly one of ``problem_file``, ``fixture`` and ``generator`` is set.
    """

    problem_file: str | None = None
    fixture: str | None = None
    generator: GeneratorParams | None = None
    problem_seed: int = 0
    beta: object = 1.0
    gamma: object = 1.0
    mode: str = "asynchronous"
    eta: object = 0.2
    max_iters: int = 10_000
    feas_tol: float = 1e-6
    dist_tol: float | None = None
    v0: float = 0.0
    lambda0: float = 0.0
    master_seed: int = 0
    runs: int = 1
    oracle: bool = True
    oracle_tol: float = 1e-10
    metrics_stride: int = 1
    snapshot_stride: int = 100
    rate_ks: tuple = DEFAULT_RATE_KS
    rate_slack: float = 1.05
    base_dir: Path = field(default=Path("."), compare=False)

    def to_dict(self):
        problem = {}
        if self.problem_file is not None:
            problem["file"] = self.problem_file
        elif self.fixture is not None:
            problem["fixture"] = self.fixture
        else:
            problem["generator"] = self.generator.to_dict()
        problem["seed"] = self.problem_seed
        return {
            "schema": SCHEMA_VERSION,
            "problem": problem,
            "activation": {"beta": self.beta, "gamma": self.gamma},
            "algorithm": {"mode": self.mode, "eta": self.eta, "max_iters": self.max_iters,
                          "feas_tol": self.feas_tol, "dist_tol": self.dist_tol,
                          "v0": self.v0, "lambda0": self.lambda0},
            "seeds": {"master": self.master_seed, "runs": self.runs},
            "oracle": {"enabled": self.oracle, "tol": self.oracle_tol},
            "metrics_stride": self.metrics_stride,
            "snapshot_stride": self.snapshot_stride,
            "rate_ks": list(self.rate_ks),
            "rate_slack": self.rate_slack,
        }

    def problem_path(self):
        if self.problem_file is None:
            return None
        p = Path(self.problem_file)
        return p if p.is_absolute() else self.base_dir / p


def _error_field(exc):
    path = ".".join(str(p) for p in exc.absolute_path)
    if exc.validator == "additionalProperties":
        extra = sorted(set(exc.instance) - set(exc.schema.get("properties", {})))
        if extra:
            path = f"{path}.{extra[0]}" if path else extra[0]
    return path or "<root>"


def _best_error(data):
    errors = list(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(data))
    if not errors:
        return None
    # Deepest error names the most specific field.
    return max(errors, key=lambda e: len(e.absolute_path))


def config_from_dict(data, base_dir="."):
    """Validate and convert a parsed JSON document.

    Raises
    ------
    ParseError
        With ``field`` set to the dotted path of the offending entry.
    """
    err = _best_error(data)
    if err is not None:
        msg = err.message
        if err.validator == "additionalProperties":
            msg = "unknown field"
        raise ParseError(msg, field=_error_field(err))
    prob = data["problem"]
    act = data.get("activation", {})
    alg = data.get("algorithm", {})
    seeds = data.get("seeds", {})
    orc = data.get("oracle", {})
    gen = None
    if "generator" in prob:
        try:
            gen = GeneratorParams(**prob["generator"])
        except ValueError as exc:
            raise ParseError(str(exc), field="problem.generator") from None
    cfg = ExperimentConfig(
        problem_file=prob.get("file"), fixture=prob.get("fixture"), generator=gen,
        problem_seed=prob.get("seed", 0),
        beta=act.get("beta", 1.0), gamma=act.get("gamma", 1.0),
        mode=alg.get("mode", "asynchronous"), eta=alg.get("eta", 0.2),
        max_iters=alg.get("max_iters", 10_000), feas_tol=alg.get("feas_tol", 1e-6),
        dist_tol=alg.get("dist_tol"), v0=alg.get("v0", 0.0), lambda0=alg.get("lambda0", 0.0),
        master_seed=seeds.get("master", 0), runs=seeds.get("runs", 1),
        oracle=orc.get("enabled", True), oracle_tol=orc.get("tol", 1e-10),
        metrics_stride=data.get("metrics_stride", 1),
        snapshot_stride=data.get("snapshot_stride", 100),
        rate_ks=tuple(data.get("rate_ks", DEFAULT_RATE_KS)),
        rate_slack=data.get("rate_slack", 1.05),
        base_dir=Path(base_dir),
    )
    path = cfg.problem_path()
    if path is not None and not path.is_file():
        raise ParseError(f"problem file {str(path)!r} does not exist", field="problem.file")
    return cfg


def parse_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {str(path)!r}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data, path.parent)


def write_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
