"""JSON problem files.

Agents are numbered from 0 and edges are unordered pairs.  Shared-cost and
box coordinates of agent ``i`` follow the private coordinates, one ``n_s``
block per neighbour in ascending neighbour order.
"""

from __future__ import annotations

import hashlib
import json

import jsonschema
import numpy as np

from .errors import ParseError, ProblemError
from .problem import AffineEquality, AgentSpec, BoxSet, ProblemSpec, QuadraticCost

SCHEMA_VERSION = "distal.problem/1"

_VECTOR = {"type": "array", "items": {"type": "number"}}
_MATRIX = {"type": "array", "items": _VECTOR}
_COST = {
    "type": "object",
    "properties": {"P": _MATRIX, "p": _VECTOR, "r": {"type": "number"}},
    "required": ["P", "p"],
    "additionalProperties": False,
}

PROBLEM_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "n_agents": {"type": "integer", "minimum": 1},
        "n_s": {"type": "integer", "minimum": 1},
        "edges": {"type": "array",
                  "items": {"type": "array", "items": {"type": "integer", "minimum": 0},
                            "minItems": 2, "maxItems": 2}},
        "agents": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "private_dim": {"type": "integer", "minimum": 0},
                    "private_cost": _COST,
                    "shared_cost": _COST,
                    "box": {"type": "object",
                            "properties": {"lo": _VECTOR, "hi": _VECTOR},
                            "required": ["lo", "hi"], "additionalProperties": False},
                    "equality": {"oneOf": [
                        {"type": "null"},
                        {"type": "object",
                         "properties": {"F": _MATRIX, "G": _MATRIX, "c": _VECTOR},
                         "required": ["F", "G", "c"], "additionalProperties": False},
                    ]},
                },
                "required": ["private_dim", "private_cost", "shared_cost", "box"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["schema", "n_agents", "n_s", "edges", "agents"],
    "additionalProperties": False,
}


def _cost_to_dict(cost):
    return {"P": cost.P.tolist(), "p": cost.p.tolist(), "r": float(cost.r)}


def _cost_from_dict(d):
    p = np.asarray(d["p"], dtype=float).reshape(-1)
    P = np.asarray(d["P"], dtype=float).reshape(p.size, p.size)
    return QuadraticCost(P, p, float(d.get("r", 0.0)))


def problem_to_dict(spec):
    agents = []
    for ag in spec.agents:
        eq = None
        if ag.equality is not None:
            eq = {"F": ag.equality.F.tolist(), "G": ag.equality.G.tolist(),
                  "c": ag.equality.c.tolist()}
        agents.append({
            "private_dim": ag.private_dim,
            "private_cost": _cost_to_dict(ag.private_cost),
            "shared_cost": _cost_to_dict(ag.shared_cost),
            "box": {"lo": ag.box.lo.tolist(), "hi": ag.box.hi.tolist()},
            "equality": eq,
        })
    return {"schema": SCHEMA_VERSION, "n_agents": spec.n, "n_s": spec.n_s,
            "edges": [list(e) for e in spec.edges], "agents": agents}


def _path(error):
    return ".".join(str(p) for p in error.absolute_path) or "<root>"


def problem_from_dict(data):
    """Build a :class:`ProblemSpec`; schema and dimension errors become :class:`ParseError`."""
    try:
        jsonschema.validate(data, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ParseError(exc.message, field=_path(exc)) from None
    agents = []
    for i, a in enumerate(data["agents"]):
        where = f"agents.{i}"
        try:
            pd = a["private_dim"]
            eq = None
            if a.get("equality") is not None:
                e = a["equality"]
                c = np.asarray(e["c"], dtype=float).reshape(-1)
                F = np.asarray(e["F"], dtype=float).reshape(c.size, pd)
                G = np.asarray(e["G"], dtype=float).reshape(c.size, -1) if c.size else np.zeros((0, 0))
                eq = AffineEquality(F, G, c)
            agents.append(AgentSpec(pd, _cost_from_dict(a["private_cost"]),
                                    _cost_from_dict(a["shared_cost"]),
                                    BoxSet(a["box"]["lo"], a["box"]["hi"]), eq))
        except (ValueError, ProblemError) as exc:
            raise ParseError(str(exc), field=where) from None
    try:
        return ProblemSpec(data["n_agents"], tuple(tuple(e) for e in data["edges"]),
                           data["n_s"], tuple(agents))
    except ProblemError as exc:
        raise ParseError(str(exc), field="agents") from None


def load_problem(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return problem_from_dict(data)


def save_problem(spec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(spec), fh, indent=2)
        fh.write("\n")


def problem_hash(spec):
    """SHA-256 of the canonical JSON encoding."""
    text = json.dumps(problem_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()
