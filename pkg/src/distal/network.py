"""Random link and agent activation processes.

Every iteration draws one uniform per agent (ascending index) followed by one
per edge (lexicographic order) from a Philox counter-based generator; agent
``i`` is active iff its draw is below ``gamma_i`` and edge ``e`` iff its draw
is below ``beta_e``.  Agent, link and iteration draws are mutually
independent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TooLarge

ENUMERATION_LIMIT = 16


@dataclass(frozen=True, eq=False)
class ActivationModel:
    """Per-edge link probabilities ``beta`` and per-agent ``gamma``.

    ``beta`` is aligned with ``spec.edges`` and ``gamma`` with the agents.
    """

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        for name, arr in (("beta", beta), ("gamma", gamma)):
            if arr.ndim != 1:
                raise ConfigError(f"{name} must be one-dimensional")
            bad = ~((arr > 0.0) & (arr <= 1.0))
            if np.any(bad):
                raise ConfigError(f"{name} probabilities must lie in (0, 1], got {arr[bad][0]!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def uniform(cls, spec, beta=1.0, gamma=1.0):
        return cls(np.full(len(spec.edges), float(beta)), np.full(spec.n, float(gamma)))

    @classmethod
    def full(cls, spec):
        return cls.uniform(spec, 1.0, 1.0)

    def check(self, spec):
        """Raise if the keys do not match the problem's edges and agents."""
        if self.beta.size != len(spec.edges) or self.gamma.size != spec.n:
            raise ConfigError(f"activation model has {self.beta.size} link and {self.gamma.size} "
                              f"agent probabilities; problem has {len(spec.edges)} edges and "
                              f"{spec.n} agents")
        return self

    @property
    def is_full(self):
        return bool(np.all(self.beta == 1.0) and np.all(self.gamma == 1.0))


@dataclass(frozen=True, eq=False)
class ActivationSample:
    """Realised active agents and links for one iteration, as boolean masks."""

    agents: np.ndarray
    links: np.ndarray

    @property
    def active_agents(self):
        return frozenset(int(i) for i in np.flatnonzero(self.agents))

    @property
    def active_links(self):
        return frozenset(int(e) for e in np.flatnonzero(self.links))

    def edge_fires(self, spec):
        """Mask over edges: both endpoints active and the link active."""
        if not spec.edges:
            return np.zeros(0, dtype=bool)
        ends = np.asarray(spec.edges)
        return self.links & self.agents[ends[:, 0]] & self.agents[ends[:, 1]]

    @classmethod
    def full(cls, spec):
        return cls(np.ones(spec.n, dtype=bool), np.ones(len(spec.edges), dtype=bool))

    @classmethod
    def empty(cls, spec):
        return cls(np.zeros(spec.n, dtype=bool), np.zeros(len(spec.edges), dtype=bool))

    def __eq__(self, other):
        return (isinstance(other, ActivationSample)
                and np.array_equal(self.agents, other.agents)
                and np.array_equal(self.links, other.links))

    __hash__ = None


def derive_seed(master, run_index):
    """64-bit seed of run ``run_index``: SeedSequence(master, spawn_key=(run_index,))."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(run_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class RngStream:
    """Seeded Philox stream; identical seeds give identical draws on every platform."""

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))
        self.draws = 0

    def uniforms(self, count):
        self.draws += count
        return self._gen.random(count)


def sample_activation(model, rng):
    n = model.gamma.size
    u = rng.uniforms(n + model.beta.size)
    return ActivationSample(u[:n] < model.gamma, u[n:] < model.beta)


def active_neighbor_set(sample, spec, i):
    """Neighbours of ``i`` that are active over an active link.

    Does not check whether ``i`` itself is active; callers gate on that.
    """
    out = set()
    for j in spec.neighbors[i]:
        e = spec.edges.index((min(i, j), max(i, j)))
        if sample.agents[j] and sample.links[e]:
            out.add(j)
    return out


def edge_effective_probability(model, spec):
    """Per-edge ``alpha_ij = beta_ij gamma_i gamma_j`` and its minimum."""
    model.check(spec)
    if not spec.edges:
        return np.zeros(0), 1.0
    ends = np.asarray(spec.edges)
    alpha = model.beta * model.gamma[ends[:, 0]] * model.gamma[ends[:, 1]]
    return alpha, float(alpha.min())


def enumerate_activation_outcomes(model, limit=ENUMERATION_LIMIT):
    """Every activation outcome with its product-Bernoulli probability.

    Outcomes with zero probability (a probability of exactly one) are
    omitted, so a fully active model yields a single outcome.
    """
    probs = np.concatenate([model.gamma, model.beta])
    n = model.gamma.size
    if probs.size > limit:
        raise TooLarge(f"{probs.size} Bernoulli variables exceed the enumeration limit {limit}")
    choices = [(True,) if p == 1.0 else (True, False) for p in probs]
    out = []
    for combo in itertools.product(*choices):
        mask = np.array(combo, dtype=bool)
        p = float(np.prod(np.where(mask, probs, 1.0 - probs)))
        out.append((ActivationSample(mask[:n], mask[n:]), p))
    return out
