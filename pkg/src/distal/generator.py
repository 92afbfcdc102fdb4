"""Random problem instances with known-good structure.

Private costs are diagonal with curvatures drawn uniformly from
``[m_lo, m_hi]`` and unconstrained minimisers drawn uniformly from the
central 80% of each box, so they always lie inside it.  Boxes are centred at
the origin, which makes ``v = 0`` coupling-feasible.  The graph is an
Erdos-Renyi draw with edge probability ``density``, redrawn until connected.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, GenerationFailed
from .problem import AgentSpec, BoxSet, ProblemSpec, QuadraticCost

SHARED_KINDS = ("zero", "linear", "quadratic")
CENTRE_FRACTION = 0.8


@dataclass(frozen=True)
class GeneratorParams:
    n: int = 4
    density: float = 0.5
    n_s: int = 1
    private_dim: tuple = (1, 2)
    curvature: tuple = (0.5, 2.0)
    half_width: float = 5.0
    shared_kind: str = "quadratic"
    max_retries: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "private_dim", tuple(int(d) for d in self.private_dim))
        object.__setattr__(self, "curvature", tuple(float(c) for c in self.curvature))
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if not 0.0 < self.density <= 1.0:
            raise ConfigError("density must lie in (0, 1]")
        if self.n_s < 1:
            raise ConfigError("n_s must be at least 1")
        lo, hi = self.private_dim
        if not 1 <= lo <= hi:
            raise ConfigError("private_dim must be a range (lo, hi) with 1 <= lo <= hi")
        m_lo, m_hi = self.curvature
        if not 0.0 < m_lo <= m_hi:
            raise ConfigError("curvature must be a range (m_lo, m_hi) with 0 < m_lo <= m_hi")
        if not self.half_width > 0:
            raise ConfigError("half_width must be positive")
        if self.shared_kind not in SHARED_KINDS:
            raise ConfigError(f"shared_kind must be one of {SHARED_KINDS}")
        if self.max_retries < 1:
            raise ConfigError("max_retries must be at least 1")

    def to_dict(self):
        d = asdict(self)
        d["private_dim"] = list(self.private_dim)
        d["curvature"] = list(self.curvature)
        return d


def _connected(n, edges):
    if n == 1:
        return True
    if not edges:
        return False
    e = np.array(edges)
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    return connected_components(adj, directed=False)[0] == 1


def _random_edges(n, density, rng, retries):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for _ in range(retries):
        keep = rng.random(len(pairs)) < density
        edges = [p for p, k in zip(pairs, keep) if k]
        if _connected(n, edges):
            return edges
    raise GenerationFailed(f"no connected graph with density {density} after {retries} draws")


def _diag_cost(rng, dim, curvature, centre_bound):
    d = rng.uniform(*curvature, size=dim)
    centre = rng.uniform(-centre_bound, centre_bound, size=dim)
    # 0.5 (x - c)' D (x - c), minimised at c with value 0.
    return QuadraticCost(np.diag(d), -d * centre, 0.5 * float(centre @ (d * centre)))


def generate_random_problem(params, seed):
    """Deterministic random :class:`ProblemSpec` for ``(params, seed)``.

    Raises
    ------
    GenerationFailed
        No connected graph was drawn within ``params.max_retries`` attempts.
    """
    rng = np.random.Generator(np.random.Philox(int(seed)))
    edges = _random_edges(params.n, params.density, rng, params.max_retries)
    degree = np.zeros(params.n, dtype=int)
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    w = params.half_width
    agents = []
    for i in range(params.n):
        pd = int(rng.integers(params.private_dim[0], params.private_dim[1] + 1))
        ns = params.n_s * int(degree[i])
        private = _diag_cost(rng, pd, params.curvature, CENTRE_FRACTION * w)
        if params.shared_kind == "quadratic":
            shared = _diag_cost(rng, ns, params.curvature, CENTRE_FRACTION * w)
        elif params.shared_kind == "linear":
            shared = QuadraticCost(np.zeros((ns, ns)), rng.uniform(-1.0, 1.0, size=ns), 0.0)
        else:
            shared = QuadraticCost.zero(ns)
        agents.append(AgentSpec(pd, private, shared, BoxSet.uniform(pd + ns, w)))
    return ProblemSpec(params.n, tuple(edges), params.n_s, tuple(agents))
