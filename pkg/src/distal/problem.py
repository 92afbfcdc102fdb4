"""Edge-coupled multi-agent problem: representation, validation, evaluation.

Each agent ``i`` owns a private decision ``u_i`` and one shared block
``v_i^j`` (length ``n_s``) per neighbour ``j``.  The coupling constraint is
``v_i^j + v_j^i = 0`` on every edge.

Shared-block layout
-------------------
Every shared-indexed quantity (``v``, ``v_hat``, ``lambda``, ``z``, ``xi``)
is stored as one array of shape ``(S, n_s)`` with ``S = 2 |E|`` directed
*slots*.  Agent ``i`` owns the contiguous slots
``spec.agent_slots(i)``, one per neighbour in ascending neighbour order, and
``spec.reverse[s]`` is the slot of the mirrored pair ``(j, i)``.
Agents are indexed ``0 .. n-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog, lsq_linear

from .errors import (DimensionMismatch, InfeasibleLocalSet, InfeasibleProblem,
                     NonConvex, ProblemError, UnboundedSet)

LOCAL_FEASIBILITY_TOL = 1e-9
_SYMMETRY_RTOL = 1e-12


def _as_vector(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _as_matrix(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    """Convex quadratic ``f(x) = 0.5 x'Px + p'x + r``."""

    P: np.ndarray
    p: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        P = _as_matrix(self.P, "P")
        p = _as_vector(self.p, "p")
        if P.shape != (p.size, p.size):
            raise DimensionMismatch(f"P has shape {P.shape} but p has length {p.size}")
        scale = max(1.0, float(np.abs(P).max(initial=0.0)))
        if not np.allclose(P, P.T, rtol=0.0, atol=_SYMMETRY_RTOL * scale):
            raise ProblemError("cost curvature P must be symmetric")
        object.__setattr__(self, "P", 0.5 * (P + P.T))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", float(self.r))

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros((dim, dim)), np.zeros(dim), 0.0)

    @property
    def dim(self):
        return self.p.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(0.5 * x @ self.P @ x + self.p @ x + self.r)

    def gradient(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        return self.P @ x + self.p

    def min_eigenvalue(self):
        if self.dim == 0:
            return np.inf
        return float(np.linalg.eigvalsh(self.P)[0])


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Coordinate bounds ``lo <= x <= hi``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lo, "lo")
        hi = _as_vector(self.hi, "hi")
        if lo.shape != hi.shape:
            raise DimensionMismatch(f"box bounds differ in length: {lo.size} vs {hi.size}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def uniform(cls, dim, half_width):
        return cls(np.full(dim, -float(half_width)), np.full(dim, float(half_width)))

    @property
    def dim(self):
        return self.lo.size

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


@dataclass(frozen=True, eq=False)
class AffineEquality:
    """Local equalities ``F u + G v + c = 0`` on one agent's decisions."""

    F: np.ndarray
    G: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        c = _as_vector(self.c, "c")
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        if F.shape[0] != c.size or G.shape[0] != c.size:
            raise DimensionMismatch(f"equality blocks have {F.shape[0]} and {G.shape[0]} "
                                    f"rows but c has {c.size}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "c", c)

    @property
    def matrix(self):
        """Stacked ``[F G]`` acting on ``(u_i, v_i)``."""
        return np.hstack([self.F, self.G])

    def residual(self, x):
        return self.matrix @ np.asarray(x, dtype=float) + self.c


@dataclass(frozen=True, eq=False)
class AgentSpec:
    private_dim: int
    private_cost: QuadraticCost
    shared_cost: QuadraticCost
    box: BoxSet
    equality: AffineEquality | None = None


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Agents on an undirected graph with edge-coupled shared decisions."""

    n: int
    edges: tuple
    n_s: int
    agents: tuple

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ProblemError("a problem needs at least one agent")
        norm = []
        for e in self.edges:
            i, j = (int(a) for a in e)
            if i == j:
                raise ProblemError(f"self-loop on agent {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise DimensionMismatch(f"edge {(i, j)} has an endpoint outside 0..{n - 1}")
            norm.append((min(i, j), max(i, j)))
        if len(set(norm)) != len(norm):
            raise ProblemError("duplicate edge")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        object.__setattr__(self, "n_s", int(self.n_s))
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.agents) != n:
            raise DimensionMismatch(f"expected {n} agents, got {len(self.agents)}")
        for i, ag in enumerate(self.agents):
            self._check_agent(i, ag)

    def _check_agent(self, i, ag):
        ns = self.n_s * len(self.neighbors[i])
        if ag.private_cost.dim != ag.private_dim:
            raise DimensionMismatch(f"agent {i}: private cost has dimension "
                                    f"{ag.private_cost.dim}, expected {ag.private_dim}")
        if ag.shared_cost.dim != ns:
            raise DimensionMismatch(f"agent {i}: shared cost has dimension "
                                    f"{ag.shared_cost.dim}, expected n_s*|N_i| = {ns}")
        if ag.box.dim != ag.private_dim + ns:
            raise DimensionMismatch(f"agent {i}: box has dimension {ag.box.dim}, "
                                    f"expected {ag.private_dim + ns}")
        eq = ag.equality
        if eq is not None:
            if eq.F.shape[1] != ag.private_dim or eq.G.shape[1] != ns:
                raise DimensionMismatch(f"agent {i}: equality blocks have shapes "
                                        f"{eq.F.shape} and {eq.G.shape}")
            if eq.c.size > ag.private_dim + ns:
                raise DimensionMismatch(f"agent {i}: more equality rows than decisions")

    # -- topology -----------------------------------------------------------

    @cached_property
    def neighbors(self):
        nbrs = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def slot_offsets(self):
        return np.concatenate([[0], np.cumsum([len(x) for x in self.neighbors])]).astype(int)

    @cached_property
    def slot_pairs(self):
        """``(S, 2)`` array; row ``s`` is the directed pair ``(i, j)``."""
        pairs = [(i, j) for i in range(self.n) for j in self.neighbors[i]]
        return np.array(pairs, dtype=int).reshape(-1, 2)

    @cached_property
    def _slot_lookup(self):
        return {(int(i), int(j)): s for s, (i, j) in enumerate(self.slot_pairs)}

    @cached_property
    def reverse(self):
        look = self._slot_lookup
        return np.array([look[(int(j), int(i))] for i, j in self.slot_pairs], dtype=int)

    @cached_property
    def slot_edge(self):
        index = {e: k for k, e in enumerate(self.edges)}
        return np.array([index[(min(i, j), max(i, j))] for i, j in self.slot_pairs], dtype=int)

    @property
    def num_slots(self):
        return 2 * len(self.edges)

    def slot(self, i, j):
        try:
            return self._slot_lookup[(int(i), int(j))]
        except KeyError:
            raise DimensionMismatch(f"({i}, {j}) is not an edge") from None

    def agent_slots(self, i):
        return slice(int(self.slot_offsets[i]), int(self.slot_offsets[i + 1]))

    def shared_dim(self, i):
        return self.n_s * len(self.neighbors[i])

    def decision_dim(self, i):
        return self.agents[i].private_dim + self.shared_dim(i)

    def zeros_shared(self):
        return np.zeros((self.num_slots, self.n_s))

    def zeros_private(self):
        return [np.zeros(a.private_dim) for a in self.agents]


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_problem`.

    ``global_feasible`` is ``None`` when the coupled feasibility check was
    skipped, i.e. feasibility of the whole problem is not proven.
    """

    strong_convexity: tuple
    compact: bool
    local_residuals: tuple
    global_feasible: bool | None
    global_method: str = "skipped"
    notes: tuple = field(default_factory=tuple)


def _local_residual(agent):
    eq = agent.equality
    if eq is None or eq.c.size == 0:
        return 0.0
    res = lsq_linear(eq.matrix, -eq.c, bounds=(agent.box.lo, agent.box.hi),
                     method="bvls", tol=1e-14)
    return float(np.sum((eq.matrix @ res.x + eq.c) ** 2))


def _global_feasible(spec):
    """Phase-I LP over all local sets plus coupling; True iff feasible."""
    dims = [spec.decision_dim(i) for i in range(spec.n)]
    offs = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    total = int(offs[-1])
    rows, rhs = [], []
    for i, ag in enumerate(spec.agents):
        if ag.equality is not None:
            for a, c in zip(ag.equality.matrix, ag.equality.c):
                row = np.zeros(total)
                row[offs[i]:offs[i + 1]] = a
                rows.append(row)
                rhs.append(-c)
    for s, (i, j) in enumerate(spec.slot_pairs):
        r = spec.reverse[s]
        if r < s:
            continue
        for c in range(spec.n_s):
            row = np.zeros(total)
            row[_shared_coord(spec, offs, i, s, c)] = 1.0
            row[_shared_coord(spec, offs, j, r, c)] = 1.0
            rows.append(row)
            rhs.append(0.0)
    bounds = np.concatenate([[ag.box.lo, ag.box.hi] for ag in spec.agents], axis=1).T
    if not rows:
        return True
    res = linprog(np.zeros(total), A_eq=np.array(rows), b_eq=np.array(rhs),
                  bounds=bounds, method="highs")
    return res.status == 0


def _shared_coord(spec, offs, i, s, c):
    local = (s - spec.slot_offsets[i]) * spec.n_s + c
    return int(offs[i] + spec.agents[i].private_dim + local)


def validate_problem(spec, check_global=True):
    """Check the modelling assumptions and report derived constants.

    Raises
    ------
    NonConvex
        A private curvature has a non-positive eigenvalue, or a shared
        curvature is indefinite.
    UnboundedSet
        A box bound is not finite.
    InfeasibleLocalSet
        A box is empty, or no box point satisfies the agent's equalities to
        within ``1e-9`` in squared norm.
    InfeasibleProblem
        The coupled phase-I LP is infeasible.
    """
    ms, residuals = [], []
    for i, ag in enumerate(spec.agents):
        m = ag.private_cost.min_eigenvalue()
        if not m > 0:
            raise NonConvex(f"agent {i}: private curvature has eigenvalue {m:g} <= 0")
        ms.append(m)
        if ag.shared_cost.dim:
            ms_shared = ag.shared_cost.min_eigenvalue()
            scale = max(1.0, float(np.abs(ag.shared_cost.P).max()))
            if ms_shared < -1e-10 * scale:
                raise NonConvex(f"agent {i}: shared curvature has eigenvalue {ms_shared:g} < 0")
        if not (np.all(np.isfinite(ag.box.lo)) and np.all(np.isfinite(ag.box.hi))):
            raise UnboundedSet(f"agent {i}: box has a non-finite bound")
        if np.any(ag.box.lo > ag.box.hi):
            raise InfeasibleLocalSet(f"agent {i}: box has lo > hi")
        res = _local_residual(ag)
        if res > LOCAL_FEASIBILITY_TOL:
            raise InfeasibleLocalSet(f"agent {i}: equalities unreachable in the box "
                                     f"(min squared residual {res:.3g})")
        residuals.append(res)
    feasible, method = None, "skipped"
    if check_global:
        feasible, method = _global_feasible(spec), "phase-I LP"
        if not feasible:
            raise InfeasibleProblem("no point satisfies every local set and coupling constraint")
    return ValidationReport(tuple(ms), True, tuple(residuals), feasible, method)


# -- evaluation ---------------------------------------------------------------

def check_private(spec, u):
    """Coerce ``u`` to a list of per-agent vectors, checking dimensions."""
    if len(u) != spec.n:
        raise DimensionMismatch(f"u has {len(u)} blocks, expected {spec.n}")
    out = []
    for i, (ui, ag) in enumerate(zip(u, spec.agents)):
        ui = np.asarray(ui, dtype=float).reshape(-1)
        if ui.size != ag.private_dim:
            raise DimensionMismatch(f"u[{i}] has length {ui.size}, expected {ag.private_dim}")
        out.append(ui)
    return out


def check_shared(spec, v, name="v"):
    """Coerce a shared-indexed quantity to its ``(S, n_s)`` slot array."""
    arr = np.asarray(v, dtype=float)
    if arr.size != spec.num_slots * spec.n_s:
        raise DimensionMismatch(f"{name} has {arr.size} entries, expected "
                                f"{spec.num_slots} slots x n_s={spec.n_s}")
    return arr.reshape(spec.num_slots, spec.n_s)


def evaluate_total_cost(spec, u, v):
    """Separable objective ``sum_i f_i^p(u_i) + f_i^s(v_i)``."""
    u = check_private(spec, u)
    v = check_shared(spec, v)
    total = 0.0
    for i, ag in enumerate(spec.agents):
        total += ag.private_cost(u[i]) + ag.shared_cost(v[spec.agent_slots(i)])
    return total


def coupling_residual(spec, v):
    """Per-edge ``v_i^j + v_j^i`` as an ``(|E|, n_s)`` array in edge order."""
    v = check_shared(spec, v)
    out = np.empty((len(spec.edges), spec.n_s))
    for k, (i, j) in enumerate(spec.edges):
        out[k] = v[spec.slot(i, j)] + v[spec.slot(j, i)]
    return out


def slot_residual(spec, v):
    """``v_i^j + v_j^i`` for every directed slot, shape ``(S, n_s)``."""
    v = check_shared(spec, v)
    return v + v[spec.reverse]


def evaluate_lagrangian(spec, u, v, lam):
    """Augmented Lagrangian with one multiplier and one penalty per direction.

    Each edge contributes two inner products and two squared residuals.
    """
    lam = check_shared(spec, lam, "lambda")
    s = slot_residual(spec, v)
    return evaluate_total_cost(spec, u, v) + float(np.sum(lam * s) + np.sum(s * s))
