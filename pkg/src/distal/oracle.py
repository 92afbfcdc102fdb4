"""Centralized reference solutions.

:func:`solve_centralized` runs the method of multipliers on the whole
problem with full information: the joint augmented Lagrangian is minimised
over all agents' sets at once, then every multiplier moves by its residual.
It shares no update code with the distributed iteration.

:func:`brute_force_grid` enumerates a grid on tiny instances and serves as a
check on the centralized solver.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InfeasibleProblem, NoConvergence, TooLarge
from .local_solver import AffineProjector, dykstra_project
from .problem import evaluate_lagrangian, evaluate_total_cost, slot_residual
from .problem_io import problem_hash

CACHE_ENV = "DISTAL_CACHE_DIR"
GRID_MAX_DIM = 4
GRID_MAX_POINTS = 20_000_000


@dataclass(frozen=True, eq=False)
class OracleSolution:
    """Saddle point ``(u*, v*, lambda*)`` with its certificates."""

    u_star: tuple
    v_star: np.ndarray
    lambda_star: np.ndarray
    cost: float
    kkt_residual: float
    feasibility_residual: float
    method: str
    iterations: int = 0

    def to_dict(self):
        return {"u_star": [np.asarray(u).tolist() for u in self.u_star],
                "v_star": self.v_star.tolist(), "lambda_star": self.lambda_star.tolist(),
                "cost": self.cost, "kkt_residual": self.kkt_residual,
                "feasibility_residual": self.feasibility_residual, "method": self.method,
                "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d, n_s=None):
        v = np.asarray(d["v_star"], dtype=float)
        lam = np.asarray(d["lambda_star"], dtype=float)
        if n_s is not None:
            v, lam = v.reshape(-1, n_s), lam.reshape(-1, n_s)
        return cls(tuple(np.asarray(u, dtype=float).reshape(-1) for u in d["u_star"]), v, lam,
                   float(d["cost"]), float(d["kkt_residual"]),
                   float(d["feasibility_residual"]), d["method"], int(d.get("iterations", 0)))


class _JointProblem:
    """The augmented Lagrangian over the stacked vector ``x = (u_0, v_0, u_1, v_1, ...)``.

    ``L(x, lambda) = 0.5 x'Qx + (q + B lambda)'x + r`` where the penalty
    ``sum over slots ||v_a + v_rev(a)||^2`` puts ``4 [[I, I], [I, I]]`` on
    every edge pair.
    """

    def __init__(self, spec):
        self.spec = spec
        starts = np.cumsum([0] + [ag.box.dim for ag in spec.agents])
        self.blocks = [slice(int(a), int(b)) for a, b in zip(starts[:-1], starts[1:])]
        self.dim = int(starts[-1])
        ns = spec.n_s
        vidx = np.empty((spec.num_slots, ns), dtype=int)
        for i, ag in enumerate(spec.agents):
            sl = spec.agent_slots(i)
            first = self.blocks[i].start + ag.private_dim
            vidx[sl] = first + np.arange((sl.stop - sl.start) * ns).reshape(-1, ns)
        self.vidx = vidx
        Q = np.zeros((self.dim, self.dim))
        q = np.zeros(self.dim)
        r = 0.0
        for i, ag in enumerate(spec.agents):
            b = self.blocks[i]
            pd = ag.private_dim
            Q[b.start:b.start + pd, b.start:b.start + pd] = ag.private_cost.P
            Q[b.start + pd:b.stop, b.start + pd:b.stop] = ag.shared_cost.P
            q[b] = np.concatenate([ag.private_cost.p, ag.shared_cost.p])
            r += ag.private_cost.r + ag.shared_cost.r
        for a in range(spec.num_slots):
            for ia, ib in zip(vidx[a], vidx[spec.reverse[a]]):
                Q[ia, ia] += 2.0
                Q[ia, ib] += 2.0
        self.Q, self.q, self.r = Q, q, r
        self.lo = np.concatenate([ag.box.lo for ag in spec.agents])
        self.hi = np.concatenate([ag.box.hi for ag in spec.agents])
        self._proj = [None if ag.equality is None else AffineProjector(ag.equality.matrix,
                                                                        ag.equality.c)
                      for ag in spec.agents]
        self.L = float(np.linalg.eigvalsh(Q).max()) if self.dim else 0.0

    def linear(self, lam):
        out = self.q.copy()
        g = lam + lam[self.spec.reverse]
        np.add.at(out, self.vidx.reshape(-1), g.reshape(-1))
        return out

    def project(self, x):
        y = np.clip(x, self.lo, self.hi)
        for i, proj in enumerate(self._proj):
            if proj is not None:
                b = self.blocks[i]
                box = _Box(self.lo[b], self.hi[b])
                y[b] = dykstra_project(x[b], box, proj, 1e-14, 100_000)
        return y

    def split(self, x):
        u = tuple(x[b][:ag.private_dim].copy() for b, ag in zip(self.blocks, self.spec.agents))
        return u, x[self.vidx]

    def midpoint(self):
        return self.project(0.5 * (self.lo + self.hi))


@dataclass(frozen=True)
class _Box:
    lo: np.ndarray
    hi: np.ndarray


def _minimize(jp, c, x0, tol, max_iters):
    """FISTA with gradient-based restart on ``0.5 x'Qx + c'x`` over the product set."""
    if jp.dim == 0:
        return x0, 0
    L = max(jp.L, 1e-12)
    x = jp.project(x0)
    y, t = x.copy(), 1.0
    for it in range(1, max_iters + 1):
        g = jp.Q @ y + c
        x_new = jp.project(y - g / L)
        # Restart when the momentum direction opposes descent.
        if np.dot(g, x_new - x) > 0.0:
            t = 1.0
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if it % 10 == 0:
            res = np.abs(x - jp.project(x - (jp.Q @ x + c) / L)).max()
            if res <= tol:
                return x, it
    raise NoConvergence(f"joint minimisation stalled after {max_iters} iterations", best=x)


def solve_centralized(spec, tol=1e-10, inner_tol=None, max_outer=100_000, max_inner=200_000):
    """Saddle point by the method of multipliers with unit penalty.

    Repeats: minimise the augmented Lagrangian jointly over every agent's set,
    then ``lambda_i^j += v_i^j + v_j^i`` on every slot, until the largest
    residual (which is also the multiplier change) is at most ``tol``.
    Multipliers start at zero and therefore stay symmetric.

    Raises
    ------
    NoConvergence
        When either loop hits its cap.
    """
    inner_tol = tol * 1e-2 if inner_tol is None else inner_tol
    jp = _JointProblem(spec)
    lam = np.zeros((spec.num_slots, spec.n_s))
    x = jp.midpoint()
    total = 0
    for outer in range(1, max_outer + 1):
        x, its = _minimize(jp, jp.linear(lam), x, inner_tol, max_inner)
        total += its
        s = x[jp.vidx] + x[jp.vidx[spec.reverse]]
        lam = lam + s
        if np.abs(s).max(initial=0.0) <= tol:
            break
    else:
        raise NoConvergence(f"method of multipliers did not converge in {max_outer} rounds",
                            best=lam)
    lam = 0.5 * (lam + lam[spec.reverse])
    u, v = jp.split(x)
    return OracleSolution(u, v, lam, evaluate_total_cost(spec, u, v),
                          kkt_residual(spec, u, v, lam),
                          float(np.abs(slot_residual(spec, v)).max(initial=0.0)),
                          "method-of-multipliers", total)


def kkt_residual(spec, u, v, lam):
    """Largest of the coupling residual and the projected-gradient stationarity residual.

    Stationarity is measured as ``||x - P(x - grad_x L(x, lambda))||_inf``.
    """
    jp = _JointProblem(spec)
    x = np.empty(jp.dim)
    for b, ag, ui in zip(jp.blocks, spec.agents, u):
        x[b.start:b.start + ag.private_dim] = ui
    x[jp.vidx] = v
    g = jp.Q @ x + jp.linear(np.asarray(lam, dtype=float))
    stat = float(np.abs(x - jp.project(x - g)).max(initial=0.0))
    feas = float(np.abs(slot_residual(spec, v)).max(initial=0.0))
    return max(stat, feas)


def lagrangian_minimizer(spec, lam, tol=1e-12, max_iters=200_000):
    """``argmin`` of the augmented Lagrangian at fixed multipliers, as ``(u, v)``."""
    jp = _JointProblem(spec)
    lam = np.asarray(lam, dtype=float).reshape(spec.num_slots, spec.n_s)
    x, _ = _minimize(jp, jp.linear(lam), jp.midpoint(), tol, max_iters)
    return jp.split(x)


def evaluate_dual(spec, lam, tol=1e-12):
    """Dual function: the minimum of the augmented Lagrangian over every local set."""
    u, v = lagrangian_minimizer(spec, lam, tol)
    return evaluate_lagrangian(spec, u, v, lam)


def duality_gap(spec, u, v, lam, tol=1e-12):
    """Total cost at ``(u, v)`` minus the dual function at ``lam``."""
    return evaluate_total_cost(spec, u, v) - evaluate_dual(spec, lam, tol)


# -- brute force ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridSolution:
    u: tuple
    v: np.ndarray
    cost: float
    resolution: float
    points: int


def _grid(lo, hi, resolution):
    count = int(math.floor((hi - lo) / resolution + 1e-9)) + 1
    pts = lo + resolution * np.arange(count)
    if pts[-1] < hi - 1e-12:
        pts = np.append(pts, hi)
    return pts


def brute_force_grid(spec, resolution, max_points=GRID_MAX_POINTS):
    """Exhaustive grid minimiser of the total cost under the coupling constraints.

    Every coordinate ranges over a grid of spacing ``resolution`` spanning its
    box; a combination counts as coupling-feasible when
    ``|v_i^j + v_j^i| <= resolution`` coordinatewise.  Private blocks are
    minimised separately since they enter neither the coupling nor another
    agent's cost.

    Raises
    ------
    TooLarge
        Decision dimension above four, local equalities, or more than
        ``max_points`` grid points.
    InfeasibleProblem
        No grid combination is coupling-feasible.
    """
    total = sum(ag.box.dim for ag in spec.agents)
    if total > GRID_MAX_DIM:
        raise TooLarge(f"brute force supports at most {GRID_MAX_DIM} decision "
                       f"coordinates, problem has {total}")
    if any(ag.equality is not None for ag in spec.agents):
        raise TooLarge("brute force does not handle local equalities")
    counted = 0
    u_best, cost = [], 0.0
    for ag in spec.agents:
        pd = ag.private_dim
        grids = [_grid(ag.box.lo[c], ag.box.hi[c], resolution) for c in range(pd)]
        n = int(np.prod([g.size for g in grids])) if grids else 1
        counted += n
        if counted > max_points:
            raise TooLarge(f"grid exceeds {max_points} points")
        pts = np.array(list(itertools.product(*grids))).reshape(n, pd)
        P, p = ag.private_cost.P, ag.private_cost.p
        vals = 0.5 * np.einsum("ni,ij,nj->n", pts, P, pts) + pts @ p + ag.private_cost.r
        best = int(np.argmin(vals))
        u_best.append(pts[best])
        cost += float(vals[best])

    ns = spec.n_s
    pair_choices = []
    for e, (i, j) in enumerate(spec.edges):
        a, b = spec.slot(i, j), spec.slot(j, i)
        for c in range(ns):
            ga = _grid(*_slot_bounds(spec, a, c), resolution)
            gb = _grid(*_slot_bounds(spec, b, c), resolution)
            lo = np.searchsorted(gb, -ga - resolution * (1 + 1e-9), side="left")
            hi = np.searchsorted(gb, -ga + resolution * (1 + 1e-9), side="right")
            pairs = [(x, y) for x, l, h in zip(ga, lo, hi) for y in gb[l:h]]
            if not pairs:
                raise InfeasibleProblem(f"no coupling-feasible grid pair on edge {(i, j)}")
            pair_choices.append((a, b, c, np.array(pairs)))
    n_combo = int(np.prod([len(pc[3]) for pc in pair_choices])) if pair_choices else 1
    counted += n_combo
    if counted > max_points:
        raise TooLarge(f"grid exceeds {max_points} points")
    V = np.zeros((n_combo, spec.num_slots, ns))
    if pair_choices:
        idx = np.array(list(itertools.product(*[range(len(pc[3])) for pc in pair_choices])))
        for col, (a, b, c, pairs) in enumerate(pair_choices):
            V[:, a, c] = pairs[idx[:, col], 0]
            V[:, b, c] = pairs[idx[:, col], 1]
    vals = np.zeros(n_combo)
    for i, ag in enumerate(spec.agents):
        vi = V[:, spec.agent_slots(i)].reshape(n_combo, -1)
        P, p = ag.shared_cost.P, ag.shared_cost.p
        vals += 0.5 * np.einsum("ni,ij,nj->n", vi, P, vi) + vi @ p + ag.shared_cost.r
    best = int(np.argmin(vals))
    return GridSolution(tuple(u_best), V[best], cost + float(vals[best]), resolution, counted)


def _slot_bounds(spec, slot, c):
    i = int(spec.slot_pairs[slot][0])
    ag = spec.agents[i]
    k = ag.private_dim + (slot - spec.agent_slots(i).start) * spec.n_s + c
    return float(ag.box.lo[k]), float(ag.box.hi[k])


# -- cache ----------------------------------------------------------------------

def cache_dir(override=None):
    if override is not None:
        return Path(override)
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "distal"


def cached_solution(spec, tol=1e-10, directory=None):
    """:func:`solve_centralized` backed by a JSON file keyed by the problem hash."""
    path = cache_dir(directory) / f"{problem_hash(spec)}-{tol:.0e}.json"
    if path.exists():
        try:
            with open(path, encoding="utf-8") as fh:
                return OracleSolution.from_dict(json.load(fh), spec.n_s)
        except (ValueError, KeyError):
            pass
    sol = solve_centralized(spec, tol)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(sol.to_dict(), fh, indent=1)
    os.replace(tmp, path)
    return sol
