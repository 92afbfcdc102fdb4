"""Per-agent strongly convex subproblem and its projected-gradient solver.

The subproblem of agent ``i`` is

    f_i^p(u) + f_i^s(v) + sum_j <lam_i^j + xi_i^j, v^j> + ||v^j + z_i^j||^2

over ``(u, v)`` in the box intersected with the optional local equalities.
Its curvature is ``blkdiag(P^p, P^s + 2 I)`` and does not change between
iterations, so the Lipschitz estimate is cached per curvature matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import ConfigError, DimensionMismatch, NoConvergence, RankDeficient
from .problem import check_shared

RANK_TOL = 1e-12
LIPSCHITZ_SAFETY = 1.01


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    max_inner_iters: int = 100_000
    dykstra_tol: float = 1e-12
    dykstra_max_iters: int = 10_000
    # Separable box-only subproblems are solved exactly by clamping.
    closed_form_diagonal: bool = True

    def __post_init__(self):
        for name in ("tol", "max_inner_iters", "dykstra_tol", "dykstra_max_iters"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver setting {name} must be positive")


@dataclass(frozen=True, eq=False)
class LocalSubproblem:
    """Quadratic ``0.5 x'Hx + c'x + const`` over a box and optional equalities."""

    hessian: np.ndarray
    linear: np.ndarray
    constant: float
    box: object
    equality: object = None
    private_dim: int = 0
    agent: int | None = None
    iteration: int | None = None

    @property
    def dim(self):
        return self.linear.size

    def objective(self, x):
        return float(0.5 * x @ self.hessian @ x + self.linear @ x + self.constant)

    def gradient(self, x):
        return self.hessian @ x + self.linear


@dataclass(frozen=True, eq=False)
class SolveResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    private_dim: int = 0
    method: str = "apg"

    @property
    def u(self):
        return self.x[:self.private_dim]

    @property
    def v_hat(self):
        return self.x[self.private_dim:]


def local_hessian(agent):
    ns = agent.shared_cost.dim
    d = agent.private_dim + ns
    H = np.zeros((d, d))
    H[:agent.private_dim, :agent.private_dim] = agent.private_cost.P
    H[agent.private_dim:, agent.private_dim:] = agent.shared_cost.P + 2.0 * np.eye(ns)
    return H


def build_local_subproblem(spec, i, lam_i, xi_i, z_i, iteration=None):
    """Assemble agent ``i``'s subproblem from its multipliers and trackers.

    ``lam_i``, ``xi_i`` and ``z_i`` hold one ``n_s`` block per neighbour in
    ascending neighbour order.
    """
    agent = spec.agents[i]
    ns = spec.shared_dim(i)
    blocks = []
    for name, arr in (("lambda_i", lam_i), ("xi_i", xi_i), ("z_i", z_i)):
        arr = np.asarray(arr, dtype=float).reshape(-1)
        if arr.size != ns:
            raise DimensionMismatch(f"{name} for agent {i} has {arr.size} entries, expected {ns}")
        blocks.append(arr)
    lam_i, xi_i, z_i = blocks
    linear = np.concatenate([agent.private_cost.p,
                             agent.shared_cost.p + (lam_i + xi_i + 2.0 * z_i)])
    constant = agent.private_cost.r + agent.shared_cost.r + float(z_i @ z_i)
    return LocalSubproblem(local_hessian(agent), linear, constant, agent.box,
                           agent.equality, agent.private_dim, i, iteration)


# -- projections ---------------------------------------------------------------

def project_box(x, box):
    return np.minimum(np.maximum(x, box.lo), box.hi)


class AffineProjector:
    """Euclidean projection onto ``{x : A x + c = 0}``, factorised once.

    Dependent rows are dropped by pivoted QR of ``A'`` (relative pivot
    tolerance ``1e-12``); if the reduced system does not reproduce the
    dropped rows the equalities are inconsistent.
    """

    def __init__(self, A, c):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        c = np.asarray(c, dtype=float).reshape(-1)
        self.dim = A.shape[1]
        _, R, piv = qr(A.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > RANK_TOL * max(diag.max(initial=0.0), 1e-300)))
        keep = np.sort(piv[:rank])
        Ar, cr = A[keep], c[keep]
        if rank:
            Q, Rr = np.linalg.qr(Ar.T)
            self._Q = Q
            self._d = solve_triangular(Rr, cr, trans="T")
        else:
            self._Q = np.zeros((self.dim, 0))
            self._d = np.zeros(0)
        self.rank = rank
        x0 = self.project(np.zeros(self.dim))
        scale = 1.0 + np.abs(c).max(initial=0.0)
        if np.abs(A @ x0 + c).max(initial=0.0) > 1e-9 * scale:
            raise RankDeficient("local equalities are inconsistent")

    def project(self, x):
        return x - self._Q @ (self._Q.T @ x + self._d)


@lru_cache(maxsize=512)
def _projector(eq):
    return AffineProjector(eq.matrix, eq.c)


def project_affine(x, eq):
    """Project ``x`` onto the affine set of ``eq`` (an :class:`AffineEquality`)."""
    return _projector(eq).project(np.asarray(x, dtype=float))


def dykstra_project(x, box, eq, tol=1e-12, max_iters=10_000):
    """Project onto ``box ∩ {F u + G v + c = 0}`` by Dykstra's alternating projections.

    Stops once both the change of the affine-side iterate and the gap between
    the box-side and affine-side iterates fall below ``tol``.  The box-side
    iterate is returned, so the output lies in the box exactly.
    """
    x = np.asarray(x, dtype=float)
    if eq is None:
        return project_box(x, box)
    proj = eq if isinstance(eq, AffineProjector) else _projector(eq)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iters):
        y = project_box(x + p, box)
        p = x + p - y
        x_new = proj.project(y + q)
        q = y + q - x_new
        step = np.linalg.norm(x_new - x)
        x = x_new
        if step <= tol and np.linalg.norm(y - x) <= tol:
            return y
    raise NoConvergence(f"Dykstra projection did not converge in {max_iters} sweeps", best=y)


# -- solver --------------------------------------------------------------------

def power_iteration(M, tol=1e-8, max_iters=500):
    """Largest eigenvalue of a symmetric PSD matrix."""
    n = M.shape[0]
    if n == 0:
        return 0.0
    x = np.random.default_rng(20240917).standard_normal(n)
    x /= np.linalg.norm(x)
    lam = float(x @ M @ x)
    for _ in range(max_iters):
        y = M @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        lam_new = float(x @ M @ x)
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            return lam_new
        lam = lam_new
    return lam


@lru_cache(maxsize=4096)
def _lipschitz_cached(key, n):
    M = np.frombuffer(key).reshape(n, n)
    return LIPSCHITZ_SAFETY * power_iteration(M)


def lipschitz_constant(M):
    """Power-iteration estimate of ``||M||_2`` with a 1% safety margin."""
    M = np.ascontiguousarray(M, dtype=float)
    return _lipschitz_cached(M.tobytes(), M.shape[0])


def _is_diagonal(M):
    return not np.any(M - np.diag(np.diag(M)))


def solve_local(sub, settings=None, x0=None):
    """Minimise a :class:`LocalSubproblem` to a projected-gradient tolerance.

    Accelerated projected gradient with step ``1/L`` and momentum restart
    whenever the objective increases.  Terminates when
    ``||x - P(x - grad f(x) / L)|| <= settings.tol``.

    Raises
    ------
    NoConvergence
        After ``settings.max_inner_iters`` iterations; ``best`` holds the
        final :class:`SolveResult`.
    """
    settings = settings or SolverSettings()
    H, c, box, eq = sub.hessian, sub.linear, sub.box, sub.equality
    L = lipschitz_constant(H)

    if eq is None:
        def proj(y):
            return np.minimum(np.maximum(y, box.lo), box.hi)
    else:
        projector = _projector(eq)

        def proj(y):
            return dykstra_project(y, box, projector, settings.dykstra_tol,
                                   settings.dykstra_max_iters)

    def residual(x):
        return float(np.linalg.norm(x - proj(x - (H @ x + c) / L)))

    if eq is None and settings.closed_form_diagonal and _is_diagonal(H):
        d = np.diag(H)
        if np.all(d > 0):
            x = proj(-c / d)
            return SolveResult(x, residual(x), 0, True, sub.private_dim, "closed-form")

    x = proj(box.midpoint if x0 is None else np.asarray(x0, dtype=float))
    fx = sub.objective(x)
    if L == 0.0:
        return SolveResult(x, 0.0, 0, True, sub.private_dim)
    y, t = x, 1.0
    res = residual(x)
    it = 0
    while res > settings.tol:
        if it >= settings.max_inner_iters:
            best = SolveResult(x, res, it, False, sub.private_dim)
            where = f" (agent {sub.agent}, iteration {sub.iteration})" if sub.agent is not None else ""
            raise NoConvergence(f"local solve stalled at residual {res:.3g}{where}", best=best)
        it += 1
        x_new = proj(y - (H @ y + c) / L)
        f_new = sub.objective(x_new)
        if f_new > fx and t > 1.0:
            y, t = x, 1.0
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, fx, t = x_new, f_new, t_new
        res = residual(x)
    return SolveResult(x, res, it, True, sub.private_dim)


def split_agent_blocks(spec, i, arr):
    """Agent ``i``'s rows of a slot array, flattened to one vector."""
    return check_shared(spec, arr)[spec.agent_slots(i)].reshape(-1)
