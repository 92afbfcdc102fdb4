"""Distributed augmented Lagrangian iterations over a random network.

State is held network-wide in slot arrays of shape ``(S, n_s)`` where every
agent owns the contiguous rows ``spec.agent_slots(i)``, one per neighbour.
An iteration runs four barrier-separated phases:

1. active agents solve their subproblem and move ``v`` towards ``v_hat`` on
   every edge that fires,
2. the new ``v`` is sent over firing edges and stored in ``z``,
3. duals on firing edges take an ``eta``-step along ``v + z``,
4. the new duals are sent over firing edges and stored in ``xi``.

An edge fires when both of its endpoints and the link itself are active.
Anything attached to an edge that does not fire is carried over unchanged,
and inactive agents do not solve.
"""

from __future__ import annotations

import collections
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionMismatch, NoConvergence
from .local_solver import SolverSettings, build_local_subproblem, solve_local
from .metrics import distances, feasibility, metrics_row
from .network import ActivationModel, ActivationSample, RngStream, sample_activation

MODES = ("synchronous", "asynchronous")
DISPLACEMENT_WINDOW = 10


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AgentState:
    """One agent's view: ``u`` plus one row per neighbour for the rest."""

    u: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray
    lam: np.ndarray
    z: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True, eq=False)
class NetworkState:
    """All agents' iterates at iteration ``k``; arrays are read-only."""

    u: tuple
    v: np.ndarray
    v_hat: np.ndarray
    lam: np.ndarray
    z: np.ndarray
    xi: np.ndarray
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(_frozen(ui) for ui in self.u))
        for name in ("v", "v_hat", "lam", "z", "xi"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def agent(self, spec, i):
        sl = spec.agent_slots(i)
        return AgentState(self.u[i], self.v[sl], self.v_hat[sl], self.lam[sl],
                          self.z[sl], self.xi[sl])

    def replace(self, **changes):
        fields = dict(u=self.u, v=self.v, v_hat=self.v_hat, lam=self.lam, z=self.z,
                      xi=self.xi, k=self.k)
        fields.update(changes)
        return NetworkState(**fields)

    def same_as(self, other):
        """Bitwise equality of every iterate (``k`` excluded)."""
        return (len(self.u) == len(other.u)
                and all(np.array_equal(a, b) for a, b in zip(self.u, other.u))
                and all(np.array_equal(getattr(self, n), getattr(other, n))
                        for n in ("v", "v_hat", "lam", "z", "xi")))


def _check_eta(eta):
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if eta.ndim != 1:
        raise ConfigError("step sizes must be a scalar or a one-dimensional array")
    bad = ~((eta > 0.0) & (eta < 0.25))
    if np.any(bad):
        raise ConfigError(f"step size must lie strictly inside (0, 0.25), got {eta[bad][0]!r}")
    return eta


@dataclass(frozen=True, eq=False)
class StepSizes:
    """Per-edge step sizes ``eta_ij``, aligned with ``spec.edges``.

    Storing one value per undirected edge makes them symmetric by
    construction.
    """

    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta", _check_eta(self.eta))

    @classmethod
    def uniform(cls, spec, eta):
        return cls(np.full(len(spec.edges), float(eta)))

    def check(self, spec):
        if self.eta.size != len(spec.edges):
            raise ConfigError(f"{self.eta.size} step sizes given for {len(spec.edges)} edges")
        return self

    def per_slot(self, spec):
        """Column vector of step sizes, one row per directed slot."""
        self.check(spec)
        return self.eta[spec.slot_edge][:, None]


@dataclass(frozen=True, eq=False)
class AlgorithmConfig:
    """Run configuration.

    ``eta`` is a scalar (same step on every edge) or one value per edge.
    ``v0`` and ``lambda0`` are scalars, giving the constant initialisation
    ``v_i(0) = v0 * 1``, or explicit ``(S, n_s)`` slot arrays.
    """

    eta: object = 0.2
    max_iters: int = 10_000
    feas_tol: float = 1e-6
    dist_tol: float | None = None
    mode: str = "asynchronous"
    v0: object = 0.0
    lambda0: object = 0.0
    # None: use the xi shortcut exactly when the initial duals are symmetric.
    xi_shortcut: bool | None = None
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        eta = _check_eta(self.eta)
        object.__setattr__(self, "eta", float(eta[0]) if np.ndim(self.eta) == 0 else eta)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.max_iters) < 0:
            raise ConfigError("max_iters must be non-negative")
        if not self.feas_tol > 0:
            raise ConfigError("feas_tol must be positive")
        if self.dist_tol is not None and not self.dist_tol > 0:
            raise ConfigError("dist_tol must be positive")

    def step_sizes(self, spec):
        if np.ndim(self.eta) == 0:
            return StepSizes.uniform(spec, self.eta)
        return StepSizes(self.eta).check(spec)


def _init_slots(spec, value, name):
    shape = (spec.num_slots, spec.n_s)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape != shape:
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {shape}")
    return arr.copy()


def init_states(spec, config):
    """Iteration-0 state with trackers mirroring the neighbours' values.

    ``u(0)`` is the midpoint of each private box; it never enters an update
    and only serves the metrics.  ``v_hat`` starts at ``v(0)`` so that agents
    that have not yet solved carry a defined value.
    """
    v = _init_slots(spec, config.v0, "v0")
    lam = _init_slots(spec, config.lambda0, "lambda0")
    u = tuple(spec.agents[i].box.midpoint[:spec.agents[i].private_dim] for i in range(spec.n))
    rev = spec.reverse
    return NetworkState(u, v, v.copy(), lam, v[rev], lam[rev], 0)


def primal_phase(spec, state, sample, step_sizes, settings=None):
    """Local solves of the active agents and the convex-combination step.

    Returns ``(u(k+1), v_hat(k), v(k+1))``.  The local solver is warm
    started from the agent's previous ``(u, v_hat)``.
    """
    u_new = list(state.u)
    v_hat = np.array(state.v_hat)
    for i in np.flatnonzero(sample.agents):
        i = int(i)
        sl = spec.agent_slots(i)
        sub = build_local_subproblem(spec, i, state.lam[sl], state.xi[sl], state.z[sl],
                                     iteration=state.k)
        x0 = np.concatenate([state.u[i], state.v_hat[sl].reshape(-1)])
        res = solve_local(sub, settings, x0)
        u_new[i] = res.u
        v_hat[sl] = res.v_hat.reshape(-1, spec.n_s)
    fires = sample.edge_fires(spec)[spec.slot_edge][:, None]
    eta = step_sizes.per_slot(spec)
    v_new = np.where(fires, eta * v_hat + (1.0 - eta) * state.v, state.v)
    return tuple(u_new), v_hat, v_new


def exchange_and_track_z(spec, state, v_new, sample):
    """``z_i^j(k+1) = v_j^i(k+1)`` on firing edges, else carried."""
    fires = sample.edge_fires(spec)[spec.slot_edge][:, None]
    return np.where(fires, v_new[spec.reverse], state.z)


def dual_phase(spec, state, v_new, z_new, sample, step_sizes):
    fires = sample.edge_fires(spec)[spec.slot_edge][:, None]
    eta = step_sizes.per_slot(spec)
    return np.where(fires, state.lam + eta * (v_new + z_new), state.lam)


def exchange_and_track_xi(spec, state, lam_new, sample, shortcut=False):
    """``xi_i^j(k+1) = lambda_j^i(k+1)`` on firing edges, else carried.

    With symmetric initial duals the two directions of every edge stay equal,
    so ``shortcut=True`` reads the agent's own dual and skips the exchange.
    """
    fires = sample.edge_fires(spec)[spec.slot_edge][:, None]
    incoming = lam_new if shortcut else lam_new[spec.reverse]
    return np.where(fires, incoming, state.xi)


def step(spec, state, sample, step_sizes, settings=None, xi_shortcut=False):
    """One asynchronous iteration ``state(k) -> state(k+1)``."""
    u_new, v_hat, v_new = primal_phase(spec, state, sample, step_sizes, settings)
    z_new = exchange_and_track_z(spec, state, v_new, sample)
    lam_new = dual_phase(spec, state, v_new, z_new, sample, step_sizes)
    xi_new = exchange_and_track_xi(spec, state, lam_new, sample, xi_shortcut)
    return NetworkState(u_new, v_new, v_hat, lam_new, z_new, xi_new, state.k + 1)


def sync_step(spec, state, step_sizes, settings=None):
    """One synchronous iteration, reading neighbour values directly.

    Written independently of the tracker-based :func:`step` so the two can
    be compared.
    """
    rev = spec.reverse
    lam_in, v_in = state.lam[rev], state.v[rev]
    u_new = list(state.u)
    v_hat = np.array(state.v_hat)
    for i in range(spec.n):
        sl = spec.agent_slots(i)
        sub = build_local_subproblem(spec, i, state.lam[sl], lam_in[sl], v_in[sl],
                                     iteration=state.k)
        x0 = np.concatenate([state.u[i], state.v_hat[sl].reshape(-1)])
        res = solve_local(sub, settings, x0)
        u_new[i] = res.u
        v_hat[sl] = res.v_hat.reshape(-1, spec.n_s)
    eta = step_sizes.per_slot(spec)
    v_new = eta * v_hat + (1.0 - eta) * state.v
    lam_new = state.lam + eta * (v_new + v_new[rev])
    return NetworkState(u_new, v_new, v_hat, lam_new, v_new[rev], lam_new[rev], state.k + 1)


def max_displacement(prev, new):
    """Largest absolute change of any ``u`` or ``v`` coordinate."""
    d = float(np.abs(new.v - prev.v).max(initial=0.0))
    for a, b in zip(prev.u, new.u):
        d = max(d, float(np.abs(b - a).max(initial=0.0)))
    return d


@dataclass
class RunTrace:
    """Record of one run.

    ``states`` maps iteration index to snapshot (every ``snapshot_stride``
    iterations plus the last one); ``samples[k]`` is the activation drawn
    for the step ``k -> k + 1``; ``rows`` holds the metrics rows.
    """

    config: AlgorithmConfig
    seed: int | None
    states: dict = field(default_factory=dict)
    samples: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    termination: str = "running"
    iterations: int = 0
    elapsed: float = 0.0

    @property
    def final(self):
        return self.states[self.iterations]

    @property
    def converged(self):
        return self.termination == "converged"


def _resolve_model(spec, config, model):
    if model is None:
        model = ActivationModel.full(spec)
    model.check(spec)
    if config.mode == "synchronous" and not model.is_full:
        raise ConfigError("synchronous mode requires every activation probability to be 1")
    return model


def _symmetric_duals(spec, lam):
    return bool(np.array_equal(lam, lam[spec.reverse]))


def run(spec, config, model=None, seed=0, saddle=None, on_step=None, strict=False,
        snapshot_stride=1, metrics_stride=1, record_metrics=True):
    """Iterate until the stopping rule holds or ``config.max_iters`` is hit.

    The run stops once the largest edge residual and the largest primal
    displacement over the last ten iterations are both at most
    ``config.feas_tol`` (and, when ``dist_tol`` and ``saddle`` are given, the
    distance to the saddle point is at most ``dist_tol``).  In asynchronous
    mode a quiet window can simply mean that no edge fired, so the stop is
    further certified by a fully active trial step, which must also displace
    ``u`` and ``v`` by at most ``feas_tol``; the trial step is discarded.

    Parameters
    ----------
    model : ActivationModel, optional
        Defaults to full activation.  Synchronous mode requires it to be full.
    saddle : OracleSolution, optional
        Enables the distance and Lyapunov columns of the metrics rows.
    on_step : callable, optional
        Called as ``on_step(state, sample)`` after every iteration with the
        new state and the sample that produced it.
    strict : bool
        Raise :class:`NoConvergence` (with the trace as ``best``) instead of
        returning a trace whose termination is ``"max_iters"``.
    """
    model = _resolve_model(spec, config, model)
    steps = config.step_sizes(spec)
    settings = config.solver
    synchronous = config.mode == "synchronous"
    state = init_states(spec, config)
    shortcut = config.xi_shortcut
    if shortcut is None:
        shortcut = _symmetric_duals(spec, state.lam)
    rng = RngStream(seed if seed is not None else 0)
    full = ActivationSample.full(spec)

    trace = RunTrace(config, seed)
    trace.states[0] = state
    if record_metrics:
        trace.rows.append(metrics_row(spec, state, None, steps, saddle, model))
    window = collections.deque(maxlen=DISPLACEMENT_WINDOW)
    t0 = time.perf_counter()
    termination = "max_iters"
    for k in range(int(config.max_iters)):
        if synchronous:
            sample = full
            new = sync_step(spec, state, steps, settings)
        else:
            sample = sample_activation(model, rng)
            new = step(spec, state, sample, steps, settings, shortcut)
        trace.samples.append(sample)
        window.append(max_displacement(state, new))
        state = new
        last = k + 1
        row = None
        if record_metrics and last % metrics_stride == 0:
            row = metrics_row(spec, state, sample, steps, saddle, model)
            trace.rows.append(row)
        if last % snapshot_stride == 0:
            trace.states[last] = state
        if on_step is not None:
            on_step(state, sample)
        if len(window) == DISPLACEMENT_WINDOW and _stop(spec, state, window, config, saddle,
                                                        None if synchronous else (steps, shortcut)):
            termination = "converged"
            break
    trace.iterations = state.k
    trace.states[state.k] = state
    if record_metrics and trace.rows[-1].k != state.k:
        trace.rows.append(metrics_row(spec, state, trace.samples[-1] if trace.samples else None,
                                      steps, saddle, model))
    trace.termination = termination
    trace.elapsed = time.perf_counter() - t0
    if strict and termination != "converged":
        raise NoConvergence(f"no convergence within {config.max_iters} iterations", best=trace)
    return trace


def _stop(spec, state, window, config, saddle, probe):
    if max(window) > config.feas_tol:
        return False
    if feasibility(spec, state.v)[0] > config.feas_tol:
        return False
    if config.dist_tol is not None and saddle is not None:
        du, dv, _ = distances(spec, state, saddle)
        if max(du, dv) > config.dist_tol:
            return False
    if probe is not None:
        # Quiet windows also occur when no edge fires; certify with a fully active step.
        steps, shortcut = probe
        full = step(spec, state, ActivationSample.full(spec), steps, config.solver, shortcut)
        if max_displacement(state, full) > config.feas_tol:
            return False
    return True
