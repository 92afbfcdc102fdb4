"""Convergence certificates: Lyapunov functions, ergodic averages, rate bound.

All functions are pure over :class:`~distal.algorithm.NetworkState`
snapshots.  ``saddle`` is anything with ``u_star``, ``v_star`` and
``lambda_star`` attributes (normally an :class:`~distal.oracle.OracleSolution`).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .network import edge_effective_probability, enumerate_activation_outcomes
from .problem import coupling_residual, slot_residual

DEFAULT_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class LyapunovWeights:
    """Per-slot diagonal weights ``1/eta`` and ``1/(alpha eta)``, shape ``(S, 1)``."""

    H: np.ndarray
    H_tilde: np.ndarray


def lyapunov_weights(spec, step_sizes, model=None):
    eta = step_sizes.per_slot(spec)
    H = 1.0 / eta
    if model is None:
        return LyapunovWeights(H, H.copy())
    alpha, _ = edge_effective_probability(model, spec)
    return LyapunovWeights(H, H / alpha[spec.slot_edge][:, None])


@dataclass(frozen=True)
class MetricsRow:
    k: int
    feas_max: float
    feas_l2: float
    dist_u: float | None = None
    dist_v: float | None = None
    dist_lambda: float | None = None
    V: float | None = None
    V_tilde: float | None = None
    active_agents: int | None = None
    active_links: int | None = None

    @classmethod
    def header(cls):
        return [f.name for f in fields(cls)]

    def as_list(self):
        return [getattr(self, name) for name in self.header()]


def feasibility(spec, v):
    """Largest per-edge residual norm and the norm over all edges."""
    if not spec.edges:
        return 0.0, 0.0
    r = coupling_residual(spec, v)
    per_edge = np.linalg.norm(r, axis=1)
    return float(per_edge.max()), float(np.linalg.norm(per_edge))


def distances(spec, state, saddle):
    """Infinity-norm distances of ``u``, ``v`` and ``lambda`` to the saddle point."""
    du = max((float(np.abs(np.asarray(a) - np.asarray(b)).max(initial=0.0))
              for a, b in zip(state.u, saddle.u_star)), default=0.0)
    dv = float(np.abs(state.v - saddle.v_star).max(initial=0.0))
    dl = float(np.abs(state.lam - saddle.lambda_star).max(initial=0.0))
    return du, dv, dl


def lambda_tilde(spec, state, step_sizes):
    """``lambda + (1 - eta)(v_i^j + v_j^i)`` per slot."""
    eta = step_sizes.per_slot(spec)
    return state.lam + (1.0 - eta) * slot_residual(spec, state.v)


def nu(spec, state, step_sizes):
    """``lambda + (1 - eta)(v + z)``; equals :func:`lambda_tilde` while ``z`` mirrors ``v``."""
    eta = step_sizes.per_slot(spec)
    return state.lam + (1.0 - eta) * (state.v + state.z)


def _weighted(W, x):
    return float(np.sum(W * x * x))


def lyapunov_V(spec, state, saddle, step_sizes):
    """``||v - v*||_H^2 + 0.5 ||lambda_tilde - lambda*||_H^2``."""
    H = lyapunov_weights(spec, step_sizes).H
    lt = lambda_tilde(spec, state, step_sizes)
    return _weighted(H, state.v - saddle.v_star) + 0.5 * _weighted(H, lt - saddle.lambda_star)


def lyapunov_V_tilde(spec, state, saddle, step_sizes, model):
    """Same as :func:`lyapunov_V` with weights ``1/(alpha eta)`` and ``nu`` in place of ``lambda_tilde``."""
    Ht = lyapunov_weights(spec, step_sizes, model).H_tilde
    n_ = nu(spec, state, step_sizes)
    return _weighted(Ht, state.v - saddle.v_star) + 0.5 * _weighted(Ht, n_ - saddle.lambda_star)


def strong_convexity(spec):
    """Smallest eigenvalue of each private curvature (0 for an empty block)."""
    return np.array([ag.private_cost.min_eigenvalue() if ag.private_dim else 0.0
                     for ag in spec.agents])


def decrement(spec, saddle, step_sizes, u_next, v_hat, v, m=None):
    """Three-sum decrease certified per step.

    ``sum_i m_i ||u_i - u_i*||^2 + sum (3/2 - eta) ||v_hat - v||^2
    + sum (eta - 4 eta^2)/2 ||v_hat_i^j + v_hat_j^i||^2``, the last two sums
    over directed slots.
    """
    m = strong_convexity(spec) if m is None else m
    eta = step_sizes.per_slot(spec)
    du = sum(float(mi) * float(np.sum((np.asarray(a) - np.asarray(b)) ** 2))
             for mi, a, b in zip(m, u_next, saddle.u_star))
    gap = float(np.sum((1.5 - eta) * (v_hat - v) ** 2))
    pair = v_hat + v_hat[spec.reverse]
    cons = float(np.sum(0.5 * (eta - 4.0 * eta * eta) * pair * pair))
    return du + gap + cons


@dataclass(frozen=True)
class SupermartingaleCheck:
    expected: float
    current: float
    decrement: float

    @property
    def margin(self):
        """``current - decrement - expected``; non-negative when the inequality holds."""
        return self.current - self.decrement - self.expected

    def holds(self, slack=DEFAULT_SLACK):
        return self.expected - self.current <= -self.decrement + slack


def expected_V_tilde_decrement(spec, state, saddle, step_sizes, model, settings=None,
                               xi_shortcut=False):
    """Exact ``E[V_tilde(k+1) | F(k)]`` and the certified decrement at ``state``.

    The expectation enumerates every activation outcome and runs one
    deterministic step per outcome.  The decrement uses the full-activation
    solutions ``u(k+1)`` and ``v_hat(k)``.

    Raises
    ------
    TooLarge
        When the network has more Bernoulli variables than the enumeration
        limit.
    """
    from .algorithm import primal_phase, step
    from .network import ActivationSample

    outcomes = enumerate_activation_outcomes(model)
    expected = 0.0
    for sample, p in outcomes:
        nxt = step(spec, state, sample, step_sizes, settings, xi_shortcut)
        expected += p * lyapunov_V_tilde(spec, nxt, saddle, step_sizes, model)
    u_next, v_hat, _ = primal_phase(spec, state, ActivationSample.full(spec), step_sizes, settings)
    dec = decrement(spec, saddle, step_sizes, u_next, v_hat, state.v)
    return SupermartingaleCheck(expected, lyapunov_V_tilde(spec, state, saddle, step_sizes, model),
                                dec)


def metrics_row(spec, state, sample, step_sizes, saddle=None, model=None):
    """Row for iteration ``state.k``; ``sample`` is the activation that produced it."""
    fmax, fl2 = feasibility(spec, state.v)
    kw = {}
    if saddle is not None:
        kw["dist_u"], kw["dist_v"], kw["dist_lambda"] = distances(spec, state, saddle)
        kw["V"] = lyapunov_V(spec, state, saddle, step_sizes)
        if model is not None:
            kw["V_tilde"] = lyapunov_V_tilde(spec, state, saddle, step_sizes, model)
    if sample is not None:
        kw["active_agents"] = int(np.count_nonzero(sample.agents))
        kw["active_links"] = int(np.count_nonzero(sample.links))
    return MetricsRow(state.k, fmax, fl2, **kw)


# -- ergodic averages and the rate bound ----------------------------------------

def ergodic_averages(trace, k):
    """``(u_bar(k), v_bar(k), v_hat_bar(k))`` from a trace with every snapshot.

    ``u_bar`` and ``v_bar`` average iterations ``0..k-1``.  ``v_hat_bar``
    averages ``v_hat(0..k-1)``; ``v_hat(l)`` is produced by the step
    ``l -> l+1`` and is stored in snapshot ``l + 1``.
    """
    if k < 1:
        raise ValueError("ergodic averages need k >= 1")
    missing = [ell for ell in range(k + 1) if ell not in trace.states]
    if missing:
        raise ValueError(f"trace lacks snapshot {missing[0]}; rerun with snapshot_stride=1")
    acc = ErgodicAverager()
    for ell in range(k + 1):
        acc.add(trace.states[ell])
    return acc.averages(k)


class ErgodicAverager:
    """Running sums for ergodic averages, fed one state at a time from ``k = 0``."""

    def __init__(self):
        self.count = 0
        self._u = []
        self._v = []
        self._vh = []

    def add(self, state):
        if state.k != self.count:
            raise ValueError(f"expected state {self.count}, got {state.k}")
        u = [np.asarray(a, dtype=float) for a in state.u]
        if self.count == 0:
            self._u.append([np.zeros_like(a) for a in u])
            self._v.append(np.zeros_like(state.v))
            self._vh.append(np.zeros_like(state.v))
        else:
            self._vh.append(self._vh[-1] + state.v_hat)
        self._u.append([s + a for s, a in zip(self._u[-1], u)])
        self._v.append(self._v[-1] + state.v)
        self.count += 1

    def averages(self, k):
        """Averages over the first ``k`` iterations; needs states ``0..k``."""
        if not 1 <= k < self.count:
            raise ValueError(f"averages at k={k} need states 0..{k}; have {self.count}")
        return ([s / k for s in self._u[k]], self._v[k] / k, self._vh[k] / k)

    def rate_lhs(self, spec, saddle, step_sizes, k, m=None):
        """Per-trace left side of the rate bound; needs states ``0..k-1``."""
        if not 1 <= k <= self.count:
            raise ValueError(f"rate bound at k={k} needs states 0..{k - 1}; have {self.count}")
        u_bar = [s / k for s in self._u[k]]
        if k == 1:
            zero = np.zeros_like(self._v[0])
            return decrement(spec, saddle, step_sizes, u_bar, zero, zero, m)
        j = k - 1
        return decrement(spec, saddle, step_sizes, u_bar, self._vh[j] / j, self._v[j] / j, m)


def rate_rhs(spec, state0, saddle, step_sizes, model, k):
    """``V(0) / (alpha_min k)``."""
    _, alpha_min = edge_effective_probability(model, spec)
    return lyapunov_V(spec, state0, saddle, step_sizes) / (alpha_min * k)


def rate_bound(spec, trace, saddle, step_sizes, model, k):
    """``(lhs, rhs)`` of the ergodic rate bound at iteration ``k`` for one trace.

    ``lhs`` uses ``u_bar(k)`` with ``v_bar(k-1)`` and ``v_hat_bar(k-1)``; at
    ``k = 1`` the two averages over an empty range contribute nothing.  The
    bound holds for the expectation of ``lhs``, so callers average over seeds.
    """
    if k < 1:
        raise ValueError("rate bound needs k >= 1")
    acc = ErgodicAverager()
    for ell in range(k):
        if ell not in trace.states:
            raise ValueError(f"trace lacks snapshot {ell}; rerun with snapshot_stride=1")
        acc.add(trace.states[ell])
    lhs = acc.rate_lhs(spec, saddle, step_sizes, k)
    return lhs, rate_rhs(spec, trace.states[0], saddle, step_sizes, model, k)
