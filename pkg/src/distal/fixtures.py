"""Small reference problems with known solutions."""

import numpy as np

from .problem import AgentSpec, BoxSet, ProblemSpec, QuadraticCost


def _scalar_square(shift):
    # (x - shift)^2 = 0.5 * 2 x^2 - 2 shift x + shift^2
    return QuadraticCost([[2.0]], [-2.0 * shift], shift * shift)


def p2(half_width=5.0):
    """Two agents, one edge, scalar blocks.

    Costs are ``(u_1 - 2)^2``, ``(u_2 + 1)^2``, ``(v_1^2 - 1)^2`` and
    ``(v_2^1)^2`` with every coordinate boxed to ``[-5, 5]``.  The saddle
    point is ``u* = (2, -1)``, ``v* = (0.5, -0.5)``,
    ``lambda_1^2* = lambda_2^1* = 0.5``.
    """
    box = BoxSet.uniform(2, half_width)
    agents = (
        AgentSpec(1, _scalar_square(2.0), _scalar_square(1.0), box),
        AgentSpec(1, _scalar_square(-1.0), _scalar_square(0.0), box),
    )
    return ProblemSpec(2, ((0, 1),), 1, agents)


P2_SADDLE = {
    "u": [np.array([2.0]), np.array([-1.0])],
    "v": np.array([[0.5], [-0.5]]),
    "lambda": np.array([[0.5], [0.5]]),
    "cost": 0.5,
}
