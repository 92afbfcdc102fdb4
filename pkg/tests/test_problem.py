import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from distal.errors import (DimensionMismatch, InfeasibleLocalSet, InfeasibleProblem,
                           NonConvex, ProblemError, UnboundedSet)
from distal.problem import (AffineEquality, AgentSpec, BoxSet, ProblemSpec, QuadraticCost,
                            coupling_residual, evaluate_lagrangian, evaluate_total_cost,
                            slot_residual, validate_problem)


def scalar_agent(P=2.0, box=5.0, private_dim=1, ns=1, eq=None):
    return AgentSpec(private_dim, QuadraticCost(np.eye(private_dim) * P, np.zeros(private_dim)),
                     QuadraticCost.zero(ns), BoxSet.uniform(private_dim + ns, box), eq)


def pair(a0, a1):
    return ProblemSpec(2, ((0, 1),), 1, (a0, a1))


class TestQuadraticCost:
    def test_value_and_gradient(self):
        f = QuadraticCost([[2.0, 0.0], [0.0, 4.0]], [1.0, -1.0], 3.0)
        x = np.array([1.0, 2.0])
        assert f(x) == pytest.approx(0.5 * (2 + 16) + 1 - 2 + 3)
        assert_allclose(f.gradient(x), [3.0, 7.0])

    def test_rejects_asymmetric(self):
        with pytest.raises(ProblemError):
            QuadraticCost([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            QuadraticCost(np.eye(2), [0.0, 0.0, 0.0])

    @given(st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_gradient_matches_central_differences(self, dim, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((dim, dim))
        f = QuadraticCost(A @ A.T + np.eye(dim), rng.standard_normal(dim), 0.3)
        x = rng.standard_normal(dim)
        h = 1e-5
        fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(dim)])
        g = f.gradient(x)
        assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))

    @given(st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_strong_monotonicity_with_reported_modulus(self, dim, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((dim, dim))
        f = QuadraticCost(A @ A.T + 0.1 * np.eye(dim), rng.standard_normal(dim))
        m = f.min_eigenvalue()
        x, y = rng.standard_normal(dim), rng.standard_normal(dim)
        lhs = (f.gradient(y) - f.gradient(x)) @ (y - x)
        assert lhs >= m * np.sum((y - x) ** 2) - 1e-9


class TestProblemSpec:
    def test_slot_layout(self):
        agents = [scalar_agent(ns=2), scalar_agent(ns=1), scalar_agent(ns=1)]
        spec = ProblemSpec(3, ((1, 0), (2, 0)), 1, agents)
        assert spec.edges == ((0, 1), (0, 2))
        assert spec.neighbors == ((1, 2), (0,), (0,))
        assert spec.num_slots == 4
        assert spec.agent_slots(0) == slice(0, 2)
        assert spec.slot(0, 2) == 1 and spec.slot(2, 0) == 3
        assert list(spec.reverse) == [2, 3, 0, 1]

    def test_rejects_self_loop_and_duplicate(self):
        with pytest.raises(ProblemError):
            ProblemSpec(2, ((0, 0),), 1, (scalar_agent(ns=0), scalar_agent(ns=0)))
        with pytest.raises(ProblemError):
            pair_edges = ((0, 1), (1, 0))
            ProblemSpec(2, pair_edges, 1, (scalar_agent(), scalar_agent()))

    def test_rejects_wrong_box_dimension(self):
        bad = AgentSpec(1, QuadraticCost([[2.0]], [0.0]), QuadraticCost.zero(1),
                        BoxSet.uniform(3, 1.0))
        with pytest.raises(DimensionMismatch):
            pair(bad, scalar_agent())


class TestValidate:
    def test_p2_valid(self, spec2):
        rep = validate_problem(spec2)
        assert_allclose(rep.strong_convexity, [2.0, 2.0])
        assert rep.global_feasible is True

    def test_empty_box(self):
        bad = AgentSpec(1, QuadraticCost([[2.0]], [0.0]), QuadraticCost.zero(1),
                        BoxSet([1.0, 0.0], [0.0, 1.0]))
        with pytest.raises(InfeasibleLocalSet):
            validate_problem(pair(bad, scalar_agent()))

    def test_zero_curvature(self):
        with pytest.raises(NonConvex):
            validate_problem(pair(scalar_agent(P=0.0), scalar_agent()))

    def test_indefinite_shared_curvature(self):
        bad = AgentSpec(1, QuadraticCost([[2.0]], [0.0]), QuadraticCost([[-1.0]], [0.0]),
                        BoxSet.uniform(2, 1.0))
        with pytest.raises(NonConvex):
            validate_problem(pair(bad, scalar_agent()))

    def test_infinite_bound(self):
        bad = AgentSpec(1, QuadraticCost([[2.0]], [0.0]), QuadraticCost.zero(1),
                        BoxSet([-np.inf, -1.0], [1.0, 1.0]))
        with pytest.raises(UnboundedSet):
            validate_problem(pair(bad, scalar_agent()))

    def test_unreachable_equality(self):
        # u + v = 5 cannot hold inside [-1, 1]^2.
        eq = AffineEquality([[1.0]], [[1.0]], [-5.0])
        with pytest.raises(InfeasibleLocalSet):
            validate_problem(pair(scalar_agent(box=1.0, eq=eq), scalar_agent()))

    def test_globally_infeasible_coupling(self):
        # v_0 = 1 forced locally, v_1 in [0, 0.5]: v_0 + v_1 = 0 impossible.
        a0 = scalar_agent(eq=AffineEquality([[0.0]], [[1.0]], [-1.0]))
        a1 = AgentSpec(1, QuadraticCost([[2.0]], [0.0]), QuadraticCost.zero(1),
                       BoxSet([-1.0, 0.0], [1.0, 0.5]))
        with pytest.raises(InfeasibleProblem):
            validate_problem(pair(a0, a1))
        assert validate_problem(pair(a0, a1), check_global=False).global_feasible is None


class TestEvaluation:
    def test_total_cost(self, spec2):
        assert evaluate_total_cost(spec2, [[2.0], [-1.0]], [[0.5], [-0.5]]) == pytest.approx(0.5)
        assert evaluate_total_cost(spec2, [[0.0], [0.0]], [[0.0], [0.0]]) == pytest.approx(6.0)

    def test_zero_costs(self):
        zero = AgentSpec(1, QuadraticCost([[0.0]], [0.0]), QuadraticCost.zero(1),
                         BoxSet.uniform(2, 1.0))
        assert evaluate_total_cost(pair(zero, zero), [[0.3], [0.1]], [[0.2], [0.7]]) == 0.0

    def test_coupling_residual(self, spec2):
        assert_allclose(coupling_residual(spec2, [[0.5], [-0.5]]), [[0.0]])
        assert_allclose(coupling_residual(spec2, [[1.0], [1.0]]), [[2.0]])
        assert_allclose(coupling_residual(spec2, np.zeros((2, 1))), [[0.0]])

    def test_lagrangian_counts_each_edge_twice(self, spec2):
        val = evaluate_lagrangian(spec2, [[2.0], [-1.0]], [[1.0], [0.0]], [[0.5], [0.5]])
        assert val == pytest.approx(3.0)

    def test_lagrangian_at_saddle(self, spec2, saddle2):
        val = evaluate_lagrangian(spec2, saddle2.u_star, saddle2.v_star, saddle2.lambda_star)
        assert val == pytest.approx(0.5)

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(-3, 3), st.floats(-3, 3))
    def test_lagrangian_equals_cost_when_feasible(self, u, t, lam):
        from distal.fixtures import p2

        spec = p2()
        v = [[t], [-t]]
        uu = [[u[0]], [u[1]]]
        assert evaluate_lagrangian(spec, uu, v, [[lam], [-2 * lam]]) == pytest.approx(
            evaluate_total_cost(spec, uu, v))

    @given(st.integers(0, 2**31 - 1))
    def test_slot_residual_symmetric(self, seed):
        agents = [scalar_agent(ns=2), scalar_agent(ns=2), scalar_agent(ns=2)]
        spec = ProblemSpec(3, ((0, 1), (0, 2), (1, 2)), 1, agents)
        v = np.random.default_rng(seed).standard_normal((spec.num_slots, 1))
        r = slot_residual(spec, v)
        assert_allclose(r, r[spec.reverse])
