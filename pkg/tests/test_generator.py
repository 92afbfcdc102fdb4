import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from distal.errors import ConfigError, GenerationFailed
from distal.generator import GeneratorParams, generate_random_problem
from distal.problem import validate_problem
from distal.problem_io import problem_hash


def test_deterministic():
    params = GeneratorParams(n=6, density=0.4)
    assert problem_hash(generate_random_problem(params, 17)) == \
        problem_hash(generate_random_problem(params, 17))
    assert problem_hash(generate_random_problem(params, 17)) != \
        problem_hash(generate_random_problem(params, 18))


def test_two_agents_single_edge():
    spec = generate_random_problem(GeneratorParams(n=2, density=1.0), 0)
    assert spec.edges == ((0, 1),)


def test_single_agent_no_edges():
    spec = generate_random_problem(GeneratorParams(n=1), 0)
    assert spec.edges == ()
    assert spec.agents[0].shared_cost.dim == 0


def test_hundred_seeds_valid():
    params = GeneratorParams(n=10, density=0.3)
    for seed in range(100):
        spec = generate_random_problem(params, seed)
        report = validate_problem(spec)
        assert report.global_feasible
        assert min(report.strong_convexity) >= params.curvature[0] - 1e-12


@given(st.integers(0, 10_000), st.sampled_from(["zero", "linear", "quadratic"]),
       st.integers(1, 3))
def test_shapes(seed, kind, n_s):
    params = GeneratorParams(n=4, density=0.7, n_s=n_s, shared_kind=kind)
    spec = generate_random_problem(params, seed)
    for i, ag in enumerate(spec.agents):
        assert 1 <= ag.private_dim <= 2
        assert ag.shared_cost.dim == n_s * len(spec.neighbors[i])
        assert np.all(ag.box.hi == params.half_width)
        # Private minimiser sits inside the box.
        c = -ag.private_cost.p / np.diag(ag.private_cost.P)
        assert np.all(np.abs(c) <= 0.8 * params.half_width)


def test_disconnected_gives_up():
    with pytest.raises(GenerationFailed):
        generate_random_problem(GeneratorParams(n=30, density=0.01, max_retries=5), 0)


@pytest.mark.parametrize("kw", [dict(n=0), dict(density=0.0), dict(density=1.5),
                                dict(curvature=(2.0, 1.0)), dict(shared_kind="cubic")])
def test_params_validated(kw):
    with pytest.raises(ConfigError):
        GeneratorParams(**kw)
