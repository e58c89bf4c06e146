import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import lifted_oracle, northwest_plan, projected_oracle, quantile_cost
from wassreg.measures import DiscreteMeasure
from wassreg.ot1d import lifted_cost, project, slice_costs, w1d_cost, w1d_plan


def _line(x, w=None):
    return project(DiscreteMeasure(np.asarray(x, float)[:, None], w), [1.0])


def test_projection_examples():
    m = DiscreteMeasure([[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_array_equal(project(m, [1.0, 0.0]).positions, [0.0, 1.0])
    np.testing.assert_array_equal(project(m, [0.0, 1.0]).positions, [0.0, 0.0])
    assert project(DiscreteMeasure([[3.0, 4.0]]), [0.6, 0.8]).positions[0] == pytest.approx(5.0, abs=1e-15)


def test_w1d_cost_examples():
    a = _line([0.0, 2.0])
    assert w1d_cost(a, a, 2) == 0.0
    assert w1d_cost(a, _line([1.0, 3.0]), 2) == pytest.approx(1.0, abs=1e-15)
    assert w1d_cost(_line([0.0]), _line([-1.5]), 3) == pytest.approx(1.5**3)


def test_w1d_plan_examples():
    plan = w1d_plan(_line([0.0, 1.0], [0.5, 0.5]), _line([0.0, 1.0], [0.25, 0.75]))
    assert sorted(plan.entries) == [(0, 0, 0.25), (0, 1, 0.25), (1, 1, 0.5)]
    plan = w1d_plan(_line([0.0]), _line([1.0, 2.0]))
    assert sorted(plan.entries) == [(0, 0, 0.5), (0, 1, 0.5)]
    plan = w1d_plan(_line([3.0, 1.0, 2.0]), _line([0.0, 5.0, 4.0]))
    assert sorted(plan.entries) == [(0, 1, 1 / 3), (1, 0, 1 / 3), (2, 2, 1 / 3)]


def test_lifted_examples():
    mu, nu = DiscreteMeasure([[0.0, 0.0]]), DiscreteMeasure([[3.0, 4.0]])
    for t in np.linspace(0, np.pi, 7):
        assert lifted_cost(mu, nu, [np.cos(t), np.sin(t)], 2) == pytest.approx(25.0)
    mu = DiscreteMeasure([[0.0, 0.0], [1.0, 1.0]])
    nu = DiscreteMeasure([[1.0, 0.0], [0.0, 1.0]])
    assert lifted_cost(mu, nu, [1.0, 0.0], 2) == pytest.approx(1.0)
    for t in np.linspace(0.1, 3.0, 15):
        assert lifted_cost(mu, nu, [np.cos(t), np.sin(t)], 2) >= 1.0 - 1e-12


def test_lifted_equals_projected_in_one_dimension(rng):
    for _ in range(20):
        mu = DiscreteMeasure(rng.normal(size=(7, 1)))
        nu = DiscreteMeasure.from_masses(rng.normal(size=(4, 1)), rng.uniform(0.1, 1, 4))
        for s in (1.0, -1.0):
            proj, lift = slice_costs(mu, nu, np.array([[s]]), 2)
            assert lift[0] == proj[0]


weights = st.lists(st.floats(0.05, 1.0), min_size=1, max_size=7)


@given(
    st.integers(0, 2**32 - 1),
    weights,
    weights,
    st.sampled_from([1.0, 1.5, 2.0, 3.0]),
    st.integers(1, 4),
)
def test_slice_costs_match_greedy_oracle(seed, wa, wb, p, d):
    r = np.random.default_rng(seed)
    a, b = np.array(wa) / sum(wa), np.array(wb) / sum(wb)
    X, Y = r.normal(size=(len(a), d)), r.normal(size=(len(b), d))
    if r.random() < 0.3:
        X = np.round(X, 0)  # exercise ties
    thetas = r.normal(size=(3, d))
    thetas /= np.linalg.norm(thetas, axis=1, keepdims=True)
    mu, nu = DiscreteMeasure(X, a), DiscreteMeasure(Y, b)
    proj, lift = slice_costs(mu, nu, thetas, p)
    for k, th in enumerate(thetas):
        assert proj[k] == pytest.approx(projected_oracle(X, mu.weights, Y, nu.weights, th, p), rel=1e-9, abs=1e-12)
        assert lift[k] == pytest.approx(lifted_oracle(X, mu.weights, Y, nu.weights, th, p), rel=1e-9, abs=1e-12)
        assert lift[k] >= proj[k] - 1e-12 or p > 2


@given(st.integers(0, 2**32 - 1), weights, weights)
def test_plan_marginals_and_size(seed, wa, wb):
    r = np.random.default_rng(seed)
    x, y = r.normal(size=len(wa)), r.normal(size=len(wb))
    mu = project(DiscreteMeasure.from_masses(x, wa), [1.0])
    nu = project(DiscreteMeasure.from_masses(y, wb), [1.0])
    plan = w1d_plan(mu, nu)
    np.testing.assert_allclose(plan.row_sums(len(wa)), mu.weights, atol=1e-9)
    np.testing.assert_allclose(plan.col_sums(len(wb)), nu.weights, atol=1e-9)
    assert len(plan) <= len(wa) + len(wb) - 1
    oracle = {(i, j): m for i, j, m in northwest_plan(x, mu.weights, y, nu.weights)}
    dense = plan.dense(len(wa), len(wb))
    for (i, j), m in oracle.items():
        assert dense[i, j] == pytest.approx(m, abs=1e-12)
    assert w1d_cost(mu, nu, 2) == pytest.approx(quantile_cost(x, mu.weights, y, nu.weights, 2), abs=1e-12)


def test_batch_invariance(rng):
    mu = DiscreteMeasure(rng.normal(size=(40, 5)))
    nu = DiscreteMeasure(rng.normal(size=(30, 5)))
    th = rng.normal(size=(20, 5))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    proj, lift = slice_costs(mu, nu, th, 2)
    for k in range(20):
        p1, l1 = slice_costs(mu, nu, th[k : k + 1], 2)
        assert p1[0] == proj[k] and l1[0] == lift[k]


def test_bad_inputs():
    mu = DiscreteMeasure([[0.0, 1.0]])
    with pytest.raises(ValueError):
        slice_costs(mu, mu, np.ones((1, 3)), 2)
    with pytest.raises(ValueError):
        slice_costs(mu, mu, np.ones((1, 2)), 0.5)
