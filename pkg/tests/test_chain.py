import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treegibbs import chain, oracle
from treegibbs.chain import ChainEnvironment
from treegibbs.errors import DomainError, NotApplicable

signs = st.sampled_from([-1, 1])


def envs(min_size=1, max_size=12):
    return st.builds(
        lambda e0, h: ChainEnvironment(e0, tuple(h)), signs, st.lists(signs, min_size=min_size, max_size=max_size)
    )


@pytest.mark.parametrize("beta", [0.0, 0.7, 1.5])
def test_displayed_matrices(beta):
    e = math.exp
    shown = {
        (1, 1): [[1, e(-beta)], [e(-beta), 0]],
        (-1, -1): [[0, e(-beta)], [e(-beta), 1]],
        (1, -1): [[0, e(-2 * beta)], [1, e(beta)]],  # h_{n-1} = +, h_n = -
        (-1, 1): [[e(beta), 1], [e(-2 * beta), 0]],  # h_{n-1} = -, h_n = +
    }
    for (h_prev, h_cur), M in shown.items():
        assert np.allclose(chain.q_matrix(h_prev, h_cur, beta), M)


def test_flip_symmetry_of_transfer_matrices():
    for h_prev in (-1, 1):
        for h_cur in (-1, 1):
            Q = chain.q_matrix(h_prev, h_cur, 0.9)
            assert np.allclose(chain.q_matrix(-h_prev, -h_cur, 0.9), Q[::-1, ::-1])


def test_infinite_temperature_matrix():
    assert chain.q_matrix(1, 1, 0.0).tolist() == [[1, 1], [1, 0]]


def test_a_coeff():
    assert chain.a_coeff(0.0) == pytest.approx(0.5)
    assert chain.a_coeff(1.0) == pytest.approx(0.12838, abs=1e-5)
    for beta in np.linspace(0, 5, 51):
        assert 0 < chain.a_coeff(beta) < 1


@pytest.mark.parametrize("beta", [0.2, 0.5, 0.8, 1.0, 2.0])
def test_closed_form_power(beta):
    P = np.eye(2)
    for n in range(1, 201):
        P = P @ chain.p_plus(beta)
        assert np.abs(P - chain.p_plus_power(n, beta)).max() <= 1e-12
    assert np.allclose(chain.p_plus_power(1, beta), chain.p_plus(beta))


def test_printed_correction_signs_would_be_wrong():
    # the variant with the (a-1) corrections subtracted from column one fails at n = 1
    a = chain.a_coeff(0.8)
    r = a - 1
    printed = np.array([[(1 + r**2) / (2 - a), (1 - a - r**2) / (2 - a)], [(1 + r) / (2 - a), (1 - a - r) / (2 - a)]])
    assert not np.allclose(printed, chain.p_plus(0.8))


def test_limit_matrix():
    M = chain.limit_matrix(0.0)
    assert np.allclose(M, [[2 / 3, 1 / 3], [2 / 3, 1 / 3]])
    assert np.allclose(chain.limit_matrix(1.3).sum(axis=1), 1.0)
    assert np.allclose(chain.p_plus_power(200, 0.5), chain.limit_matrix(0.5), atol=1e-10)


def test_homogeneous_limit_formula():
    assert chain.homogeneous_limit_magnetization(0.0) == pytest.approx(1 / 6)
    assert chain.homogeneous_limit_magnetization(1.0) == pytest.approx(0.44177, abs=1e-5)
    assert chain.homogeneous_limit_magnetization(1.0, -1) == -chain.homogeneous_limit_magnetization(1.0)


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
def test_homogeneous_chain_limit(beta):
    env = ChainEnvironment.from_pattern("plus", 60)
    plus = chain.chain_conditional_magnetization(env, 1, 60, beta)
    minus = chain.chain_conditional_magnetization(env, -1, 60, beta)
    assert abs(plus - minus) <= 1e-10
    # the chain converges to its Perron law, which differs from the closed-form expression
    assert plus == pytest.approx(chain.perron_limit_probability(beta), abs=1e-10)
    assert plus != pytest.approx(chain.homogeneous_limit_magnetization(beta), abs=1e-3)


def test_perron_value_at_infinite_temperature():
    # Q = [[1, 1], [1, 0]]: golden-ratio eigenvector
    phi = (1 + math.sqrt(5)) / 2
    assert chain.perron_limit_probability(0.0) == pytest.approx(1 / (1 + phi))


@settings(max_examples=200, deadline=None)
@given(envs(max_size=10), st.floats(0, 3), signs, st.data())
def test_chain_matches_enumeration(env, beta, x0, data):
    R = data.draw(st.integers(0, len(env)))
    plus, minus = oracle.oracle_chain(env.full(), R, beta)
    expected = plus if x0 == 1 else minus
    assert chain.chain_conditional_magnetization(env, x0, R, beta) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(envs(max_size=8), st.floats(0.1, 2), st.lists(st.floats(0.1, 10), min_size=8, max_size=8))
def test_rescaling_factors_leaves_magnetization_unchanged(env, beta, scales):
    R = len(env)
    h = env.full()
    P = np.eye(2)
    for n in range(1, R + 1):
        P = P @ (scales[n - 1] * chain.q_matrix(h[n - 1], h[n], beta))
    for x0 in (-1, 1):
        row = P[chain.spin_index(x0)]
        assert row[1] / row.sum() == pytest.approx(chain.chain_conditional_magnetization(env, x0, R, beta), abs=1e-12)


def test_long_products_stay_finite():
    env = ChainEnvironment.from_pattern("+-+", 10000)
    m = chain.chain_conditional_magnetization(env, 1, 10000, 3.0)
    assert 0.0 <= m <= 1.0


def test_is_alternating():
    assert chain.is_alternating([1, -1, 1, -1])
    assert chain.is_alternating(ChainEnvironment.from_pattern("alt", 9))
    assert not chain.is_alternating([1, 1, 1])
    assert not chain.is_alternating([1, -1, 1, 1, -1])


def test_ratio_trajectories():
    homog = chain.ratio_trajectories(ChainEnvironment.from_pattern("plus", 20), 1.0)
    assert homog.n0 is not None and homog.n0 <= 3
    assert all(x > 0 and y > 0 for x, y in zip(homog.x, homog.y))
    alt = chain.ratio_trajectories(ChainEnvironment.from_pattern("alt", 20, eta0_sign=-1), 1.0)
    assert alt.n0 is None


def test_alternating_environment_keeps_its_gap():
    env = ChainEnvironment.from_pattern("alt", 40, eta0_sign=-1)
    gaps = [
        abs(chain.chain_conditional_magnetization(env, 1, R, 1.0) - chain.chain_conditional_magnetization(env, -1, R, 1.0))
        for R in (10, 20, 39, 40)
    ]
    assert min(gaps) > 0.1
    with pytest.raises(NotApplicable):
        chain.gap_bound(env, 20, 1.0)


def test_ratio_updates_follow_maps():
    # after n0 each ratio x_n evolves by the map attached to the new factor
    env = ChainEnvironment(1, (1, 1, -1, -1, 1, -1, 1, 1, -1))
    beta = 0.6
    traj = chain.ratio_trajectories(env, beta)
    h = env.full()
    for i, n in enumerate(traj.steps[:-1]):
        tag = chain.STEP_MAP[(h[n], h[n + 1])]
        predicted = chain.contraction_map(tag, traj.x[i], beta)[0]
        if tag == "f1":
            # the product recursion for this factor is x -> e^b + 1/x
            assert traj.x[i + 1] == pytest.approx(math.exp(beta) + 1 / traj.x[i])
            assert traj.x[i + 1] != pytest.approx(predicted)
        else:
            assert traj.x[i + 1] == pytest.approx(predicted)


def test_contraction_maps():
    assert chain.contraction_map("f1", 1.0, 0.0) == (2.0, 1.0)
    for x in (0.01, 1.0, 50.0):
        assert chain.contraction_map("f2", x, 0.7)[0] > math.exp(0.7)
    with pytest.raises(DomainError):
        chain.contraction_map("f1", 0.0, 1.0)
    with pytest.raises(DomainError):
        chain.contraction_map("f9", 1.0, 1.0)


@given(st.floats(1, 100), st.floats(1, 100), st.floats(0, 4))
def test_f1_lipschitz_above_one(x, y, beta):
    fx, k = chain.contraction_map("f1", x, beta)
    fy, _ = chain.contraction_map("f1", y, beta)
    assert abs(fx - fy) <= k * abs(x - y) * (1 + 1e-12) + 1e-15


def test_gap_bound_on_homogeneous_environment():
    env = ChainEnvironment.from_pattern("plus", 30)
    g30 = chain.gap_bound(env, 30, 1.0)
    assert g30.holds
    g29 = chain.gap_bound(env, 29, 1.0)
    assert g30.bound == pytest.approx(g29.bound * math.exp(-1.0))


def test_gap_bound_agrees_with_enumeration():
    env = ChainEnvironment(1, (1, -1, -1, 1, 1, 1, -1, 1, -1, -1, 1, 1))
    g = chain.gap_bound(env, 12, 0.9)
    plus, minus = oracle.oracle_chain(env.full(), 12, 0.9)
    assert g.actual == pytest.approx(abs(plus - minus), abs=1e-12)


def test_environment_validation():
    with pytest.raises(DomainError):
        ChainEnvironment(0, (1,))
    with pytest.raises(DomainError):
        ChainEnvironment(1, ())
    with pytest.raises(DomainError):
        ChainEnvironment.from_pattern("++x", 4)
    assert ChainEnvironment.from_pattern("++-", 7).fields == (1, 1, -1, 1, 1, -1, 1)
    with pytest.raises(DomainError):
        chain.chain_conditional_magnetization(ChainEnvironment(1, (1,)), 1, 2, 1.0)


def test_trajectory_csv():
    rows = chain.trajectory_rows(ChainEnvironment.from_pattern("++-+", 10), 0.8)
    text = chain.trajectory_csv(rows)
    assert text.splitlines()[0] == "n,x_n,y_n,abs_diff,bound_n,m_plus,m_minus"
    assert len(text.splitlines()) == len(rows) + 1
