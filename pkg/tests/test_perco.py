import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treegibbs import perco, renorm, tree
from treegibbs.errors import DomainError
from treegibbs.gibbs import FREE, ModelParams
from treegibbs.renorm import ImageField


def brute_path_counts(values, depth):
    counts = []
    for k in range(depth + 1):
        counts.append(sum(all(values[v.index] == 0 for v in path) for path in tree.iter_paths(k)))
    return counts


def test_count_zero_paths_examples():
    assert perco.count_zero_paths(ImageField.constant(5, 0)).counts[-1] == 32
    assert perco.count_zero_paths(ImageField.constant(3, 1)).counts == [0, 0, 0, 0]
    with pytest.raises(DomainError):
        perco.count_zero_paths(renorm.null_image(2))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 6).flatmap(lambda d: st.tuples(st.just(d), st.lists(st.sampled_from([-1, 0, 0, 1]), min_size=tree.ball_size(d), max_size=tree.ball_size(d)))))
def test_path_counts_match_enumeration(case):
    depth, values = case
    stats = perco.count_zero_paths(ImageField(depth, np.array(values)))
    assert stats.counts == brute_path_counts(values, depth)
    assert stats.counts[0] in (0, 1)
    assert all(b <= 2 * a for a, b in zip(stats.counts, stats.counts[1:]))
    assert all(c > 0 for c in stats.counts[: max([k for k, c in enumerate(stats.counts) if c > 0], default=-1) + 1])


def test_path_counts_on_sampled_images():
    summary = perco.monte_carlo_paths(1.0, 6, FREE, replicas=50, seed=3)
    assert summary.counts.shape == (50,)


def test_p_zero_values():
    assert perco.p_zero(0.0) == 0.75
    assert perco.p_zero(1.0) == pytest.approx(0.2241965, abs=1e-7)
    betas = np.linspace(0, 4, 200)
    vals = [perco.p_zero(b) for b in betas]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_beta_one():
    b1 = perco.beta_one()
    assert b1 == pytest.approx(0.5 * math.log(1 + math.sqrt(2)), abs=1e-10)
    assert perco.p_zero(b1) == pytest.approx(0.5, abs=1e-12)
    for beta in np.linspace(0, 2, 41):
        assert (perco.p_zero(beta) > 0.5) == (beta < b1)


def test_expected_paths_model():
    assert perco.expected_paths_model(1, 0.3) == 0.3
    assert perco.expected_paths_model(5, 0.75) == pytest.approx(2.75)
    assert all(perco.expected_paths_model(R, 0.5) == 0.5 for R in range(1, 20))


def test_mgf_model():
    assert perco.mgf_model(0.0, 0.4, 7) == pytest.approx(1.0)
    assert perco.mgf_model(0.5, 1.0, 4) == pytest.approx(math.exp(2.0))
    assert perco.mgf_model(0.5, 0.0, 4) == pytest.approx(math.exp(-2.0))
    step = 0.36 * math.exp(0.3) + 2 * 0.6 * 0.4 + 0.16 * math.exp(-0.3)
    assert perco.mgf_model(0.3, 0.6, 4) == pytest.approx(step**4, rel=1e-14)


@settings(max_examples=200)
@given(st.floats(0, 5), st.floats(0, 1), st.integers(1, 50))
def test_cumulant_bounds(theta, p, R):
    K = perco.cumulant_model(theta, p, R)
    slack = 1e-12 * R * (1 + theta)
    assert -R * theta - slack <= K <= R * theta + slack
    assert perco.mgf_model(theta, p, R) == perco.mgf_model(theta, p, 1) ** R


def test_deviation_bound():
    assert perco.deviation_bound(10, 0.3, 0.0) == 1.0
    assert perco.deviation_bound(10, 0.5, 1.0) == pytest.approx(math.exp(10 - math.exp(5)), rel=1e-12)
    seq = [perco.deviation_bound(R, 0.5, 1.0) for R in range(3, 12)]
    assert all(b < a for a, b in zip(seq, seq[1:]))
    best, theta = perco.optimal_deviation_bound(6, 0.5)
    assert best <= perco.deviation_bound(6, 0.5, 1.0)
    assert 1e-3 <= theta <= 10
    with pytest.raises(DomainError):
        perco.deviation_bound(5, 1.0, -1.0)


def test_mgf_general():
    assert perco.mgf_general(3, 0.0, 0.4, 5) == pytest.approx(1.0)
    assert perco.mgf_general(2, 0.7, 0.0, 3) == pytest.approx(math.exp(-2.1))
    # at k = 2 the order-k form expands to the birth-death MGF
    for theta, p in [(0.7, 0.6), (2.0, 0.1), (0.01, 0.9)]:
        assert perco.mgf_general(2, theta, p, 3) == pytest.approx(perco.mgf_model(theta, p, 3), rel=1e-13)
    with pytest.raises(DomainError):
        perco.mgf_general(1, 0.1, 0.5, 2)


def test_survival_fixed_point():
    s = perco.survival_probability(0.75)
    q = 1 - s
    assert q == pytest.approx((1 - 0.75 + 0.75 * q) ** 2)
    assert perco.survival_probability(0.4) == 0.0


def test_classify():
    null = perco.classify(ImageField.constant(6, 0), 0.3)
    assert null.ratio == pytest.approx((2 / math.exp(0.3)) ** 6)
    assert null.verdict == "suspect"
    clean = perco.classify(ImageField.constant(6, 1), 1.0)
    assert clean.ratio == 0 and clean.verdict == "good"


def test_alternating_zero_paths():
    # path along "1...1" with flanks +,-,+ alternates; flanks +,+ do not
    eta = renorm.single_path_image([1, -1, 1, -1], 3)
    full = ImageField(3, eta.values)
    assert perco.alternating_zero_paths(full.values, 3) == 1
    eta = renorm.single_path_image([1, 1, -1, 1], 3)
    assert perco.alternating_zero_paths(eta.values, 3) == 0


def test_zebra_counts_by_hand():
    # depth 2: zero path r -> 1 -> 11, flanks h1 = image("0"), h2 = image("10")
    values = np.array([0, 1, 0, 0, 0, -1, 0])
    trials, events = perco.zebra_counts(values, 2)
    assert (trials, events) == (1, 1)
    values = np.array([0, 1, 0, 0, 0, 1, 0])
    assert perco.zebra_counts(values, 2) == (1, 0)


def brute_zebra(values, depth):
    trials = events = 0
    for path in tree.iter_paths(depth):
        if any(values[v.index] != 0 for v in path):
            continue
        flanks = [values[tree.Vertex(v.bits[:-1] + ("1" if v.bits[-1] == "0" else "0")).index] for v in path[1:]]
        head = flanks[:-1]
        if any(h == 0 for h in head) or any(a != -b for a, b in zip(head, head[1:])):
            continue
        trials += 1
        events += flanks[-1] * flanks[-2] == -1
    return trials, events


def test_zebra_counts_match_enumeration(rng):
    for _ in range(300):
        values = rng.choice([-1, 0, 0, 0, 1], size=tree.ball_size(4))
        assert tuple(int(x) for x in perco.zebra_counts(values, 4)) == brute_zebra(values, 4)


def test_monte_carlo_is_deterministic_and_thread_independent():
    a = perco.monte_carlo_paths(0.3, 6, FREE, 1500, seed=9, thetas=(0.1,), threads=1)
    b = perco.monte_carlo_paths(0.3, 6, FREE, 1500, seed=9, thetas=(0.1,), threads=4)
    assert np.array_equal(a.counts, b.counts)
    assert a.mgf_emp == b.mgf_emp
    c = perco.monte_carlo_paths(0.3, 6, FREE, 500, seed=9, threads=1)
    assert np.array_equal(a.counts[:500], c.counts)  # earlier replicas unchanged by the count


def test_monte_carlo_regimes():
    hot = perco.monte_carlo_paths(0.0, 8, FREE, 2000, seed=1)
    cold = perco.monte_carlo_paths(1.0, 8, FREE, 2000, seed=1)
    assert hot.survival_freq > 0.3
    assert cold.survival_freq < 0.02
    assert sum(hot.histogram.values()) == 2000


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("TREEGIBBS_THREADS", "3")
    assert perco.thread_count() == 3
    monkeypatch.setenv("TREEGIBBS_THREADS", "lots")
    with pytest.raises(DomainError):
        perco.thread_count()


def test_zebra_estimate_has_error_bar():
    est = perco.zebra_one_step(0.0, 3000, seed=4, depth=3)
    assert est.trials > 0 and 0 <= est.estimate <= 1
    assert est.stderr > 0
    assert perco.ZEBRA_BOUND < perco.CRITICAL_P
