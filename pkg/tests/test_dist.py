import math

import numpy as np
import pytest

from artifact import dist
from artifact.dist import Marginal, ProductPrior


def test_sample_point_mass_and_determinism(coin):
    p = ProductPrior.iid(Marginal.point(3.0), 2, 2)
    assert np.all(dist.sample(p, 1, 5) == 3.0)
    q = ProductPrior.iid(coin, 1, 1)
    a = dist.sample(q, 7, 1000)
    assert np.array_equal(a, dist.sample(q, 7, 1000))


def test_sample_mean(coin):
    s = dist.sample(ProductPrior.iid(coin, 1, 1), 7, 100_000)
    assert abs(s.mean() - 1.5) <= 0.02


def test_parametric_without_inverse_rejected():
    d = Marginal.parametric("equal_revenue", 4.0)
    assert d.upper == 4.0
    with pytest.raises(dist.DistError):
        Marginal.parametric("lognormal", 1.0)


def test_kolmogorov_examples(coin):
    assert dist.kolmogorov_distance(coin, coin) == 0.0
    assert dist.kolmogorov_distance(Marginal.point(1.0), Marginal.point(2.0)) == 1.0
    other = Marginal.from_pairs({1.0: 0.3, 2.0: 0.7})
    assert dist.kolmogorov_distance(coin, other) == pytest.approx(0.2)


def test_empirical_counts():
    e = dist.empirical([2.0])
    assert e.support.tolist() == [2.0] and e.probs.tolist() == [1.0]
    e = dist.empirical([1, 1, 3])
    assert e.support.tolist() == [1.0, 3.0]
    assert e.probs == pytest.approx([2 / 3, 1 / 3])


def test_truncate_examples():
    d = Marginal.from_pairs({1.0: 0.5, 3.0: 0.5})
    t = dist.truncate(d, 2.0)
    assert t.support.tolist() == [1.0, 2.0] and t.probs.tolist() == [0.5, 0.5]
    assert dist.truncate(d, 10.0) is d or dist.kolmogorov_distance(dist.truncate(d, 10.0), d) == 0
    one = dist.truncate(d, 1.0)
    assert one.support.tolist() == [1.0] and one.probs.tolist() == [1.0]


def test_quantile_examples(coin):
    assert dist.quantile(coin, 0.5) == 2.0
    assert dist.quantile(coin, 0.75) == 1.0
    assert dist.quantile(Marginal.point(5.0), 0.3) == 5.0
    assert dist.quantile(coin, 0.0) == coin.sentinel > 2.0


def test_tail_threshold_examples():
    assert dist.tail_threshold(Marginal.from_pairs({1.0: 0.6, 3.0: 0.4}), 0.25, 0.5) == 3.0
    with pytest.raises(dist.InfeasibleBand):
        dist.tail_threshold(Marginal.point(2.0), 0.2, 0.8)


def test_tail_threshold_on_uniform_samples():
    hits = 0
    for seed in range(100):
        x = np.random.default_rng(seed).uniform(0, 1, 100_000)
        t = dist.tail_threshold(x, 0.1, 0.2)
        hits += 0.08 <= 1 - t <= 0.22
    assert hits >= 99


def test_dkw_frequency_small():
    truth = Marginal.from_pairs({0.0: 0.5, 1.0: 0.5})
    rng = np.random.default_rng(3)
    bad = sum(dist.kolmogorov_distance(dist.empirical(dist.sample_marginal(truth, rng, 10_000)), truth) > 0.05 for _ in range(200))
    assert bad / 200 <= 2 * math.exp(-2 * 10_000 * 0.0025) + 3 * math.sqrt(1e-21 / 200) + 1e-12


def test_upper_median():
    assert dist.upper_median([0.0, 1.0]) == 1.0
    assert dist.upper_median([0.0, 1.0, 2.0]) == 1.0
    assert dist.upper_median([0.0, 5.0], [0.7, 0.3]) == 0.0


def test_enumeration_guard():
    p = ProductPrior.iid(Marginal.from_pairs({1.0: 0.5, 2.0: 0.5}), 3, 3)
    with pytest.raises(dist.GuardExceeded):
        dist.enumerate_profiles(p, guard=100)
    prof, w = dist.enumerate_profiles(p)
    assert prof.shape == (512, 3, 3) and w.sum() == pytest.approx(1.0)
