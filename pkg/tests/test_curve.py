import numpy as np
import pytest

from artifact.curve import check_regular_curve, curve_csv, ironed_virtuals, lottery_at, revenue_curve
from artifact.dist import Marginal
from artifact.checks import envelope_oracle, random_marginal


def test_point_mass_curve():
    c = revenue_curve(Marginal.point(3.0))
    assert c(np.array([0.25, 1.0])).tolist() == [0.75, 3.0]
    assert len(list(c.segments())) == 1


def test_coin_curve(coin):
    c = revenue_curve(coin)
    assert c.q.tolist() == [0.0, 0.5, 1.0] and c.r.tolist() == [0.0, 1.0, 1.0]
    assert c(0.25) == pytest.approx(0.5) and c(0.75) == pytest.approx(1.0)


def test_equal_revenue_like():
    c = revenue_curve(Marginal.from_pairs({1.0: 0.5, 2.0: 0.25, 4.0: 0.25}))
    assert c(np.array([0.25, 0.5, 1.0])) == pytest.approx([1.0, 1.0, 1.0])


def test_curve_matches_envelope_oracle():
    rng = np.random.default_rng(4)
    for _ in range(100):
        d = random_marginal(rng, 12)
        qs = rng.uniform(0, 1, 50)
        assert np.abs(revenue_curve(d)(qs) - envelope_oracle(d.support, d.probs, qs)).max() <= 1e-9


def test_lotteries(coin):
    c = revenue_curve(coin)
    x, lo, hi = lottery_at(c, 0.25)
    assert x == pytest.approx(0.5) and lo == coin.sentinel and hi == 2.0
    x, lo, hi = lottery_at(c, 0.75)
    assert x == pytest.approx(0.5) and {lo, hi} == {1.0, 2.0}
    x, lo, hi = lottery_at(c, 0.5)
    assert x in (0.0, 1.0) and (lo if x == 1.0 else hi) == 2.0


def test_ironed_virtuals(coin):
    iv = ironed_virtuals(coin)
    assert iv.at(np.array([1.0, 2.0])).tolist() == [0.0, 2.0]
    assert ironed_virtuals(Marginal.point(4.0)).at(np.array([4.0])).tolist() == [4.0]


def test_regularity_scan():
    assert check_regular_curve(Marginal.parametric("uniform", 0.0, 1.0))["regular"]
    assert check_regular_curve(Marginal.point(2.0))["regular"]
    assert not check_regular_curve(Marginal.from_pairs({1.0: 0.9, 100.0: 0.1}))["regular"]


def test_csv(coin):
    rows = curve_csv(revenue_curve(coin)).strip().splitlines()
    assert rows[0] == "q,R,x,p_lo,p_hi" and len(rows) == 4
