import itertools

import numpy as np
import pytest

from artifact import mech
from artifact.dist import Marginal, ProductPrior, enumerate_profiles
from artifact.exante import PriceLotteryGrid
from artifact.valuation import Valuation

ADD, UD = Valuation.additive(), Valuation.unit_demand()


def lottery_pair(coin):
    return PriceLotteryGrid(np.full((2, 1), 0.5), np.full((2, 1), coin.sentinel), np.full((2, 1), 2.0))


def test_posted_basics():
    m = mech.posted(np.array([[1.0]]))
    out = mech.run(m, ADD, np.array([[2.0]]))
    assert out.allocation == [(0,)] and out.revenue == 1.0
    r = mech.posted(np.array([[1.0, 1.0]]), rationed=True)
    assert mech.run(r, ADD, np.array([[3.0, 4.0]])).allocation == [(1,)]
    two = mech.posted(np.array([[1.0], [1.0]]))
    out = mech.run(two, ADD, np.array([[2.0], [5.0]]))
    assert out.payments.tolist() == [1.0, 0.0]


def test_entry_fee_examples():
    zero = mech.spem(np.array([[1.0]]), mech.EntryFeeRule.zero())
    assert mech.run(zero, ADD, np.array([[2.0]])).revenue == 1.0
    half = mech.spem(np.array([[1.0]]), mech.EntryFeeRule.from_table({(0, (0,)): 0.5}))
    assert mech.run(half, ADD, np.array([[2.0]])).revenue == 1.5
    high = mech.spem(np.array([[1.0]]), mech.EntryFeeRule.from_table({(0, (0,)): 5.0}))
    assert mech.run(high, ADD, np.array([[2.0]])).revenue == 0.0
    with pytest.raises(mech.UnusableRule):
        mech.run(mech.spem(np.array([[1.0]]), mech.EntryFeeRule.median([np.zeros((0, 1))])), ADD, np.array([[2.0]]))


def test_batch_utility_matches_demand():
    rng = np.random.default_rng(5)
    for val, shape in [(ADD, (40, 3)), (UD, (40, 3)), (Valuation.xos(2), (40, 3, 2))]:
        rows = rng.integers(0, 5, shape).astype(float)
        p = rng.integers(0, 4, 3).astype(float)
        for r in range(4):
            for S in itertools.combinations(range(3), r):
                want = [mech.best_utility(val, t, p, S) for t in rows]
                assert mech.batch_best_utility(val, rows, p, S) == pytest.approx(want)


def test_vcg_entry_examples():
    prior = ProductPrior.grid([[Marginal.from_pairs({0.0: 0.5, 2.0: 0.5})], [Marginal.point(1.0)]])
    fee = mech.vcg_median_fee(prior)
    assert fee.fee(0, np.array([1.0])) == 1.0
    t = np.array([[3.0, 1.0], [1.0, 2.0]])
    ss = mech.vcg_entry(mech.VcgFee("single_sample", sample=t.copy()), 2)
    out = mech.run(ss, ADD, t)
    assert out.fees.tolist() == [2.0, 1.0]
    assert out.revenue == pytest.approx(2.0 + 1.0 + 1.0 + 1.0)
    dom = mech.vcg_entry(mech.VcgFee("single_sample", sample=np.zeros((2, 1))), 2)
    out = mech.run(dom, ADD, np.array([[1.0], [3.0]]))
    assert out.revenue == 1.0
    with pytest.raises(mech.UnsupportedMechanism):
        mech.run(dom, UD, np.array([[1.0], [3.0]]))


def test_myerson_examples(coin):
    one = ProductPrior.iid(coin, 1, 1)
    m = mech.myerson(one, ADD)
    out = mech.run(m, ADD, np.array([[2.0]]))
    assert out.payments.tolist() == [2.0]
    assert mech.expected_revenue_exact(m, one, ADD) == pytest.approx(1.0)
    two = ProductPrior.iid(coin, 2, 1)
    out = mech.run(mech.myerson(two, ADD), ADD, np.array([[2.0], [1.0]]))
    assert out.allocation[0] == (0,) and out.payments.tolist() == [2.0, 0.0]
    neg = ProductPrior.iid(Marginal.from_pairs({0.0: 0.9, 1.0: 0.1}), 1, 1)
    assert mech.run(mech.myerson(neg, ADD), ADD, np.array([[0.0]])).revenue == 0.0


def test_exact_revenue_examples(coin):
    prior = ProductPrior.iid(coin, 2, 1)
    r = mech.Mechanism("rspm", lots=lottery_pair(coin), order=(0, 1))
    assert mech.expected_revenue_exact(r, prior, UD) == pytest.approx(0.875)
    high = mech.posted(np.full((2, 1), 10.0))
    assert mech.expected_revenue_exact(high, prior, UD) == 0.0


def test_exact_revenue_against_loop_enumeration():
    rng = np.random.default_rng(9)
    for _ in range(20):
        prior = ProductPrior.grid([[Marginal.from_pairs({1.0: 0.3, 2.0: 0.3, 4.0: 0.4}) for _ in range(2)] for _ in range(2)])
        P = rng.integers(1, 5, (2, 2)).astype(float)
        for val in (ADD, UD):
            for rationed in (False, True):
                m = mech.posted(P, rationed=rationed)
                prof, w = enumerate_profiles(prior)
                want = sum(wi * mech.run(m, val, t).revenue for t, wi in zip(prof, w))
                assert mech.expected_revenue_exact(m, prior, val) == pytest.approx(want)


def test_monte_carlo(coin):
    prior = ProductPrior.iid(coin, 2, 1)
    r = mech.Mechanism("rspm", lots=lottery_pair(coin), order=(0, 1))
    hits = 0
    for seed in range(20):
        est, se = mech.expected_revenue_mc(r, prior, UD, 20_000, seed)
        hits += abs(est - 0.875) <= 4 * se
    assert hits >= 19
    point = ProductPrior.iid(Marginal.point(2.0), 1, 1)
    est, se = mech.expected_revenue_mc(mech.posted(np.array([[1.0]])), point, ADD, 50, 0)
    assert est == 1.0 and se == 0.0


def test_purchase_law_and_tv():
    row = [Marginal.from_pairs({1.0: 0.5, 3.0: 0.5})]
    law = mech.purchased_set_distribution(ADD, row, np.array([2.0]), 0.0, (0,))
    assert law == {(): 0.5, (0,): 0.5}
    law = mech.purchased_set_distribution(ADD, row, np.array([2.0]), 0.5, (0,))
    assert law == {None: 0.5, (0,): 0.5}
    assert mech.tv_distance({(): 0.5, (0,): 0.5}, {(): 0.2, (0,): 0.8}) == pytest.approx(0.3)


def test_cheap_view_utilities_match_per_row_views():
    from artifact.valuation import Feasibility, budget_additive_table, restrict_to_cheap_items

    rng = np.random.default_rng(6)
    table = budget_additive_table([[1.0, 2.0, 3.0]] * 3, 4.0)
    vals = [ADD, UD, Valuation.cardinality(2), Valuation.subadditive(table)]
    for val in vals:
        rows = rng.choice([1.0, 2.0, 3.0], (30, 3))
        cheap = rng.uniform(0.5, 3.5, 3)
        p = rng.uniform(0, 2, 3)
        got = mech.cheap_best_utility(val, rows, p, (0, 1, 2), cheap)
        for t, u in zip(rows, got):
            view = restrict_to_cheap_items(val, t, cheap)
            best = max(view.value(S) - p[list(S)].sum() for r in range(4) for S in itertools.combinations(range(3), r))
            assert u == pytest.approx(max(best, 0.0))
