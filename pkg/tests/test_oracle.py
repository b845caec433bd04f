import numpy as np
import pytest

from artifact import mech, oracle
from artifact.dist import GuardExceeded, Marginal, ProductPrior
from artifact.valuation import Valuation

ADD, UD = Valuation.additive(), Valuation.unit_demand()


def test_bic_single_item(coin):
    assert oracle.opt_bic_lp(ProductPrior.iid(coin, 1, 1), ADD)["value"] == pytest.approx(1.0)


def test_bic_two_items_between_bundle_and_welfare(coin):
    prior = ProductPrior.iid(coin, 1, 2)
    v = oracle.opt_bic_lp(prior, ADD)
    assert v["certificate"]["ok"]
    welfare = oracle.expected_max_welfare(prior, ADD)
    assert welfare == pytest.approx(3.0)
    assert 2.25 - 1e-9 <= v["value"] <= welfare + 1e-9


def test_bic_at_least_posted_and_at_most_welfare():
    rng = np.random.default_rng(0)
    for _ in range(5):
        cells = [[Marginal.discrete(np.sort(rng.choice(np.arange(1, 6), 2, replace=False)), [0.4, 0.6]) for _ in range(2)] for _ in range(2)]
        prior = ProductPrior.grid(cells)
        opt = oracle.opt_bic_lp(prior, UD)["value"]
        _, post = oracle.opt_posted_exhaustive(prior, UD, "spm")
        assert post - 1e-7 <= opt <= oracle.expected_max_welfare(prior, UD) + 1e-7


def test_unsupported_and_guard(coin):
    with pytest.raises(oracle.UnsupportedClass):
        oracle.opt_bic_lp(ProductPrior.iid(coin, 1, 1), Valuation.xos(1))
    with pytest.raises((oracle.GuardExceeded, GuardExceeded)):
        oracle.opt_bic_lp(ProductPrior.iid(coin, 3, 3), ADD, oracle.TinyInstanceGuard(profiles=10))


def test_posted_exhaustive(coin):
    m, rev = oracle.opt_posted_exhaustive(ProductPrior.iid(coin, 1, 1), ADD, "spm")
    assert rev == pytest.approx(1.0)
    point = ProductPrior.grid([[Marginal.point(2.0), Marginal.point(3.0)]])
    m, rev = oracle.opt_posted_exhaustive(point, ADD, "spm")
    assert rev == pytest.approx(5.0)


def test_posted_exhaustive_brute(coin):
    prior = ProductPrior.iid(Marginal.from_pairs({1.0: 0.5, 3.0: 0.5}), 2, 1)
    _, rev = oracle.opt_posted_exhaustive(prior, UD, "rspm")
    grid = [1.0, 3.0, 4.0]
    brute = max(mech.expected_revenue_exact(mech.posted(np.array([[a], [b]]), rationed=True), prior, UD) for a in grid for b in grid)
    assert rev == pytest.approx(brute)


def test_core_examples():
    prior = ProductPrior.iid(Marginal.from_pairs({1.0: 0.5, 3.0: 0.5}), 1, 1)
    assert oracle.exact_core(prior, [2.0], 0.0, ADD) == pytest.approx(0.5)
    assert oracle.exact_core(prior, [0.5], 0.0, ADD) == 0.0


def test_welfare_allocation_examples():
    assert oracle.exact_welfare_allocation(np.array([[3.0, 1.0], [1.0, 3.0]]), UD) == ((0,), (1,))
    assert oracle.exact_welfare_allocation(np.array([[1.0, 2.0, 0.5]]), ADD) == ((0, 1, 2),)
    t = np.array([[1.0, 5.0, 2.0], [3.0, 1.0, 2.5]])
    alloc = oracle.exact_welfare_allocation(t, ADD)
    assert alloc == ((1,), (0, 2))
