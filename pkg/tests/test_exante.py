import numpy as np
import pytest

from artifact import exante, mech
from artifact.checks import grid_exante, random_prior
from artifact.curve import revenue_curve
from artifact.dist import Marginal, ProductPrior
from artifact.valuation import Valuation, value_marginals


def curves_of(prior):
    return exante.prior_curves(prior)


def test_single_cell(coin):
    sol = exante.solve_exante(curves_of(ProductPrior.iid(coin, 1, 1)), 0.5, 0.5)
    assert sol.objective == pytest.approx(1.0) and sol.q[0, 0] == pytest.approx(0.5)


def test_two_symmetric_bidders(coin):
    sol = exante.solve_exante(curves_of(ProductPrior.iid(coin, 2, 1)), 0.5, 0.5)
    assert sol.objective == pytest.approx(1.0)
    assert sol.q.sum() <= 0.5 + 1e-12


def test_zero_values_and_bad_caps():
    sol = exante.solve_exante(curves_of(ProductPrior.iid(Marginal.point(0.0), 2, 2)), 0.5, 0.5)
    assert sol.objective == 0.0
    with pytest.raises(exante.InfeasibleCaps):
        exante.solve_exante(curves_of(ProductPrior.iid(Marginal.point(1.0), 1, 1)), 0.0, 0.5)


def test_caps():
    assert exante.caps_exact() == (0.5, 0.5)
    assert exante.caps_approx(2, 3, 0.01) == pytest.approx((0.53, 0.52))
    r, c = exante.caps_regular(2, 3, 0.01, C=8)
    assert (r, c) == pytest.approx((0.53 + 1 / 8, 0.52 + 1 / 8))


def test_grid_oracle_agreement():
    rng = np.random.default_rng(8)
    for n, m in [(1, 2), (2, 1), (2, 2)]:
        prior = random_prior(rng, n, m, 3)
        curves = curves_of(prior)
        sol = exante.solve_exante(curves, 0.5, 0.5)
        g = grid_exante(curves, n, m, 0.5, 0.5)
        assert -1e-9 <= sol.objective - g <= 1e-3


def test_lotteries_from_solution(coin):
    curves = [[revenue_curve(coin)]]
    sol = exante.ExAnteSolution(np.array([[0.25]]), 0.5, "exact", 0.5, 0.5, {})
    lots = exante.solution_to_lotteries(sol, curves)
    assert lots.x[0, 0] == pytest.approx(0.5)
    assert {lots.p_lo[0, 0], lots.p_hi[0, 0]} == {coin.sentinel, 2.0}
    zero = exante.solution_to_lotteries(exante.ExAnteSolution(np.zeros((1, 1)), 0, "exact", 0.5, 0.5, {}), curves)
    price = zero.p_lo[0, 0] if zero.x[0, 0] == 1 else zero.p_hi[0, 0]
    assert price == coin.sentinel


def test_rspm_example(coin):
    prior = ProductPrior.iid(coin, 2, 1)
    lots = exante.PriceLotteryGrid(np.full((2, 1), 0.5), np.full((2, 1), coin.sentinel), np.full((2, 1), 2.0))
    vm = value_marginals(prior, Valuation.unit_demand())
    m = exante.lotteries_to_rspm(lots, value_marginals=vm)
    assert m.meta["bound"]["bound"] == pytest.approx(0.375)
    assert mech.expected_revenue_exact(m, prior, Valuation.unit_demand()) == pytest.approx(0.875)


def test_deterministic_single_price(coin):
    prior = ProductPrior.iid(coin, 1, 1)
    m = exante.lotteries_to_rspm(exante.PriceLotteryGrid.deterministic(np.array([[2.0]])))
    assert mech.expected_revenue_exact(m, prior, Valuation.unit_demand()) == pytest.approx(2.0 * 0.5)


def test_vacuous_warning(coin):
    lots = exante.PriceLotteryGrid.deterministic(np.full((1, 1), 1.0))
    vm = value_marginals(ProductPrior.iid(Marginal.point(1.0), 1, 1), Valuation.unit_demand())
    with pytest.warns(exante.VacuousBound):
        assert exante.rspm_bound(lots, vm)["vacuous"]
