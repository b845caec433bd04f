import itertools
import warnings

import numpy as np
import pytest

from artifact import learn, mech, oracle
from artifact.curve import monopoly_price
from artifact.dist import InfeasibleBand, Marginal, ProductPrior, empirical
from artifact.valuation import Valuation

ADD, UD = Valuation.additive(), Valuation.unit_demand()


def test_ud_maxmin_exact_chain(coin):
    prior = ProductPrior.grid([[coin, Marginal.from_pairs({1.0: 0.2, 3.0: 0.8})], [Marginal.point(2.0), coin]])
    m, audit = learn.learn_ud_maxmin(prior, 0.0)
    rev = mech.expected_revenue_exact(m, prior, UD)
    assert rev >= audit["cp_objective"] / 4 - 1e-12
    assert audit["cp_objective"] >= oracle.opt_bic_lp(prior, UD)["value"] / 8 - 1e-9


def test_ud_maxmin_zero_prior_and_warning():
    zero = ProductPrior.iid(Marginal.point(0.0), 2, 2)
    m, audit = learn.learn_ud_maxmin(zero, 0.0)
    assert mech.expected_revenue_exact(m, zero, UD) == 0.0
    assert learn.ud_maxmin_guarantee(0.0, 2, 2, 0.0, 0.0) == 0.0
    with pytest.warns(learn.GuaranteeWarning):
        learn.learn_ud_maxmin(zero, 0.1)


def test_ud_regular_pipeline():
    point = learn.AccessModel("samples_regular", ProductPrior.iid(Marginal.point(3.0), 1, 1), count=50)
    m, audit = learn.learn_ud_regular(point)
    P = np.where(m.lots.x > 0, m.lots.p_lo, m.lots.p_hi)
    assert P[0, 0] == 3.0
    acc = learn.AccessModel("samples_regular", ProductPrior.iid(Marginal.parametric("uniform", 0.0, 1.0), 2, 2), count=4000, seed=3)
    m, audit = learn.learn_ud_regular(acc)
    H = np.array(audit["H"])
    assert np.all(m.lots.p_lo <= H + 1e-12) and np.all(m.lots.p_hi <= H + 1e-12)
    again, _ = learn.learn_ud_regular(acc)
    assert again.to_dict() == m.to_dict()


def test_additive_bounded_monopoly_and_degenerate():
    d = Marginal.from_pairs({1.0: 0.3, 2.0: 0.3, 5.0: 0.4})
    acc = learn.AccessModel("samples_bounded", ProductPrior.iid(d, 1, 1), count=500, seed=1)
    (spm, _), audit = learn.learn_additive_bounded(acc)
    emp = empirical(acc.draw(stream=0)[:, 0, 0])
    price, rev = monopoly_price(emp)
    assert spm.lots.p_lo[0, 0] == price or spm.lots.p_hi[0, 0] == price
    pt = learn.AccessModel("samples_bounded", ProductPrior.iid(Marginal.point(2.0), 2, 3), count=10)
    (spm, vcg), _ = learn.learn_additive_bounded(pt)
    assert np.all(np.where(spm.lots.x > 0, spm.lots.p_lo, spm.lots.p_hi) == 2.0)
    assert mech.run(spm, ADD, np.full((2, 3), 2.0)).revenue == 6.0


def test_single_sample_fee_acceptance():
    # enumerate (held-out sample, realised type) pairs on support-2 marginals
    rng = np.random.default_rng(2)
    for _ in range(20):
        m = int(rng.integers(1, 3))
        cells = [Marginal.discrete(np.sort(rng.choice(np.arange(0, 6), 2, replace=False)), [0.5, 0.5]) for _ in range(m)]
        b = rng.integers(0, 4, m).astype(float)
        atoms = list(itertools.product(*[list(zip(c.support, c.probs)) for c in cells]))
        acc = 0.0
        for s in atoms:
            fee = mech.VcgFee("single_sample", sample=np.array([[v for v, _ in s]])).fee(0, b)
            for t in atoms:
                surplus = np.maximum(np.array([v for v, _ in t]) - b, 0.0).sum()
                if surplus >= fee:
                    acc += np.prod([p for _, p in s]) * np.prod([p for _, p in t])
        assert acc >= 1 / 8


def test_additive_maxmin_fees(coin):
    pt = ProductPrior.iid(Marginal.point(3.0), 2, 1)
    (_, vcg), audit = learn.learn_additive_maxmin(pt, 0.0)
    assert vcg.vcg.fee(0, np.array([1.0])) == 2.0
    with pytest.raises(ValueError):
        learn.learn_additive_maxmin(pt, 0.0, k=10)
    with pytest.warns(learn.GuaranteeWarning):
        learn.learn_additive_maxmin(ProductPrior.iid(coin, 1, 2), 0.05)
    sur = ProductPrior.grid([[Marginal.from_pairs({0.0: 0.5, 1.0: 0.5})], [Marginal.point(0.0)]])
    (_, vcg), audit = learn.learn_additive_maxmin(sur, 0.0, k=4096, truth=sur)
    assert vcg.vcg.fee(0, np.array([0.0])) == 1.0


def test_epsilon_net_and_G():
    net = learn.epsilon_net(1.0, 0.5, 2)
    assert sorted(tuple(p) for p in net) == [(0.5, 0.5), (0.5, 1.0), (1.0, 0.5), (1.0, 1.0)]
    with pytest.raises(learn.NetTooLarge):
        learn.epsilon_net(100.0, 0.001, 3)
    assert learn.estimate_G(ProductPrior.iid(Marginal.point(4.0), 2, 2)) == 4.0


def test_xos_sample_small_cases():
    pt = ProductPrior.iid(Marginal.xos([[2.0, 1.0]], [1.0]), 2, 1)
    acc = learn.AccessModel("samples_bounded", pt, count=1)
    best, audit = learn.learn_xos_sample(acc, Valuation.xos(2), 1.0, 1.0, 8, 8)
    assert audit["net_size"] == 1 and best.lots.p_lo[0, 0] == 1.0
    assert best.fee.fee(0, (0,), Valuation.xos(2), np.array([1.0])) == 1.0
    assert audit["balance"]["min"] == 1.0


def test_symmetric_thresholds_examples():
    d = Marginal.from_pairs({1.0: 0.6, 3.0: 0.4})
    th = learn.learn_symmetric_thresholds(ProductPrior.symmetric_of([d], 2), 2, 0.8, 0.1, ADD)
    assert th.beta.tolist() == [3.0] and th.c == 0.0
    with pytest.raises(InfeasibleBand):
        learn.learn_symmetric_thresholds(ProductPrior.symmetric_of([Marginal.point(1.0)], 2), 2, 0.5, 0.0, ADD)


def test_symmetric_aspe_examples():
    prior = ProductPrior.symmetric_of([Marginal.from_pairs({1.0: 0.5, 3.0: 0.5})], 1)
    th = learn.BalancedThresholds(beta=np.array([2.0]), b=0.5, c=0.0, eta=0.0)
    m, audit = learn.learn_symmetric_aspe(prior, ADD, th)
    assert audit["Q"] == pytest.approx([0.25])
    low = learn.BalancedThresholds(beta=np.array([0.5]), b=0.5, c=0.0, eta=0.0)
    m, audit = learn.learn_symmetric_aspe(prior, ADD, low)
    assert audit["Q"] == [0.0]
    assert mech.expected_revenue_exact(m, prior, ADD) == 0.0


def test_induced_unit_demand_identity(coin):
    prior = ProductPrior.iid(coin, 2, 2)
    ud, val = induced = learn.induced_unit_demand(prior, UD)
    assert val.cls == "unit-demand"
    assert all(np.array_equal(ud[i, j].support, prior[i, j].support) for i in range(2) for j in range(2))


def test_mu_balance_k_formula():
    import math

    k = learn.mu_balance_k(0.05, 2, 2, 1.0, 0.25, 0.125)
    assert k == math.ceil((math.log(20) + math.log(2) + 2 * math.log(4)) * 64)
