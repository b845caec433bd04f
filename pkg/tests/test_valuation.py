import itertools

import numpy as np
import pytest

from artifact.valuation import (
    Feasibility,
    InvalidValuation,
    UnsupportedOracle,
    Valuation,
    budget_additive_table,
    check_properties,
    demand,
    demand_exhaustive,
    restrict_to_cheap_items,
    single_item_value,
    supporting_prices,
    value,
)

UD, ADD = Valuation.unit_demand(), Valuation.additive()


def test_value_examples():
    t = np.array([1.0, 4.0])
    assert value(UD, t, (0, 1)) == 4.0
    assert value(ADD, t, (0, 1)) == 5.0
    xos = np.array([[3.0, 0.0], [0.0, 3.0]])
    assert value(Valuation.xos(2), xos, (0, 1)) == 3.0
    assert single_item_value(Valuation.xos(2), np.array([[3.0, 1.0]]), 0) == 3.0
    assert single_item_value(ADD, np.array([0.0, 2.0]), 0) == 0.0


def test_empty_feasibility_rejected():
    with pytest.raises(InvalidValuation):
        Feasibility("sets", sets=())


def test_demand_examples():
    assert demand(ADD, np.array([1.0, 4.0]), np.array([2.0, 3.0]), (0, 1)) == (1,)
    assert demand(ADD, np.array([1.0, 1.0]), np.array([5.0, 5.0]), (0, 1)) == ()
    assert demand(UD, np.array([5.0, 5.0]), np.array([1.0, 1.0]), (0, 1)) == (0,)


def test_structured_demand_matches_exhaustive():
    rng = np.random.default_rng(1)
    vals = [ADD, UD, Valuation.cardinality(2), Valuation.constrained(Feasibility("partition", groups=((0, 1), (2, 3)), caps=(1, 1)))]
    for _ in range(200):
        t = rng.integers(0, 5, 4).astype(float)
        p = rng.integers(0, 5, 4).astype(float)
        avail = tuple(j for j in range(4) if rng.random() < 0.8)
        for v in vals:
            assert demand(v, t, p, avail) == demand_exhaustive(v, t, p, avail)


def test_supporting_prices():
    t = np.array([1.0, 4.0])
    assert supporting_prices(ADD, t, (0, 1)).tolist() == [1.0, 4.0]
    assert supporting_prices(UD, t, (0, 1)).tolist() == [0.0, 4.0]
    with pytest.raises(UnsupportedOracle):
        supporting_prices(Valuation.cardinality(1), t, (0,))
    rng = np.random.default_rng(2)
    xos = Valuation.xos(3)
    for _ in range(50):
        t = rng.uniform(0, 5, (4, 3))
        S = tuple(j for j in range(4) if rng.random() < 0.7)
        th = supporting_prices(xos, t, S)
        assert th[list(S)].sum() == pytest.approx(value(xos, t, S))
        for r in range(len(S) + 1):
            for Sp in itertools.combinations(S, r):
                assert th[list(Sp)].sum() <= value(xos, t, Sp) + 1e-12


def test_cheap_item_view():
    t = np.array([1.0, 3.0])
    assert restrict_to_cheap_items(ADD, t, np.array([2.0, 2.0])).value((0, 1)) == 1.0
    assert restrict_to_cheap_items(ADD, t, np.array([9.0, 9.0])).value((0, 1)) == 4.0
    assert restrict_to_cheap_items(ADD, t, np.array([0.5, 0.5])).value((0, 1)) == 0.0


def test_budget_additive_is_subadditive():
    table = budget_additive_table([[1.0, 2.0], [1.0, 3.0], [2.0]], 4.0)
    v = Valuation.subadditive(table)
    for t in itertools.product([1.0, 2.0], [1.0, 3.0], [2.0]):
        r = check_properties(v, np.array(t), 3)
        assert r["monotone_violations"] == 0 and r["subadditive_violations"] == 0
    assert value(v, np.array([2.0, 3.0, 2.0]), (0, 1, 2)) == 4.0
