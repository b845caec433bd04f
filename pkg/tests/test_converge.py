import numpy as np
import pytest

from artifact import converge
from artifact.checks import random_single_intersecting


def test_single_intersecting_examples():
    full = np.ones((4, 4), bool)
    assert converge.is_single_intersecting(converge.GridEvent.from_mask(full))
    two = np.zeros((4, 2), bool)
    two[0:2] = True
    two[3] = True
    assert not converge.is_single_intersecting(converge.GridEvent.from_mask(two.T))
    L = np.zeros((3, 3), bool)
    L[:, 0] = L[0, :] = True
    assert converge.is_single_intersecting(converge.GridEvent.from_mask(L))


def test_grid_validation():
    with pytest.raises(ValueError):
        converge.GridEvent((np.array([1.0, 0.0]),), np.ones(2, bool))
    with pytest.raises(ValueError):
        converge.GridEvent((np.array([0.0, 1.0]),), np.ones(3, bool))


def test_gap_bound_three_axes():
    rng = np.random.default_rng(3)
    done = 0
    while done < 200:
        M = random_single_intersecting(rng, (4, 4, 4))
        e = converge.GridEvent.from_mask(M)
        if not converge.is_single_intersecting(e):
            continue
        D = [rng.dirichlet(np.ones(4)) for _ in range(3)]
        Dh = []
        for p in D:
            q = p.copy()
            k = rng.integers(0, 3)
            s = min(0.05, q[k + 1])
            q[k] += s
            q[k + 1] -= s
            Dh.append(q)
        assert max(converge.axis_kolmogorov(a, b) for a, b in zip(D, Dh)) <= 0.05 + 1e-12
        assert converge.event_prob_gap(e, D, D) == 0.0
        assert converge.event_prob_gap(e, D, Dh) <= 0.3 + 1e-12
        done += 1


def test_surplus_events():
    rng = np.random.default_rng(4)
    row = [np.sort(rng.uniform(0, 3, 4)) for _ in range(3)]
    p = np.array([1.0, 1.0, 1.0])
    assert converge.surplus_event_check(row, p, 0.0).member.all()
    assert not converge.surplus_event_check(row, p, 100.0).member.any()
    for _ in range(100):
        e = converge.surplus_event_check(row, rng.uniform(0, 3, 3), rng.uniform(0, 4))
        assert converge.is_single_intersecting(e)


def test_sample_bounds():
    one = converge.sample_bound_partition(converge.ComplexityTable.dkw_singletons(1), 0.1, 0.1)
    assert one["bound"] == converge.dkw_samples(0.1, 0.1)
    assert converge.sample_bound_partition(converge.ComplexityTable.dkw_singletons(2), 0.1, 0.1)["bound"] == 738
    for d in (2, 4, 8):
        assert converge.sample_bound_partition(converge.table_convex(d), 0.1, 0.1, "vc")["V_max"] == 2 * d * d
        assert converge.sample_bound_partition(converge.table_rectangles(d), 0.1, 0.1, "vc")["V_max"] == 2 * d
    with pytest.raises(converge.IncompleteTable):
        converge.sample_bound_partition(converge.ComplexityTable(2, s={frozenset([0]): converge.dkw_samples}), 0.1, 0.1)


def test_set_partitions_are_bell_numbers():
    assert [sum(1 for _ in converge.set_partitions(range(k))) for k in range(6)] == [1, 1, 2, 5, 15, 52]
