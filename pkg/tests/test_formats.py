import json

import numpy as np
import pytest

from artifact import mech
from artifact.dist import Marginal, ProductPrior
from artifact.formats import (
    FormatError,
    Instance,
    dump_json,
    instance_from_dict,
    load_instance,
    mechanism_from_dict,
    solution_from_dict,
)
from artifact.exante import ExAnteSolution
from artifact.valuation import Feasibility, Valuation


def roundtrip(inst):
    return instance_from_dict(json.loads(dump_json(inst.to_dict())))


def test_instance_roundtrip(coin):
    feas = Feasibility("partition", groups=((0,), (1,)), caps=(1, 1))
    for val in (Valuation.additive(), Valuation.unit_demand(), Valuation.constrained(feas)):
        inst = Instance(ProductPrior.grid([[coin, Marginal.point(2.0)]]), val)
        back = roundtrip(inst)
        assert back.to_dict() == inst.to_dict()
    xos = Instance(ProductPrior.symmetric_of([Marginal.xos([[1.0, 2.0], [3.0, 0.0]], [0.5, 0.5])], 2), Valuation.xos(2))
    assert roundtrip(xos).to_dict() == xos.to_dict()
    par = Instance(ProductPrior.iid(Marginal.parametric("uniform", 0.0, 2.0), 1, 1), Valuation.additive())
    assert roundtrip(par).to_dict() == par.to_dict()


def test_field_path_diagnostics(tmp_path):
    bad = {"n": 1, "m": 1, "marginals": [[{"kind": "discrete", "support": [1, 2], "probs": [0.5, 0.6]}]]}
    with pytest.raises(FormatError, match=r"\$\.marginals\[0\]\[0\]"):
        instance_from_dict(bad)
    with pytest.raises(FormatError, match=r"\$\.marginals: expected 2 rows"):
        instance_from_dict({"n": 2, "m": 1, "marginals": [[{"kind": "discrete", "support": [1], "probs": [1]}]]})
    with pytest.raises(FormatError, match=r"\$\.n"):
        instance_from_dict({"m": 1})
    p = tmp_path / "broken.json"
    p.write_text('{"n": 1,\n "m": }')
    with pytest.raises(FormatError, match="line 2"):
        load_instance(p)


def test_mechanism_roundtrip(coin):
    prior = ProductPrior.iid(coin, 2, 2)
    mechs = [
        mech.posted(np.array([[1.0, 2.0], [2.0, 1.0]]), rationed=True),
        mech.spem(np.ones((2, 2)), mech.EntryFeeRule.from_table({(i, S): 0.5 for i in range(2) for S in [(), (0,), (1,), (0, 1)]})),
        mech.aspe(np.ones(2), 2, mech.EntryFeeRule.median([np.ones((3, 2))] * 2, [np.full(3, 1 / 3)] * 2, cheap=np.ones(2))),
        mech.vcg_entry(mech.vcg_median_fee(prior), 2),
        mech.myerson(prior, Valuation.additive()),
    ]
    for m in mechs:
        back = mechanism_from_dict(json.loads(dump_json(m.to_dict())))
        assert back.to_dict() == m.to_dict()
        assert mech.expected_revenue_exact(back, prior, Valuation.additive()) == pytest.approx(
            mech.expected_revenue_exact(m, prior, Valuation.additive())
        )


def test_solution_roundtrip():
    sol = ExAnteSolution(np.array([[0.25, 0.0]]), 0.5, "exact", 0.5, 0.5, {"gap": 0.0})
    back = solution_from_dict(json.loads(dump_json(sol.to_dict())))
    assert back.to_dict() == sol.to_dict()
