"""JSON instance, mechanism and solution files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curve import IronedVirtuals
from .dist import DistError, Marginal, ProductPrior
from .exante import ExAnteSolution, PriceLotteryGrid
from .mech import EntryFeeRule, Mechanism, VcgFee
from .valuation import InvalidValuation, Valuation


class FormatError(ValueError):
    """Malformed file; the message starts with the offending field path."""


@dataclass(frozen=True, eq=False)
class Instance:
    prior: ProductPrior
    valuation: Valuation

    def to_dict(self) -> dict:
        d = self.prior.to_dict()
        v = self.valuation.to_dict()
        d["valuation"] = {"class": v.pop("class"), "params": v}
        return d


def _need(d: dict, key: str, path: str):
    if not isinstance(d, dict) or key not in d:
        raise FormatError(f"{path}.{key}: missing field")
    return d[key]


def marginal_from_dict(d: dict, path: str) -> Marginal:
    kind = _need(d, "kind", path)
    try:
        if kind == "discrete":
            support = _need(d, "support", path)
            probs = _need(d, "probs", path)
            if "clauses" in d:
                return Marginal.xos(d["clauses"], probs)
            return Marginal.discrete(support, probs)
        if kind == "parametric":
            m = Marginal.parametric(_need(d, "family", path), *_need(d, "params", path))
            if d.get("cap") is not None:
                from .dist import truncate

                m = truncate(m, float(d["cap"]))
            return m
    except (DistError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from e
    raise FormatError(f"{path}.kind: unknown kind {kind!r}")


def instance_from_dict(d: dict) -> Instance:
    n = _need(d, "n", "$")
    m = _need(d, "m", "$")
    grid = _need(d, "marginals", "$")
    if not isinstance(grid, list) or len(grid) != n:
        raise FormatError(f"$.marginals: expected {n} rows")
    rows = []
    for i, r in enumerate(grid):
        if not isinstance(r, list) or len(r) != m:
            raise FormatError(f"$.marginals[{i}]: expected {m} cells")
        rows.append([marginal_from_dict(c, f"$.marginals[{i}][{j}]") for j, c in enumerate(r)])
    try:
        prior = ProductPrior.grid(rows, symmetric=bool(d.get("symmetric", False)))
    except DistError as e:
        raise FormatError(f"$.symmetric: {e}") from e
    vd = d.get("valuation", {"class": "additive"})
    try:
        flat = {"class": vd.get("class")}
        flat.update(vd.get("params", {}))
        val = Valuation.from_dict(flat)
    except (InvalidValuation, KeyError, TypeError) as e:
        raise FormatError(f"$.valuation: {e}") from e
    return Instance(prior, val)


def load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e


def load_instance(path) -> Instance:
    return instance_from_dict(load_json(path))


def dump_json(obj: dict, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def mechanism_from_dict(d: dict) -> Mechanism:
    tag = _need(d, "tag", "$")
    order = tuple(d.get("order", ()))
    lots = None
    if "prices" in d:
        lots = PriceLotteryGrid.deterministic(np.asarray(d["prices"], dtype=float))
    elif "lotteries" in d:
        L = d["lotteries"]
        lots = PriceLotteryGrid(*(np.asarray(_need(L, k, "$.lotteries"), dtype=float) for k in ("x", "p_lo", "p_hi")))
    fee = None
    if "entry_fee" in d:
        e = d["entry_fee"]
        mode = _need(e, "mode", "$.entry_fee")
        if mode == "table":
            fee = EntryFeeRule.from_table({(x["bidder"], tuple(x["set"])): x["fee"] for x in e["data"]})
        elif mode == "median_samples":
            fee = EntryFeeRule.median(e["data"], e.get("weights"), e.get("cheap"))
        elif mode == "zero":
            fee = EntryFeeRule.zero()
        else:
            raise FormatError(f"$.entry_fee.mode: unknown mode {mode!r}")
    vcg = None
    if "vcg_fee" in d:
        v = d["vcg_fee"]
        mode = _need(v, "mode", "$.vcg_fee")
        if mode == "median":
            rows = tuple((np.asarray(r["signals"], float), np.asarray(r["weights"], float)) for r in v["data"])
            vcg = VcgFee("median", rows=rows)
        elif mode == "single_sample":
            vcg = VcgFee("single_sample", sample=np.asarray(v["data"], float))
        elif mode == "order_stat":
            vcg = VcgFee("order_stat", draws=tuple(np.asarray(x, float) for x in v["data"]["draws"]), rank=v["data"]["rank"])
        else:
            raise FormatError(f"$.vcg_fee.mode: unknown mode {mode!r}")
    virt = None
    if "virtuals" in d:
        virt = tuple(
            tuple(IronedVirtuals(np.asarray(c["support"], float), np.asarray(c["phi"], float)) for c in row)
            for row in d["virtuals"]
        )
    if not order:
        n = lots.shape[0] if lots is not None else (len(virt) if virt else 0)
        order = tuple(range(n))
    return Mechanism(tag, lots=lots, order=order, fee=fee, vcg=vcg, virtuals=virt, meta=d.get("meta", {}))


def load_mechanism(path) -> Mechanism:
    return mechanism_from_dict(load_json(path))


def solution_from_dict(d: dict) -> ExAnteSolution:
    return ExAnteSolution(
        np.asarray(_need(d, "q", "$"), dtype=float),
        float(_need(d, "objective", "$")),
        str(d.get("tag", "exact")),
        float(d.get("row_cap", 0.5)),
        float(d.get("col_cap", 0.5)),
        d.get("certificate", {}),
    )
