"""Command line harness: generate, learn, eval, exante, mech, oracle, bounds, verify.

Exit codes: 0 pass, 1 assertion or guard failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, checks, converge, curve, dist, exante, learn, mech, oracle
from .dist import Marginal, ProductPrior
from .formats import FormatError, Instance, dump_json, load_instance, load_mechanism
from .valuation import UnsupportedOracle, Valuation

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def version_hash() -> str:
    """sha256 over the package sources, in path order."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def report(args, results: dict, passed: bool = True, timing: dict | None = None) -> dict:
    return {
        "command": args.command,
        "config": _config(args),
        "seeds": {"seed": args.seed},
        "version": {"package": __version__, "sha256": version_hash()},
        "passed": passed,
        "results": results,
        "timestamp": {"utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"), **(timing or {})},
    }


def _emit(args, obj: dict) -> None:
    text = dump_json(obj)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _guard(args) -> oracle.TinyInstanceGuard:
    return oracle.TinyInstanceGuard(profiles=args.guard_profiles)


# ---------------------------------------------------------------- generate


def _gen_marginal(rng, family: str, support: int) -> Marginal:
    if family == "iid-discrete":
        return checks.random_marginal(rng, support)
    if family == "point":
        return Marginal.point(float(rng.integers(1, 11)))
    if family == "parametric":
        kind = rng.choice(["uniform", "truncexp", "equal_revenue"])
        if kind == "uniform":
            return Marginal.parametric("uniform", 0.0, float(rng.integers(1, 11)))
        if kind == "truncexp":
            return Marginal.parametric("truncexp", float(rng.uniform(0.2, 2.0)), float(rng.integers(2, 11)))
        return Marginal.parametric("equal_revenue", float(rng.integers(2, 11)))
    raise UsageError(f"generate: unknown family {family!r}")


def _balanced_band(n: int, Z: int) -> np.ndarray:
    """Tail masses on the 0.01 lattice inside [b/n, b/(n-1)] with b = n/(3Z)."""
    if n < 2:
        return np.array([])
    b = n / (3 * Z)
    lo, hi = b / n, b / (n - 1)
    return np.arange(math.ceil(lo * 100 - 1e-9), math.floor(hi * 100 + 1e-9) + 1) / 100


def cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    n, m = args.n, args.m
    if n < 1 or m < 1:
        raise UsageError("generate: need n >= 1 and m >= 1")
    Z = max(n, m)
    band = _balanced_band(n, Z)
    if args.family == "symmetric-xos":
        K = args.clauses
        items = []
        for _ in range(m):
            # clause 0 carries the item value; the others sit below it
            d = checks.banded_marginal(rng, band) if band.size else checks.random_marginal(rng, args.support)
            top = np.repeat(d.support[:, None], K, axis=1)
            clauses = np.round(top * np.concatenate([[1.0], rng.uniform(0, 1, K - 1)])[None, :], 2)
            items.append(Marginal.xos(clauses, d.probs))
        prior = ProductPrior.symmetric_of(items, n)
        val = Valuation.xos(K)
    else:
        if args.symmetric:
            if args.family == "iid-discrete" and band.size:
                row = [checks.banded_marginal(rng, band) for _ in range(m)]
            else:
                row = [_gen_marginal(rng, args.family, args.support) for _ in range(m)]
            prior = ProductPrior.symmetric_of(row, n)
        else:
            prior = ProductPrior.grid([[_gen_marginal(rng, args.family, args.support) for _ in range(m)] for _ in range(n)])
        val = {"additive": Valuation.additive, "unit-demand": Valuation.unit_demand}[args.valuation]()
    text = dump_json(Instance(prior, val).to_dict())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- learn


def _access(args, prior: ProductPrior) -> learn.AccessModel:
    mode = args.access.replace("-", "_")
    if mode == "approx_dist":
        return learn.AccessModel(mode, prior, eps=args.eps)
    return learn.AccessModel(mode, prior, count=args.samples, seed=args.seed)


def cmd_learn(args) -> int:
    inst = load_instance(args.instance)
    prior, val = inst.prior, inst.valuation
    acc = _access(args, prior)
    model = args.model
    extra = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if model == "ud-maxmin":
            approx = prior if acc.mode == "approx_dist" else _empirical_prior(acc)
            m, audit = learn.learn_ud_maxmin(approx, acc.eps)
        elif model == "ud-regular":
            m, audit = learn.learn_ud_regular(acc)
        elif model == "additive-bounded":
            (m, vcg), audit = learn.learn_additive_bounded(acc)
            extra["vcg"] = vcg
        elif model == "additive-maxmin":
            approx = prior if acc.mode == "approx_dist" else _empirical_prior(acc)
            (m, vcg), audit = learn.learn_additive_maxmin(approx, acc.eps, seed=args.seed)
            extra["vcg"] = vcg
        elif model == "xos-sample":
            K = args.samples
            m, audit = learn.learn_xos_sample(acc, val, args.net_bound, args.net_step, K, K, audit_truth=False)
        elif model == "sym-xos":
            Z = max(prior.n, prior.m)
            th = learn.learn_symmetric_thresholds(prior, prior.n, prior.n / (3 * Z), 0.0, val)
            source = prior if acc.mode == "approx_dist" else acc.draw(stream=0)
            m, audit = learn.learn_symmetric_aspe(source, val, th, prior.n, learn.estimate_G(prior))
        elif model == "sym-subadditive":
            m, audit = learn.learn_symmetric_subadditive(acc, val)
        else:
            raise UsageError(f"learn: unknown model {model!r}")
    audit["warnings"] = [str(w.message) for w in caught]
    out = Path(args.out) if args.out else None
    if out is None:
        sys.stdout.write(dump_json(m.to_dict()))
    else:
        dump_json(m.to_dict(), out)
        for name, mm in extra.items():
            dump_json(mm.to_dict(), out.with_suffix(f".{name}.json"))
        dump_json(report(args, audit), out.with_suffix(".audit.json"))
    return EXIT_OK


def _empirical_prior(acc: learn.AccessModel) -> ProductPrior:
    draws = acc.draw(stream=0)
    if draws.ndim == 4:
        raise UsageError("learn: this model needs scalar signals")
    n, m = draws.shape[1], draws.shape[2]
    return ProductPrior.grid([[dist.empirical(draws[:, i, j]) for j in range(m)] for i in range(n)])


# ---------------------------------------------------------------- eval / mech


def _evaluate(args, inst: Instance, mm: mech.Mechanism) -> dict:
    if args.mc:
        mean, se = mech.expected_revenue_mc(mm, inst.prior, inst.valuation, args.mc, args.seed)
        return {"tag": mm.tag, "revenue": mean, "stderr": se, "trials": args.mc, "mode": "mc"}
    out = mech.expected_outcome_exact(mm, inst.prior, inst.valuation, guard=args.guard_profiles)
    return {"tag": mm.tag, "revenue": out["revenue"], "entry_fees": out["fees"], "mode": "exact"}


def cmd_eval(args) -> int:
    inst = load_instance(args.instance)
    t0 = time.perf_counter()
    res = {"mechanisms": {}}
    for p in args.mech:
        res["mechanisms"][p] = _evaluate(args, inst, load_mechanism(p))
    if args.with_opt:
        o = oracle.opt_bic_lp(inst.prior, inst.valuation, _guard(args))
        res["opt_lp"] = o["value"]
        res["opt_certificate"] = o["certificate"]
        for r in res["mechanisms"].values():
            r["ratio"] = r["revenue"] / o["value"] if o["value"] > 0 else math.nan
    _emit(args, report(args, res, timing={"seconds": time.perf_counter() - t0}))
    return EXIT_OK


def cmd_mech(args) -> int:
    if args.verb == "eval":
        inst = load_instance(args.instance)
        _emit(args, report(args, _evaluate(args, inst, load_mechanism(args.mech))))
        return EXIT_OK
    inst = load_instance(args.instance)
    prior, val = inst.prior, inst.valuation
    kind = args.kind
    if kind in ("posted", "rspm"):
        if args.prices is None:
            raise UsageError("mech build: --prices is required for posted mechanisms")
        P = np.asarray(args.prices, dtype=float)
        if P.size == prior.m:
            P = np.tile(P, (prior.n, 1))
        if P.size != prior.n * prior.m:
            raise UsageError(f"mech build: expected {prior.m} or {prior.n * prior.m} prices")
        m = mech.posted(P.reshape(prior.n, prior.m), rationed=kind == "rspm")
    elif kind == "myerson":
        m = mech.myerson(prior, val)
    elif kind == "vcg-median":
        m = mech.vcg_entry(mech.vcg_median_fee(prior, args.guard_profiles), prior.n)
    else:
        raise UsageError(f"mech build: unknown kind {kind!r}")
    _emit(args, m.to_dict())
    return EXIT_OK


# ---------------------------------------------------------------- exante


def cmd_exante(args) -> int:
    inst = load_instance(args.instance)
    prior = inst.prior
    vm = exante_values(inst)
    curves = [[curve.revenue_curve(c) for c in row] for row in vm]
    if args.verb == "curve":
        i, j = args.cell
        if not (0 <= i < prior.n and 0 <= j < prior.m):
            raise UsageError(f"exante curve: cell ({i}, {j}) outside {prior.n} x {prior.m}")
        text = curve.curve_csv(curves[i][j])
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.caps == "exact":
        rc, cc = exante.caps_exact()
    elif args.caps == "approx":
        rc, cc = exante.caps_approx(prior.n, prior.m, args.eps)
    else:
        rc, cc = exante.caps_regular(prior.n, prior.m, args.eps)
    sol = exante.solve_exante(curves, rc, cc, tag=args.caps)
    if args.verb == "bound":
        lots = exante.solution_to_lotteries(sol, curves)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", exante.VacuousBound)
            b = exante.rspm_bound(lots, vm)
        _emit(args, report(args, {"solution": sol.to_dict(), "bound": b, "lotteries": lots.to_dict()}))
        return EXIT_OK
    _emit(args, sol.to_dict())
    return EXIT_OK


def exante_values(inst: Instance):
    from .valuation import value_marginals

    return value_marginals(inst.prior, inst.valuation)


# ---------------------------------------------------------------- oracle


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    prior, val = inst.prior, inst.valuation
    g = _guard(args)
    if args.verb == "bic":
        res = oracle.opt_bic_lp(prior, val, g)
        res = {"value": res["value"], "certificate": res["certificate"]}
    elif args.verb == "welfare":
        res = {"value": oracle.expected_max_welfare(prior, val, g)}
    elif args.verb == "posted":
        mm, rev = oracle.opt_posted_exhaustive(prior, val, args.family, guard=g)
        res = {"value": rev, "mechanism": mm.to_dict()}
    elif args.verb == "core":
        if not prior.symmetric:
            raise UsageError("oracle core: needs a symmetric instance")
        Z = max(prior.n, prior.m)
        th = learn.learn_symmetric_thresholds(prior, prior.n, prior.n / (3 * Z), args.eta, val)
        res = {"value": oracle.exact_core(prior, th.beta, th.c, val, g), "beta": th.beta, "c": th.c}
    else:
        raise UsageError(f"oracle: unknown verb {args.verb!r}")
    _emit(args, report(args, res))
    return EXIT_OK


# ---------------------------------------------------------------- bounds


def cmd_bounds(args) -> int:
    tables = {
        "rectangles": converge.table_rectangles,
        "convex": converge.table_convex,
        "dkw": converge.ComplexityTable.dkw_singletons,
    }
    tbl = tables[args.table](args.d)
    mode = "samples" if args.table == "dkw" else "vc"
    res = converge.sample_bound_partition(tbl, args.eps, args.delta, mode)
    lines = [f"table={args.table} d={args.d} eps={args.eps:g} delta={args.delta:g}", f"partition={res['partition']}"]
    if "V_max" in res:
        lines.append(f"V_max={res['V_max']:g}")
    lines += [f"bound={res['bound']:g}", f"provenance={res['provenance']}"]
    print("\n".join(lines))
    if args.out:
        dump_json(report(args, res), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _parse_ids(text: str | None) -> list[int]:
    if text is None:
        return sorted(checks.CHECKS)
    if text.strip() == "":
        return []
    try:
        ids = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise UsageError(f"verify: bad criteria list {text!r}") from e
    bad = [i for i in ids if i not in checks.CHECKS]
    if bad:
        raise UsageError(f"verify: unknown criteria {bad}")
    return ids


def cmd_verify(args) -> int:
    ids = _parse_ids(args.criteria)
    results = []
    if args.suite in ("invariants", "all"):
        results += checks.run_invariants(seed=args.seed)
    if args.suite in ("acceptance", "all"):
        results += checks.run_checks(ids, seed=args.seed)
    for r in results:
        print(r.line(), file=sys.stderr)
    passed = all(r.passed for r in results)
    timing = {"seconds": {r.name: r.seconds for r in results}}
    body = []
    for r in results:
        d = r.to_dict()
        d.pop("seconds")
        body.append(d)
    obj = report(args, {"checks": body, "count": len(results)}, passed, timing)
    if args.out:
        dump_json(obj, args.out)
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--guard-profiles", type=int, default=dist.DEFAULT_GUARD_PROFILES, help="max enumerated type profiles")
    common.add_argument("--out", default=None, help="output file (default stdout)")

    p = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="random instance file")
    g.add_argument("--family", default="iid-discrete", choices=["iid-discrete", "parametric", "symmetric-xos", "point"])
    g.add_argument("--n", type=int, default=2)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--support", type=int, default=3)
    g.add_argument("--clauses", type=int, default=2)
    g.add_argument("--symmetric", action="store_true")
    g.add_argument("--valuation", default="additive", choices=["additive", "unit-demand"])
    g.set_defaults(func=cmd_generate)

    lr = sub.add_parser("learn", parents=[common], help="learn a mechanism")
    lr.add_argument(
        "--model",
        required=True,
        choices=["ud-maxmin", "ud-regular", "additive-bounded", "additive-maxmin", "xos-sample", "sym-xos", "sym-subadditive"],
    )
    lr.add_argument("--instance", required=True)
    lr.add_argument("--access", default="samples-bounded", choices=["samples-bounded", "samples-regular", "approx-dist"])
    lr.add_argument("--samples", type=int, default=1000)
    lr.add_argument("--eps", type=float, default=0.0)
    lr.add_argument("--net-bound", type=float, default=1.0)
    lr.add_argument("--net-step", type=float, default=0.25)
    lr.set_defaults(func=cmd_learn)

    e = sub.add_parser("eval", parents=[common], help="evaluate mechanisms on an instance")
    e.add_argument("--instance", required=True)
    e.add_argument("--mech", required=True, nargs="+")
    e.add_argument("--mc", type=int, default=0, help="Monte Carlo trials instead of exact enumeration")
    e.add_argument("--with-opt", action="store_true", help="also solve the BIC revenue LP")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("exante", parents=[common], help="ex-ante relaxation")
    x.add_argument("verb", choices=["solve", "bound", "curve"])
    x.add_argument("--instance", required=True)
    x.add_argument("--caps", default="exact", choices=["exact", "approx", "regular"])
    x.add_argument("--eps", type=float, default=0.0)
    x.add_argument("--cell", type=int, nargs=2, default=(0, 0), metavar=("I", "J"))
    x.set_defaults(func=cmd_exante)

    mc = sub.add_parser("mech", parents=[common], help="build or evaluate a mechanism")
    mc.add_argument("verb", choices=["build", "eval"])
    mc.add_argument("--instance", required=True)
    mc.add_argument("--mech", help="mechanism file (eval)")
    mc.add_argument("--kind", default="posted", choices=["posted", "rspm", "myerson", "vcg-median"])
    mc.add_argument("--prices", type=float, nargs="+")
    mode = mc.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact enumeration (default)")
    mode.add_argument("--mc", type=int, default=0, help="Monte Carlo trials")
    mc.set_defaults(func=cmd_mech)

    o = sub.add_parser("oracle", parents=[common], help="brute-force ground truth")
    o.add_argument("verb", choices=["bic", "posted", "core", "welfare"])
    o.add_argument("--instance", required=True)
    o.add_argument("--family", default="rspm", choices=["spm", "rspm"])
    o.add_argument("--eta", type=float, default=0.0)
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bounds", parents=[common], help="partition sample-complexity calculator")
    b.add_argument("--table", default="rectangles", choices=["rectangles", "convex", "dkw"])
    b.add_argument("--d", type=int, default=2)
    b.add_argument("--eps", type=float, default=0.1)
    b.add_argument("--delta", type=float, default=0.1)
    b.set_defaults(func=cmd_bounds)

    v = sub.add_parser("verify", parents=[common], help="module invariants and the acceptance battery")
    v.add_argument("--suite", default="all", choices=["all", "acceptance", "invariants"])
    v.add_argument("--criteria", default=None, help="comma-separated criterion ids; empty string selects none")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        if args.command == "mech" and args.verb == "eval" and not args.mech:
            raise UsageError("mech eval: --mech is required")
        return args.func(args)
    except (UsageError, FormatError, FileNotFoundError) as e:
        print(f"artifact {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (dist.GuardExceeded, oracle.GuardExceeded, mech.BudgetExceeded) as e:
        print(f"artifact {args.command}: guard exceeded in {type(e).__module__}: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (dist.DistError, mech.UnsupportedMechanism, oracle.UnsupportedClass, UnsupportedOracle, ValueError) as e:
        print(f"artifact {args.command}: {type(e).__module__}.{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
