import json

import pytest

from artifact.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["generate", "--seed", "4", "--out", str(a)]) == 0
    assert main(["generate", "--seed", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_families(tmp_path, capsys):
    p = tmp_path / "p.json"
    assert main(["generate", "--family", "point", "--n", "2", "--m", "2", "--out", str(p)]) == 0
    d = json.loads(p.read_text())
    assert all(c["probs"] == [1.0] for row in d["marginals"] for c in row)
    assert main(["generate", "--symmetric", "--n", "3", "--m", "2", "--out", str(p)]) == 0
    d = json.loads(p.read_text())
    assert d["symmetric"] and d["marginals"][0] == d["marginals"][1] == d["marginals"][2]
    assert main(["generate", "--family", "symmetric-xos", "--n", "2", "--m", "2", "--out", str(p)]) == 0
    assert json.loads(p.read_text())["valuation"]["class"] == "xos"


def test_learn_eval_pipeline(tmp_path, capsys):
    inst, mech = tmp_path / "i.json", tmp_path / "m.json"
    main(["generate", "--seed", "1", "--valuation", "unit-demand", "--out", str(inst)])
    assert main(["learn", "--model", "ud-maxmin", "--instance", str(inst), "--samples", "300", "--out", str(mech)]) == 0
    assert (tmp_path / "m.audit.json").exists()
    code, out, _ = run(["eval", "--instance", str(inst), "--mech", str(mech), "--with-opt"], capsys)
    assert code == 0
    rep = json.loads(out)
    r = rep["results"]["mechanisms"][str(mech)]
    assert 0 <= r["revenue"] <= rep["results"]["opt_lp"] + 1e-9
    assert rep["version"]["sha256"] and "utc" in rep["timestamp"]


def test_report_reproducible_except_timestamp(tmp_path, capsys):
    inst = tmp_path / "i.json"
    main(["generate", "--seed", "2", "--out", str(inst)])
    reps = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(["oracle", "bic", "--instance", str(inst), "--out", str(out)]) == 0
        d = json.loads(out.read_text())
        d.pop("timestamp")
        d["config"].pop("out")
        reps.append(d)
    assert reps[0] == reps[1]


def test_exante_and_curve(tmp_path, capsys):
    inst = tmp_path / "i.json"
    main(["generate", "--seed", "3", "--out", str(inst)])
    code, out, _ = run(["exante", "solve", "--instance", str(inst)], capsys)
    assert code == 0 and set(json.loads(out)) >= {"q", "objective", "tag"}
    code, out, _ = run(["exante", "curve", "--instance", str(inst), "--cell", "0", "1"], capsys)
    assert code == 0 and out.startswith("q,R,x,p_lo,p_hi")


def test_bounds_prints_provenance(capsys):
    code, out, _ = run(["bounds", "--table", "dkw", "--d", "2"], capsys)
    assert code == 0 and "bound=738" in out and "provenance=" in out


def test_mech_build_and_eval(tmp_path, capsys):
    inst, m = tmp_path / "i.json", tmp_path / "m.json"
    main(["generate", "--seed", "3", "--n", "1", "--m", "1", "--out", str(inst)])
    assert main(["mech", "build", "--instance", str(inst), "--kind", "myerson", "--out", str(m)]) == 0
    code, out, _ = run(["mech", "eval", "--instance", str(inst), "--mech", str(m), "--mc", "500"], capsys)
    assert code == 0 and json.loads(out)["results"]["mode"] == "mc"


def test_verify_empty_selection(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify", "--suite", "acceptance", "--criteria", "", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["passed"] and d["results"]["count"] == 0


def test_verify_fast_subset(tmp_path, capsys):
    assert main(["verify", "--suite", "acceptance", "--criteria", "9,14"]) == 0
    assert "criterion 14" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    assert main(["nonsense"]) == 2
    assert main(["oracle", "bic", "--instance", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1, "m": 1, "marginals": [[{"kind": "discrete", "support": [1], "probs": [0.3]}]]}')
    code, _, err = run(["oracle", "bic", "--instance", str(bad)], capsys)
    assert code == 2 and "$.marginals[0][0]" in err
    assert main(["verify", "--criteria", "99"]) == 2


def test_guard_failure_exit_code(tmp_path, capsys):
    inst = tmp_path / "i.json"
    main(["generate", "--seed", "1", "--n", "2", "--m", "2", "--out", str(inst)])
    code, _, err = run(["oracle", "bic", "--instance", str(inst), "--guard-profiles", "2"], capsys)
    assert code == 1 and "guard" in err
