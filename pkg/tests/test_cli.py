import csv
import json
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ultrascale
from ultrascale import algebra as al
from ultrascale import cli
from ultrascale.weights import from_json, make_weight


def run(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    report = json.loads(cap.out) if cap.out.strip() else None
    return code, report, cap.err


class TestRunForm:
    def test_counterexample_verdicts(self, capsys):
        code, rep, _ = run(["run", "experiment=7.2", "weight=power(0.5)",
                            "omega1=power(0.25)"], capsys)
        assert code == 0
        assert rep["result"]["verdicts"] == {"regular": "yes", "strong": "yes", "strict": "no"}
        assert rep["config"]["params"]["params"] == {"omega1": "power(0.25)"}

    def test_log2_fails_subadditivity(self, capsys):
        code, rep, err = run(["run", "weights-check", "spec=log2"], capsys)
        assert code == 1
        assert rep["failed_assertion"] == "axiom a (subadditivity)"
        wit = rep["result"]["axioms"]["witnesses"]["a"]
        assert (wit["x"], wit["y"]) == (1.0, 1.0)
        assert "subadditivity" in err

    def test_nested_assignment(self, capsys):
        code, rep, _ = run(["run", "weights-check", "spec=power(0.5)",
                            "truncations.T_cap=1e20"], capsys)
        assert code == 0
        assert rep["config"]["truncations"]["T_cap"] == 1e20

    def test_missing_pipeline(self, capsys):
        code, _, err = run(["run", "spec=log2"], capsys)
        assert code == 2 and "validation error: pipeline" in err


class TestValidation:
    @pytest.mark.parametrize("argv, path", [
        (["run", "weights-check", "spec=log2", "schedule.k_min=abc"], "schedule.k_min"),
        (["run", "weights-check", "spec=log2", "schedule.speed=1"], "schedule.speed"),
        (["run", "weights-check"], "params.spec"),
        (["run", "weights-check", "spec=power(x)"], "params.spec"),
        (["run", "experiment=7.2", "omega2=power(0.1)"], "params.omega2"),
        (["run", "experiment=9.9"], "params.name"),
        (["run", "nonsense"], "pipeline"),
        (["run", "weights-check", "spec=log2", "grid.N=1000"], "grid.N"),
        (["net", "classify", "--net", "planted(q=1)"], "params.net"),
        (["weights", "compare", "log1", "power(0.5)", "--set", "params.mode=sideways"],
         "params.mode"),
    ])
    def test_field_path_named(self, capsys, argv, path):
        code, rep, err = run(argv, capsys)
        assert code == 2 and rep is None
        assert f"validation error: {path}" in err

    def test_bad_config_file(self, capsys, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        code, _, err = run(["experiment", "7.2", "--config", str(p)], capsys)
        assert code == 2 and "--config" in err

    def test_threads_env(self, capsys, monkeypatch):
        monkeypatch.setenv("ULTRASCALE_THREADS", "many")
        code, _, err = run(["weights", "check", "power(0.5)"], capsys)
        assert code == 2 and "ULTRASCALE_THREADS" in err

    @settings(max_examples=25, deadline=None)
    @given(st.from_regex(r"[a-z]{3,8}", fullmatch=True))
    def test_unknown_fields_rejected(self, key):
        schema = cli.PIPELINES["weights-check"].fields
        if key in schema or key in cli.TOP_KEYS or key in ("pipeline", "experiment",
                                                           "params"):
            return
        with pytest.raises(cli.ConfigError) as e:
            rc_params = {"spec": "power(0.5)", key: 1}
            cli.build_config("weights-check", rc_params)
        assert e.value.path == f"params.{key}"


class TestReports:
    def test_version_and_echo(self, capsys):
        code, rep, _ = run(["weights", "check", "power(0.5)"], capsys)
        assert code == 0 and rep["passed"]
        assert rep["version"] == ultrascale.__version__
        echo = rep["config"]
        assert echo["truncations"]["roumieu_depth"] == 4
        assert echo["schedule"] == {"k_min": 4.0, "k_max": 40.0, "step": 1.0}
        assert echo["seed"] == 20240607

    def test_bit_identical(self, tmp_path):
        outs = []
        for i in range(2):
            p = tmp_path / f"r{i}.json"
            assert cli.main(["net", "classify", "--net", "neg2", "--case", "roumieu",
                             "--out", str(p)]) == 0
            outs.append(p.read_bytes())
        assert outs[0] == outs[1]

    def test_csv_trace(self, tmp_path, capsys):
        p = tmp_path / "t.csv"
        code, rep, _ = run(["net", "classify", "--net", "planted(c=-2)", "--case", "roumieu",
                            "--csv", str(p), "--expect", "Negligible"], capsys)
        assert code == 0
        rows = list(csv.reader(p.open()))
        assert rows[0] == ["eps", "omega_inv_eps", "value"]
        eps, om = float(rows[1][0]), float(rows[1][1])
        assert om == pytest.approx((1 / eps) ** 0.5)
        assert rep["traces"] == [str(p)]

    def test_multiple_traces_get_suffixes(self, tmp_path, capsys):
        p = tmp_path / "a.csv"
        code, rep, _ = run(["associate", "--dist", "delta", "--csv", str(p)], capsys)
        assert code == 0
        assert len(rep["traces"]) == 5
        assert all(os.path.exists(t) and "(" not in os.path.basename(t) for t in rep["traces"])

    def test_config_file_with_override(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"experiment": "7.3", "params": {"net": "slowed"}}))
        code, rep, err = run(["run", "--config", str(p)], capsys)
        assert code == 1 and "hypothesis strict" in err
        code, rep, _ = run(["run", "--config", str(p), "net=embedded"], capsys)
        assert code == 0


class TestCommands:
    def test_compare_strong(self, capsys):
        code, rep, _ = run(["weights", "compare", "power(1/3)", "power(0.5)", "--mode",
                            "strong", "--expect", "strongly-less"], capsys)
        assert code == 0 and rep["result"]["verdict"]["relation"] == "strongly-less"

    def test_compare_expectation_fails(self, capsys):
        code, _, _ = run(["weights", "compare", "power(0.5)", "power(1/3)", "--mode",
                          "strong", "--expect", "strongly-less"], capsys)
        assert code == 1

    def test_stronger_round_trip(self, capsys):
        code, rep, _ = run(["construct", "stronger", "power(0.5)"], capsys)
        assert code == 0
        w = from_json(rep["result"]["weight"])
        assert w(rep["result"]["weight"]["breakpoints"][0]["t"]) > 0

    def test_weaker_of_slow_weight(self, capsys):
        code, rep, _ = run(["construct", "weaker", "power(0.2)"], capsys)
        assert code == 0 and rep["passed"]

    def test_witness_rejection_is_property_failure(self, capsys):
        code, rep, err = run(["construct", "witness", "power(0.5)", "--log-g", "sqrt(t)"],
                             capsys)
        assert code == 1 and "k = 0.5" in err

    def test_witness_expression_sandbox(self, capsys):
        code, _, err = run(["construct", "witness", "power(0.5)", "--log-g", "open('x')"],
                           capsys)
        assert code == 2 and "params.log_g" in err

    def test_seminorm_eval(self, tmp_path, capsys):
        from ultrascale.spectral import make_bump
        p = tmp_path / "g.csv"
        make_bump("gevrey").to_csv(str(p))
        code, rep, _ = run(["seminorm", "eval", "--f", str(p), "--l", "0"], capsys)
        assert code == 0
        assert rep["result"]["value"] > 0
        assert rep["result"]["variant"] == "L1"

    def test_sampled_net_directory(self, tmp_path, capsys):
        w = make_weight("power(0.5)")
        net = al.make_net("planted(c=-2)", w, al.EpsSchedule(4, 14))
        for k, e in zip(net.schedule.ks, net.schedule.eps):
            net.sample(e).to_csv(str(tmp_path / f"k{k}.csv"))
        code, rep, _ = run(["net", "classify", "--net", str(tmp_path), "--case", "roumieu",
                            "--set", "truncations.window=11"], capsys)
        assert code == 0 and rep["result"]["verdict"]["class"] == "Negligible"

    def test_classify_constants(self, tmp_path, capsys):
        w = make_weight("power(0.5)")
        p = tmp_path / "r.csv"
        with p.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "epsilon", "value"])
            for k in range(4, 17):
                wr.writerow([k, 2.0 ** -k, repr(float(2.0 ** (-3 * w(2.0 ** k) / 10)))])
        code, rep, _ = run(["net", "classify-constants", "--data", str(p), "--scale",
                            "roumieu", "--expect", "Negligible"], capsys)
        assert code == 0
        code, rep, _ = run(["net", "classify-constants", "--data", str(p), "--scale",
                            "beurling", "--expect", "Moderate"], capsys)
        assert code == 0

    def test_classify_constants_log_column(self, tmp_path, capsys):
        w = make_weight("power(0.5)")
        p = tmp_path / "r.csv"
        with p.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "epsilon", "value", "log_value"])
            for k in range(4, 41):
                wr.writerow([k, 2.0 ** -k, 0.0, repr(float(-w(2.0 ** k) ** 1.5))])
        code, rep, _ = run(["net", "classify-constants", "--data", str(p), "--expect",
                            "Negligible"], capsys)
        assert code == 0

    def test_l2_and_ball(self, capsys):
        code, rep, _ = run(["net", "l2-criterion", "--net", "neg3", "--case", "roumieu"],
                           capsys)
        assert code == 0 and rep["result"]["l2"]["negligible"]
        code, rep, _ = run(["net", "sharp-ball", "--net", "zero"], capsys)
        assert code == 0 and rep["result"]["ball"]["member"]

    def test_embed(self, capsys):
        code, rep, _ = run(["embed", "--dist", "heaviside"], capsys)
        assert code == 0 and len(rep["assertions"]) == 3

    def test_associate_slowed(self, capsys):
        code, rep, _ = run(["associate", "--net", "slowed", "--expect", "strong"], capsys)
        assert code == 0

    def test_cautionary_experiment(self, capsys):
        code, rep, _ = run(["experiment", "8.2"], capsys)
        assert code == 1 and rep["result"]["verdict"] == "nonzero"
        code, rep, _ = run(["experiment", "8.2", "--expect-status", "hypotheses not met"],
                           capsys)
        assert code == 0

    def test_suite_reduced_range_inconclusive(self, capsys):
        code, rep, _ = run(["suite", "--only", "1,4", "--t-cap-divisor", "1e20"], capsys)
        assert code == 0
        assert set(rep["result"]["matrix"].values()) == {"inconclusive"}

    def test_suite_rows_and_experiments(self, capsys):
        code, rep, _ = run(["suite", "--only", "1,13"], capsys)
        assert code == 0
        assert rep["result"]["matrix"] == {"1:weights.axioms": "pass",
                                           "13:association.counterexample": "pass"}
        assert rep["result"]["experiments"]["7.2"] == "pass"
        assert rep["result"]["experiments"]["7.1"] == "not run"
