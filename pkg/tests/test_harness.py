import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np
import pytest

from activepref import cli
from activepref.aurora import InvariantChecker
from activepref.funcspace import FunctionClass
from activepref.harness import (
    ConfigError,
    InvariantViolation,
    load_config,
    run_cb,
    stream,
    sweep,
)

GOLDEN = Path(__file__).parent / "golden"


class TestConfig:
    def test_defaults_and_overrides(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"T": 10, "seed": 3}')
        cfg = load_config(path, {"seed": 9, "check_invariants": None}, {"T": 1, "x": 2})
        assert cfg == {"T": 10, "seed": 9, "x": 2}

    def test_syntax_error_reports_position(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{\n  "T": 10,\n  "seed": }')
        with pytest.raises(ConfigError, match="line 3 column"):
            load_config(path)

    def test_non_object(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(path)

    @pytest.mark.parametrize("cfg, field", [
        ({"T": "10"}, "'T'"), ({"seed": -1}, "'seed'"), ({"link": "probit"}, "'link'"),
        ({"delta": 1.5}, "'delta'"), ({"igw_support": "some"}, "'igw_support'"),
        ({"instance": {"gap": 2.0}}, "'instance'"), ({"bogus": 1}, "bogus"),
        ({"schedule": [0, 99]}, "'schedule'"), ({"instance_seed": -2}, "instance_seed"),
    ])
    def test_field_diagnostics(self, cfg, field):
        with pytest.raises(ConfigError, match=field):
            run_cb({"T": 5, **cfg})


class TestStreams:
    def test_named_streams_differ(self):
        draws = {name: stream(5, name).random() for name in
                 ("instance", "contexts", "feedback", "algorithm", "env")}
        assert len(set(draws.values())) == 5

    def test_reproducible(self):
        assert stream(5, "feedback").random() == stream(5, "feedback").random()


class TestRunCB:
    def test_zero_rounds(self):
        res = run_cb({"T": 0})
        assert res.csv().splitlines() == [
            "t,Z_t,lambda_t,w_t,a_t,b_t,regret_increment,cum_regret,cum_queries,"
            "oracle_cum_loss,version_space_size"]
        assert res.summary["cum_regret"] == 0 and res.summary["cum_queries"] == 0

    def test_singleton_class(self):
        res = run_cb({"T": 100, "instance": {"class_size": 1}})
        assert res.summary["cum_regret"] == 0 and res.summary["cum_queries"] == 0

    def test_prefix_sums(self):
        res = run_cb({"T": 300, "seed": 4})
        rows = list(csv.DictReader(io.StringIO(res.csv())))
        inc = np.array([float(r["regret_increment"]) for r in rows])
        cum = np.array([float(r["cum_regret"]) for r in rows])
        np.testing.assert_allclose(cum, np.cumsum(inc), rtol=1e-8)
        q = np.array([int(r["cum_queries"]) for r in rows])
        np.testing.assert_array_equal(q, np.cumsum([int(r["Z_t"]) for r in rows]))
        assert np.all(q <= np.arange(1, 301))

    def test_golden_regression(self):
        res = run_cb({"T": 2000, "seed": 7})
        text = res.csv()
        assert text == (GOLDEN / "cb_T2000_seed7.csv").read_text()
        assert hashlib.sha256(text.encode()).hexdigest() == (
            "3a5a745b1a6b66f16e4abe48bdbcb3b3a3e2f37d7ec24bcf2e2d7fad6eecdfac")
        assert res.summary["lambda1_query_fraction"] == 0.9995

    def test_instance_seed_pins_instance(self):
        a = run_cb({"T": 5, "seed": 1, "instance_seed": 3}).extra["instance"]
        b = run_cb({"T": 5, "seed": 2, "instance_seed": 3}).extra["instance"]
        np.testing.assert_array_equal(a.fclass.tables, b.fclass.tables)

    def test_instance_file_and_schedule(self, tmp_path):
        inst = run_cb({"T": 1}).extra["instance"]
        path = tmp_path / "inst.json"
        inst.to_json(path)
        seq = tmp_path / "seq.json"
        seq.write_text("[4, 4, 0]")
        res = run_cb({"T": 6, "instance_file": str(path), "schedule": {"file": str(seq)}})
        assert res.extra["contexts"] == [4, 4, 0, 4, 4, 0]

    def test_adaptive_schedule(self):
        res = run_cb({"T": 8}, schedule_callback=lambda t, hist: len(hist) % 2)
        assert res.extra["contexts"] == [0, 1] * 4

    def test_gap_epsilon_diagnostic(self):
        res = run_cb({"T": 50, "gap_epsilon": 0.0, "instance": {"tie_contexts": 5}})
        assert res.summary["T_eps"] == 50

    def test_invariant_violation_aborts(self, monkeypatch):
        monkeypatch.setattr(InvariantChecker, "check",
                            lambda self, state, d: ["width_domination"] if state.round == 3 else [])
        with pytest.raises(InvariantViolation) as err:
            run_cb({"T": 10, "check_invariants": True})
        assert err.value.round == 4


class TestSweep:
    def test_matches_single_run(self):
        res = sweep({"T_grid": [200], "seeds": [3]})
        single = run_cb({"T": 200, "seed": 3}).summary
        row = res.records[0]
        assert (row.cum_regret, row.cum_queries) == (single["cum_regret"], single["cum_queries"])

    def test_growth_ratio_reported(self):
        res = sweep({"T_grid": [100, 200], "seeds": [0, 1, 2], "instance_seed": 0})
        ratio = res.summary["growth_ratios"]["200/100"]
        agg = res.summary["aggregate"]
        assert ratio["queries"] == agg[200]["median_cum_queries"] / agg[100]["median_cum_queries"]

    def test_il_cells(self):
        res = sweep({"kind": "il", "T_grid": [5], "seeds": [0]})
        assert res.records[0].cum_queries <= 20

    @pytest.mark.parametrize("cfg", [{"T_grid": [10], "seeds": []}, {"seeds": [1]},
                                     {"T_grid": [10], "seeds": [1], "kind": "rl"}])
    def test_validation(self, cfg):
        with pytest.raises(ConfigError):
            sweep(cfg)

    def test_parallel_equals_serial(self):
        cfg = {"T_grid": [50, 100], "seeds": [0, 1]}
        assert sweep(cfg, workers=2).csv() == sweep(cfg).csv()


class TestCLI:
    def test_run_cb_writes_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"T": 50}')
        assert cli.main(["run-cb", "--config", str(cfg), "--seed", "2", "--out",
                         str(tmp_path / "o"), "--check-invariants"]) == 0
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert summary["seed"] == 2 and summary["invariants"]["checked_rounds"] == 50
        assert (tmp_path / "o" / "rounds.csv").read_text() == run_cb(
            {"T": 50, "seed": 2, "check_invariants": True}).csv()

    def test_run_il_writes_outputs(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"T": 5}')
        assert cli.main(["run-il", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        for name in ("episodes.csv", "steps.csv", "summary.json"):
            assert (tmp_path / name).exists()

    def test_sweep(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"T_grid": [20, 40], "seeds": [0, 1]}')
        assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 5

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"T": 5, "link": "probit"}')
        assert cli.main(["run-cb", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "link" in capsys.readouterr().err

    def test_invariant_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setattr(InvariantChecker, "check", lambda self, state, d: ["gating"])
        assert cli.main(["run-cb", "--check-invariants", "--out", str(tmp_path)]) == 3

    def test_eluder(self, tmp_path, capsys):
        path = tmp_path / "f.json"
        FunctionClass([[[0.5, 0.5]], [[0.75, 0.5]]]).to_json(path)
        assert cli.main(["eluder", str(path), "--epsilon", "0.2"]) == 0
        assert capsys.readouterr().out.strip() == "1"
        assert cli.main(["eluder", str(path), "--epsilon", "0.3"]) == 0
        assert capsys.readouterr().out.strip() == "0"

    def test_eluder_cap(self, tmp_path):
        path = tmp_path / "f.json"
        FunctionClass([np.zeros((2, 3))]).to_json(path)
        assert cli.main(["eluder", str(path), "--epsilon", "0.2"]) == 2
