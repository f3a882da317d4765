import json

import numpy as np
import pytest

from schatten_lab.cli import main, normalize, parse_assignment, read_config
from schatten_lab.errors import InputError
from schatten_lab.experiments import REGISTRY, get_experiment, list_experiments


def run_cli(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


class TestRegistry:
    def test_eight_experiments(self):
        assert len(list_experiments()) == 8
        assert set(REGISTRY) == {
            "torus-trace", "lattice-schatten", "oscillator-counting", "higher-oscillator",
            "riesz", "russo", "carleman", "inequality-suite",
        }

    def test_citations_non_empty(self):
        assert all(cite.strip() for _, cite in list_experiments())

    def test_sorted_and_stable(self):
        names = [n for n, _ in list_experiments()]
        assert names == sorted(names) == [n for n, _ in list_experiments()]

    def test_unknown(self):
        with pytest.raises(InputError):
            get_experiment("nope")

    def test_schema_validation(self):
        exp = get_experiment("riesz")
        with pytest.raises(InputError):
            exp.resolve({"bogus": "1"})
        with pytest.raises(InputError):
            exp.resolve({"N": "2.5"})
        with pytest.raises(InputError):
            exp.resolve({"N": "4"})
        assert exp.resolve({"N": "64"})["N"] == 64

    def test_auto_values(self):
        cfg = get_experiment("oscillator-counting").resolve({"L": "auto"})
        assert cfg["L"] is None

    def test_choices(self):
        with pytest.raises(InputError):
            get_experiment("torus-trace").resolve({"kernel": "sinc"})


class TestArguments:
    def test_chained_assignment(self):
        assert parse_assignment("α=β=0.8") == {"alpha": "0.8", "beta": "0.8"}

    def test_aliases_and_dashes(self):
        assert parse_assignment("--γ=2.3") == {"gamma": "2.3"}
        assert parse_assignment("ℓ=2") == {"ell": "2"}
        assert parse_assignment("--k-min=5") == {"k_min": "5"}

    def test_config_file(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("# comment\nγ = 2.5\nalpha=beta=0.7  # both\n\n", encoding="utf-8")
        assert read_config(path) == {"gamma": "2.5", "alpha": "0.7", "beta": "0.7"}

    def test_normalize_rounds(self):
        data = normalize({"x": 1 / 3, "y": [np.float64(2.0), np.inf], "z": {1 + 2j}.pop(), "b": np.bool_(True)})
        assert data == {"x": 0.333333333333, "y": [2.0, "inf"], "z": {"re": 1.0, "im": 2.0}, "b": True}


class TestRuns:
    def test_list(self, capsys):
        assert main(["list"]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 8

    def test_lattice_example(self, tmp_path):
        code, out = run_cli(tmp_path, "lattice-schatten", "γ=2.3", "α=β=0.8", "R=2000")
        assert code == 0
        rep = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert rep["verdict"] == "consistent"
        assert rep["result"]["exact_decay_tau"] == pytest.approx(2.1)
        assert rep["result"]["predicted_decay_tau"] == pytest.approx(2.1, rel=0.01)
        assert rep["result"]["measured_tail"]["exponent"] == pytest.approx(2.3, rel=0.02)
        lines = (out / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "k,s_k" and len(lines) == 4002
        assert (out / "plotdata.csv").read_text().startswith("log_k,log_s_k\n")

    def test_lattice_divergent_exit_four(self, tmp_path):
        code, out = run_cli(tmp_path, "lattice-schatten", "--gamma=1.0", "R=500")
        assert code == 4
        assert json.loads((out / "report.json").read_text())["verdict"] == "inconclusive"

    def test_carleman_example(self, tmp_path):
        code, out = run_cli(tmp_path, "carleman", "B=12", "p=1.9")
        assert code == 0
        rep = json.loads((out / "report.json").read_text())["result"]
        assert rep["lp_monotone"] and max(rep["partial_sup_norms"]) < 2.4
        rows = (out / "divergence.csv").read_text().splitlines()
        sums = [float(r.split(",")[2]) for r in rows[1:] if r.split(",")[1] == "1.9"]
        assert len(sums) == 12 and all(a < b for a, b in zip(sums, sums[1:]))
        assert (out / "coefficients.csv").read_text().startswith("frequency,re,im\n")

    def test_torus_trace_example(self, tmp_path):
        code, out = run_cli(tmp_path, "torus-trace", "N=256", "kernel=exp-cos")
        assert code == 0
        rep = json.loads((out / "report.json").read_text())["result"]
        assert rep["checks"]["diagonal_minus_eigen"] <= 1e-6
        assert rep["checks"]["averaged_minus_eigen"] <= 1e-6
        assert (out / "trace_levels.csv").read_text().startswith("j,trace\n")

    def test_rank_one_pathology(self, tmp_path):
        code, out = run_cli(tmp_path, "torus-trace", "kernel=rank1-zeroed")
        assert code == 0
        rep = json.loads((out / "report.json").read_text())["result"]
        assert rep["trace"]["discrepancy_flags"] == ["diagonal-pathology"]

    def test_violated_exit_three(self, tmp_path):
        code, _ = run_cli(tmp_path, "oscillator-counting", "a=2", "tolerance=0.0001", "N=1024")
        assert code == 3

    def test_counting_outputs(self, tmp_path):
        code, out = run_cli(tmp_path, "higher-oscillator", "k=2", "ℓ=1")
        assert code == 0
        rep = json.loads((out / "report.json").read_text())["result"]
        assert rep["predicted_p"] == 0.75
        assert (out / "symbol.csv").read_text().startswith("# basis_tag=oscillator-eigenfunction")

    def test_usage_errors(self, tmp_path, capsys):
        assert run_cli(tmp_path, "no-such-thing")[0] == 2
        assert run_cli(tmp_path, "riesz", "N=abc")[0] == 2
        assert run_cli(tmp_path, "riesz", "novalue")[0] == 2
        assert run_cli(tmp_path, "riesz", "--config", str(tmp_path / "missing.txt"))[0] == 2
        assert run_cli(tmp_path, "carleman", "B=2")[0] == 2
        assert main([]) == 2
        assert "usage error" in capsys.readouterr().err

    def test_numeric_failure_names_module(self, tmp_path, capsys):
        code, _ = run_cli(tmp_path, "oscillator-counting", "N=64")
        assert code == 1
        assert "numeric failure in multipliers" in capsys.readouterr().err

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "riesz.cfg"
        cfg.write_text("N = 128\nk_max = 40\n", encoding="utf-8")
        code, out = run_cli(tmp_path, "riesz", "--config", str(cfg), "k_max=60")
        assert code == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["config"]["N"] == 128 and rep["config"]["k_max"] == 60

    def test_thread_cap(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SCHATTEN_LAB_THREADS", "1")
        assert run_cli(tmp_path, "russo", "trials=2")[0] == 0
        monkeypatch.setenv("SCHATTEN_LAB_THREADS", "many")
        assert run_cli(tmp_path, "russo", "trials=2", name="b")[0] == 2

    def test_seed_changes_random_suites(self, tmp_path):
        a = run_cli(tmp_path, "russo", "trials=3", "--seed", "1", name="a")[1]
        b = run_cli(tmp_path, "russo", "trials=3", "--seed", "2", name="b")[1]
        assert (a / "report.json").read_bytes() != (b / "report.json").read_bytes()

    def test_report_key_order_stable(self, tmp_path):
        _, out = run_cli(tmp_path, "inequality-suite", "trials=3", "sobolev_N=32")
        text = (out / "report.json").read_text(encoding="utf-8")
        data = json.loads(text)
        assert list(data) == sorted(data)
        assert data["result"]["violations"] == 0
