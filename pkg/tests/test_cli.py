import json

import pytest

from fracmass.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from fracmass.io import read_series_csv, read_snapshot

SMALL = {
    "grid": {"d": 1, "n": 512, "L": "30"},
    "kernel": {"alpha": "1.5"},
    "coefficients": {"k": {"kind": "constant", "c": "1"}, "h": {"kind": "decaying", "a": "1", "rate": "1"}},
    "nonlinearity": {"kind": "square"},
    "initial": {"terms": [{"type": "gaussian", "amplitude": "1", "center": "0", "width": "1"}]},
    "solver": {"t_max": "6", "n_steps": 48, "snapshot_stride": 12},
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(args):
    return main(args)


class TestSolve:
    def test_outputs_and_exit(self, tmp_path):
        out = tmp_path / "out"
        assert run(["solve", "--config", write(tmp_path, SMALL), "--out", str(out)]) == EXIT_OK
        series = read_series_csv(out / "series.csv")
        assert series["t"][-1] == 6.0 and len(series["t"]) == 49
        snaps = sorted((out / "snapshots").glob("snap_*.bin"))
        assert len(snaps) == 5 and read_snapshot(snaps[-1])[0].t == 6.0
        rep = json.loads((out / "theorem_report.json").read_text())
        assert rep["command"] == "solve" and rep["config"]["kernel"]["alpha"] == "1.5"
        assert rep["report"]["ok"] and not rep["report"]["forced"]

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        for d in ("a", "b"):
            assert run(["solve", "--config", cfg, "--out", str(tmp_path / d)]) == EXIT_OK
        for name in ("series.csv", "theorem_report.json", "snapshots/snap_00004.bin"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_needs_config(self, tmp_path, capsys):
        assert run(["solve"]) == EXIT_CONFIG
        assert "needs --config" in capsys.readouterr().err

    @pytest.mark.parametrize("mutate", [
        lambda d: d["kernel"].update(alpha="2"),
        lambda d: d.update(extra={}),
        lambda d: d["initial"]["terms"][0].update(amplitude="-1"),
    ])
    def test_config_errors(self, tmp_path, mutate):
        doc = json.loads(json.dumps(SMALL))
        mutate(doc)
        assert run(["solve", "--config", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_corrupt_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        assert run(["solve", "--config", str(p)]) == EXIT_CONFIG

    def test_hypothesis_failure_and_force(self, tmp_path):
        doc = json.loads(json.dumps(SMALL))
        doc["kernel"]["alpha"] = "0.5"
        doc["solver"] = {"t_max": "0.5", "n_steps": 4}
        cfg = write(tmp_path, doc)
        assert run(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
        code = run(["solve", "--config", cfg, "--out", str(tmp_path / "f"), "--force"])
        rep = json.loads((tmp_path / "f" / "theorem_report.json").read_text())
        assert rep["report"]["forced"] is True
        assert code == EXIT_FAIL  # the failed hypothesis stays in the report

    def test_picard_failure_exit(self, tmp_path):
        doc = json.loads(json.dumps(SMALL))
        doc["initial"]["terms"][0]["amplitude"] = "40"
        doc["solver"] = {"t_max": "1", "n_steps": 1, "picard_max_iter": 2, "substeps_per_step": 2}
        out = tmp_path / "o"
        assert run(["solve", "--config", write(tmp_path, doc), "--out", str(out)]) == EXIT_FAIL
        assert "error" in json.loads((out / "theorem_report.json").read_text())["report"]


class TestOtherCommands:
    def test_compare(self, tmp_path):
        doc = dict(SMALL, compare={"factor": "2"})
        out = tmp_path / "c"
        assert run(["compare", "--config", write(tmp_path, doc), "--out", str(out)]) == EXIT_OK
        rep = json.loads((out / "compare_report.json").read_text())
        assert rep["report"]["checks"][0]["name"] == "comparison"

    def test_kernel_check(self, tmp_path):
        doc = {"grid": {"d": 1, "n": 1024, "L": "40"}, "kernel": {"alpha": "1.5"}}
        out = tmp_path / "k"
        assert run(["kernel-check", "--config", write(tmp_path, doc), "--out", str(out)]) == EXIT_OK
        rep = json.loads((out / "kernel_report.json").read_text())
        names = [c["name"] for c in rep["report"]["checks"]]
        assert "semigroup" in names and "kernel_symmetry" in names

    def test_sweep(self, tmp_path):
        doc = dict(SMALL, sweep={"parameter": "kernel.alpha", "values": ["1.2", "1.8"]})
        doc["solver"] = {"t_max": "1", "n_steps": 8}
        out = tmp_path / "s"
        assert run(["sweep", "--config", write(tmp_path, doc), "--out", str(out)]) == EXIT_OK
        rep = json.loads((out / "sweep_report.json").read_text())
        assert [m["exit_code"] for m in rep["report"]["members"]] == [0, 0]
        assert (out / "sweep_001" / "series.csv").exists()

    def test_sweep_bad_member_is_config_error(self, tmp_path):
        doc = dict(SMALL, sweep={"parameter": "kernel.alpha", "values": ["1.2", "2.5"]})
        assert run(["sweep", "--config", write(tmp_path, doc), "--out", str(tmp_path / "s")]) == EXIT_CONFIG

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["--version"])
        assert e.value.code == 0 and "fracmass" in capsys.readouterr().out
