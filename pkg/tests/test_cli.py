import json

import pandas as pd
import pytest

from bubblescope.main import run
from bubblescope.series import read_series

TOO_SHORT_CSV = "date,close\n" + "".join(f"{i},{100 + i}\n" for i in range(10))


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Keep user config files and BUBBLESCOPE_* variables out of the CLI"""
    for name in ("WINDOW", "STEP", "MODEL", "SEED", "N_JOBS", "LOG_LEVEL"):
        monkeypatch.delenv(f"BUBBLESCOPE_{name}", raising=False)
    monkeypatch.setenv("BUBBLESCOPE_CONFIG_DIR", str(tmp_path / "config"))


def last_error(capsys):
    """Error JSON written to stderr by a failing run"""
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path):
        """Test the same seed gives the same file twice"""
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(["simulate", "--kind", "gbm", "--n", "100", "--seed", "7", "--out", str(first)]) == 0
        assert run(["simulate", "--kind", "gbm", "--n", "100", "--seed", "7", "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert len(read_series(first)) == 100

    def test_meta_echoes_config(self, tmp_path):
        out = tmp_path / "s.csv"
        assert run(["simulate", "--kind", "fts", "--n", "120", "--seed", "3", "--out", str(out)]) == 0
        meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
        assert meta["kind"] == "fts"
        assert meta["config"]["seed"] == 3
        assert meta["config"]["crash_threshold"] == 0.15
        assert meta["params"]["t_c"] == 139.0

    @pytest.mark.parametrize("kind", ["lppl", "feedback", "ising"])
    def test_other_kinds(self, tmp_path, kind):
        out = tmp_path / f"{kind}.csv"
        assert run(["simulate", "--kind", kind, "--n", "60", "--agents", "50", "--out", str(out)]) == 0
        assert len(read_series(out)) == 60

    def test_appended_crash(self, tmp_path):
        out = tmp_path / "crash.csv"
        args = ["simulate", "--kind", "gbm", "--n", "50", "--crash-drop", "0.2", "--crash-days", "5"]
        assert run(args + ["--out", str(out)]) == 0
        assert len(read_series(out)) == 55

    def test_invalid_parameter(self, tmp_path, capsys):
        """Test a rejected generator parameter is a domain error"""
        code = run(["simulate", "--kind", "gbm", "--sigma", "-1", "--out", str(tmp_path / "x.csv")])
        assert code == 1
        error = last_error(capsys)
        assert error["code"] == "InvalidParameter"
        assert error["subcommand"] == "simulate"

    def test_missing_out(self):
        assert run(["simulate", "--kind", "gbm"]) == 2


class TestUsage:
    def test_unknown_flag(self, tmp_path):
        assert run(["fit", "--input", str(tmp_path / "x.csv"), "--bogus"]) == 2

    def test_unknown_subcommand(self):
        assert run(["report"]) == 2

    def test_missing_subcommand(self):
        assert run([]) == 2


class TestFit:
    def test_too_short(self, tmp_path, capsys):
        """Test a short input exits 1 with code TooShort"""
        path = tmp_path / "too_short.csv"
        path.write_text(TOO_SHORT_CSV)
        assert run(["fit", "--model", "fts", "--input", str(path)]) == 1
        error = last_error(capsys)
        assert error == {"code": "TooShort", "message": error["message"], "subcommand": "fit"}

    def test_missing_input(self, tmp_path, capsys):
        assert run(["fit", "--input", str(tmp_path / "missing.csv")]) == 1
        assert last_error(capsys)["code"] == "InputError"

    def test_fit_window(self, tmp_path):
        series = tmp_path / "fts.csv"
        run(["simulate", "--kind", "fts", "--n", "300", "--tc", "320", "--out", str(series)])
        out = tmp_path / "fit.json"
        args = ["fit", "--input", str(series), "--t-start", "50", "--t-end", "299", "--out", str(out)]
        assert run(args) == 0
        payload = json.loads(out.read_text())
        assert payload["window"] == {"t_start": 50.0, "t_end": 299.0, "n_obs": 250}
        assert payload["fits"][0]["model"] == "fts"
        assert payload["fits"][0]["tc"] == pytest.approx(320.0, abs=1.0)
        assert payload["fits"][0]["bubble_shape_ok"]
        assert payload["config"]["t_start"] == 50.0


class TestIngest:
    def test_json_output(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("date,close\n2020-01-01,10\n2020-01-02,11\n2020-01-03,12\n")
        out = tmp_path / "prices.json"
        assert run(["ingest", "--input", str(path), "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["n_obs"] == 3
        assert payload["series"]["times"] == [0.0, 1.0, 2.0]
        assert read_series(out).prices == (10.0, 11.0, 12.0)

    def test_canonical_csv(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("date,close\n2020-01-01,10\n2020-01-02,11.5\n")
        out = tmp_path / "canonical.csv"
        assert run(["ingest", "--input", str(path), "--out", str(out)]) == 0
        assert out.read_text() == "date,close\n0,10.0\n1,11.5\n"

    def test_stdout(self, tmp_path, capsys):
        path = tmp_path / "prices.csv"
        path.write_text("date,close\n0,10\n1,11\n")
        assert run(["ingest", "--input", str(path)]) == 0
        assert json.loads(capsys.readouterr().out)["n_obs"] == 2

    def test_malformed(self, tmp_path, capsys):
        path = tmp_path / "prices.csv"
        path.write_text("date,close\n0,10\n1,-3\n")
        assert run(["ingest", "--input", str(path)]) == 1
        assert last_error(capsys)["code"] == "MalformedPrice"

    def test_not_utf8(self, tmp_path, capsys):
        path = tmp_path / "prices.csv"
        path.write_bytes(b"date,close\n0,10\n1,\xff\xfe\n")
        assert run(["ingest", "--input", str(path)]) == 1
        error = last_error(capsys)
        assert error["code"] == "InputError"
        assert error["subcommand"] == "ingest"


class TestDrawdowns:
    def test_outputs(self, tmp_path):
        series = tmp_path / "gbm.csv"
        run(["simulate", "--kind", "gbm", "--n", "1000", "--sigma", "0.02", "--crash-drop", "0.3",
             "--out", str(series)])
        out, table = tmp_path / "dd.json", tmp_path / "dd.csv"
        assert run(["drawdowns", "--input", str(series), "--out", str(out), "--csv-out", str(table)]) == 0
        payload = json.loads(out.read_text())
        assert payload["drawdowns"]
        assert payload["bulk_fit"]["n_bulk"] >= 20
        assert payload["bulk_fit_error"] is None
        assert any(c["drop"] > 0.15 for c in payload["crashes"])
        frame = pd.read_csv(table)
        assert list(frame.columns) == ["peak_time", "trough_time", "magnitude"]
        assert len(frame) == len(payload["drawdowns"])

    def test_short_series_without_bulk_fit(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("date,close\n0,10\n1,9\n2,10\n3,8\n")
        out = tmp_path / "dd.json"
        assert run(["drawdowns", "--input", str(path), "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["bulk_fit"] is None
        assert payload["bulk_fit_error"] == "TooFewDrawdowns"
        assert len(payload["drawdowns"]) == 2


class TestScan:
    def test_end_to_end(self, tmp_path):
        """Test scan on a simulated bubble with an appended crash"""
        series = tmp_path / "hs.csv"
        run(["simulate", "--kind", "fts", "--n", "250", "--tc", "279", "--crash-drop", "0.2",
             "--out", str(series)])
        out, plots = tmp_path / "report.json", tmp_path / "plots"
        args = ["scan", "--input", str(series), "--window", "250", "--step", "21", "--out", str(out),
                "--emit-plot-data", str(plots)]
        assert run(args) == 0
        report = json.loads(out.read_text())
        assert report["config"]["window_length"] == 250.0
        assert len(report["windows"]) == 1
        assert report["windows"][0]["bubble_flag"]
        assert report["precedence_rate"] == 1.0
        assert report["plot_data"] == ["hs_window_0000.tsv"]
        assert (plots / "hs_window_0000.tsv").exists()

    def test_byte_identical(self, tmp_path):
        series = tmp_path / "walk.csv"
        run(["simulate", "--kind", "gbm", "--n", "120", "--seed", "2", "--out", str(series)])
        out = tmp_path / "report.json"
        outputs = []
        for _ in range(2):
            assert run(["scan", "--input", str(series), "--window", "60", "--step", "30", "--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_window_too_small(self, tmp_path, capsys):
        series = tmp_path / "walk.csv"
        run(["simulate", "--kind", "gbm", "--n", "120", "--out", str(series)])
        assert run(["scan", "--input", str(series), "--window", "10"]) == 1
        assert last_error(capsys)["code"] == "InvalidParameter"

    def test_plot_data_directory_is_a_file(self, tmp_path, capsys):
        series = tmp_path / "walk.csv"
        run(["simulate", "--kind", "gbm", "--n", "120", "--seed", "2", "--out", str(series)])
        taken = tmp_path / "plots"
        taken.write_text("not a directory\n")
        args = ["scan", "--input", str(series), "--window", "60", "--step", "30",
                "--emit-plot-data", str(taken)]
        assert run(args) == 1
        error = last_error(capsys)
        assert error["code"] == "OutputError"
        assert error["subcommand"] == "scan"
