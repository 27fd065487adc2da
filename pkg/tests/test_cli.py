import csv
import io
import json
import subprocess
import sys

import pytest

from stokesbench import cli
from stokesbench.connection import classify_obstruction
from stokesbench.errors import DomainError
from stokesbench.params import Params
from stokesbench.report import CSV_HEADER, RunConfig, parse_range, run_report


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture(scope="module")
def x111_report():
    code, text = run("report", "--preset", "x111")
    assert code == 0
    return text


class TestReport:
    def test_json_round_trip_is_byte_identical(self, x111_report):
        assert json.dumps(json.loads(x111_report), indent=2, allow_nan=False) + "\n" == x111_report

    def test_deterministic_apart_from_timings(self, x111_report):
        _, again = run("report", "--preset", "x111")
        first, second = json.loads(x111_report), json.loads(again)
        first.pop("timings"), second.pop("timings")
        assert first == second

    def test_contents(self, x111_report):
        d = json.loads(x111_report)
        assert d["verdict"] == "NoHolomorphicFirstIntegral"
        assert d["s0spi"]["value"][0] == pytest.approx(-3.716432, abs=1e-5)
        assert d["normal_form"]["conjugacy_residual_max"]["value"] == 0
        assert d["first_integral"]["residual_max"]["value"] == 0
        assert d["kernel"]["primitivity"] == "pass"
        # every numeric result carries the tolerance it was computed to
        for key in ("trace_M", "s0", "spi", "s0spi", "lambda", "obstruction_gap"):
            assert set(d[key]) == {"value", "tol"}

    def test_float_mode(self):
        code, text = run("report", "--preset", "resonant", "--mode", "float")
        d = json.loads(text)
        assert code == 0 and d["params"]["mode"] == "float"
        assert d["verdict"] == "Inconclusive" and d["resonant"]
        assert d["normal_form"]["gevrey"]["status"] == "convergent/terminating"

    @pytest.mark.parametrize("fmt", ["csv", "text"])
    def test_other_formats(self, fmt):
        code, text = run("report", "--preset", "diag", "--format", fmt)
        assert code == 0
        if fmt == "csv":
            (row,) = rows(text)
            assert tuple(row) == CSV_HEADER and row["verdict"] == "Inconclusive"
        else:
            assert "verdict: Inconclusive" in text

    def test_library_and_cli_agree(self, x111_report):
        lib = run_report(RunConfig(Params.of(1, 1, 1))).data
        cli_data = json.loads(x111_report)
        lib.pop("timings"), cli_data.pop("timings")
        assert json.loads(json.dumps(lib)) == cli_data


class TestCommands:
    @pytest.mark.parametrize("command", ["normalform", "monodromy", "stokes", "integral", "kernel"])
    def test_each_command_emits_json(self, command):
        code, text = run(command, "--preset", "x111")
        assert code == 0
        assert isinstance(json.loads(text), dict)

    def test_explicit_parameters(self):
        code, text = run("normalform", "--a", "1/3", "--b", "2", "--c", "0,-1", "--order", "4")
        d = json.loads(text)
        assert code == 0 and d["conjugacy_residual_zero"] is True
        assert d["T"]["1"][0][1] == [-1.0, 0.0]

    def test_monodromy_output(self):
        d = json.loads(run("monodromy", "--preset", "x111")[1])
        assert d["trace_M"][0] == pytest.approx(d["two_cos_2pi_lambda"][0], abs=1e-8)

    def test_csv_key_value(self):
        code, text = run("stokes", "--preset", "triangular", "--format", "csv")
        assert code == 0 and text.startswith("key,value\n")
        assert "verdict,Inconclusive" in text

    def test_presets(self):
        code, text = run("presets")
        assert code == 0
        assert {line.split("\t")[0] for line in text.splitlines()} == {"x111", "diag", "resonant", "triangular"}


class TestExitCodes:
    def test_missing_parameters(self, capsys):
        assert run("stokes")[0] == cli.EXIT_USAGE
        assert "usage error" in capsys.readouterr().err

    def test_unknown_preset(self):
        assert run("stokes", "--preset", "nope")[0] == cli.EXIT_USAGE

    def test_bad_scalar(self):
        assert run("normalform", "--a", "x")[0] == cli.EXIT_USAGE

    def test_bad_order(self):
        assert run("normalform", "--preset", "x111", "--order", "0")[0] == cli.EXIT_USAGE

    def test_precision_failure(self, capsys):
        assert run("stokes", "--preset", "x111", "--seed-modulus", "0.4")[0] == cli.EXIT_PRECISION
        assert "seed_modulus" in capsys.readouterr().err

    def test_other_library_error(self, monkeypatch, capsys):
        def boom(args, cfg):
            raise DomainError("singular")

        monkeypatch.setitem(cli.COMMANDS, "kernel", boom)
        assert run("kernel", "--preset", "x111")[0] == cli.EXIT_ERROR
        assert "singular" in capsys.readouterr().err

    def test_version(self, capsys):
        assert run("--version")[0] == 0

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "stokesbench.cli", "presets"], capture_output=True, text=True, check=False
        )
        assert proc.returncode == 0 and "x111" in proc.stdout


class TestSweep:
    def test_rows_match_classifier(self):
        code, text = run("sweep", "--preset", "x111", "--vary", "a=0:1:3", "--vary", "c=1;1/2")
        table = rows(text)
        assert code == 0 and len(table) == 6
        for row in table:
            p = Params.of(*(complex(float(row[f"{n}_re"]), float(row[f"{n}_im"])) for n in "abc"), exact=False)
            assert row["verdict"] == str(classify_obstruction(p).verdict)
            assert row["error"] == ""
        assert [float(r["a_re"]) for r in table] == [0, 0, 0.5, 0.5, 1, 1]

    def test_parallel_matches_serial(self):
        args = ("sweep", "--preset", "x111", "--vary", "b=0;1/2;1")
        assert run(*args)[1] == run(*args, "--jobs", "2")[1]

    def test_empty_range_gives_header_only(self):
        code, text = run("sweep", "--preset", "x111", "--vary", "a=")
        assert code == 0 and text == ",".join(CSV_HEADER) + "\n"

    def test_diagonal_rows_have_zero_product(self):
        table = rows(run("sweep", "--preset", "diag", "--vary", "a=1/5;2/5")[1])
        for row in table:
            assert abs(complex(float(row["s0spi_re"]), float(row["s0spi_im"]))) < 1e-9

    def test_row_errors_are_reported_inline(self):
        code, text = run("sweep", "--preset", "x111", "--vary", "a=1", "--seed-modulus", "0.4")
        (row,) = rows(text)
        assert code == 0 and "seeding error" in row["error"] and row["verdict"] == ""

    def test_needs_a_range(self):
        assert run("sweep", "--preset", "x111")[0] == cli.EXIT_USAGE

    @pytest.mark.parametrize("spec", ["d=1", "a", "a=0:1", "a=0:1:x"])
    def test_bad_range(self, spec):
        assert run("sweep", "--preset", "x111", "--vary", spec)[0] == cli.EXIT_USAGE

    def test_parse_range_inclusive(self):
        name, vals = parse_range("b=0:1:5", exact=True)
        assert name == "b" and vals[-1] == 1 and len(vals) == 5
