import csv
import io
import json
import os

import pytest

import queueing_chain.cli as cli
from queueing_chain.cli import EXIT_COMPARISON, EXIT_INPUT, EXIT_OK, EXIT_UNSTABLE, main

CIMS_NETWORK = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "metadata", "cims_network.json")


def _csv_rows(text):
    return list(csv.reader(io.StringIO(text)))


def _row(rows, name):
    return next(row for row in rows if row[0] == name)


def test_analyze_cims_table(capsys):
    assert main(["analyze", "--preset", "cims", "--interarrival", "5"]) == EXIT_OK

    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0].split()[:2] == ["node", "lambda"]
    assert sum(1 for line in lines if line.startswith(("P-CSCF", "S/I-CSCF", "SLF", "HSS"))) == 6
    assert any(line.startswith("chain") for line in lines)


def test_analyze_csv_chain_response(capsys):
    assert main(["analyze", "--preset", "cims", "--interarrival", "5", "--format", "csv"]) == EXIT_OK

    rows = _csv_rows(capsys.readouterr().out)
    assert rows[0] == ["node", "lambda", "visits", "rho", "EQ", "EW_ms", "ET_ms"]
    assert float(_row(rows, "chain")[6]) == pytest.approx(22.0184, rel=1e-4)
    assert float(_row(rows, "bound")[6]) == pytest.approx(22.0)


def test_analyze_tripled_capacity(capsys):
    argv = ["analyze", "--preset", "cims", "--interarrival", "5", "--capacity", "3,3,3,3,3,3", "--format", "csv"]

    assert main(argv) == EXIT_OK
    assert float(_row(_csv_rows(capsys.readouterr().out), "chain")[6]) == pytest.approx(7.3354, rel=1e-4)


def test_analyze_config_file_and_output(tmp_path, capsys):
    output = tmp_path / "result.csv"
    argv = ["analyze", CIMS_NETWORK, "--rate", "0.2", "--format", "csv", "--output", str(output)]

    assert main(argv) == EXIT_OK
    assert output.read_text(encoding="utf-8") == capsys.readouterr().out


def test_analyze_unstable_exit_code(capsys):
    argv = ["analyze", "--preset", "cims", "--interarrival", "0.001", "--format", "json"]

    assert main(argv) == EXIT_UNSTABLE

    document = json.loads(capsys.readouterr().out)
    chain = next(row for row in document["rows"] if row["node"] == "chain")
    assert chain["ET_ms"] == "inf"


def test_analyze_multiclass_rows(capsys):
    assert main(["analyze", "--preset", "shared-hss", "--rate", "20", "--format", "csv"]) == EXIT_OK

    names = [row[0] for row in _csv_rows(capsys.readouterr().out)]
    assert "HSS:class1" in names
    assert "chain:class2" in names


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze", "--preset", "cims", "--capacity", "1,2"],
        ["analyze", "--preset", "cims", "--interarrival", "5", "--rate", "1"],
        ["analyze", "--preset", "nowhere"],
        ["analyze"],
        ["analyze", "--preset", "cims", "--set", "nodes.HSS1.color=red"],
        ["analyze", "missing.json"],
        ["analyze", CIMS_NETWORK, "--preset", "cims"],
        ["simulate", "--preset", "cims", "--jobs", "1.5"],
    ],
)
def test_input_errors_exit_one(argv):
    assert main(argv) == EXIT_INPUT


def test_sweep_default_values(capsys):
    assert main(["sweep", "--preset", "cims", "--parameter", "interarrival_time", "--metrics", "ET"]) == EXIT_OK

    rows = _csv_rows(capsys.readouterr().out)
    assert len(rows) == 51
    assert rows[0][0] == "interarrival_s"
    assert rows[0][-1] == "chain.ET_ms"


def test_sweep_preset_values_over_grid(capsys):
    argv = ["sweep", "--preset", "cims", "--parameter", "capacity_vector", "--values", "preset:capacity-vectors",
            "--grid", "1:10:1", "--metrics", "ET"]

    assert main(argv) == EXIT_OK
    assert len(_csv_rows(capsys.readouterr().out)) == 1 + 4 * 10


def test_sweep_requires_values_for_vectors():
    assert main(["sweep", "--preset", "cims", "--parameter", "capacity_vector"]) == EXIT_INPUT


def test_optimize_json(capsys):
    argv = ["optimize", "--preset", "cims", "--interarrival", "5", "--budget", "1000", "--samples", "2000",
            "--seed", "3", "--format", "json"]

    assert main(argv) == EXIT_OK

    document = json.loads(capsys.readouterr().out)
    total = next(row for row in document["rows"] if row["node"] == "total")
    assert document["verify_seed"] == 3
    assert total["c_mu"] == pytest.approx(1000.0)
    assert total["lambda"] == pytest.approx(0.8)
    assert [row["node"] for row in document["rows"][:6]] == ["P-CSCF", "S/I-CSCF", "SLF", "HSS1", "HSS2", "HSS3"]


def test_optimize_infeasible_budget():
    assert main(["optimize", "--preset", "cims", "--interarrival", "5", "--budget", "0.5"]) == EXIT_INPUT


def test_simulate_reports_seed(capsys):
    argv = ["simulate", "--preset", "cims", "--rate", "20", "--jobs", "2e3", "--reps", "2", "--seed", "42",
            "--format", "json"]

    assert main(argv) == EXIT_OK

    document = json.loads(capsys.readouterr().out)
    assert document["seed"] == 42
    assert document["arrivals"] == 4000
    assert "chain" in [row["node"] for row in document["rows"]]


def test_compare_failure_exit_code_and_notification(monkeypatch, capsys):
    calls = []

    class _FailedReport:
        passed = False
        seed = 1
        rows = ()

        def failures(self):
            return ()

    monkeypatch.setattr(cli, "compare", lambda cfg, analytic: _FailedReport())
    monkeypatch.setattr(cli, "send_slack_notification", lambda message, source: calls.append(source) or False)

    assert main(["compare", "--preset", "cims", "--interarrival", "5", "--jobs", "100"]) == EXIT_COMPARISON
    assert calls == ["queueing_chain.cli.compare"]


def test_unexpected_error_is_reported(monkeypatch):
    calls = []

    def broken(args):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.COMMANDS, "analyze", broken)
    monkeypatch.setattr(cli, "send_slack_notification", lambda message, source: calls.append(message) or False)

    assert main(["analyze", "--preset", "cims"]) == EXIT_INPUT
    assert "boom" in calls[0]


@pytest.mark.parametrize("command", ["simulate", "compare"])
def test_same_seed_gives_byte_identical_output(tmp_path, capsys, command):
    outputs = []
    for run in range(2):
        path = tmp_path / f"{command}-{run}.csv"
        argv = [command, "--preset", "cims", "--rate", "20", "--jobs", "1000", "--reps", "2", "--seed", "9",
                "--format", "csv", "--output", str(path)]
        main(argv)
        outputs.append((capsys.readouterr().out, path.read_bytes()))

    assert outputs[0] == outputs[1]
    assert outputs[0][0]
