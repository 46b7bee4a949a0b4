"""CLI surface: run/table/plotdata/oracle-max subcommands and config files."""

import json
import os

import pytest

from mgcbo.cli import main


def test_run_and_table_and_plotdata(tmp_path, capsys):
    out = tmp_path / "results"
    code = main([
        "run",
        "--objective", "camel-2",
        "--policy", "random",
        "--steps", "40",
        "--seeds", "2",
        "--out", str(out),
    ])
    assert code == 0
    assert (out / "results.csv").exists()
    assert (out / "summary.json").exists()
    capsys.readouterr()

    assert main(["table", "--in", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "camel-2" in printed and "random" in printed
    assert "steps 1-20" in printed and "steps 21-40" in printed

    assert main(["plotdata", "--in", str(out)]) == 0
    assert (out / "plotdata.csv").exists()


def test_config_file_with_flag_override(tmp_path):
    cfg_path = tmp_path / "experiment.json"
    cfg_path.write_text(json.dumps({
        "objective": "camel-2",
        "policy": "random",
        "steps": 2,
        "seeds": [0],
        "out": str(tmp_path / "from_config"),
    }))
    code = main(["run", "--config", str(cfg_path), "--steps", "3",
                 "--out", str(tmp_path / "override")])
    assert code == 0
    assert os.path.exists(tmp_path / "override" / "results.csv")
    rows = open(tmp_path / "override" / "results.csv").read().strip().splitlines()
    assert len(rows) == 1 + 3 + 3  # header + init + overridden step count


def test_config_rejects_unknown_keys(tmp_path):
    cfg_path = tmp_path / "experiment.json"
    cfg_path.write_text(json.dumps({"objective": "camel-2", "policy": "random",
                                    "stepz": 2, "out": "x"}))
    with pytest.raises(SystemExit):
        main(["run", "--config", str(cfg_path)])


def test_run_requires_out_and_objective(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--objective", "camel-2", "--policy", "random"])
    with pytest.raises(SystemExit):
        main(["run", "--out", str(tmp_path)])


def test_seed_list_parsing(tmp_path, capsys):
    out = tmp_path / "r"
    assert main([
        "run", "--objective", "camel-2", "--policy", "random",
        "--steps", "1", "--seeds", "3,9", "--out", str(out),
    ]) == 0
    text = (out / "results.csv").read_text()
    assert ",3," in text and ",9," in text


def test_oracle_max_command(capsys):
    assert main(["oracle-max", "--objective", "camel-2", "--samples", "2000",
                 "--polish", "40"]) == 0
    printed = capsys.readouterr().out
    assert "camel-2" in printed and "1.0316" in printed
