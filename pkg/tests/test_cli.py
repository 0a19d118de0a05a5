import json

import pytest

from varq import cli


def test_variation_command(tmp_path, capsys):
    path = tmp_path / "path.json"
    path.write_text(json.dumps({"times": [0, 1, 2, 3], "values": [[0.0], [1.0], [2.0], [3.0]],
                                "space": {"dim": 1, "norm": "l2"}}))
    assert cli.main(["variation", "--path", str(path), "--q", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] == pytest.approx(3.0)


def test_cotype_command(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    assert cli.main(["cotype", "--space", "linf", "--dim", "8", "--m", "8", "--out", str(out)]) == 0
    assert "ratio 8.0" in capsys.readouterr().out
    assert len(out.read_text().splitlines()) == 2


def test_transfer_command(tmp_path):
    assert cli.main(["transfer", "--m", "2", "--eps", "0.1", "--fejer", "15",
                     "--out", str(tmp_path / "t.json")]) == 0


def test_validation_exit_codes(tmp_path):
    assert cli.main(["cotype", "--space", "x2", "--dim", "2", "--m", "2"]) == 1
    assert cli.main(["estimate", "--config", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["nonsense"]) == 1
    assert cli.main(["cotype", "--space", "l2", "--dim", "2", "--m", "2", "--q", "1.5"]) == 1


def test_numeric_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "family": "TruncatedHilbert", "q": 2.0,
        "grid": {"geometric": {"min": 0.125, "max": 8.0, "count": 5}},
        "corpus": {"count": 1}, "optimizer": {"restarts": 0, "iterations": 0},
        "spatial": {"points_per_unit": 1, "gate": 1e-9},
    }))
    assert cli.main(["estimate", "--config", str(cfg)]) == 3


def test_sweep_writes_plot_files(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "grid": {"geometric": {"min": 0.125, "max": 8.0, "count": 5}},
        "corpus": {"count": 2}, "optimizer": {"restarts": 0, "iterations": 2},
        "spatial": {"points_per_unit": 16},
    }))
    out = tmp_path / "sweep.csv"
    assert cli.main(["sweep", "--config", str(cfg), "--axis", "q=2,3", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert (tmp_path / "sweep.tsv").exists() and (tmp_path / "sweep.fixed.tsv").exists()


def test_parse_helpers():
    assert cli.parse_axis("q=2,2.5") == ("q", [2.0, 2.5])
    with pytest.raises(cli.ValidationError):
        cli.parse_axis("q")
    assert cli.parse_space("l3", 2).norm.r == 3.0
