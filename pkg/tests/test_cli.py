import json
import re
from pathlib import Path

import numpy as np
import pytest

from higgslab.cli import main
from higgslab.fields import HiggsField

from conftest import diagonal_field


def write_config(tmp_path, **overrides):
    cfg = {
        "field": {"inline": json.loads(diagonal_field().to_json())},
        "grid": {"half_width": 1.2, "points_per_side": 33},
        "r_schedule": {"values": [1.0, 2.0, 4.0]},
        "region_radius": 0.5,
        "paths": [{"start": [-0.3, 0.0], "end": [0.3, 0.0], "samples": 51}],
        "tolerances": {"hitchin_residual": 1e-9, "transport": 1e-8, "fit_floor": 1e-12},
        "seed": 0,
    }
    cfg.update(overrides)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(cfg))
    return path


def strip_timestamp(text: str) -> str:
    return re.sub(r"# generated=.*\n", "", text)


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        path = write_config(tmp_path, extra_knob=1)
        assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "schema" in capsys.readouterr().err

    def test_missing_config_is_usage_error(self, tmp_path):
        assert main(["sweep", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2

    def test_bad_tolerance_rejected(self, tmp_path):
        path = write_config(tmp_path, tolerances={"hitchin_residual": -1.0})
        assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


class TestSolveCommand:
    def test_writes_checkpoints_and_report(self, tmp_path):
        path = write_config(tmp_path, r_schedule={"values": [1.0, 2.0]})
        out = tmp_path / "out"
        assert main(["solve", "--config", str(path), "--out", str(out)]) == 0
        report = json.loads((out / "solve_report.json").read_text())
        assert len(report["solves"]) == 2
        assert all(s["converged"] for s in report["solves"])
        from higgslab.grid import MetricField

        m = MetricField.load(out / report["solves"][0]["checkpoint"])
        assert m.R == 1.0

    def test_rmax_truncates(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["solve", "--config", str(path), "--out", str(out), "--rmax", "2"]) == 0
        report = json.loads((out / "solve_report.json").read_text())
        assert [s["R"] for s in report["solves"]] == [1.0, 2.0]


class TestSweepCommand:
    def test_diagonal_field_all_quantities_vanish(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(path), "--out", str(out), "--jobs", "1"]) == 0
        csvs = sorted(out.glob("decay_*.csv"))
        assert len(csvs) >= 10
        for f in csvs:
            body = [l for l in f.read_text().splitlines() if not l.startswith("#")]
            for row in body[1:]:
                value = float(row.split(",")[1])
                assert value < 1e-6, (f.name, row)
        summary = (out / "summary.csv").read_text()
        assert "# schema=summary/v1" in summary

    def test_deterministic_bodies(self, tmp_path):
        path = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", "--config", str(path), "--out", str(out1), "--jobs", "1"]) == 0
        assert main(["sweep", "--config", str(path), "--out", str(out2), "--jobs", "2"]) == 0
        for f1 in sorted(out1.glob("*.csv")):
            f2 = out2 / f1.name
            assert strip_timestamp(f1.read_text()) == strip_timestamp(f2.read_text()), f1.name

    def test_headers_carry_config_hash(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "out"
        main(["sweep", "--config", str(path), "--out", str(out), "--jobs", "1"])
        first = (out / "summary.csv").read_text().splitlines()[0]
        m = re.match(r"# schema=summary/v1, config=([0-9a-f]{12})", first)
        assert m
        # a changed tolerance changes the hash
        path2 = write_config(tmp_path, tolerances={"hitchin_residual": 2e-9})
        out2 = tmp_path / "out2"
        main(["sweep", "--config", str(path2), "--out", str(out2), "--jobs", "1"])
        first2 = (out2 / "summary.csv").read_text().splitlines()[0]
        assert first2 != first


class TestWkbCommand:
    def test_diagonal_discrepancy_tiny(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["wkb", "--config", str(path), "--out", str(out)]) == 0
        body = [
            l
            for l in (out / "wkb_path0.csv").read_text().splitlines()
            if not l.startswith("#")
        ]
        header = body[0].split(",")
        disc_col = header.index("discrepancy")
        for row in body[1:]:
            assert float(row.split(",")[disc_col]) <= 1e-8

    def test_requires_paths(self, tmp_path):
        path = write_config(tmp_path, paths=[])
        assert main(["wkb", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


class TestEnergyCommand:
    def test_tensor_csvs_written(self, tmp_path):
        path = write_config(tmp_path, r_schedule={"values": [1.0, 2.0, 3.0, 4.0]})
        out = tmp_path / "out"
        assert main(["energy", "--config", str(path), "--out", str(out)]) == 0
        for comp in ("g_mixed", "toral_mixed", "u_part"):
            text = (out / f"tensor_{comp}.csv").read_text()
            assert "# schema=heatmap/v1" in text
        gap = (out / "decay_energy_gap.csv").read_text()
        rows = [l for l in gap.splitlines() if not l.startswith("#")][1:]
        assert all(float(r.split(",")[1]) < 1e-8 for r in rows)  # diagonal field

    def test_heatmap_constant_for_diagonal(self, tmp_path):
        path = write_config(tmp_path, r_schedule={"values": [2.0]})
        out = tmp_path / "out"
        main(["energy", "--config", str(path), "--out", str(out)])
        rows = [
            l
            for l in (out / "tensor_toral_mixed.csv").read_text().splitlines()
            if not l.startswith("#")
        ][1:]
        vals = {row.split(",")[2] for row in rows}
        assert vals == {"2"}  # |1|² + |-1|² everywhere


class TestFieldDocumentLoading:
    def test_field_from_file(self, tmp_path):
        fdoc = tmp_path / "field.json"
        fdoc.write_text(diagonal_field().to_json())
        path = write_config(tmp_path, field={"path": "field.json"}, r_schedule={"values": [1.0]})
        out = tmp_path / "out"
        assert main(["solve", "--config", str(path), "--out", str(out)]) == 0
