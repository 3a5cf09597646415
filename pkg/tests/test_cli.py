import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from rangegen import cli
from rangegen.domain import load_dataset
from rangegen.metrics import read_sweep_csv

TINY_CONFIG = """\
labels = aspect
seed = 11
gan_steps = 120
batch_size = 32
estimator_steps = 150
estimator_batch = 64
log_every = 40
sat_check_every = 60
sat_check_samples = 32
sweep_conditions = 5
sweep_samples = 50
n_pool = 150
"""


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "ds.csv"
    assert run("gen-data", "--n", "600", "--seed", "7", "--out", str(data)) == 0
    return root


@pytest.fixture(scope="module")
def trained_dir(data_dir):
    cfg = data_dir / "tiny.cfg"
    cfg.write_text(TINY_CONFIG)
    out = data_dir / "run"
    code = run("train", "--data", str(data_dir / "ds.csv"), "--labels", "aspect",
               "--config", str(cfg), "--out-dir", str(out))
    assert code == 0
    return out


class TestGenData:
    def test_writes_dataset_and_meta(self, data_dir):
        ds = load_dataset(data_dir / "ds.csv")
        assert ds.n_rows >= 590
        assert ds.seed == 7

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run("gen-data", "--n", "300", "--seed", "5", "--out", str(a)) == 0
        assert run("gen-data", "--n", "300", "--seed", "5", "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_below_minimum_is_usage_error(self, tmp_path):
        code = run("gen-data", "--n", "10", "--out", str(tmp_path / "x.csv"))
        assert code == cli.EXIT_USAGE

    def test_histogram_emission(self, tmp_path):
        hist = tmp_path / "hist.csv"
        assert run("gen-data", "--n", "300", "--seed", "5",
                   "--out", str(tmp_path / "d.csv"), "--hist-out", str(hist)) == 0
        lines = hist.read_text().splitlines()
        assert any(line.startswith("# seed = 5") for line in lines)
        header = [l for l in lines if l.startswith("bin_lo")][0]
        assert "count_aspect_ratio" in header and "density_area_ratio" in header


class TestTrain:
    def test_outputs_exist(self, trained_dir):
        assert (trained_dir / "checkpoint.json").exists()
        assert (trained_dir / "training_log.csv").exists()
        assert (trained_dir / "sweep_estimator.csv").exists()
        assert (trained_dir / "config.txt").exists()

    def test_missing_dataset_is_io_error(self, tmp_path):
        code = run("train", "--data", str(tmp_path / "none.csv"),
                   "--out-dir", str(tmp_path / "o"))
        assert code == cli.EXIT_IO

    def test_unknown_config_key_names_it(self, data_dir, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("warp_drive = 9\n")
        code = run("train", "--data", str(data_dir / "ds.csv"),
                   "--config", str(bad), "--out-dir", str(tmp_path / "o"))
        assert code == cli.EXIT_CONFIG
        assert "warp_drive" in capsys.readouterr().err

    def test_deterministic_reruns(self, data_dir, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run("train", "--data", str(data_dir / "ds.csv"),
                       "--config", str(cfg), "--out-dir", str(out)) == 0
            outs.append(out)
        for fname in ("checkpoint.json", "training_log.csv",
                      "sweep_estimator.csv", "config.txt"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


class TestEvaluate:
    def test_report_with_baseline(self, data_dir, trained_dir, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run("evaluate", "--gan", str(trained_dir / "checkpoint.json"),
                   "--labeler", "exact", "--range-size", "0.2",
                   "--n-conditions", "8", "--n-samples", "40",
                   "--data", str(data_dir / "ds.csv"), "--out", str(out))
        assert code == 0
        meta, rows = read_sweep_csv(out)
        assert meta["range_size"] == "0.2"
        labelers = {r["labeler"] for r in rows}
        assert labelers == {"exact", "data"}
        assert len(rows) == 16

    def test_bad_range_size_is_usage_error(self, trained_dir, tmp_path):
        code = run("evaluate", "--gan", str(trained_dir / "checkpoint.json"),
                   "--range-size", "1.5", "--out", str(tmp_path / "x.csv"))
        assert code == cli.EXIT_USAGE

    def test_full_window_all_satisfied(self, trained_dir, tmp_path):
        out = tmp_path / "full.csv"
        code = run("evaluate", "--gan", str(trained_dir / "checkpoint.json"),
                   "--labeler", "exact", "--range-size", "1.0",
                   "--n-conditions", "3", "--n-samples", "30", "--out", str(out))
        assert code == 0
        _, rows = read_sweep_csv(out)
        assert all(r["satisfaction"] == 1.0 for r in rows)

    def test_deterministic(self, trained_dir, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert run("evaluate", "--gan", str(trained_dir / "checkpoint.json"),
                       "--range-size", "0.2", "--n-conditions", "4",
                       "--n-samples", "30", "--seed", "9", "--out", str(path)) == 0
        assert a.read_bytes() == b.read_bytes()


class TestGenerate:
    def test_writes_designs_with_flags(self, trained_dir, tmp_path):
        out = tmp_path / "gen.csv"
        code = run("generate", "--gan", str(trained_dir / "checkpoint.json"),
                   "--lb", "0.4", "--ub", "0.6", "--n", "50", "--out", str(out))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "# seed = 0"
        header = lines[3].split(",")
        assert header[:6] == [f"d{i}" for i in range(6)]
        assert header[6:] == ["aspect_raw", "aspect_norm", "satisfied"]
        assert len(lines) == 4 + 50

    def test_zero_width_range_rejected(self, trained_dir, tmp_path):
        code = run("generate", "--gan", str(trained_dir / "checkpoint.json"),
                   "--lb", "0.5", "--ub", "0.5", "--n", "10",
                   "--out", str(tmp_path / "x.csv"))
        assert code == cli.EXIT_USAGE

    def test_inverted_bounds_rejected(self, trained_dir, tmp_path):
        code = run("generate", "--gan", str(trained_dir / "checkpoint.json"),
                   "--lb", "0.7", "--ub", "0.2", "--n", "10",
                   "--out", str(tmp_path / "x.csv"))
        assert code == cli.EXIT_USAGE

    def test_raw_bounds_converted(self, trained_dir, tmp_path):
        ckpt = json.loads((trained_dir / "checkpoint.json").read_text())
        lo = ckpt["manifest"]["normalizer"]["raw_min"][0]
        hi = ckpt["manifest"]["normalizer"]["raw_max"][0]
        lb_raw = lo + 0.4 * (hi - lo)
        ub_raw = lo + 0.6 * (hi - lo)
        out = tmp_path / "raw.csv"
        code = run("generate", "--gan", str(trained_dir / "checkpoint.json"),
                   "--raw", "--lb", repr(lb_raw), "--ub", repr(ub_raw),
                   "--n", "5", "--out", str(out))
        assert code == 0
        lb_line = [l for l in out.read_text().splitlines() if l.startswith("# lb")][0]
        assert abs(float(lb_line.split("=")[1]) - 0.4) < 1e-9


class TestRender:
    def test_renders_generated_designs(self, trained_dir, tmp_path):
        gen_csv = tmp_path / "gen.csv"
        assert run("generate", "--gan", str(trained_dir / "checkpoint.json"),
                   "--lb", "0.4", "--ub", "0.6", "--n", "7",
                   "--out", str(gen_csv)) == 0
        svg = tmp_path / "sheet.svg"
        assert run("render", "--designs", str(gen_csv), "--out", str(svg)) == 0
        root = ET.fromstring(svg.read_text())
        groups = root.findall("{http://www.w3.org/2000/svg}g")
        assert len(groups) == 7

    def test_renders_dataset_rows(self, data_dir, tmp_path):
        svg = tmp_path / "data.svg"
        assert run("render", "--designs", str(data_dir / "ds.csv"),
                   "--limit", "4", "--out", str(svg)) == 0
        root = ET.fromstring(svg.read_text())
        assert len(root.findall("{http://www.w3.org/2000/svg}g")) == 4

    def test_headerless_file_is_io_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        code = run("render", "--designs", str(bad), "--out", str(tmp_path / "x.svg"))
        assert code == cli.EXIT_IO


class TestAugmentCommand:
    def test_full_cycle_with_tiny_pool(self, data_dir, trained_dir, tmp_path):
        out = tmp_path / "aug"
        code = run("augment", "--gan", str(trained_dir / "checkpoint.json"),
                   "--data", str(data_dir / "ds.csv"), "--pool", "100",
                   "--out-dir", str(out))
        assert code == 0
        assert (out / "augmented_dataset.csv").exists()
        assert (out / "checkpoint.json").exists()
        meta, rows = read_sweep_csv(out / "before_after.csv")
        phases = {r["labeler"] for r in rows}
        assert phases == {"exact[before]", "exact[after]"}
        bins = (out / "augment_bins.csv").read_text().splitlines()
        assert bins[0] == "label,bin,count_before,count_after"
        assert len(bins) == 1 + 10

    def test_zero_pool_completes(self, data_dir, trained_dir, tmp_path):
        code = run("augment", "--gan", str(trained_dir / "checkpoint.json"),
                   "--data", str(data_dir / "ds.csv"), "--pool", "0",
                   "--out-dir", str(tmp_path / "aug0"))
        assert code == 0
        aug = load_dataset(tmp_path / "aug0" / "augmented_dataset.csv")
        base = load_dataset(data_dir / "ds.csv")
        assert aug.n_rows == base.n_rows

    def test_mismatched_dataset_is_config_error(self, trained_dir, tmp_path):
        other = tmp_path / "other.csv"
        assert run("gen-data", "--n", "400", "--seed", "99",
                   "--out", str(other)) == 0
        code = run("augment", "--gan", str(trained_dir / "checkpoint.json"),
                   "--data", str(other), "--out-dir", str(tmp_path / "aug"))
        assert code == cli.EXIT_CONFIG
