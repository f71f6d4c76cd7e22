import json
from pathlib import Path

import pytest

from filtlab.cli import compare_results, load_config, main, run_experiment

CONFIG_DIR = Path(__file__).resolve().parent.parent / "demos" / "configs"


def small_standardness_config(**overrides):
    cfg = {
        "version": 1,
        "experiment": "standardness",
        "group": {"kind": "lattice", "d": 1},
        "walk": {"n_max": 3, "m": 3, "pairs": 30},
        "seed": 777,
        "output": {"basename": "probe"},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestConfigValidation:
    def test_demo_configs_load(self):
        for path in sorted(CONFIG_DIR.glob("*.json")):
            cfg = load_config(str(path))
            assert cfg["experiment"]

    def test_malformed_json_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", str(bad), "--out-dir", str(tmp_path)]) == 2

    def test_unknown_experiment_exit_2(self, tmp_path):
        path = write_config(tmp_path, small_standardness_config(experiment="mystery"))
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 2

    def test_missing_section_exit_2(self, tmp_path):
        cfg = small_standardness_config()
        del cfg["walk"]
        path = write_config(tmp_path, cfg)
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 2

    def test_cap_violation_exit_2(self, tmp_path):
        cfg = small_standardness_config()
        cfg["group"] = {"kind": "free", "s": 2}
        cfg["walk"] = {"n_max": 9, "m": 9, "pairs": 4, "leaf_cap": 1024}
        path = write_config(tmp_path, cfg)
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 2


class TestRun:
    def test_standardness_run_writes_expected_columns(self, tmp_path):
        path = write_config(tmp_path, small_standardness_config())
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 0
        lines = (tmp_path / "probe.csv").read_text().splitlines()
        data_header = [l for l in lines if not l.startswith("#")][0]
        assert data_header == "n,c_n,ci_low,ci_high"
        meta = [l for l in lines if l.startswith("#")]
        assert any("config_hash=" in l for l in meta)
        assert any("seed=777" in l for l in meta)
        payload = json.loads((tmp_path / "probe.json").read_text())
        assert payload["meta"]["seed"] == 777

    def test_rerun_byte_identical(self, tmp_path):
        path = write_config(tmp_path, small_standardness_config())
        run_experiment(load_config(str(path)), out_dir=str(tmp_path / "a"))
        run_experiment(load_config(str(path)), out_dir=str(tmp_path / "b"))
        assert (tmp_path / "a" / "probe.csv").read_bytes() == (tmp_path / "b" / "probe.csv").read_bytes()
        assert (tmp_path / "a" / "probe.json").read_bytes() == (tmp_path / "b" / "probe.json").read_bytes()

    def test_seed_override_changes_results(self, tmp_path):
        path = write_config(tmp_path, small_standardness_config())
        run_experiment(load_config(str(path)), out_dir=str(tmp_path / "a"))
        run_experiment(load_config(str(path)), out_dir=str(tmp_path / "b"), seed_override=778)
        assert (tmp_path / "a" / "probe.csv").read_bytes() != (tmp_path / "b" / "probe.csv").read_bytes()

    def test_cache_hit_replays_bytes(self, tmp_path):
        path = write_config(tmp_path, small_standardness_config())
        cfg = load_config(str(path))
        cache = tmp_path / "cache"
        run_experiment(cfg, out_dir=str(tmp_path / "a"), cache_dir=str(cache))
        cached = list(cache.glob("*.csv"))
        assert len(cached) == 1
        # poison the cache to prove the hit path replays stored bytes
        marker = b"# poisoned=1\n" + cached[0].read_bytes()
        cached[0].write_bytes(marker)
        run_experiment(cfg, out_dir=str(tmp_path / "b"), cache_dir=str(cache))
        assert (tmp_path / "b" / "probe.csv").read_bytes() == marker

    def test_workers_do_not_change_bytes(self, tmp_path):
        path = write_config(tmp_path, small_standardness_config())
        cfg = load_config(str(path))
        run_experiment(cfg, out_dir=str(tmp_path / "w1"), threads=1)
        run_experiment(cfg, out_dir=str(tmp_path / "w4"), threads=4)
        assert (tmp_path / "w1" / "probe.csv").read_bytes() == (tmp_path / "w4" / "probe.csv").read_bytes()

    def test_orbit_entropy_run(self, tmp_path):
        cfg = {
            "version": 1,
            "experiment": "orbit-entropy",
            "orbit": {"n_max": 3, "r": 2, "alphabet": 2},
            "seed": 5,
            "output": {"basename": "orbits"},
        }
        path = write_config(tmp_path, cfg)
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 0
        lines = [l for l in (tmp_path / "orbits.csv").read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "n,orbit_count,H_bits,h_normalized"
        first = lines[1].split(",")
        assert first[0] == "1" and first[1] == "3"
        assert float(first[3]) == pytest.approx(0.75, abs=1e-12)

    def test_meeting_diagnostic_run(self, tmp_path):
        cfg = {
            "version": 1,
            "experiment": "meeting-diagnostic",
            "group": {"kind": "lattice", "d": 1},
            "meeting": {"pairs": 5, "h": 2, "c": 1.5, "cap": 32},
            "seed": 6,
            "output": {"basename": "meet"},
        }
        path = write_config(tmp_path, cfg)
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 0


class TestCompare:
    def _scaling_run(self, tmp_path, d, seed, basename):
        cfg = {
            "version": 1,
            "experiment": "scaling-fit",
            "group": {"kind": "lattice", "d": d},
            "entropy_grid": {"epsilons": [0.05, 0.1, 0.2], "levels": [2, 3, 4, 5], "sample_points": 16},
            "seed": seed,
            "output": {"basename": basename},
        }
        run_experiment(cfg, out_dir=str(tmp_path))
        return tmp_path / f"{basename}.csv"

    def test_compare_two_scaling_files(self, tmp_path):
        a = self._scaling_run(tmp_path, 1, 11, "a")
        b = self._scaling_run(tmp_path, 2, 12, "b")
        report = compare_results([str(a), str(b)])
        assert len(report["fits"]) == 2
        assert len(report["beta_differences"]) == 1
        diff = report["beta_differences"][0]
        assert diff["stderr"] > 0
        assert len(report["table"]) == 24  # 12 grid rows per file, source-tagged
        assert {row["source"] for row in report["table"]} == {str(a), str(b)}

    def test_single_file_identity_report(self, tmp_path):
        a = self._scaling_run(tmp_path, 1, 13, "solo")
        report = compare_results([str(a)])
        assert report["rows"] == [12]

    def test_empty_file_exit_2(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert main(["compare", str(empty)]) == 2

    def test_schema_mismatch_exit_2(self, tmp_path):
        a = self._scaling_run(tmp_path, 1, 14, "sch")
        other = tmp_path / "other.csv"
        other.write_text("x,y\n1,2\n")
        assert main(["compare", str(a), str(other)]) == 2
