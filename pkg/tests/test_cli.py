import json

import pytest

from flashx.cli import main, resolve_workloads
from flashx.hardware import ConfigError

MAPPING = "TMap(1,1) M\nSMap(1,1) N\nTMap(4,4) K\nCluster(4)\nTMap(1,1) M\nTMap(1,1) N\nSMap(1,1) K\n"


def test_workload_selectors():
    assert resolve_workloads("vi")[0][1].dims == (512, 256, 256)
    assert resolve_workloads("3,4,5")[0][1].dims == (3, 4, 5)
    assert [w.dims for _, w in resolve_workloads("mlp:64")][0] == (64, 512, 784)
    assert resolve_workloads("mlp:64:4")[0][1].dims == (64, 10, 128)
    for bad in ("mlp:0", "mlp:8:5", "1,2", "0,1,1", "XI"):
        with pytest.raises(ConfigError):
            resolve_workloads(bad)


def test_explore_writes_identical_files(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["explore", "--style", "nvdla", "--workload", "32,32,32", "--samples", "50", "--seed", "4"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["run_spec"]["style"] == "nvdla" and doc["run_spec"]["seed"] == 4
    assert doc["result"]["random_sample"]["sampled"] == 50
    assert "best" in capsys.readouterr().err


def test_explore_csv_has_spec_header(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["explore", "--style", "maeri", "--workload", "16,16,16", "--loop-orders", "all",
                 "--format", "csv", "--top-k", "4", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# run_spec: {")
    assert lines[1].startswith("workload,loop_order,cluster_size")
    assert len(lines) == 2 + 4


def test_cost_with_oracle(tmp_path, capsys):
    f = tmp_path / "m.txt"
    f.write_text(MAPPING)
    assert main(["cost", "--mapping", str(f), "--workload", "4,4,4", "--oracle"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["oracle"]["match"] is True
    assert doc["report"]["s2_a"] == 16


def test_cost_invalid_mapping_exit_2(tmp_path, capsys):
    f = tmp_path / "m.txt"
    f.write_text(MAPPING.replace("TMap(4,4) K", "TMap(4,4) K\nTMap(1,1) K"))
    assert main(["cost", "--mapping", str(f), "--workload", "4,4,4"]) == 2
    f.write_text(MAPPING.replace("Cluster(4)", "Cluster(512)"))
    assert main(["cost", "--mapping", str(f), "--workload", "4,4,4"]) == 2
    assert "clusters" in capsys.readouterr().err


def test_oracle_mismatch_exit_3(tmp_path, monkeypatch):
    import flashx.cli as cli

    f = tmp_path / "m.txt"
    f.write_text(MAPPING)
    real = cli.oracle_counts

    def skewed(*a, **kw):
        res = real(*a, **kw)
        res.s2["A"] += 1
        return res

    monkeypatch.setattr(cli, "oracle_counts", skewed)
    assert main(["cost", "--mapping", str(f), "--workload", "4,4,4", "--oracle", "--quiet"]) == 3


def test_config_errors_exit_1(tmp_path, capsys):
    cfg = tmp_path / "hw.json"
    cfg.write_text(json.dumps({"pe_count": 16, "s1_bytes": 64, "s2_bytes": -1, "noc_bandwidth_bytes_per_cycle": 1}))
    assert main(["explore", "--config", str(cfg), "--workload", "4,4,4"]) == 1
    assert "s2_bytes" in capsys.readouterr().err
    assert main(["explore", "--hw", "phone", "--workload", "4,4,4"]) == 1
    assert main(["explore", "--style", "gpu", "--workload", "4,4,4"]) == 1
    assert main(["cost", "--workload", "4,4,4"]) == 1


def test_custom_config_is_used(tmp_path, capsys):
    cfg = tmp_path / "hw.json"
    cfg.write_text(json.dumps({"pe_count": 16, "s1_bytes": 64, "s2_bytes": 1024, "noc_bandwidth_bytes_per_cycle": 2}))
    assert main(["explore", "--config", str(cfg), "--workload", "8,8,8", "--style", "tpu"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["run_spec"]["hardware"]["pe_count"] == 16


def test_infeasible_exit_2(tmp_path):
    cfg = tmp_path / "hw.json"
    cfg.write_text(json.dumps({"pe_count": 4, "s1_bytes": 3, "s2_bytes": 4, "noc_bandwidth_bytes_per_cycle": 1}))
    assert main(["explore", "--config", str(cfg), "--workload", "8,8,8", "--style", "tpu", "--quiet"]) == 2


def test_prune_stats_and_presets(capsys):
    assert main(["prune-stats", "--style", "maeri", "--workload", "1,1,1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["stats"][0]["reduction_ratio"] == 0.0
    assert main(["presets"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["styles"]) == {"eyeriss", "nvdla", "tpu", "shidiannao", "maeri"}
    assert "tiling-table6" in doc["experiments"]


def test_reproduce_unknown_and_histogram(tmp_path):
    assert main(["reproduce", "fig99"]) == 1
    out = tmp_path / "h.csv"
    assert main(["reproduce", "histogram-fig5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# run_spec:")
    assert len(lines) == 2 + 100
