import csv

import pytest

from gridpulse.cli import derive_seed, main

HEADERS = {
    "series/series.csv": "cell_id,timestamp_ms,internet_activity",
    "spatial/slots.csv": "row,col,bin_index,value",
    "spatial/corr.csv": "row,col,rho",
    "temporal/acf.csv": "lag,gamma",
    "cluster/clusters.csv": "row,col,cluster_id,tier",
    "cluster/kselect.csv": "k,wcss,aic,bic",
    "model/training.csv": "epoch,train_loss,test_loss,train_acc,test_acc",
}


def run(*argv):
    return main([str(a) for a in argv])


def kv(path):
    return dict(line.split("=", 1) for line in path.read_text().splitlines() if "=" in line)


def pipeline(work, *synth_args, seed=7):
    assert run("synth", "--workdir", work, "--seed", seed, "--days", 7, "--grid", "10x10", *synth_args) == 0
    assert run("ingest", "--workdir", work, "--input", work / "synth/records.csv", "--grid", "10x10") == 0
    assert run("spatial", "--workdir", work, "--target", "2,2", "--downsample", 2) == 0
    assert run("temporal", "--workdir", work, "--max-lag", 168) == 0
    assert run("cluster", "--workdir", work, "--k-range", "1..8", "--criterion", "bic", "--seed", seed) == 0
    assert run("train", "--workdir", work, "--seed", seed) == 0


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    w = tmp_path_factory.mktemp("run")
    pipeline(w)
    return w


def test_outputs_and_headers(work):
    for rel, header in HEADERS.items():
        with open(work / rel) as fh:
            assert fh.readline().rstrip("\n") == header, rel
    assert (work / "model/model.txt").read_text().startswith("gridpulse-mlp v1 25 32 3 ")
    assert kv(work / "cluster/summary.txt")["chosen_k"] == "3"
    assert float(kv(work / "model/summary.txt")["final_test_acc"]) >= 0.9


def test_effective_config_echoed(work):
    cfg = kv(work / "cluster/config.txt")
    assert cfg["k_range"] == "1..8" and cfg["criterion"] == "bic"


def test_synth_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--workdir", tmp_path / name, "--seed", 7, "--days", 7, "--grid", "10x10") == 0
    assert (tmp_path / "a/synth/records.csv").read_bytes() == (tmp_path / "b/synth/records.csv").read_bytes()


def test_pipeline_deterministic(work, tmp_path, monkeypatch):
    monkeypatch.setenv("GRIDPULSE_THREADS", "1")
    pipeline(tmp_path)
    for rel in list(HEADERS) + ["model/model.txt"]:
        assert (work / rel).read_bytes() == (tmp_path / rel).read_bytes(), rel


def test_temporal_peak_noise_free(tmp_path):
    assert run("synth", "--workdir", tmp_path, "--days", 8, "--noise", 0, "--gap-rate", 0) == 0
    assert run("ingest", "--workdir", tmp_path, "--input", tmp_path / "synth/records.csv", "--grid", "10x10") == 0
    assert run("temporal", "--workdir", tmp_path, "--max-lag", 168) == 0
    with open(tmp_path / "temporal/acf.csv") as fh:
        rows = [(int(r["lag"]), float(r["gamma"])) for r in csv.DictReader(fh)]
    assert len(rows) == 169 and rows[0] == (0, 1.0)
    best = max(rows[1:], key=lambda r: r[1])
    assert best[0] == 24


def test_temporal_clamps_lag(work):
    summary = kv(work / "temporal/summary.txt")
    assert summary["max_lag"] == "167" and "clamped" in summary["note"]
    assert summary["first_peak_lag"] == "24"


def test_classify_and_report(work):
    assert run("classify", "--workdir", work) == 0
    with open(work / "model/predictions.csv") as fh:
        preds = list(csv.DictReader(fh))
    with open(work / "cluster/clusters.csv") as fh:
        tiers = {(r["row"], r["col"]): r["tier"] for r in csv.DictReader(fh)}
    assert len(preds) == 100
    agree = sum(tiers[(p["row"], p["col"])] == p["tier"] for p in preds)
    assert agree >= 95
    assert run("report", "--workdir", work) == 0
    text = (work / "report/summary.txt").read_text()
    for section in ("[series]", "[spatial]", "[temporal]", "[cluster]", "[model]"):
        assert section in text
    assert (work / "report/cluster_clusters.csv").exists()


def test_fixed_k(work, tmp_path):
    import shutil
    shutil.copytree(work / "series", tmp_path / "series")
    assert run("cluster", "--workdir", tmp_path, "--k", 2) == 0
    with open(tmp_path / "cluster/clusters.csv") as fh:
        assert {r["tier"] for r in csv.DictReader(fh)} == {"tier_0", "tier_1"}


def test_config_file_and_override(work, tmp_path):
    import shutil
    shutil.copytree(work / "series", tmp_path / "series")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# cluster settings\nk = 2\ncriterion=aic\nrestarts = 3\n")
    assert run("cluster", "--workdir", tmp_path, "--config", cfg) == 0
    assert kv(tmp_path / "cluster/summary.txt")["chosen_k"] == "2"
    assert run("cluster", "--workdir", tmp_path, "--config", cfg, "--k", 4) == 0
    summary = kv(tmp_path / "cluster/summary.txt")
    assert summary["chosen_k"] == "4" and summary["criterion"] == "aic"


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense=1\n")
    assert run("cluster", "--workdir", tmp_path, "--config", cfg) == 1


def test_spatial_requires_target(work, capsys):
    assert run("spatial", "--workdir", work) == 1
    assert "--target" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["frobnicate"], [], ["cluster", "--no-such-flag"], ["cluster", "--k-range", "8..1"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_data_errors(tmp_path, work):
    assert run("temporal", "--workdir", tmp_path / "empty") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n")
    assert run("ingest", "--workdir", tmp_path, "--input", bad) == 2
    assert run("spatial", "--workdir", work, "--target", "9,9", "--downsample", 2) == 2
    assert run("spatial", "--workdir", work, "--target", "0,0", "--downsample", 3) == 2


def test_ingest_telecom_lenient(tmp_path):
    lines = [
        "1\t0\t39\t\t\t\t\t2.0",
        "1\t600000\t39\t\t\t\t\t",
        "1\t1200000\t39\t\t\t\t\t4.0",
        "2\t0\t39\t\t\t\t\t1.0",
        "garbage",
    ]
    src = tmp_path / "sms-call-internet-mi.txt"
    src.write_text("\n".join(lines) + "\n")
    assert run("ingest", "--workdir", tmp_path, "--input", src, "--format", "telecom_tsv") == 2
    assert run("ingest", "--workdir", tmp_path, "--input", src, "--format", "telecom_tsv", "--grid", "1x2",
               "--lenient") == 0
    meta = kv(tmp_path / "series/meta.txt")
    assert meta["skipped_empty"] == "1" and meta["parse_errors"] == "1" and meta["gaps_imputed"] == "3"
    with open(tmp_path / "series/series.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["internet_activity"]) for r in rows if r["cell_id"] == "1"] == [2.0, 3.0, 4.0]


def test_derive_seed_stable():
    assert derive_seed(7, "synth") == derive_seed(7, "synth")
    assert derive_seed(7, "synth") != derive_seed(7, "cluster")
    assert 0 <= derive_seed(7, "x") < 2**63
