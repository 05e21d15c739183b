import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

FIXTURE = Path(__file__).parent / "fixtures" / "tweets_120.tsv"
REPORT_KEYS = {"n", "mae", "rmae", "mbe", "rmbe", "rmse", "rrmse", "r2", "warnings"}


def run_cli(args, env_extra=None):
    env = os.environ.copy()
    env.pop("RETWEET_REG_OUT", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "retweet_reg.cli", *map(str, args)],
        capture_output=True,
        text=True,
        env=env,
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Prepared artifacts plus a short CNN combined training run."""
    out = tmp_path_factory.mktemp("cli_out")
    r = run_cli(["prepare", "--data", FIXTURE, "--out", out, "--seed", "7"])
    assert r.returncode == 0, r.stderr
    r = run_cli(
        ["train", "--data", FIXTURE, "--out", out, "--seed", "7", "--epochs", "4"]
    )
    assert r.returncode == 0, r.stderr
    return out


@pytest.fixture(scope="module")
def rnn_workdir(tmp_path_factory):
    """All three RNN modes trained briefly, for the multi-series plot."""
    out = tmp_path_factory.mktemp("cli_rnn")
    r = run_cli(["prepare", "--data", FIXTURE, "--out", out, "--seed", "7"])
    assert r.returncode == 0, r.stderr
    for mode in ("numeric_only", "text_only", "combined"):
        r = run_cli(
            [
                "train", "--data", FIXTURE, "--out", out, "--seed", "7",
                "--arch", "rnn", "--mode", mode, "--epochs", "2",
            ]
        )
        assert r.returncode == 0, r.stderr
    return out


# --- exit codes ---


def test_no_command_is_usage_error():
    assert run_cli([]).returncode == 1


def test_bad_mode_is_usage_error():
    assert run_cli(["train", "--mode", "bogus"]).returncode == 1


def test_unknown_flag_is_usage_error():
    assert run_cli(["prepare", "--frobnicate"]).returncode == 1


def test_bad_split_is_usage_error():
    assert run_cli(["evaluate", "--split", "weird"]).returncode == 1


def test_prepare_without_data_is_usage_error():
    r = run_cli(["prepare"])
    assert r.returncode == 1


def test_missing_data_file_is_data_error(tmp_path):
    r = run_cli(["prepare", "--data", tmp_path / "nope.tsv", "--out", tmp_path])
    assert r.returncode == 2


def test_train_without_prepare_is_data_error(tmp_path):
    r = run_cli(["train", "--data", FIXTURE, "--out", tmp_path / "empty"])
    assert r.returncode == 2
    assert "prepare" in r.stderr


def test_config_file_unknown_key_is_usage_error(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"frobnicate": 1}))
    assert run_cli(["prepare", "--config", cfg]).returncode == 1


# --- config plumbing ---


def test_config_file_drives_prepare(tmp_path):
    out = tmp_path / "from_config"
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"data": str(FIXTURE), "out": str(out), "seed": 7}))
    r = run_cli(["prepare", "--config", cfg])
    assert r.returncode == 0
    assert (out / "vocab.json").exists()


def test_env_var_overrides_out_dir(tmp_path):
    flag_dir = tmp_path / "flag"
    env_dir = tmp_path / "env"
    r = run_cli(
        ["prepare", "--data", FIXTURE, "--out", flag_dir],
        env_extra={"RETWEET_REG_OUT": str(env_dir)},
    )
    assert r.returncode == 0
    assert (env_dir / "vocab.json").exists()
    assert not flag_dir.exists()


# --- prepare ---


def test_prepare_summary_and_artifacts(workdir):
    r = run_cli(["prepare", "--data", FIXTURE, "--out", workdir, "--seed", "7"])
    assert r.returncode == 0
    assert "records: 120 valid, 0 dropped" in r.stdout
    assert "splits: 80 train / 20 validation / 20 test" in r.stdout
    assert "vocabulary:" in r.stdout
    for name in ("vocab.json", "scaler.json", "splits.json"):
        assert (workdir / name).exists()


def test_prepare_reports_dropped_lines(tmp_path):
    bad = tmp_path / "with_bad_line.tsv"
    bad.write_text(FIXTURE.read_text() + "not\tenough\tfields\n", encoding="utf-8")
    r = run_cli(["prepare", "--data", bad, "--out", tmp_path / "out"])
    assert r.returncode == 0
    assert "records: 120 valid, 1 dropped" in r.stdout


def test_prepare_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        r = run_cli(["prepare", "--data", FIXTURE, "--out", out, "--seed", "7"])
        assert r.returncode == 0
    for name in ("vocab.json", "scaler.json", "splits.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


# --- train ---


def test_train_outputs(workdir):
    ckpt = workdir / "checkpoint_cnn_combined.json"
    log = workdir / "training_log_cnn_combined.jsonl"
    assert ckpt.exists() and log.exists()
    payload = json.loads(ckpt.read_text())
    assert payload["config"]["arch"] == "cnn"
    assert payload["config"]["mode"] == "combined"
    names = {p["name"] for p in payload["params"]}
    assert any(n.startswith("text.") for n in names)
    assert any(n.startswith("numeric.") for n in names)
    entries = [json.loads(line) for line in log.read_text().splitlines()]
    assert [e["epoch"] for e in entries] == [1, 2, 3, 4]
    assert all(set(e) == {"epoch", "train_loss", "validation"} for e in entries)


# --- evaluate ---


def test_evaluate_writes_and_prints_report(workdir):
    r = run_cli(["evaluate", "--data", FIXTURE, "--out", workdir, "--seed", "7"])
    assert r.returncode == 0
    report = json.loads(r.stdout)
    assert set(report) == REPORT_KEYS
    assert report["n"] == 20
    path = workdir / "report_cnn_combined_test.json"
    assert path.exists()
    assert json.loads(path.read_text()) == report


def test_evaluate_named_split(workdir):
    r = run_cli(
        ["evaluate", "--data", FIXTURE, "--out", workdir, "--seed", "7",
         "--split", "validation"]
    )
    assert r.returncode == 0
    assert json.loads(r.stdout)["n"] == 20
    assert (workdir / "report_cnn_combined_validation.json").exists()


def test_evaluate_is_deterministic(workdir):
    runs = [
        run_cli(["evaluate", "--data", FIXTURE, "--out", workdir, "--seed", "7"])
        for _ in range(2)
    ]
    assert runs[0].stdout == runs[1].stdout


def test_evaluate_vocab_mismatch_is_data_error(workdir, tmp_path):
    # a checkpoint that is internally consistent but sized for a different
    # vocabulary than the prepared artifacts
    ckpt = json.loads((workdir / "checkpoint_cnn_combined.json").read_text())
    ckpt["config"]["vocab_size"] += 1
    for param in ckpt["params"]:
        if param["name"] == "text.embed.table":
            param["shape"][0] += 1
            param["data"].extend([0.0] * param["shape"][1])
    bad = tmp_path / "bad_ckpt.json"
    bad.write_text(json.dumps(ckpt))
    r = run_cli(
        ["evaluate", "--data", FIXTURE, "--out", workdir, "--seed", "7",
         "--checkpoint", bad]
    )
    assert r.returncode == 2
    assert "vocab" in r.stderr.lower()


# --- predict ---


def test_predict_row_per_input_in_order(workdir):
    r = run_cli(["predict", "--data", FIXTURE, "--out", workdir, "--seed", "7"])
    assert r.returncode == 0
    assert "wrote 120 predictions (2 null)" in r.stdout
    lines = (workdir / "predictions.tsv").read_text().splitlines()
    assert len(lines) == 120
    input_ids = [line.split("\t")[0] for line in FIXTURE.read_text().splitlines()]
    assert [line.split("\t")[0] for line in lines] == input_ids
    nulls = [i for i, line in enumerate(lines) if line.split("\t")[1] == "null"]
    assert len(nulls) == 2
    for i, line in enumerate(lines):
        if i not in nulls:
            float(line.split("\t")[1])  # parses as a finite real
    # one stderr warning per null row, naming the records
    assert r.stderr.count("prediction marked null") == 2
    assert f"record {nulls[0] + 1}" in r.stderr


def test_predict_deterministic(workdir):
    runs = [
        run_cli(["predict", "--data", FIXTURE, "--out", workdir, "--seed", "7"])
        for _ in range(2)
    ]
    assert runs[0].returncode == runs[1].returncode == 0
    content = (workdir / "predictions.tsv").read_bytes()
    run_cli(["predict", "--data", FIXTURE, "--out", workdir, "--seed", "7"])
    assert (workdir / "predictions.tsv").read_bytes() == content


def test_predict_accepts_missing_labels(workdir, tmp_path):
    rows = FIXTURE.read_text().splitlines()[:3]
    unlabeled = []
    for row in rows:
        fields = row.split("\t")
        fields[11] = "null;"  # retweets column
        unlabeled.append("\t".join(fields))
    path = tmp_path / "unlabeled.tsv"
    path.write_text("\n".join(unlabeled) + "\n", encoding="utf-8")
    r = run_cli(
        ["predict", "--data", FIXTURE, "--out", workdir, "--seed", "7",
         "--input", path]
    )
    assert r.returncode == 0
    assert "wrote 3 predictions" in r.stdout


def test_predict_numeric_only_never_needs_text(rnn_workdir):
    r = run_cli(
        ["predict", "--data", FIXTURE, "--out", rnn_workdir, "--seed", "7",
         "--arch", "rnn", "--mode", "numeric_only"]
    )
    assert r.returncode == 0
    assert "(0 null)" in r.stdout


# --- gradcheck ---


def test_gradcheck_cli_passes(workdir):
    r = run_cli(["gradcheck", "--out", workdir])
    assert r.returncode == 0
    assert "gradcheck: pass" in r.stdout
    conv_lines = [l for l in r.stdout.splitlines() if l.startswith("layer") and "conv1d" in l]
    assert len(conv_lines) == 1
    assert float(conv_lines[0].split()[-1]) < 1e-5
    assert len([l for l in r.stdout.splitlines() if l.startswith("end-to-end")]) == 6


# --- plot ---


def test_plot_single_mode(workdir):
    r = run_cli(
        ["plot", "--data", FIXTURE, "--out", workdir, "--seed", "7", "--n", "15"]
    )
    assert r.returncode == 0
    lines = (workdir / "plot.csv").read_text().splitlines()
    assert lines[0] == "index,actual,predicted_combined"
    assert len(lines) == 16
    svg = (workdir / "plot.svg").read_text()
    assert svg.count("<circle") == 15 * 2  # one point per row per series


def test_plot_same_seed_same_sample(workdir):
    run_cli(["plot", "--data", FIXTURE, "--out", workdir, "--seed", "7", "--n", "10"])
    first = (workdir / "plot.csv").read_bytes()
    run_cli(["plot", "--data", FIXTURE, "--out", workdir, "--seed", "7", "--n", "10"])
    assert (workdir / "plot.csv").read_bytes() == first


def test_plot_clamps_oversized_n(workdir):
    r = run_cli(
        ["plot", "--data", FIXTURE, "--out", workdir, "--seed", "7", "--n", "999"]
    )
    assert r.returncode == 0
    assert "clamping" in r.stderr
    lines = (workdir / "plot.csv").read_text().splitlines()
    assert len(lines) == 21  # header + full 20-row test split


def test_plot_rejects_nonpositive_n(workdir):
    r = run_cli(
        ["plot", "--data", FIXTURE, "--out", workdir, "--seed", "7", "--n", "0"]
    )
    assert r.returncode == 1


def test_plot_all_three_modes(rnn_workdir):
    checkpoints = [
        rnn_workdir / f"checkpoint_rnn_{mode}.json"
        for mode in ("combined", "numeric_only", "text_only")
    ]
    args = ["plot", "--data", FIXTURE, "--out", rnn_workdir, "--seed", "7", "--n", "12"]
    for ckpt in checkpoints:
        args += ["--checkpoint", ckpt]
    r = run_cli(args)
    assert r.returncode == 0, r.stderr
    lines = (rnn_workdir / "plot.csv").read_text().splitlines()
    assert lines[0] == "index,actual,predicted_numeric,predicted_text,predicted_combined"
    assert len(lines) == 13
    svg = (rnn_workdir / "plot.svg").read_text()
    assert svg.count("<circle") == 12 * 4


def test_plot_rejects_duplicate_modes(rnn_workdir):
    ckpt = rnn_workdir / "checkpoint_rnn_combined.json"
    r = run_cli(
        ["plot", "--data", FIXTURE, "--out", rnn_workdir, "--seed", "7",
         "--checkpoint", ckpt, "--checkpoint", ckpt]
    )
    assert r.returncode == 1
