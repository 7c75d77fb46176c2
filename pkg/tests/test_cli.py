import json
import os

import numpy as np
import pandas as pd
import pytest

import Main
from fhash import hash_of_file, hash_of_tree
from numerics import SeededRng
from recording import read_recording, write_recording

SIMULATE = ["simulate", "--subjects", "4", "--duration", "4", "--n-channels", "4"]
TRAIN = ["train", "--epochs", "2", "--batch-size", "4", "--segment-length", "50", "--batches-per-epoch", "1",
         "--hidden-size", "4"]
EVALUATE = ["evaluate", "--segments", "10", "--segment-min", "50", "--segment-max", "200"]


def run(out, *args):
    return Main.main(["--out", str(out), "--seed", "7", "--quiet"] + list(args))


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    out = tmp_path_factory.mktemp("chain")
    assert run(out, *SIMULATE) == 0
    assert run(out, *TRAIN) == 0
    assert run(out, "clean") == 0
    assert run(out, *EVALUATE) == 0
    return out


def test_simulate_writes_every_subject(chain):
    manifest = pd.read_csv(chain / "dataset" / "manifest.csv")
    assert list(manifest["subject_id"]) == ["S01", "S02", "S03", "S04"]
    for subject_id in manifest["subject_id"]:
        for name in ("pure", "eog", "contaminated"):
            assert (chain / "dataset" / subject_id / (name + ".csv")).exists()
    assert (chain / "dataset" / "config.json").exists()


def test_simulate_is_repeatable(tmp_path):
    assert run(tmp_path, *SIMULATE) == 0
    first = hash_of_tree(tmp_path / "dataset")
    assert run(tmp_path, *SIMULATE) == 0
    assert hash_of_tree(tmp_path / "dataset") == first


def test_train_outputs(chain):
    model_dir = chain / "model"
    history = pd.read_csv(model_dir / "history.csv")
    assert 1 <= len(history) <= 2
    summary = json.loads((model_dir / "training.json").read_text())
    assert summary["model_sha256"] == hash_of_file(model_dir / "model.bin")
    assert history["val_loss"].idxmin() + 1 == summary["best_epoch"]

    split = json.loads((model_dir / "split.json").read_text())
    assert sorted(split["train"] + split["validation"] + split["test"]) == ["S01", "S02", "S03", "S04"]
    assert len(split["test"]) == 1
    normalization = json.loads((model_dir / "normalization.json").read_text())
    assert set(normalization) == set(split["train"] + split["validation"])


def test_train_is_repeatable(chain, tmp_path):
    config = json.loads((chain / "model" / "config.json").read_text())
    config.update(out=str(tmp_path), dataset=str(chain / "dataset"))
    (tmp_path / "run.json").write_text(json.dumps(config))
    assert Main.main(["--config", str(tmp_path / "run.json"), "train"]) == 0
    assert hash_of_file(tmp_path / "model" / "model.bin") == hash_of_file(chain / "model" / "model.bin")


def test_clean_outputs(chain):
    split = json.loads((chain / "model" / "split.json").read_text())
    for subject_id in split["test"]:
        subject_dir = chain / "cleaned" / subject_id
        cleaned = read_recording(subject_dir / "cleaned.csv")
        estimate = read_recording(subject_dir / "eog_estimate.csv")
        assert cleaned.n_channels == 4
        assert estimate.labels == ["VEOG", "HEOG"]
        report = json.loads((subject_dir / "removal_report.json").read_text())
        assert report["n_sources"] == 6
        assert len(report["correlations"]) == 2


def test_unreachable_threshold_leaves_the_recording(chain, tmp_path):
    split = json.loads((chain / "model" / "split.json").read_text())
    assert run(tmp_path, "clean", "--dataset", str(chain / "dataset"), "--model", str(chain / "model"),
               "--threshold", "1.01") == 0
    subject_id = split["test"][0]
    report = json.loads((tmp_path / "cleaned" / subject_id / "removal_report.json").read_text())
    assert report["removed_source_ids"] == []
    cleaned = read_recording(tmp_path / "cleaned" / subject_id / "cleaned.csv")
    original = read_recording(chain / "dataset" / subject_id / "contaminated.csv")
    np.testing.assert_allclose(cleaned.data, original.data, atol=1e-6)


def test_single_channel_mode(chain, tmp_path):
    common = ["--dataset", str(chain / "dataset"), "--single-channel", "Fp1"]
    assert run(tmp_path, *TRAIN, *common) == 0
    assert run(tmp_path, "clean", *common) == 0
    split = json.loads((tmp_path / "model" / "split.json").read_text())
    subject_dir = tmp_path / "cleaned" / split["test"][0]
    assert read_recording(subject_dir / "cleaned.csv").labels == ["FP1"]
    assert json.loads((subject_dir / "removal_report.json").read_text())["n_sources"] == 3


def test_clean_one_recording(chain, tmp_path):
    path = chain / "dataset" / "S02" / "contaminated.csv"
    assert run(tmp_path, "clean", "--model", str(chain / "model"), "--recording", str(path)) == 0
    assert read_recording(tmp_path / "cleaned" / "S02" / "cleaned.csv").n_channels == 4


def test_evaluate_outputs(chain):
    evaluation = chain / "evaluation"
    table = pd.read_csv(evaluation / "channel_metrics.csv")
    assert set(table["unit"]) == {"normalized", "physical"}
    for _, group in table.groupby("unit"):
        channels = group[~group["channel"].isin(["mean", "std"])]
        assert len(channels) == 4
        mean_row = group[group["channel"] == "mean"].iloc[0]
        for column in ("mse", "mae", "me"):
            assert mean_row[column] == pytest.approx(channels[column].mean())

    summary = json.loads((evaluation / "summary.json").read_text())
    assert summary["eog"]["segments"]["count"] == 10
    assert {"baseline_normalized", "normalized", "physical"} <= set(summary)
    plots = json.loads((evaluation / "plots.json").read_text())["plots"]
    for plot in plots:
        assert (evaluation / plot["file"]).exists()
    assert (evaluation / "eog_metrics.csv").exists()


def test_evaluating_ground_truth_gives_zero_error(chain, tmp_path):
    write_recording(tmp_path / "cleaned" / "S01" / "cleaned.csv",
                    read_recording(chain / "dataset" / "S01" / "pure.csv"))
    assert run(tmp_path, "evaluate", "--dataset", str(chain / "dataset")) == 0
    table = pd.read_csv(tmp_path / "evaluation" / "channel_metrics.csv")
    assert np.all(table[["mse", "mae", "me"]].to_numpy() == 0.0)


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run(tmp_path, "simulate", "--subjects", "0") == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: ConfigError:")
    assert len(err.splitlines()) == 1
    with pytest.raises(SystemExit) as info:
        Main.main(["simulate", "--subjects", "many"])
    assert info.value.code == 2


def test_runtime_errors_exit_1(tmp_path, capsys):
    assert run(tmp_path, "train") == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_width_mismatch_is_reported(chain, tmp_path, capsys):
    path = chain / "dataset" / "S01" / "contaminated.csv"
    rec = read_recording(path).pick(["FP1", "FP2"])
    write_recording(tmp_path / "two.csv", rec)
    assert run(tmp_path, "clean", "--model", str(chain / "model"), "--recording", str(tmp_path / "two.csv")) == 1
    assert "input width error" in capsys.readouterr().err


def test_global_flags_after_the_command(tmp_path):
    assert Main.main(SIMULATE[:1] + ["--out", str(tmp_path), "--quiet"] + SIMULATE[1:]) == 0
    assert (tmp_path / "dataset" / "manifest.csv").exists()


def test_split_subjects_sizes():
    ids = ["S{:02d}".format(i) for i in range(1, 21)]
    split = Main.split_subjects(ids, 0.3, 0.2, SeededRng(0))
    assert len(split["test"]) == 6 and len(split["validation"]) == 3 and len(split["train"]) == 11
    assert Main.split_subjects(ids, 0.3, 0.2, SeededRng(0)) == split


def test_wrongly_typed_config_value_exits_2(tmp_path, capsys):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"subjects": "5"}))
    assert Main.main(["--config", str(path), "--out", str(tmp_path), "simulate"]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: ConfigError:") and "'subjects'" in err
    assert len(err.splitlines()) == 1


def test_corrupt_split_file_is_one_line(chain, tmp_path, capsys):
    model_dir = tmp_path / "model"
    model_dir.mkdir()
    (model_dir / "model.bin").write_bytes((chain / "model" / "model.bin").read_bytes())
    (model_dir / "split.json").write_text("{\"test\": [")
    assert run(tmp_path, "clean", "--dataset", str(chain / "dataset")) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: JsonFormatError:")
    assert len(err.splitlines()) == 1


def test_unexpected_failures_are_one_line(tmp_path, capsys, monkeypatch):
    def broken(config):
        raise RuntimeError("first line\nsecond line")

    monkeypatch.setitem(Main.COMMANDS, "simulate", broken)
    assert run(tmp_path, "simulate") == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: RuntimeError: first line second line")
    assert len(err.splitlines()) == 1


def test_no_quiet_overrides_the_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"quiet": True}))
    args = Main.build_parser().parse_args(["--config", str(path), "simulate", "--no-quiet"])
    assert Main.resolve_config(args).quiet is False
    args = Main.build_parser().parse_args(["--config", str(path), "simulate"])
    assert Main.resolve_config(args).quiet is True


def test_clean_reports_are_plain_json(chain):
    split = json.loads((chain / "model" / "split.json").read_text())
    report = json.loads((chain / "cleaned" / split["test"][0] / "removal_report.json").read_text())
    assert all(isinstance(flag, bool) for flag in report["converged"])
    assert all(isinstance(count, int) for count in report["iterations"])


def test_summary_carries_reference_figures(chain):
    summary = json.loads((chain / "evaluation" / "summary.json").read_text())
    assert summary["reference"]["eog_mse"]["average"] == {"mean": 0.046, "std": 0.005}
    assert summary["reference"]["cleaned_eeg"]["dln_sae"]["mse"] == 0.08


def test_scaled_overlays(chain):
    split = json.loads((chain / "model" / "split.json").read_text())
    frame = pd.read_csv(chain / "evaluation" / "overlays" / "{}_eeg.csv".format(split["test"][0]))
    scaled = [column for column in frame.columns if column.endswith("_scaled")]
    assert len(scaled) == 4 * 3
    for column in scaled:
        assert frame[column].min() == pytest.approx(0.0)
        assert frame[column].max() == pytest.approx(1.0)


def test_min_max_scale():
    np.testing.assert_allclose(Main.min_max_scale([2.0, 4.0, 3.0]), [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(Main.min_max_scale([5.0, 5.0]), [0.0, 0.0])


def test_signed_coefficients_flag(tmp_path):
    assert run(tmp_path, *SIMULATE, "--signed-coefficients") == 0
    manifest = pd.read_csv(tmp_path / "dataset" / "manifest.csv")
    assert json.loads((tmp_path / "dataset" / "config.json").read_text())["signed_coefficients"] is True
    assert len(manifest) == 4
