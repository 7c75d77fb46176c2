#!/usr/bin/env python
"""EOG remover command line.

    eog-remover.py [--config FILE] [--seed N] [--out DIR] [--quiet] COMMAND [options]

``simulate`` writes a semi-simulated dataset, ``train`` fits the EOG
estimator on a cross-subject split, ``clean`` removes EOG from the held-out
subjects (or from one ``--recording``) and ``evaluate`` scores the cleaned
output against the ground truth. Every stage reads the previous one from the
``--out`` tree unless an explicit path is given.
"""
import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

import datagen
import lstm
from config import CONFIG_FILE_NAME, RunConfig
from errors import ConfigError, DimensionError, EogRemovalError, JsonFormatError, NoDataError
from fhash import hash_of_file
from model_file import load_model, save_model
from numerics import SeededRng, corrcoef
from preprocess import apply_normalization, normalize_channels, normalize_eeg
from recording import EOG_LABELS, Recording, read_recording, write_recording
from removal import MetricsReport, estimate_eog_error, evaluate_channels, remove_eog

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

MODEL_FILE = "model.bin"
HISTORY_FILE = "history.csv"
NORMALIZATION_FILE = "normalization.json"
SPLIT_FILE = "split.json"
TRAINING_SUMMARY_FILE = "training.json"
FLOAT_FORMAT = "%.17g"

# Published figures for the original semi-simulated recordings, kept in summary.json
# next to the measured values for comparison only
REFERENCE_RESULTS = {
    "eog_mse": {
        "VEOG": {"mean": 0.051, "std": 0.011},
        "HEOG": {"mean": 0.040, "std": 0.007},
        "average": {"mean": 0.046, "std": 0.005},
    },
    "cleaned_eeg": {
        "lstm_ica": {"mse": 0.05, "mae": 0.16, "me": 0.02},
        "sae_rls": {"mse": 0.15, "mae": 0.39, "me": 0.0},
        "dln_sae": {"mse": 0.08, "mae": 0.29, "me": 0.01},
    },
}

# Offsets deriving each stage's random stream from the master seed
SPLIT_STREAM = 1
INIT_STREAM = 2
TRAIN_STREAM = 3
ICA_STREAM = 4
SEGMENT_STREAM = 5


def _write_json(path, data) -> str:
    with open(path, "w", newline="\n") as f:
        json.dump(data, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def _read_json(path):
    if not os.path.exists(path):
        raise NoDataError("no data: {} does not exist".format(path))
    with open(path, "r") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise JsonFormatError("{}: not valid JSON ({})".format(path, e)) from e


def _log_written(path):
    logger.info("Wrote %s (sha256 %s)", path, hash_of_file(path))


def _write_frame(path, frame: pd.DataFrame) -> str:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


# ---------------------------------------------------------------------------
def cmd_simulate(config: RunConfig) -> str:
    datasets = datagen.generate_dataset(config.subjects, config.seed, n_ch=config.n_channels,
                                        duration=config.duration, fs=config.fs, workers=config.workers,
                                        signed=config.signed_coefficients)
    directory = config.dataset_dir
    manifest = datagen.write_dataset(directory, datasets)
    config.save(os.path.join(directory, CONFIG_FILE_NAME))
    _log_written(manifest)
    logger.info("Simulated %d subjects into %s", len(datasets), directory)
    return directory


# ---------------------------------------------------------------------------
def split_subjects(subject_ids: Sequence[str], test_fraction: float, validation_fraction: float,
                   rng: SeededRng) -> Dict[str, List[str]]:
    """Random cross-subject split into train, validation and test groups.

    The test group takes ``round(test_fraction·n)`` subjects (at least one);
    validation takes ``validation_fraction`` of the rest. At least one subject
    is always left for training.
    """
    n = len(subject_ids)
    if n < 2:
        raise NoDataError("no data: a cross-subject split needs at least 2 subjects, got {}".format(n))
    order = [subject_ids[i] for i in rng.generator.permutation(n)]
    n_test = min(max(1, int(round(test_fraction * n))), n - 1)
    rest = n - n_test
    n_val = min(int(round(validation_fraction * rest)), rest - 1)
    return {
        "test": sorted(order[:n_test]),
        "validation": sorted(order[n_test:n_test + n_val]),
        "train": sorted(order[n_test + n_val:]),
    }


def _training_pairs(directory, subject_ids, single_channel) -> Tuple[List[lstm.TrainingPair],
                                                                  Dict[str, Dict], List[str]]:
    pairs = []
    normalization = {}
    labels = None
    for subject_id in subject_ids:
        ds = datagen.read_subject(directory, subject_id)
        eeg = ds.contaminated.pick([single_channel]) if single_channel else ds.contaminated
        if labels is None:
            labels = eeg.labels
        elif len(eeg.labels) != len(labels):
            raise DimensionError("channel-count mismatch: subject {} has {} channels, expected {}".format(
                subject_id, eeg.n_channels, len(labels)))
        X_N, Y_N, params = normalize_channels(eeg, ds.eog)
        pairs.append((X_N, Y_N))
        normalization[subject_id] = params.to_dict()
    return pairs, normalization, labels or []


def cmd_train(config: RunConfig) -> str:
    dataset_dir = config.dataset_dir
    manifest = datagen.read_manifest(dataset_dir)
    subject_ids = [str(s) for s in manifest["subject_id"]]
    master = SeededRng(config.seed)
    split = split_subjects(subject_ids, config.test_fraction, config.validation_fraction,
                           master.derive(SPLIT_STREAM))
    logger.info("Split %d subjects: %d train, %d validation, %d test", len(subject_ids), len(split["train"]),
                len(split["validation"]), len(split["test"]))

    train_pairs, normalization, labels = _training_pairs(dataset_dir, split["train"], config.single_channel)
    val_pairs, val_normalization, val_labels = _training_pairs(dataset_dir, split["validation"],
                                                               config.single_channel)
    if val_pairs and len(val_labels) != len(labels):
        raise DimensionError("channel-count mismatch between training and validation subjects")
    normalization.update(val_normalization)

    model = lstm.DeepLstmModel.create(len(labels), master.derive(INIT_STREAM), hidden_size=config.hidden_size,
                                      dropout_rates=config.dropout_rates)
    train_config = lstm.TrainConfig(epochs=config.epochs, batch_size=config.batch_size, patience=config.patience,
                                    validation_fraction=config.validation_fraction,
                                    segment_length=config.segment_length,
                                    batches_per_epoch=config.batches_per_epoch, clip_norm=config.clip_norm,
                                    learning_rate=config.learning_rate, seed=config.seed)
    best, history = lstm.train(model, train_pairs, val_pairs, train_config, master.derive(TRAIN_STREAM))

    directory = config.model_dir
    os.makedirs(directory, exist_ok=True)
    model_path = save_model(os.path.join(directory, MODEL_FILE), best)
    history_path = _write_frame(os.path.join(directory, HISTORY_FILE), history.to_frame())
    _write_json(os.path.join(directory, NORMALIZATION_FILE), normalization)
    split.update({"labels": labels, "single_channel": config.single_channel})
    _write_json(os.path.join(directory, SPLIT_FILE), split)
    best_record = history.records[history.best_epoch - 1]
    _write_json(os.path.join(directory, TRAINING_SUMMARY_FILE), {
        "best_epoch": history.best_epoch,
        "best_val_loss": best_record.val_loss,
        "epochs_run": len(history),
        "initial_train_loss": history.initial_train_loss,
        "model_sha256": hash_of_file(model_path),
        "stopped_early": history.stopped_early,
    })
    config.save(os.path.join(directory, CONFIG_FILE_NAME))
    _log_written(model_path)
    _log_written(history_path)
    return model_path


# ---------------------------------------------------------------------------
def _recordings_to_clean(config: RunConfig, split: Dict) -> List[Tuple[str, Recording]]:
    if config.recording:
        rec = read_recording(config.recording)
        subject_id = rec.subject_id or os.path.splitext(os.path.basename(config.recording))[0]
        return [(subject_id, rec)]
    if not split.get("test"):
        raise NoDataError("no data: no test subjects in the model's split and no --recording given")
    return [(subject_id, read_recording(os.path.join(config.dataset_dir, subject_id, "contaminated.csv")))
            for subject_id in split["test"]]


def clean_recording(model: lstm.DeepLstmModel, rec: Recording, threshold: float, rng: SeededRng,
                    contrast: str = "gauss"):
    """Estimate EOG for ``rec`` and remove it.

    Returns the cleaned recording, the EOG estimate (normalized units), the
    removal outcome and the normalization used.
    """
    if rec.n_channels != model.n_channels:
        raise DimensionError("input width error: model expects {} channels, recording has {}".format(
            model.n_channels, rec.n_channels))
    X_N, params = normalize_eeg(rec)
    Y_hat = lstm.predict_eog(model, X_N)
    outcome = remove_eog(X_N, Y_hat, params, threshold=threshold, rng=rng, fun=contrast)
    estimate = Recording(Y_hat, fs=rec.fs, labels=list(EOG_LABELS)[:Y_hat.shape[0]], subject_id=rec.subject_id,
                         roles=["eog"] * Y_hat.shape[0])
    return rec.with_data(outcome.cleaned), estimate, outcome, params


def cmd_clean(config: RunConfig) -> str:
    model_dir = config.model_dir
    model = load_model(os.path.join(model_dir, MODEL_FILE))
    split_path = os.path.join(model_dir, SPLIT_FILE)
    split = _read_json(split_path) if os.path.exists(split_path) else {}
    single_channel = config.single_channel or split.get("single_channel")

    directory = config.cleaned_dir
    for subject_id, rec in _recordings_to_clean(config, split):
        if single_channel:
            rec = rec.pick([single_channel])
        rec.subject_id = rec.subject_id or subject_id
        cleaned, estimate, outcome, params = clean_recording(
            model, rec, config.threshold, SeededRng(config.seed).derive(ICA_STREAM), config.contrast)

        subject_dir = os.path.join(directory, subject_id)
        cleaned_path = write_recording(os.path.join(subject_dir, "cleaned.csv"), cleaned)
        write_recording(os.path.join(subject_dir, "eog_estimate.csv"), estimate)
        report = outcome.report()
        report.update({"subject_id": subject_id, "labels": rec.labels, "normalization": params.to_dict()})
        _write_json(os.path.join(subject_dir, "removal_report.json"), report)
        _log_written(cleaned_path)
        logger.info("Cleaned %s: removed sources %s of %d", subject_id, list(outcome.removed_source_ids),
                    outcome.n_sources)
    config.save(os.path.join(directory, CONFIG_FILE_NAME))
    return directory


# ---------------------------------------------------------------------------
def _mean_report(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Per-channel metrics averaged over subjects."""
    return MetricsReport(labels=list(reports[0].labels),
                         mse=np.mean([r.mse for r in reports], axis=0),
                         mae=np.mean([r.mae for r in reports], axis=0),
                         me=np.mean([r.me for r in reports], axis=0))


def _unit_table(normalized: MetricsReport, physical: MetricsReport) -> pd.DataFrame:
    frames = []
    for unit, report in (("normalized", normalized), ("physical", physical)):
        frame = report.to_frame()
        frame.insert(0, "unit", unit)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def _summary(report: MetricsReport) -> Dict:
    return {"mean": report.mean, "std": report.std}


def _cleaned_subjects(directory) -> List[str]:
    if not os.path.isdir(directory):
        raise NoDataError("no data: {} does not exist; run clean first".format(directory))
    subjects = sorted(name for name in os.listdir(directory)
                      if os.path.exists(os.path.join(directory, name, "cleaned.csv")))
    if not subjects:
        raise NoDataError("no data: no cleaned recordings under {}".format(directory))
    return subjects


def segment_eog_errors(estimates: Sequence[np.ndarray], truths: Sequence[np.ndarray], count: int, min_len: int,
                       max_len: int, seed: int) -> pd.DataFrame:
    """Per-window VEOG/HEOG MSE over ``count`` random windows spread evenly across the subjects."""
    rows = []
    n = len(estimates)
    for idx, (estimate, truth) in enumerate(zip(estimates, truths)):
        share = count // n + (1 if idx < count % n else 0)
        if share == 0:
            continue
        T = truth.shape[1]
        spec = datagen.SegmentSpec(count=share, min_len=min(min_len, T), max_len=min(max_len, T),
                                   seed=(seed + idx) % 2 ** 64)
        for start, stop in datagen.segment_windows(T, spec):
            mse = np.mean((estimate[:, start:stop] - truth[:, start:stop]) ** 2, axis=1)
            rows.append({"subject_index": idx, "start": start, "stop": stop, "veog_mse": mse[0],
                         "heog_mse": mse[1], "average_mse": float(np.mean(mse))})
    return pd.DataFrame(rows, columns=["subject_index", "start", "stop", "veog_mse", "heog_mse", "average_mse"])


def min_max_scale(x) -> np.ndarray:
    """``x`` mapped linearly onto [0, 1]; a constant signal maps to zeros."""
    x = np.asarray(x, dtype=np.float64)
    span = np.ptp(x)
    return (x - x.min()) / span if span > 0 else np.zeros_like(x)


def _overlay_frames(subject_id, pure: Recording, contaminated: Recording, cleaned: Recording,
                    eog_true: np.ndarray = None, eog_estimate: np.ndarray = None):
    time = np.arange(pure.n_samples) / pure.fs
    eeg = {"time": time}
    # Raw columns first, then each channel scaled to [0, 1] on its own
    series = (("pure", pure), ("contaminated", contaminated), ("cleaned", cleaned))
    for idx, label in enumerate(pure.labels):
        for kind, rec in series:
            eeg["{}_{}".format(label, kind)] = rec.data[idx]
    for idx, label in enumerate(pure.labels):
        for kind, rec in series:
            eeg["{}_{}_scaled".format(label, kind)] = min_max_scale(rec.data[idx])
    frames = {"{}_eeg.csv".format(subject_id): pd.DataFrame(eeg)}
    if eog_true is not None:
        eog = {"time": time}
        for idx, label in enumerate(EOG_LABELS):
            eog[label + "_true"] = eog_true[idx]
            eog[label + "_estimated"] = eog_estimate[idx]
        frames["{}_eog.csv".format(subject_id)] = pd.DataFrame(eog)
    return frames


def _plot_manifest(subject_ids, labels, with_eog) -> Dict:
    plots = []
    for subject_id in subject_ids:
        for label in labels:
            plots.append({"title": "{} {}".format(subject_id, label),
                          "file": "overlays/{}_eeg.csv".format(subject_id), "x": "time",
                          "series": [label + "_pure", label + "_contaminated", label + "_cleaned"],
                          "ylabel": "uV"})
            plots.append({"title": "{} {} (min-max scaled)".format(subject_id, label),
                          "file": "overlays/{}_eeg.csv".format(subject_id), "x": "time",
                          "series": [label + "_pure_scaled", label + "_cleaned_scaled"],
                          "ylabel": "scaled to [0, 1]"})
        if subject_id in with_eog:
            for label in EOG_LABELS:
                plots.append({"title": "{} {} estimate".format(subject_id, label),
                              "file": "overlays/{}_eog.csv".format(subject_id), "x": "time",
                              "series": [label + "_true", label + "_estimated"], "ylabel": "normalized"})
    plots.append({"title": "Per-channel MSE", "file": "channel_metrics.csv", "x": "channel", "kind": "bar",
                  "series": ["mse", "mae", "me"], "filter": {"unit": "normalized"}})
    return {"plots": plots}


def cmd_evaluate(config: RunConfig) -> str:
    cleaned_dir = config.cleaned_dir
    subject_ids = _cleaned_subjects(cleaned_dir)
    directory = config.evaluation_dir
    os.makedirs(os.path.join(directory, "overlays"), exist_ok=True)

    normalized, physical, baseline_normalized, baseline_physical = [], [], [], []
    subject_rows, eog_rows = [], []
    estimates, truths, with_eog = [], [], []
    for subject_id in subject_ids:
        cleaned = read_recording(os.path.join(cleaned_dir, subject_id, "cleaned.csv"))
        subject_data = os.path.join(config.dataset_dir, subject_id)
        pure = read_recording(os.path.join(subject_data, "pure.csv")).pick(cleaned.labels)
        contaminated = read_recording(os.path.join(subject_data, "contaminated.csv")).pick(cleaned.labels)

        _, params = normalize_eeg(contaminated)
        def in_units(rec):
            return rec.with_data(apply_normalization(rec, params.eeg_means, params.eeg_stds))

        reports = (evaluate_channels(in_units(pure), in_units(cleaned)), evaluate_channels(pure, cleaned),
                   evaluate_channels(in_units(pure), in_units(contaminated)), evaluate_channels(pure, contaminated))
        for bucket, report in zip((normalized, physical, baseline_normalized, baseline_physical), reports):
            bucket.append(report)
        subject_rows.append(dict(subject_id=subject_id, **{"normalized_" + k: v for k, v in reports[0].mean.items()},
                                 **{"physical_" + k: v for k, v in reports[1].mean.items()}))

        eog_true = eog_estimate = None
        estimate_path = os.path.join(cleaned_dir, subject_id, "eog_estimate.csv")
        if os.path.exists(estimate_path) and os.path.exists(os.path.join(subject_data, "eog.csv")):
            eog = read_recording(os.path.join(subject_data, "eog.csv"))
            _, eog_true, _ = normalize_channels(contaminated, eog)
            eog_estimate = read_recording(estimate_path).data
            error = estimate_eog_error(eog_estimate, eog_true, labels=eog.labels)
            eog_rows.append(dict(subject_id=subject_id, **{k.lower() + "_mse": v for k, v in error.as_dict().items()},
                                 **{label.lower() + "_corr": corrcoef(eog_estimate[i], eog_true[i])
                                    for i, label in enumerate(eog.labels)}))
            estimates.append(eog_estimate)
            truths.append(eog_true)
            with_eog.append(subject_id)
        else:
            logger.warning("No EOG estimate or ground truth for %s; skipping EOG metrics", subject_id)

        for name, frame in _overlay_frames(subject_id, pure, contaminated, cleaned, eog_true, eog_estimate).items():
            _write_frame(os.path.join(directory, "overlays", name), frame)

    channel_table = _unit_table(_mean_report(normalized), _mean_report(physical))
    baseline_table = _unit_table(_mean_report(baseline_normalized), _mean_report(baseline_physical))
    metrics_path = _write_frame(os.path.join(directory, "channel_metrics.csv"), channel_table)
    _write_frame(os.path.join(directory, "baseline_metrics.csv"), baseline_table)
    _write_frame(os.path.join(directory, "subject_metrics.csv"), pd.DataFrame(subject_rows))

    summary = {
        "subjects": subject_ids,
        "reference": REFERENCE_RESULTS,
        "normalized": _summary(_mean_report(normalized)),
        "physical": _summary(_mean_report(physical)),
        "baseline_normalized": _summary(_mean_report(baseline_normalized)),
        "baseline_physical": _summary(_mean_report(baseline_physical)),
    }
    if eog_rows:
        eog_table = pd.DataFrame(eog_rows)
        _write_frame(os.path.join(directory, "eog_metrics.csv"), eog_table)
        segments = segment_eog_errors(estimates, truths, config.segments, config.segment_min, config.segment_max,
                                      SeededRng(config.seed).derive(SEGMENT_STREAM).seed)
        _write_frame(os.path.join(directory, "eog_segments.csv"), segments)
        summary["eog"] = {
            "subjects": {column: float(eog_table[column].mean()) for column in eog_table.columns
                         if column != "subject_id"},
            "segments": {"count": int(len(segments)),
                         **{column: {"mean": float(segments[column].mean()), "std": float(segments[column].std(ddof=0))}
                            for column in ("veog_mse", "heog_mse", "average_mse")}},
        }
    _write_json(os.path.join(directory, "plots.json"), _plot_manifest(subject_ids, normalized[0].labels, with_eog))
    summary_path = _write_json(os.path.join(directory, "summary.json"), summary)
    config.save(os.path.join(directory, CONFIG_FILE_NAME))
    _log_written(metrics_path)
    _log_written(summary_path)
    logger.info("Normalized cleaned-EEG MSE %.4f (contaminated %.4f) over %d subjects",
                summary["normalized"]["mean"]["mse"], summary["baseline_normalized"]["mean"]["mse"],
                len(subject_ids))
    return directory


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "clean": cmd_clean,
    "evaluate": cmd_evaluate,
}


# ---------------------------------------------------------------------------
def _add_global_flags(parser, default):
    parser.add_argument("--config", default=default, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=default, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", default=default, help="output root directory")
    parser.add_argument("--quiet", action=argparse.BooleanOptionalAction, default=default,
                        help="log warnings and errors only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eog-remover",
                                     description="Remove EOG artifacts from EEG with an LSTM estimator and ICA.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    _add_global_flags(parser, None)
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Global flags are also accepted after the command; SUPPRESS keeps an absent one from masking the other
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, argparse.SUPPRESS)

    simulate = subparsers.add_parser("simulate", parents=[common], help="write a semi-simulated dataset")
    simulate.add_argument("--subjects", type=int)
    simulate.add_argument("--duration", type=float, help="seconds per recording")
    simulate.add_argument("--fs", type=float, help="sampling rate in Hz")
    simulate.add_argument("--n-channels", type=int, dest="n_channels")
    simulate.add_argument("--workers", type=int, help="subject generation threads")
    simulate.add_argument("--signed-coefficients", action=argparse.BooleanOptionalAction, dest="signed_coefficients",
                          help="give each subject's mixing coefficients a random sign")

    train = subparsers.add_parser("train", parents=[common], help="train the EOG estimator")
    train.add_argument("--dataset", help="dataset directory (default: OUT/dataset)")
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", type=int, dest="batch_size")
    train.add_argument("--patience", type=int)
    train.add_argument("--test-fraction", type=float, dest="test_fraction")
    train.add_argument("--validation-fraction", type=float, dest="validation_fraction")
    train.add_argument("--segment-length", type=int, dest="segment_length")
    train.add_argument("--batches-per-epoch", type=int, dest="batches_per_epoch")
    train.add_argument("--learning-rate", type=float, dest="learning_rate")
    train.add_argument("--clip-norm", type=float, dest="clip_norm")
    train.add_argument("--hidden-size", type=int, dest="hidden_size")
    train.add_argument("--single-channel", dest="single_channel", metavar="LABEL")

    clean = subparsers.add_parser("clean", parents=[common], help="remove EOG from recordings")
    clean.add_argument("--dataset", help="dataset directory (default: OUT/dataset)")
    clean.add_argument("--model", help="trained model directory (default: OUT/model)")
    clean.add_argument("--recording", help="clean this CSV recording instead of the test subjects")
    clean.add_argument("--threshold", type=float, help="|corr| at which a source is removed")
    clean.add_argument("--contrast", choices=["gauss", "logcosh", "cube"])
    clean.add_argument("--single-channel", dest="single_channel", metavar="LABEL")

    evaluate = subparsers.add_parser("evaluate", parents=[common], help="score cleaned recordings")
    evaluate.add_argument("--dataset", help="dataset directory (default: OUT/dataset)")
    evaluate.add_argument("--cleaned", help="cleaned output directory (default: OUT/cleaned)")
    evaluate.add_argument("--segments", type=int)
    evaluate.add_argument("--segment-min", type=int, dest="segment_min")
    evaluate.add_argument("--segment-max", type=int, dest="segment_max")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then every flag given on the command line."""
    config = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {key: value for key, value in vars(args).items() if key not in ("command", "config")}
    return config.merged(**overrides)


def _error_line(e: BaseException) -> str:
    """`error: <Class>: <message>` on one line."""
    return "error: {}: {}".format(type(e).__name__, " ".join(str(e).split()))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")

    try:
        config = resolve_config(args).validate(args.command)
        logging.getLogger().setLevel(logging.WARNING if config.quiet else logging.INFO)
        COMMANDS[args.command](config)
    except ConfigError as e:
        print(_error_line(e), file=sys.stderr)
        return 2
    except (EogRemovalError, OSError) as e:
        print(_error_line(e), file=sys.stderr)
        return 1
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        print(_error_line(e), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    __name__ = 'Main'
    sys.exit(main())
