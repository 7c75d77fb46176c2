import json

import numpy as np
import pytest

from errors import DimensionError, ZeroVarianceError
from numerics import SeededRng
from preprocess import apply_normalization, denormalize, normalize_channels, normalize_eeg
from removal import compute_metrics, estimate_eog_error, evaluate_channels, remove_eog


def random_case(seed, n_ch=5, T=1000):
    gen = np.random.default_rng(seed)
    X = gen.laplace(size=(n_ch, T)) * gen.uniform(1, 50, size=(n_ch, 1)) + gen.uniform(-10, 10, size=(n_ch, 1))
    Y_hat = gen.laplace(size=(2, T))
    return X, Y_hat


@pytest.mark.parametrize("seed", range(10))
def test_unreachable_threshold_returns_the_input(seed):
    X, Y_hat = random_case(seed)
    X_N, params = normalize_eeg(X)
    outcome = remove_eog(X_N, Y_hat, params, threshold=1.01, rng=SeededRng(seed))
    assert outcome.removed_source_ids == ()
    assert np.abs(outcome.cleaned - denormalize(X_N, params.eeg_means, params.eeg_stds)).max() < 1e-6


def test_zero_threshold_removes_everything():
    X, Y_hat = random_case(3)
    X_N, params = normalize_eeg(X)
    outcome = remove_eog(X_N, Y_hat, params, threshold=0.0)
    assert outcome.removed_source_ids == tuple(range(7))
    np.testing.assert_allclose(outcome.cleaned, np.repeat(X.mean(axis=1, keepdims=True), X.shape[1], axis=1),
                               atol=1e-8)


def test_report_shapes():
    X, Y_hat = random_case(4)
    X_N, params = normalize_eeg(X)
    outcome = remove_eog(X_N, Y_hat, params)
    assert outcome.correlations.shape == (2, 7)
    assert outcome.n_sources == 7
    report = outcome.report()
    assert report["threshold"] == 0.8
    assert len(report["iterations"]) == 7


def test_eog_source_is_removed_with_ground_truth(short_subject):
    X_N, Y_N, params = normalize_channels(short_subject.contaminated, short_subject.eog)
    outcome = remove_eog(X_N, Y_N, params, rng=SeededRng(0))
    assert len(outcome.removed_source_ids) >= 1
    assert np.all(outcome.correlations.max(axis=0)[list(outcome.removed_source_ids)] >= 0.8)


def test_oracle_removal_beats_contamination(default_subject):
    ds = default_subject
    X_N, Y_N, params = normalize_channels(ds.contaminated, ds.eog)
    outcome = remove_eog(X_N, Y_N, params, rng=SeededRng(0))
    cleaned = evaluate_channels(ds.pure, ds.contaminated.with_data(outcome.cleaned))
    contaminated = evaluate_channels(ds.pure, ds.contaminated)
    assert len(cleaned.labels) == 19
    assert np.all(cleaned.mse < 0.5 * contaminated.mse)


def test_removal_errors():
    X, Y_hat = random_case(0)
    X_N, params = normalize_eeg(X)
    with pytest.raises(ZeroVarianceError):
        remove_eog(X_N, np.vstack([Y_hat[0], np.ones(X.shape[1])]), params)
    with pytest.raises(DimensionError):
        remove_eog(X_N, Y_hat[:, :-1], params)
    with pytest.raises(DimensionError):
        remove_eog(np.vstack([X_N, X_N[:1]]), Y_hat, params)


def test_metrics_of_a_constant_offset():
    gen = np.random.default_rng(0)
    for _ in range(20):
        y = gen.standard_normal(50)
        c = gen.uniform(-3, 3)
        mse, mae, me = compute_metrics(y, y + c)
        assert mse == pytest.approx(c * c)
        assert mae == pytest.approx(abs(c))
        assert me == pytest.approx(-c)


def test_metrics_of_identical_signals_are_zero(short_subject):
    report = evaluate_channels(short_subject.pure, short_subject.pure)
    assert np.all(report.mse == 0) and np.all(report.mae == 0) and np.all(report.me == 0)


def test_metrics_table_aggregates(short_subject):
    report = evaluate_channels(short_subject.pure, short_subject.contaminated)
    frame = report.to_frame()
    assert list(frame["channel"]) == short_subject.pure.labels + ["mean", "std"]
    channel_rows = frame.iloc[:-2]
    for column in ("mse", "mae", "me"):
        assert frame.iloc[-2][column] == pytest.approx(channel_rows[column].mean())
        assert frame.iloc[-1][column] == pytest.approx(channel_rows[column].std(ddof=0))


def test_metrics_reject_mismatched_channels(short_subject):
    with pytest.raises(DimensionError):
        evaluate_channels(short_subject.pure, short_subject.pure.pick(short_subject.pure.labels[:2]))


def test_eog_error_report():
    Y = np.vstack([np.zeros(10), np.ones(10)])
    report = estimate_eog_error(Y + np.vstack([np.full(10, 0.1), np.full(10, 0.3)]), Y)
    assert report.as_dict() == pytest.approx({"VEOG": 0.01, "HEOG": 0.09, "average": 0.05})


def test_report_is_plain_json():
    X, Y_hat = random_case(5)
    X_N, params = normalize_eeg(X)
    report = remove_eog(X_N, Y_hat, params, threshold=0.1).report()
    assert json.loads(json.dumps(report)) == report
    assert all(type(flag) is bool for flag in report["converged"])
    assert all(type(count) is int for count in report["iterations"])
    assert all(type(k) is int for k in report["removed_source_ids"])


@pytest.mark.parametrize("seed", range(3))
def test_removed_ids_are_exactly_the_sources_over_threshold(seed):
    X, Y_hat = random_case(seed)
    X_N, params = normalize_eeg(X)
    for threshold in (0.05, 0.1, 0.3):
        outcome = remove_eog(X_N, Y_hat, params, threshold=threshold, rng=SeededRng(seed))
        peak = outcome.correlations.max(axis=0)
        assert set(outcome.removed_source_ids) == {k for k in range(outcome.n_sources) if peak[k] >= threshold}


def test_removal_set_shrinks_as_the_threshold_rises(short_subject):
    X_N, Y_N, params = normalize_channels(short_subject.contaminated, short_subject.eog)
    previous = None
    for threshold in (0.0, 0.2, 0.4, 0.6, 0.8, 1.01):
        removed = set(remove_eog(X_N, Y_N, params, threshold=threshold, rng=SeededRng(2)).removed_source_ids)
        if previous is not None:
            assert removed <= previous
        previous = removed
    assert previous == set()


def test_ground_truth_eog_is_separable(default_subject):
    ds = default_subject
    X_N, Y_N, params = normalize_channels(ds.contaminated, ds.eog)
    outcome = remove_eog(X_N, Y_N, params, rng=SeededRng(0))
    # each EOG row has its own source over the threshold
    assert np.all(outcome.correlations.max(axis=1) >= 0.8)
    assert len(outcome.removed_source_ids) >= 2

    _, eeg_params = normalize_eeg(ds.contaminated)
    pure_n = apply_normalization(ds.pure, eeg_params.eeg_means, eeg_params.eeg_stds)
    cleaned_n = apply_normalization(outcome.cleaned, eeg_params.eeg_means, eeg_params.eeg_stds)
    cleaned_mse = np.mean((cleaned_n - pure_n) ** 2)
    pure_variance = np.mean(pure_n.var(axis=1))
    assert cleaned_mse < 0.5 * pure_variance
    # dropping every source leaves only the row means
    emptied = remove_eog(X_N, Y_N, params, threshold=0.0, rng=SeededRng(0)).cleaned
    emptied_mse = np.mean((apply_normalization(emptied, eeg_params.eeg_means, eeg_params.eeg_stds) - pure_n) ** 2)
    assert cleaned_mse < emptied_mse
