"""EOG removal by correlation-gated ICA back-projection, and the evaluation metrics."""
from dataclasses import dataclass, field
import logging
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import DimensionError, InsufficientSamplesError, LengthMismatchError, ZeroVarianceError
from ica import IcaResult, WhiteningTransform, center_whiten, fast_ica
from numerics import SeededRng, as_matrix, corrcoef
from preprocess import NormalizationParams, denormalize
from recording import Recording

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.8


@dataclass
class RemovalOutcome:
    """Result of :func:`remove_eog`.

    ``cleaned`` is in original EEG units. Source ids are 0-based row indices
    into ``sources``; ``correlations[e, k]`` is |corr(Ŷ_e, S_k)|.
    """
    cleaned: np.ndarray
    removed_source_ids: Tuple[int, ...]
    correlations: np.ndarray
    sources: np.ndarray
    threshold: float
    ica: IcaResult = field(repr=False)
    whitening: WhiteningTransform = field(repr=False)

    @property
    def n_sources(self) -> int:
        return self.sources.shape[0]

    def report(self) -> Dict:
        """Plain-Python summary, ready for ``json.dump``."""
        return {
            "threshold": float(self.threshold),
            "n_sources": int(self.n_sources),
            "removed_source_ids": [int(k) for k in self.removed_source_ids],
            "correlations": self.correlations.tolist(),
            "iterations": [int(n) for n in self.ica.iterations],
            "converged": [bool(flag) for flag in self.ica.converged],
            "contrast": str(self.ica.fun),
        }


def remove_eog(X_N, Y_hat, params: NormalizationParams, threshold: float = DEFAULT_THRESHOLD,
               rng: SeededRng = None, fun: str = "gauss") -> RemovalOutcome:
    """Clean normalized EEG ``X_N`` (``N_c x T``) using estimated EOG ``Y_hat`` (``N_E x T``).

    The EEG and EOG rows are stacked and decomposed with FastICA into as many
    sources as rows. Every source whose absolute correlation with any EOG row
    reaches ``threshold`` has its mixing column zeroed; the remainder is
    projected back, de-whitened, cut to the EEG rows and returned in the
    original units given by ``params``.
    """
    X_N = as_matrix(X_N, "X_N")
    Y_hat = as_matrix(Y_hat, "Y_hat")
    n_eeg, n_samples = X_N.shape
    if Y_hat.shape[1] != n_samples:
        raise DimensionError("dimension error: EEG has {} samples, EOG estimate has {}".format(
            n_samples, Y_hat.shape[1]))
    if n_samples < 2:
        raise InsufficientSamplesError("insufficient samples: removal needs T >= 2, got {}".format(n_samples))
    if params.n_eeg < n_eeg:
        raise DimensionError("dimension error: normalization covers {} EEG channels, input has {}".format(
            params.n_eeg, n_eeg))
    for e, row in enumerate(Y_hat):
        if np.ptp(row) == 0:
            raise ZeroVarianceError("zero variance: estimated EOG row {} is constant".format(e))
    if rng is None:
        rng = SeededRng(0)

    Z = np.vstack([X_N, Y_hat])
    Z_white, whitening = center_whiten(Z)
    result = fast_ica(Z_white, Z.shape[0], rng, fun=fun)

    correlations = np.array([[abs(corrcoef(eog, source)) for source in result.S] for eog in Y_hat])
    removed = tuple(int(k) for k in np.flatnonzero(correlations.max(axis=0) >= threshold))

    A = result.mixing
    A[:, list(removed)] = 0.0
    Z_rec = whitening.invert(A @ result.S)
    cleaned = denormalize(Z_rec[:n_eeg], params.eeg_means[:n_eeg], params.eeg_stds[:n_eeg])

    if removed:
        logger.info("Removed %d of %d sources %s (max |corr| %s)", len(removed), Z.shape[0], list(removed),
                    np.round(correlations.max(axis=0)[list(removed)], 3).tolist())
    else:
        logger.warning("No source reached |corr| >= %.2f; output equals the input", threshold)
    return RemovalOutcome(cleaned=cleaned, removed_source_ids=removed, correlations=correlations,
                          sources=result.S, threshold=threshold, ica=result, whitening=whitening)


def compute_metrics(y, y_hat) -> Tuple[float, float, float]:
    """(MSE, MAE, ME) of the error y - ŷ. ME keeps its sign."""
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise LengthMismatchError("length mismatch: {} vs {}".format(y.size, y_hat.size))
    if y.size < 1:
        raise InsufficientSamplesError("insufficient samples: metrics need at least one sample")
    err = y - y_hat
    return float(np.mean(err ** 2)), float(np.mean(np.abs(err))), float(np.mean(err))


@dataclass
class MetricsReport:
    labels: List[str]
    mse: np.ndarray
    mae: np.ndarray
    me: np.ndarray

    @property
    def mean(self) -> Dict[str, float]:
        return {name: float(np.mean(getattr(self, name))) for name in ("mse", "mae", "me")}

    @property
    def std(self) -> Dict[str, float]:
        return {name: float(np.std(getattr(self, name))) for name in ("mse", "mae", "me")}

    def to_frame(self) -> pd.DataFrame:
        """One row per channel, followed by ``mean`` and ``std`` rows."""
        frame = pd.DataFrame({"channel": self.labels, "mse": self.mse, "mae": self.mae, "me": self.me})
        summary = pd.DataFrame([dict(channel="mean", **self.mean), dict(channel="std", **self.std)])
        return pd.concat([frame, summary], ignore_index=True)


def evaluate_channels(X_pure: Union[Recording, np.ndarray], X_r: Union[Recording, np.ndarray]) -> MetricsReport:
    """Per-channel MSE/MAE/ME between ground-truth and cleaned EEG."""
    if isinstance(X_pure, Recording) and isinstance(X_r, Recording):
        if [l.lower() for l in X_pure.labels] != [l.lower() for l in X_r.labels]:
            raise DimensionError("dimension error: channel labels differ: {} vs {}".format(X_pure.labels,
                                                                                        X_r.labels))
    labels = X_pure.labels if isinstance(X_pure, Recording) else None
    pure = X_pure.data if isinstance(X_pure, Recording) else as_matrix(X_pure, "X_pure")
    cleaned = X_r.data if isinstance(X_r, Recording) else as_matrix(X_r, "X_r")
    if pure.shape != cleaned.shape:
        raise DimensionError("dimension error: pure {} vs cleaned {}".format(pure.shape, cleaned.shape))
    if labels is None:
        labels = ["ch{}".format(i + 1) for i in range(pure.shape[0])]
    rows = np.array([compute_metrics(p, c) for p, c in zip(pure, cleaned)])
    return MetricsReport(labels=list(labels), mse=rows[:, 0], mae=rows[:, 1], me=rows[:, 2])


@dataclass
class EogErrorReport:
    labels: List[str]
    mse: np.ndarray

    @property
    def average(self) -> float:
        return float(np.mean(self.mse))

    def as_dict(self) -> Dict[str, float]:
        out = {label: float(value) for label, value in zip(self.labels, self.mse)}
        out["average"] = self.average
        return out


def estimate_eog_error(Y_hat, Y_true, labels: Sequence[str] = ("VEOG", "HEOG")) -> EogErrorReport:
    """MSE of each estimated EOG row against the truth, plus their average."""
    Y_hat = as_matrix(Y_hat, "Y_hat")
    Y_true = as_matrix(Y_true, "Y_true")
    if Y_hat.shape != Y_true.shape:
        raise DimensionError("dimension error: estimate {} vs truth {}".format(Y_hat.shape, Y_true.shape))
    if len(labels) != Y_hat.shape[0]:
        labels = ["eog{}".format(i + 1) for i in range(Y_hat.shape[0])]
    return EogErrorReport(labels=list(labels), mse=np.mean((Y_hat - Y_true) ** 2, axis=1))
