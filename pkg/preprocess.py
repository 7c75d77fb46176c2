"""Channel-wise standardization of EEG/EOG recordings and its inverse."""
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from errors import DimensionError, InsufficientSamplesError, InvalidStdError, ZeroVarianceError
from numerics import as_matrix
from recording import Recording

ArrayOrRecording = Union[np.ndarray, Recording]


@dataclass
class NormalizationParams:
    """Per-channel means and standard deviations, all EEG channels first, then all EOG channels."""
    means: np.ndarray
    stds: np.ndarray
    n_eeg: int

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64).ravel()
        self.stds = np.asarray(self.stds, dtype=np.float64).ravel()
        if self.means.shape != self.stds.shape:
            raise DimensionError("dimension error: {} means vs {} stds".format(self.means.size, self.stds.size))
        if not 0 <= self.n_eeg <= self.means.size:
            raise DimensionError("n_eeg={} outside 0..{}".format(self.n_eeg, self.means.size))
        if np.any(self.stds <= 0):
            raise InvalidStdError("invalid std: all standard deviations must be positive")

    @property
    def n_eog(self) -> int:
        return self.means.size - self.n_eeg

    @property
    def eeg_means(self) -> np.ndarray:
        return self.means[:self.n_eeg]

    @property
    def eeg_stds(self) -> np.ndarray:
        return self.stds[:self.n_eeg]

    @property
    def eog_means(self) -> np.ndarray:
        return self.means[self.n_eeg:]

    @property
    def eog_stds(self) -> np.ndarray:
        return self.stds[self.n_eeg:]

    def to_dict(self) -> Dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist(), "n_eeg": self.n_eeg}

    @classmethod
    def from_dict(cls, data: Dict) -> 'NormalizationParams':
        return cls(means=data["means"], stds=data["stds"], n_eeg=int(data["n_eeg"]))


def _data_of(x: ArrayOrRecording, name: str) -> np.ndarray:
    if isinstance(x, Recording):
        return x.data
    return as_matrix(x, name)


def _moments(X: np.ndarray, first_index: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    if X.shape[1] < 2:
        raise InsufficientSamplesError("insufficient samples: normalization needs T >= 2, got {}".format(X.shape[1]))
    means = X.mean(axis=1)
    stds = X.std(axis=1)
    for i, (row, std) in enumerate(zip(X, stds)):
        if std == 0 or np.ptp(row) == 0:
            raise ZeroVarianceError("zero-variance channel {}".format(first_index + i))
    return means, stds


def normalize_channels(X: ArrayOrRecording, Y: ArrayOrRecording) -> Tuple[np.ndarray, np.ndarray,
                                                                            NormalizationParams]:
    """Standardize every EEG row of ``X`` and EOG row of ``Y`` to zero mean, unit variance.

    Statistics use the population divisor T and are taken over the full
    recording. Returns ``(X_N, Y_N, params)``.
    """
    X = _data_of(X, "X")
    Y = _data_of(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionError("dimension error: EEG has {} samples, EOG has {}".format(X.shape[1], Y.shape[1]))
    x_means, x_stds = _moments(X)
    y_means, y_stds = _moments(Y, first_index=X.shape[0])
    params = NormalizationParams(means=np.concatenate([x_means, y_means]),
                                 stds=np.concatenate([x_stds, y_stds]),
                                 n_eeg=X.shape[0])
    X_N = (X - x_means[:, np.newaxis]) / x_stds[:, np.newaxis]
    Y_N = (Y - y_means[:, np.newaxis]) / y_stds[:, np.newaxis]
    return X_N, Y_N, params


def normalize_eeg(X: ArrayOrRecording) -> Tuple[np.ndarray, NormalizationParams]:
    """Standardize EEG alone, for recordings without EOG ground truth."""
    X = _data_of(X, "X")
    means, stds = _moments(X)
    return (X - means[:, np.newaxis]) / stds[:, np.newaxis], NormalizationParams(means, stds, n_eeg=X.shape[0])


def apply_normalization(X: ArrayOrRecording, means, stds) -> np.ndarray:
    """Standardize ``X`` with previously computed statistics."""
    X = _data_of(X, "X")
    means, stds = _check_stats(X, means, stds)
    return (X - means[:, np.newaxis]) / stds[:, np.newaxis]


def denormalize(X_N, means, stds) -> np.ndarray:
    """Map normalized rows back to original units: row i becomes X_N[i]·stds[i] + means[i]."""
    X_N = as_matrix(X_N, "X_N")
    means, stds = _check_stats(X_N, means, stds)
    return X_N * stds[:, np.newaxis] + means[:, np.newaxis]


def _check_stats(X: np.ndarray, means, stds) -> Tuple[np.ndarray, np.ndarray]:
    means = np.asarray(means, dtype=np.float64).ravel()
    stds = np.asarray(stds, dtype=np.float64).ravel()
    if means.size != X.shape[0] or stds.size != X.shape[0]:
        raise DimensionError("dimension error: {} rows but {} means and {} stds".format(
            X.shape[0], means.size, stds.size))
    if np.any(stds <= 0) or not np.all(np.isfinite(stds)):
        raise InvalidStdError("invalid std: {}".format(stds[(stds <= 0) | ~np.isfinite(stds)]))
    return means, stds
