"""Semi-simulated EEG/EOG datasets.

Pure EEG comes from a random spatial mixing of band-limited cortical sources
(alpha rhythm plus 1/f background). VEOG carries blinks, HEOG carries
saccades; both are band-passed to 0.5-5 Hz and added to every EEG channel with
one coefficient pair per subject:

    contaminated = pure + a·VEOG + b·HEOG

All generators are deterministic functions of their parameters and seed.
Subject ``k`` of a dataset with master seed ``m`` uses seed ``m + k``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import os
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import signal

from errors import BadBandEdgesError, DimensionError, InsufficientSamplesError, LengthMismatchError, \
    RankDeficientError, SegmentationError
from numerics import SeededRng
from recording import DEFAULT_FS, EOG_LABELS, STANDARD_MONTAGE, Recording, read_recording, write_recording

logger = logging.getLogger(__name__)

FILTER_ORDER = 4
EEG_BAND = (0.5, 40.0)
EOG_BAND = (0.5, 5.0)
DEFAULT_DURATION = 30.0

A_RANGE = (0.2, 1.0)
B_RANGE = (0.1, 0.6)

BLINK_WIDTH_S = (0.2, 0.4)
BLINK_AMPLITUDE_UV = (150.0, 800.0)
BLINK_INTERVAL_S = (1.5, 5.0)
SACCADE_HOLD_S = (0.3, 1.0)
SACCADE_INTERVAL_S = (0.5, 3.0)
SACCADE_AMPLITUDE_UV = (150.0, 400.0)
SACCADE_RAMP_S = 0.04
EEG_AMPLITUDE_UV = 25.0

MANIFEST_NAME = "manifest.csv"


@dataclass
class SemiSimDataset:
    pure: Recording
    veog: np.ndarray
    heog: np.ndarray
    a: float
    b: float
    contaminated: Recording
    subject_id: str = ""

    @property
    def fs(self) -> float:
        return self.pure.fs

    @property
    def eog(self) -> Recording:
        return Recording(np.vstack([self.veog, self.heog]), fs=self.fs, labels=list(EOG_LABELS),
                         subject_id=self.subject_id, roles=["eog", "eog"])

    def residual(self) -> float:
        """Largest deviation from ``contaminated = pure + a·veog + b·heog``."""
        expected = self.pure.data + self.a * self.veog + self.b * self.heog
        return float(np.abs(self.contaminated.data - expected).max())


@dataclass
class SegmentSpec:
    count: int = 250
    min_len: int = 400
    max_len: int = 2000
    overlap_allowed: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise SegmentationError("segment count must be >= 1, got {}".format(self.count))
        if self.min_len < 2 or self.max_len < self.min_len:
            raise SegmentationError("need 2 <= min_len <= max_len, got {}..{}".format(self.min_len, self.max_len))


@dataclass
class EogEvents:
    """Blink and saccade timing behind a generated EOG pair (sample units)."""
    blink_onsets: List[int] = field(default_factory=list)
    blink_widths: List[int] = field(default_factory=list)
    blink_amplitudes: List[float] = field(default_factory=list)
    saccade_onsets: List[int] = field(default_factory=list)
    saccade_amplitudes: List[float] = field(default_factory=list)


def bandpass(x, lo_hz: float, hi_hz: float, fs: float, order: int = FILTER_ORDER) -> np.ndarray:
    """Zero-phase Butterworth band-pass along the last axis.

    The band filter is designed from an ``order``-th order prototype in
    second-order sections and run forward and backward, with odd reflection
    padding of three times the band filter's order at each end.
    """
    if not 0 < lo_hz < hi_hz < fs / 2.0:
        raise BadBandEdgesError("bad band edges: need 0 < {} < {} < fs/2 = {}".format(lo_hz, hi_hz, fs / 2.0))
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise InsufficientSamplesError("insufficient samples: cannot filter {} sample(s)".format(x.shape[-1]))
    sos = signal.butter(order, [lo_hz, hi_hz], btype="bandpass", fs=fs, output="sos")
    padlen = min(3 * 2 * order, x.shape[-1] - 1)
    return signal.sosfiltfilt(sos, x, axis=-1, padtype="odd", padlen=padlen)


def _band_noise(gen: np.random.Generator, n_samples: int, fs: float, lo_hz: float, hi_hz: float,
                exponent: float) -> np.ndarray:
    """Unit-variance noise with power ∝ 1/f**exponent inside [lo_hz, hi_hz] and nothing outside."""
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / fs)
    in_band = (freqs >= lo_hz) & (freqs <= hi_hz)
    amplitude = np.zeros_like(freqs)
    amplitude[in_band] = freqs[in_band] ** (-exponent / 2.0)
    spectrum = amplitude * (gen.standard_normal(freqs.size) + 1j * gen.standard_normal(freqs.size))
    noise = np.fft.irfft(spectrum, n=n_samples)
    std = noise.std()
    return noise / std if std > 0 else noise


def synth_pure_eeg(n_ch: int = len(STANDARD_MONTAGE), T: int = int(DEFAULT_DURATION * DEFAULT_FS),
                   fs: float = DEFAULT_FS, seed: int = 0, labels: Sequence[str] = None) -> Recording:
    """Closed-eyes-like EEG: alpha-dominant cortical sources mixed onto ``n_ch`` electrodes, band-passed."""
    if T < 2:
        raise InsufficientSamplesError("insufficient samples: T must be >= 2, got {}".format(T))
    gen = SeededRng(seed).generator
    t = np.arange(T) / fs
    sources = np.empty((n_ch, T))
    for k in range(n_ch):
        alpha_freq = gen.uniform(8.0, 13.0)
        envelope = 1.0 + 0.5 * _band_noise(gen, T, fs, 0.05, 1.0, 0.0)
        alpha = envelope * np.sin(2.0 * np.pi * alpha_freq * t + gen.uniform(0.0, 2.0 * np.pi))
        background = _band_noise(gen, T, fs, 1.0, 35.0, 1.0)
        sources[k] = gen.uniform(0.5, 1.5) * alpha / alpha.std() + background
    mixing = gen.standard_normal((n_ch, n_ch)) + 2.0 * np.eye(n_ch)
    data = bandpass(EEG_AMPLITUDE_UV * mixing @ sources / np.sqrt(n_ch), EEG_BAND[0], EEG_BAND[1], fs)

    if labels is None:
        labels = STANDARD_MONTAGE[:n_ch] if n_ch <= len(STANDARD_MONTAGE) else None
    return Recording(data, fs=fs, labels=list(labels) if labels else [])


def _blink_train(gen: np.random.Generator, T: int, fs: float, events: EogEvents) -> np.ndarray:
    out = np.zeros(T)
    position = int(gen.uniform(*BLINK_INTERVAL_S) * fs / 2)
    while True:
        width = int(round(gen.uniform(*BLINK_WIDTH_S) * fs))
        amplitude = gen.uniform(*BLINK_AMPLITUDE_UV)
        if position + width > T:
            break
        out[position:position + width] += amplitude * np.hanning(width)
        events.blink_onsets.append(position)
        events.blink_widths.append(width)
        events.blink_amplitudes.append(amplitude)
        position += width + int(gen.uniform(*BLINK_INTERVAL_S) * fs)
    return out


def _saccade_track(gen: np.random.Generator, T: int, fs: float, events: EogEvents) -> np.ndarray:
    """Fixation at centre with sparse excursions: a saccade out, a hold, a saccade back."""
    track = np.zeros(T)
    position = int(gen.uniform(*SACCADE_INTERVAL_S) * fs / 2)
    while True:
        hold = max(1, int(gen.uniform(*SACCADE_HOLD_S) * fs))
        level = float(gen.choice([-1.0, 1.0]) * gen.uniform(*SACCADE_AMPLITUDE_UV))
        if position + hold >= T:
            break
        track[position:position + hold] = level
        events.saccade_onsets.extend([position, position + hold])
        events.saccade_amplitudes.append(level)
        position += hold + int(gen.uniform(*SACCADE_INTERVAL_S) * fs)
    ramp = max(1, int(SACCADE_RAMP_S * fs))
    kernel = np.hanning(ramp + 2)[1:-1]
    return np.convolve(track, kernel / kernel.sum(), mode="same")


def _drift(gen: np.random.Generator, T: int, fs: float) -> np.ndarray:
    t = np.arange(T) / fs
    return sum(gen.uniform(5.0, 15.0) * np.sin(2.0 * np.pi * gen.uniform(0.05, 0.3) * t
                                                + gen.uniform(0.0, 2.0 * np.pi)) for _ in range(2))


def synth_eog_events(T: int, fs: float = DEFAULT_FS, seed: int = 0) -> Tuple[np.ndarray, np.ndarray, EogEvents]:
    """VEOG (blinks + drift) and HEOG (saccades + drift), band-passed 0.5-5 Hz, with their event timing."""
    if T < 2:
        raise InsufficientSamplesError("insufficient samples: T must be >= 2, got {}".format(T))
    gen = SeededRng(seed).generator
    events = EogEvents()
    veog = _blink_train(gen, T, fs, events) + _drift(gen, T, fs)
    heog = _saccade_track(gen, T, fs, events) + _drift(gen, T, fs)
    return bandpass(veog, EOG_BAND[0], EOG_BAND[1], fs), bandpass(heog, EOG_BAND[0], EOG_BAND[1], fs), events


def synth_eog(T: int, fs: float = DEFAULT_FS, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    veog, heog, _ = synth_eog_events(T, fs, seed)
    return veog, heog


def contaminate(pure: Recording, veog, heog, a: float, b: float) -> Recording:
    """Add ``a·veog + b·heog`` to every channel of ``pure``."""
    veog = np.asarray(veog, dtype=np.float64).ravel()
    heog = np.asarray(heog, dtype=np.float64).ravel()
    if veog.size != pure.n_samples or heog.size != pure.n_samples:
        raise LengthMismatchError("length mismatch: EEG has {} samples, VEOG {}, HEOG {}".format(
            pure.n_samples, veog.size, heog.size))
    return pure.with_data(pure.data + a * veog + b * heog)


def fit_mixing_coeffs(contaminated_ch, pure_ch, veog, heog) -> Tuple[float, float]:
    """Least-squares (a, b) minimizing ‖(contaminated - pure) - a·veog - b·heog‖²."""
    arrays = [np.asarray(x, dtype=np.float64).ravel() for x in (contaminated_ch, pure_ch, veog, heog)]
    if len({x.size for x in arrays}) != 1:
        raise LengthMismatchError("length mismatch: {}".format([x.size for x in arrays]))
    contaminated_ch, pure_ch, veog, heog = arrays
    regressors = np.column_stack([veog, heog])
    if np.linalg.matrix_rank(regressors) < 2:
        raise RankDeficientError("rank-deficient regressors: VEOG and HEOG are collinear or zero")
    coeffs, _, _, _ = np.linalg.lstsq(regressors, contaminated_ch - pure_ch, rcond=None)
    return float(coeffs[0]), float(coeffs[1])


def generate_subject(index: int, master_seed: int = 0, n_ch: int = len(STANDARD_MONTAGE),
                     duration: float = DEFAULT_DURATION, fs: float = DEFAULT_FS,
                     signed: bool = False) -> SemiSimDataset:
    """Subject ``index`` of the dataset with master seed ``master_seed``.

    ``a`` and ``b`` are positive unless ``signed`` is set, in which case each
    gets a random sign. With a signed ``b`` the polarity of the horizontal
    component cannot be told from the contaminated EEG alone.
    """
    seed = (int(master_seed) + int(index)) % 2 ** 64
    gen = SeededRng(seed).generator
    a = gen.uniform(*A_RANGE)
    b = gen.uniform(*B_RANGE)
    signs = gen.choice([-1.0, 1.0], size=2)
    if signed:
        a, b = a * signs[0], b * signs[1]
    eeg_seed, eog_seed = (int(s) for s in gen.integers(0, 2 ** 63, size=2))

    subject_id = "S{:02d}".format(index + 1)
    T = int(round(duration * fs))
    pure = synth_pure_eeg(n_ch=n_ch, T=T, fs=fs, seed=eeg_seed)
    pure.subject_id = subject_id
    veog, heog = synth_eog(T, fs, eog_seed)
    contaminated = contaminate(pure, veog, heog, a, b)
    logger.info("Generated subject %s: a=%.3f b=%.3f", subject_id, a, b)
    return SemiSimDataset(pure=pure, veog=veog, heog=heog, a=float(a), b=float(b), contaminated=contaminated,
                          subject_id=subject_id)


def generate_dataset(n_subjects: int, master_seed: int = 0, n_ch: int = len(STANDARD_MONTAGE),
                     duration: float = DEFAULT_DURATION, fs: float = DEFAULT_FS,
                     workers: int = 1, signed: bool = False) -> List[SemiSimDataset]:
    """``n_subjects`` subjects in index order; ``workers`` > 1 generates them on a thread pool."""
    if n_subjects < 1:
        raise ValueError("need at least one subject, got {}".format(n_subjects))

    def one(index):
        return generate_subject(index, master_seed, n_ch=n_ch, duration=duration, fs=fs, signed=signed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(n_subjects)))
    return [one(index) for index in range(n_subjects)]


def segment_windows(n_samples: int, spec: SegmentSpec) -> List[Tuple[int, int]]:
    """``spec.count`` (start, stop) windows with uniform random lengths and offsets."""
    if spec.max_len > n_samples:
        raise SegmentationError("max_len {} exceeds the recording length {}".format(spec.max_len, n_samples))
    gen = SeededRng(spec.seed).generator
    windows = []
    attempts = 0
    while len(windows) < spec.count:
        length = int(gen.integers(spec.min_len, spec.max_len + 1))
        start = int(gen.integers(0, n_samples - length + 1))
        stop = start + length
        if not spec.overlap_allowed and any(start < b and a < stop for a, b in windows):
            attempts += 1
            if attempts > 1000 * spec.count:
                raise SegmentationError("cannot place {} non-overlapping segments in {} samples".format(
                    spec.count, n_samples))
            continue
        windows.append((start, stop))
    return windows


def segment(X: Recording, spec: SegmentSpec) -> List[Recording]:
    return [X.window(start, stop) for start, stop in segment_windows(X.n_samples, spec)]


def write_dataset(directory, datasets: Sequence[SemiSimDataset]) -> str:
    """Per-subject ``pure``/``eog``/``contaminated`` recordings plus ``manifest.csv``."""
    directory = str(directory)
    os.makedirs(directory, exist_ok=True)
    rows = []
    for ds in datasets:
        subject_dir = os.path.join(directory, ds.subject_id)
        write_recording(os.path.join(subject_dir, "pure.csv"), ds.pure)
        write_recording(os.path.join(subject_dir, "eog.csv"), ds.eog)
        write_recording(os.path.join(subject_dir, "contaminated.csv"), ds.contaminated)
        rows.append({"subject_id": ds.subject_id, "a": ds.a, "b": ds.b, "fs": ds.fs,
                     "n_channels": ds.pure.n_channels, "n_samples": ds.pure.n_samples})
    manifest = pd.DataFrame(rows, columns=["subject_id", "a", "b", "fs", "n_channels", "n_samples"])
    path = os.path.join(directory, MANIFEST_NAME)
    manifest.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_manifest(directory) -> pd.DataFrame:
    path = os.path.join(str(directory), MANIFEST_NAME)
    if not os.path.exists(path):
        raise FileNotFoundError("no dataset manifest at {}".format(path))
    return pd.read_csv(path, dtype={"subject_id": str}, float_precision="round_trip")


def read_subject(directory, subject_id: str, a: float = float("nan"), b: float = float("nan")) -> SemiSimDataset:
    subject_dir = os.path.join(str(directory), subject_id)
    pure = read_recording(os.path.join(subject_dir, "pure.csv"))
    eog = read_recording(os.path.join(subject_dir, "eog.csv"))
    contaminated = read_recording(os.path.join(subject_dir, "contaminated.csv"))
    if pure.data.shape != contaminated.data.shape or eog.n_samples != pure.n_samples:
        raise DimensionError("dimension error: subject {} recordings disagree in shape".format(subject_id))
    return SemiSimDataset(pure=pure, veog=eog.channel("VEOG"), heog=eog.channel("HEOG"), a=a, b=b,
                          contaminated=contaminated, subject_id=subject_id)


def read_dataset(directory) -> List[SemiSimDataset]:
    manifest = read_manifest(directory)
    return [read_subject(directory, row.subject_id, float(row.a), float(row.b))
            for row in manifest.itertuples(index=False)]
