"""The multi-channel recording container and its CSV file format.

File layout
-----------
A recording is stored as two files:

``<name>.csv``
    Header ``time,<label1>,...,<labelN>``, then one row per sample. ``time`` is
    ``sample_index / fs`` in seconds. Values are written with 17 significant
    digits so they read back bit-identical.

``<name>.meta``
    Sidecar with one ``key=value`` pair per line: ``fs``, ``subject_id``,
    ``labels`` (comma separated) and ``roles`` (comma separated, ``eeg`` or
    ``eog`` per channel). The sidecar is optional when reading; exports of
    other datasets in the same CSV layout load with ``fs`` inferred from the
    time column or given explicitly.
"""
from dataclasses import dataclass, field
import logging
import os
import re
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from errors import DimensionError, RecordingFormatError

logger = logging.getLogger(__name__)

STANDARD_MONTAGE = ("FP1", "FP2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2",
                    "F7", "F8", "T3", "T4", "T5", "T6", "Fz", "Cz", "Pz")
EOG_LABELS = ("VEOG", "HEOG")
DEFAULT_FS = 200.0

TIME_COLUMN = "time"
META_SUFFIX = ".meta"
FLOAT_FORMAT = "%.17g"


@dataclass
class Recording:
    data: np.ndarray
    fs: float = DEFAULT_FS
    labels: List[str] = field(default_factory=list)
    subject_id: str = ""
    roles: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 1:
            self.data = self.data[np.newaxis, :]
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise DimensionError("dimension error: recording data must be channels x samples, got {}".format(
                self.data.shape))
        if not np.all(np.isfinite(self.data)):
            raise DimensionError("recording {} contains non-finite values".format(self.subject_id or "<unnamed>"))
        if self.fs <= 0:
            raise ValueError("sampling rate must be positive, got {}".format(self.fs))
        self.fs = float(self.fs)
        if not self.labels:
            self.labels = ["ch{}".format(i + 1) for i in range(self.n_channels)]
        self.labels = [str(label) for label in self.labels]
        if len(self.labels) != self.n_channels:
            raise DimensionError("dimension error: {} labels for {} channels".format(len(self.labels),
                                                                                    self.n_channels))
        if len({label.lower() for label in self.labels}) != len(self.labels):
            raise DimensionError("duplicate channel labels: {}".format(self.labels))
        if not self.roles:
            self.roles = ["eeg"] * self.n_channels
        if len(self.roles) != self.n_channels:
            raise DimensionError("dimension error: {} roles for {} channels".format(len(self.roles),
                                                                                   self.n_channels))

    def __str__(self):
        return "{} ({} ch x {} samples @ {:g} Hz)".format(self.subject_id or "recording", self.n_channels,
                                                        self.n_samples, self.fs)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs

    def channel(self, label: str) -> np.ndarray:
        return self.data[self.index_of(label)]

    def index_of(self, label: str) -> int:
        # Labels compare case-insensitively so "Fp1" finds "FP1"
        for idx, this_label in enumerate(self.labels):
            if this_label.lower() == label.lower():
                return idx
        raise DimensionError("no channel labelled {!r} in {}".format(label, self))

    def pick(self, labels: Sequence[str]) -> 'Recording':
        indices = [self.index_of(label) for label in labels]
        return Recording(self.data[indices], fs=self.fs, labels=[self.labels[i] for i in indices],
                         subject_id=self.subject_id, roles=[self.roles[i] for i in indices])

    def window(self, start: int, stop: int) -> 'Recording':
        if not 0 <= start < stop <= self.n_samples:
            raise DimensionError("window [{}, {}) outside 0..{}".format(start, stop, self.n_samples))
        return Recording(self.data[:, start:stop], fs=self.fs, labels=list(self.labels),
                         subject_id=self.subject_id, roles=list(self.roles))

    def with_data(self, data: np.ndarray) -> 'Recording':
        """Same labels and metadata around new data of the same shape."""
        data = np.asarray(data, dtype=np.float64)
        if data.shape != self.data.shape:
            raise DimensionError("dimension error: expected shape {}, got {}".format(self.data.shape, data.shape))
        return Recording(data, fs=self.fs, labels=list(self.labels), subject_id=self.subject_id,
                         roles=list(self.roles))


def meta_path(path) -> str:
    root, _ = os.path.splitext(str(path))
    return root + META_SUFFIX


def write_recording(path, rec: Recording) -> str:
    """Write ``rec`` as CSV plus metadata sidecar. Returns the CSV path."""
    path = str(path)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    frame = pd.DataFrame(rec.data.T, columns=rec.labels)
    frame.insert(0, TIME_COLUMN, np.arange(rec.n_samples) / rec.fs)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    meta = {
        "fs": repr(rec.fs),
        "subject_id": rec.subject_id,
        "labels": ",".join(rec.labels),
        "roles": ",".join(rec.roles),
    }
    with open(meta_path(path), "w", newline="\n") as f:
        for key in ("fs", "subject_id", "labels", "roles"):
            f.write("{}={}\n".format(key, meta[key]))
    return path


def read_meta(path) -> Dict[str, str]:
    meta = {}
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise RecordingFormatError("expected key=value in {}".format(path), line=line_no)
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def read_recording(path, fs: float = None) -> Recording:
    """Read a recording written by :func:`write_recording` or any CSV in the same layout.

    The sampling rate comes from ``fs`` if given, else the sidecar, else the
    spacing of the time column.
    """
    path = str(path)
    try:
        header = pd.read_csv(path, header=None, nrows=1, dtype=str, keep_default_na=False).iloc[0].tolist()
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.ParserError as e:
        found = re.search(r"line (\d+)", str(e))
        raise RecordingFormatError("{}: {}".format(path, e), line=int(found.group(1)) if found else None) from e
    except pd.errors.EmptyDataError as e:
        raise RecordingFormatError("{}: empty file".format(path), line=1) from e

    if len(frame.columns) < 2 or frame.columns[0] != TIME_COLUMN:
        raise RecordingFormatError("{}: header must be 'time,<label1>,...'".format(path), line=1)
    seen = set()
    for label in header[1:]:
        if label.lower() in seen:
            raise RecordingFormatError("{}: duplicate channel label {!r}".format(path, label), line=1)
        seen.add(label.lower())
    if len(frame) < 1:
        raise RecordingFormatError("{}: no samples".format(path), line=2)

    values = frame.apply(pd.to_numeric, errors="coerce")
    bad_rows = np.flatnonzero(values.isna().any(axis=1).to_numpy())
    if bad_rows.size:
        row = int(bad_rows[0])
        raise RecordingFormatError("{}: row {} has {} of {} columns or a non-numeric value".format(
            path, row + 1, int(frame.iloc[row].notna().sum()), len(frame.columns)), line=row + 2)

    labels = [str(c) for c in header[1:]]
    meta = {}
    if os.path.exists(meta_path(path)):
        meta = read_meta(meta_path(path))
        if meta.get("labels") and meta["labels"].split(",") != labels:
            raise RecordingFormatError("{}: header labels do not match sidecar labels".format(path), line=1)

    if fs is None:
        if "fs" in meta:
            fs = float(meta["fs"])
        else:
            times = values[TIME_COLUMN].to_numpy()
            if times.size < 2 or not times[1] > times[0]:
                raise RecordingFormatError("{}: cannot infer the sampling rate".format(path))
            fs = 1.0 / float(np.median(np.diff(times)))

    roles = meta["roles"].split(",") if meta.get("roles") else []
    data = values.iloc[:, 1:].to_numpy(dtype=np.float64).T
    rec = Recording(data, fs=fs, labels=labels, subject_id=meta.get("subject_id", ""), roles=roles)
    logger.debug("Read %s from %s", rec, path)
    return rec
