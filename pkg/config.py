"""Run configuration shared by every command.

One JSON file can drive the whole simulate → train → clean → evaluate chain.
Values given on the command line override the file, which overrides the
defaults below.
"""
from dataclasses import asdict, dataclass, field, fields, replace
import json
import os
from typing import List, Optional, get_type_hints

from errors import ConfigError
from lstm import DROPOUT_RATES, HIDDEN_SIZE
from recording import DEFAULT_FS, STANDARD_MONTAGE
from removal import DEFAULT_THRESHOLD

CONFIG_FILE_NAME = "config.json"


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "out"
    quiet: bool = False

    # simulate
    subjects: int = 27
    duration: float = 30.0
    fs: float = DEFAULT_FS
    n_channels: int = len(STANDARD_MONTAGE)
    workers: int = 1
    signed_coefficients: bool = False

    # train
    dataset: Optional[str] = None
    epochs: int = 50
    batch_size: int = 250
    patience: int = 2
    test_fraction: float = 0.3
    validation_fraction: float = 0.2
    segment_length: int = 400
    batches_per_epoch: int = 8
    learning_rate: float = 0.001
    clip_norm: float = 5.0
    hidden_size: int = HIDDEN_SIZE
    dropout_rates: List[float] = field(default_factory=lambda: list(DROPOUT_RATES))
    single_channel: Optional[str] = None

    # clean
    model: Optional[str] = None
    recording: Optional[str] = None
    threshold: float = DEFAULT_THRESHOLD
    contrast: str = "gauss"

    # evaluate
    cleaned: Optional[str] = None
    segments: int = 250
    segment_min: int = 400
    segment_max: int = 2000

    def __str__(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def load(cls, file_path) -> 'RunConfig':
        with open(file_path, 'r') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError("{}: not valid JSON ({})".format(file_path, e)) from e
        if not isinstance(data, dict):
            raise ConfigError("{}: expected a JSON object".format(file_path))
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("{}: unknown config keys {}".format(file_path, unknown))
        return cls(**{key: _checked(key, value, file_path) for key, value in data.items()})

    def save(self, file_path) -> str:
        directory = os.path.dirname(str(file_path))
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(file_path, 'w', newline="\n") as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=2)
            f.write("\n")
        return str(file_path)

    def to_dict(self) -> dict:
        return asdict(self)

    def merged(self, **overrides) -> 'RunConfig':
        """A copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError("unknown config keys {}".format(unknown))
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @property
    def n_layers(self) -> int:
        return len(self.dropout_rates)

    @property
    def dataset_dir(self) -> str:
        return self.dataset or os.path.join(self.out, "dataset")

    @property
    def model_dir(self) -> str:
        return self.model or os.path.join(self.out, "model")

    @property
    def cleaned_dir(self) -> str:
        return self.cleaned or os.path.join(self.out, "cleaned")

    @property
    def evaluation_dir(self) -> str:
        return os.path.join(self.out, "evaluation")

    def validate(self, command: str = None):
        def need(ok, message):
            if not ok:
                raise ConfigError(message)

        for f in fields(self):
            _checked(f.name, getattr(self, f.name))
        need(0 <= int(self.seed) < 2 ** 64, "seed must be a 64-bit unsigned integer, got {}".format(self.seed))
        need(bool(self.out), "out must name a directory")
        if command in (None, "simulate"):
            need(self.subjects >= 1, "subjects must be >= 1, got {}".format(self.subjects))
            need(self.fs > 0, "fs must be positive, got {}".format(self.fs))
            need(self.duration * self.fs >= 2, "duration x fs must give at least 2 samples")
            need(1 <= self.n_channels <= len(STANDARD_MONTAGE),
                 "n_channels must lie in 1..{}, got {}".format(len(STANDARD_MONTAGE), self.n_channels))
            need(self.workers >= 1, "workers must be >= 1, got {}".format(self.workers))
        if command in (None, "train"):
            need(self.epochs >= 1, "epochs must be >= 1, got {}".format(self.epochs))
            need(self.batch_size >= 1, "batch_size must be >= 1, got {}".format(self.batch_size))
            need(self.patience >= 0, "patience must be >= 0, got {}".format(self.patience))
            need(0.0 < self.test_fraction < 1.0, "test_fraction must lie in (0, 1), got {}".format(
                self.test_fraction))
            need(0.0 <= self.validation_fraction < 1.0, "validation_fraction must lie in [0, 1), got {}".format(
                self.validation_fraction))
            need(self.segment_length >= 1, "segment_length must be >= 1, got {}".format(self.segment_length))
            need(self.batches_per_epoch >= 1, "batches_per_epoch must be >= 1")
            need(self.learning_rate > 0, "learning_rate must be positive, got {}".format(self.learning_rate))
            need(self.clip_norm >= 0, "clip_norm must be >= 0, got {}".format(self.clip_norm))
            need(self.hidden_size >= 1, "hidden_size must be >= 1, got {}".format(self.hidden_size))
            need(self.n_layers >= 1 and all(0.0 <= r < 1.0 for r in self.dropout_rates),
                 "dropout_rates needs one rate in [0, 1) per layer, got {}".format(self.dropout_rates))
        if command in (None, "clean"):
            need(self.threshold >= 0, "threshold must be >= 0, got {}".format(self.threshold))
            need(self.contrast in ("gauss", "logcosh", "cube"),
                 "contrast must be gauss, logcosh or cube, got {!r}".format(self.contrast))
        if command in (None, "evaluate"):
            need(self.segments >= 1, "segments must be >= 1, got {}".format(self.segments))
            need(2 <= self.segment_min <= self.segment_max,
                 "need 2 <= segment_min <= segment_max, got {}..{}".format(self.segment_min, self.segment_max))
        return self


_FIELD_TYPES = get_type_hints(RunConfig)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _checked(key: str, value, source=None):
    """``value`` for config key ``key`` after a type check; ints are accepted where a float is expected."""
    hint = _FIELD_TYPES[key]
    if hint is bool:
        ok = isinstance(value, bool)
    elif hint is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif hint is float:
        ok = _is_number(value)
        value = float(value) if ok else value
    elif hint is str:
        ok = isinstance(value, str)
    elif hint == Optional[str]:
        ok = value is None or isinstance(value, str)
    else:
        ok = isinstance(value, list) and all(_is_number(v) for v in value)
        value = [float(v) for v in value] if ok else value
    if not ok:
        where = "{}: ".format(source) if source else ""
        raise ConfigError("{}config key {!r} must be {}, got {!r}".format(where, key, _type_name(hint), value))
    return value


def _type_name(hint) -> str:
    if hint == Optional[str]:
        return "a string or null"
    if hint == List[float]:
        return "a list of numbers"
    return {bool: "true or false", int: "an integer", float: "a number", str: "a string"}[hint]
