"""
Run configuration.

Precedence: command-line flags > JSON config file > built-in defaults.
Built-in defaults for seed, jobs, output directory and log level can be
changed through the environment (or a .env file).
"""
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Optional, Sequence, Tuple

from dotenv import load_dotenv

from relex.evaluation import DEFAULT_FOLDS
from relex.svm_baseline import DEFAULT_COSTS
from relex.trainer import ConfigError, TrainConfig

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

# Filter-length sets of the published sweep.
DEFAULT_LENGTH_SETS = (
    (3,), (4,), (5,), (6,), (7,), (3, 4), (3, 5), (4, 5), (4, 6), (5, 6),
    (3, 4, 5), (4, 5, 6), (2, 3, 4, 5), (3, 4, 5, 6),
)


class MissingFileError(FileNotFoundError):
    pass


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"environment variable {name} must be an integer, got '{value}'") from None


def parse_int_list(value: Any, name: str) -> Tuple[int, ...]:
    """Accept "4,6", [4, 6] or 4."""
    if isinstance(value, int):
        return (value,)
    try:
        if isinstance(value, str):
            items = [item.strip() for item in value.split(",") if item.strip()]
        else:
            items = list(value)
        return tuple(int(item) for item in items)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a comma-separated list of integers, got {value!r}") from None


def parse_float_list(value: Any, name: str) -> Tuple[float, ...]:
    try:
        items = value.split(",") if isinstance(value, str) else list(value)
        return tuple(float(item) for item in items)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a comma-separated list of numbers, got {value!r}") from None


def parse_length_sets(value: Any) -> Tuple[Tuple[int, ...], ...]:
    """Accept "3;4;4,6" or [[3], [4], [4, 6]]."""
    groups = [g for g in value.split(";") if g.strip()] if isinstance(value, str) else list(value)
    return tuple(parse_int_list(group, "length_sets") for group in groups)


@dataclass
class RunConfig:
    command: str = ""
    corpus: Optional[str] = None
    embeddings: Optional[str] = None
    out: str = field(default_factory=lambda: os.getenv("RELEX_OUTPUT_DIR", "runs"))
    filters: Tuple[int, ...] = (4, 6)
    num_filters: int = 100
    dropout: float = 0.5
    batch_size: int = 50
    epochs: int = 20
    lr: float = 1e-3
    seed: int = field(default_factory=lambda: _env_int("RELEX_SEED", 0))
    jobs: int = field(default_factory=lambda: _env_int("RELEX_JOBS", 1))
    folds: int = DEFAULT_FOLDS
    patience: Optional[int] = None
    norel_ratio: Optional[float] = None
    features: Tuple[str, ...] = TrainConfig().features
    length_sets: Tuple[Tuple[int, ...], ...] = DEFAULT_LENGTH_SETS
    costs: Tuple[float, ...] = DEFAULT_COSTS
    with_cnn: bool = False
    dump_sparse: bool = False
    model: Optional[str] = None
    vocab: Optional[str] = None
    dev_corpus: Optional[str] = None
    log_level: str = field(default_factory=lambda: os.getenv("RELEX_LOG_LEVEL", "INFO"))

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            filter_lengths=self.filters,
            filters_per_length=self.num_filters,
            dropout_keep=self.dropout,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            lr=self.lr,
            patience=self.patience,
            features=self.features,
            norel_ratio=self.norel_ratio,
        ).validate()

    def validate(self) -> "RunConfig":
        self.train_config()
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if any(c <= 0 for c in self.costs):
            raise ConfigError(f"SVM costs must be positive, got {list(self.costs)}")
        if not self.length_sets or any(not s for s in self.length_sets):
            raise ConfigError("length_sets must be non-empty groups of filter lengths")
        return self

    def check_paths(self, required: Sequence[str] = ()) -> None:
        """Every referenced input must exist; the output directory is created."""
        for name in required:
            if getattr(self, name) is None:
                raise ConfigError(f"--{name.replace('_', '-')} is required for '{self.command}'")
        for name in ("corpus", "embeddings", "model", "vocab", "dev_corpus"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise MissingFileError(f"{name.replace('_', ' ')} file not found: {path}")
        os.makedirs(self.out, exist_ok=True)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _coerce(name: str, value: Any) -> Any:
    if value is None:
        return None
    if name == "filters":
        return parse_int_list(value, name)
    if name == "costs":
        return parse_float_list(value, name)
    if name == "length_sets":
        return parse_length_sets(value)
    if name == "features":
        return tuple(v.strip() for v in value.split(",")) if isinstance(value, str) else tuple(value)
    if name in ("num_filters", "batch_size", "epochs", "seed", "jobs", "folds", "patience"):
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if name in ("dropout", "lr", "norel_ratio"):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be a number, got {value!r}") from None
    return value


def _normalize(values: Dict[str, Any], source: str) -> Dict[str, Any]:
    normalized = {}
    for key, value in values.items():
        name = key.lstrip("-").replace("-", "_")
        if name not in FIELD_NAMES:
            raise ConfigError(f"unknown setting '{key}' in {source}")
        normalized[name] = _coerce(name, value)
    return normalized


def load_config_file(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise MissingFileError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return _normalize(data, path)


def resolve_config(command: str, flags: Dict[str, Any], config_path: Optional[str] = None) -> RunConfig:
    """Merge defaults, the optional config file and explicitly given flags."""
    merged: Dict[str, Any] = {}
    if config_path:
        merged.update(load_config_file(config_path))
    merged.update(_normalize(flags, "command line"))
    merged["command"] = command
    return RunConfig(**merged).validate()
