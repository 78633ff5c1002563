"""Pipeline configuration: one TOML file, every field overridable from the CLI."""

import dataclasses
import sys
from pathlib import Path

from .errors import DataError
from .features import FeatureConfig
from .npb.model import VARIANTS, Hyperparameters

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclasses.dataclass
class ModelConfig:
    variant: str = "hdphmm"
    truncation: int = 300
    components: int = 1
    pool_size: int = 0
    covariance: str = "diag"
    init_states: int = 50
    min_occupancy: int = 0
    share: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DataError(f"model.variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.covariance not in ("diag", "full"):
            raise DataError(f"model.covariance must be diag or full, got {self.covariance!r}")
        if self.truncation < 1 or self.components < 1 or self.init_states < 1:
            raise DataError("model.truncation, components and init_states must be >= 1")


@dataclasses.dataclass
class TrainingConfig:
    sweeps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 0:
            raise DataError("training.sweeps must be >= 0")


@dataclasses.dataclass
class SearchConfig:
    threshold: float | None = None
    combine: str = "max"
    top: int | None = None
    posteriorgram_mode: str = "posterior"
    floor: float = 1e-6

    def __post_init__(self):
        if self.combine not in ("max", "mean"):
            raise DataError(f"search.combine must be max or mean, got {self.combine!r}")
        if self.posteriorgram_mode not in ("posterior", "viterbi"):
            raise DataError("search.posteriorgram_mode must be posterior or viterbi")


@dataclasses.dataclass
class PipelineConfig:
    features: FeatureConfig = dataclasses.field(default_factory=FeatureConfig)
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    hyper: dict = dataclasses.field(default_factory=dict)
    training: TrainingConfig = dataclasses.field(default_factory=TrainingConfig)
    search: SearchConfig = dataclasses.field(default_factory=SearchConfig)
    paths: dict = dataclasses.field(default_factory=dict)

    def hyperparameters(self):
        return Hyperparameters.from_dict(self.hyper)

    def snapshot(self):
        return dataclasses.asdict(self)


def _section(cls, data, name):
    data = dict(data or {})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise DataError(f"unknown keys in [{name}]: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise DataError(f"bad [{name}] section: {exc}") from exc


def load_config(path=None, overrides=None):
    """Read a TOML config (or defaults) and apply ``{"section.key": value}`` overrides."""
    raw = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        try:
            raw = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"{path}: invalid TOML ({exc})") from exc
    allowed = {"features", "model", "hyper", "training", "search", "paths"}
    unknown = set(raw) - allowed
    if unknown:
        raise DataError(f"unknown config sections: {sorted(unknown)}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, field = key.split(".", 1)
        raw.setdefault(section, {})[field] = value
    cfg = PipelineConfig(
        features=FeatureConfig.from_dict(raw.get("features", {})),
        model=_section(ModelConfig, raw.get("model"), "model"),
        hyper=dict(raw.get("hyper", {})),
        training=_section(TrainingConfig, raw.get("training"), "training"),
        search=_section(SearchConfig, raw.get("search"), "search"),
        paths=dict(raw.get("paths", {})),
    )
    cfg.hyperparameters()  # validate early
    return cfg
