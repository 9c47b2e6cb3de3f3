"""
Experiment configuration for xmd

A run is described by one document (YAML preset, YAML or JSON file) merged
with dotted `key=value` overrides, then validated into ExperimentConfig.
"""
import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

import yaml

from src.data import SyntheticSpec
from src.errors import ConfigurationError
from src.losses import DistillConfig
from src.models import ModelConfig
from src.optim import OPTIMIZER_KINDS
from src.storage import get_presets_dir

# Keys that do not change what a run computes, only which replicate it is
_HASH_EXCLUDED = ("seed", "out_dir")


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    lr_gamma: float = 0.75
    lr_every: int = 3

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigurationError(f"unknown optimizer '{self.kind}', expected one of {OPTIMIZER_KINDS}")
        if self.lr <= 0:
            raise ConfigurationError(f"learning rate must be > 0, got {self.lr}")


@dataclass
class TeacherConfig:
    """Pretraining of the teacher encoder and its throwaway classifier"""

    epochs: int = 30
    batch_size: int = 64
    data_fraction: float = 1.0
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr_gamma=0.5, lr_every=10))

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("teacher epochs and batch_size must be >= 1")
        if not 0.0 < self.data_fraction <= 1.0:
            raise ConfigurationError(f"teacher.data_fraction must lie in (0, 1], got {self.data_fraction}")


@dataclass
class BatchConfig:
    classes_per_batch: int = 10
    samples_per_class: int = 2

    def __post_init__(self):
        if self.classes_per_batch < 1 or self.samples_per_class < 1:
            raise ConfigurationError("batch P and K must be >= 1")


@dataclass
class EvalConfig:
    max_target: int = 5000
    max_nontarget: int = 20000
    noise_db: list = field(default_factory=lambda: [15, 10, 5])
    matching_trials: int = 2000
    crops: int = 1
    crop_db: float = 20.0
    p_tar: float = 0.01
    c_miss: float = 1.0
    c_fa: float = 1.0
    normalize_dcf: bool = False
    val_max_trials: int = 2000

    def __post_init__(self):
        if self.crops < 1:
            raise ConfigurationError(f"eval.crops must be >= 1, got {self.crops}")
        if not 0.0 < self.p_tar < 1.0:
            raise ConfigurationError(f"eval.p_tar must lie in (0, 1), got {self.p_tar}")


@dataclass
class ExperimentConfig:
    """Everything that determines a run; data.seed always follows seed"""

    data: SyntheticSpec = field(default_factory=SyntheticSpec)
    data_path: str = None
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    epochs: int = 30
    batch: BatchConfig = field(default_factory=BatchConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0
    out_dir: str = "runs/default"

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.data.seed != self.seed:
            self.data = replace(self.data, seed=self.seed)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, payload):
        return _build(cls, payload or {}, "")


def _build(kind, payload, path):
    if not isinstance(payload, dict):
        raise ConfigurationError(f"'{path or '<root>'}' must be a mapping, got {type(payload).__name__}")
    known = {f.name: f for f in fields(kind)}
    values = {}
    for key, value in payload.items():
        dotted = f"{path}.{key}" if path else key
        if key not in known:
            raise ConfigurationError(f"unknown config key '{dotted}'")
        target = known[key].type
        if is_dataclass(target) and value is not None:
            values[key] = _build(target, value, dotted)
        elif target in (int, float) and isinstance(value, str):
            # PyYAML reads "1e-3" as a string
            try:
                values[key] = target(float(value)) if target is int else float(value)
            except ValueError:
                raise ConfigurationError(f"'{dotted}' expects a number, got '{value}'") from None
        else:
            values[key] = value
    try:
        return kind(**values)
    except TypeError as e:
        raise ConfigurationError(f"invalid config at '{path or '<root>'}': {e}") from None


def config_hash(config):
    """Short sha256 over the canonical config, ignoring seed and output location"""
    payload = config.to_dict()
    for key in _HASH_EXCLUDED:
        payload.pop(key, None)
    payload["data"].pop("seed", None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def list_presets():
    """List all available preset YAML files"""
    presets_dir = get_presets_dir()
    if not presets_dir.exists():
        return []
    return sorted(f.stem for f in presets_dir.glob("*.yaml"))


def load_document(path):
    """Load and parse a YAML or JSON config document"""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"cannot parse {path.name}: {e}") from None
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path.name} must hold a mapping at the top level")
    return document


def load_preset(name):
    path = get_presets_dir() / f"{name}.yaml"
    if not path.exists():
        available = ", ".join(list_presets()) or "none"
        raise ConfigurationError(f"unknown preset '{name}' (available: {available})")
    return load_document(path)


def merge_documents(base, overlay):
    """Recursive dict merge; overlay wins"""
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_documents(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text):
    """'distill.margin_deg=30' -> (['distill', 'margin_deg'], 30)"""
    if "=" not in text:
        raise ConfigurationError(f"override '{text}' is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigurationError(f"override '{text}' has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError:
        value = raw
    return key.split("."), value


def apply_override(document, text):
    parts, value = parse_override(text)
    node = document
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigurationError(f"cannot set '{text}': '{part}' is not a section")
        node = child
    node[parts[-1]] = value
    return document


def resolve_config(preset=None, config_path=None, overrides=(), seed=None, out_dir=None):
    """Preset, then config file, then --set overrides, then --seed/--out"""
    document = {}
    if preset:
        preset_document = load_preset(preset)
        preset_document.pop("description", None)
        document = merge_documents(document, preset_document)
    if config_path:
        document = merge_documents(document, load_document(config_path))
    for text in overrides or ():
        apply_override(document, text)
    if seed is not None:
        document["seed"] = seed
    if out_dir is not None:
        document["out_dir"] = str(out_dir)
    return ExperimentConfig.from_dict(document)


def with_override(config, text):
    """A copy of a resolved config with one dotted override applied"""
    return ExperimentConfig.from_dict(apply_override(config.to_dict(), text))
