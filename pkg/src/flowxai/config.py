"""Run configuration: one JSON file drives every pipeline stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigInvalid


@dataclass
class SynthSection:
    total_records: int = 20000
    class_weights: dict[str, float] | None = None  # None -> reference mix
    planted_rules: list | None = None              # None -> defaults


@dataclass
class SplitSection:
    test_fraction: float = 0.2
    val_fraction: float = 0.2


@dataclass
class ModelSection:
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 4


@dataclass
class TrainSection:
    batch_size: int = 256
    learning_rate: float = 1e-3
    # Per-step shrink factor, deliberately small: decay here is decoupled
    # from the learning rate, so 1e-2 would overwhelm desk-scale training.
    weight_decay: float = 1e-5
    class_weights: str | list[float] = "capped_inverse_frequency"
    max_epochs: int = 20
    patience: int = 6


@dataclass
class TreeSection:
    max_depth: int = 4
    min_samples_leaf: int = 40


@dataclass
class AttributionSection:
    steps: int = 50
    sample_size: int = 100


@dataclass
class LlmSection:
    model_name: str = "mock"
    endpoint_url: str = ""
    temperature: float = 0.1
    max_tokens: int = 250
    timeout_s: float = 30.0
    retries: int = 3


@dataclass
class ExplainSection:
    n_instances: int = 20
    steps: int = 50
    max_in_flight: int = 4
    generators: list[LlmSection] = field(default_factory=lambda: [
        LlmSection(model_name="qwen2.5:14b"),
        LlmSection(model_name="llama3.1:8b"),
        LlmSection(model_name="phi4:14b"),
        LlmSection(model_name="gemma3:27b"),
    ])
    judge: LlmSection = field(default_factory=lambda: LlmSection(model_name="llama3.3:70b"))


@dataclass
class EmbeddingSection:
    endpoint_url: str = ""
    model_name: str = ""


@dataclass
class BenchSection:
    n_samples: int = 200
    warmup: int = 20


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/out"
    data_csv: str | None = None  # external CSV; None -> the synth artifact
    lexicon_path: str | None = None  # direction lexicon JSON; None -> built-in
    n_runs: int = 1
    mock_llm: bool = True
    synth: SynthSection = field(default_factory=SynthSection)
    split: SplitSection = field(default_factory=SplitSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    tree: TreeSection = field(default_factory=TreeSection)
    attribution: AttributionSection = field(default_factory=AttributionSection)
    explain: ExplainSection = field(default_factory=ExplainSection)
    embedding: EmbeddingSection | None = None
    bench: BenchSection = field(default_factory=BenchSection)

    def validate(self) -> None:
        if self.n_runs < 1:
            raise ConfigInvalid("n_runs: must be >= 1")
        if not 0 < self.split.test_fraction < 1:
            raise ConfigInvalid("split.test_fraction: must be in (0, 1)")
        if not 0 < self.split.val_fraction < 1:
            raise ConfigInvalid("split.val_fraction: must be in (0, 1)")
        if self.synth.total_records < 9:
            raise ConfigInvalid("synth.total_records: must cover all classes")
        if self.model.d_model % self.model.n_heads != 0:
            raise ConfigInvalid("model.d_model: must be divisible by model.n_heads")
        if self.train.learning_rate < 0 or self.train.weight_decay < 0:
            raise ConfigInvalid("train: learning_rate and weight_decay must be >= 0")
        if self.tree.max_depth < 1 or self.tree.min_samples_leaf < 1:
            raise ConfigInvalid("tree: max_depth and min_samples_leaf must be >= 1")
        if self.attribution.steps < 1 or self.explain.steps < 1:
            raise ConfigInvalid("attribution.steps: must be >= 1")
        if self.explain.n_instances < 1:
            raise ConfigInvalid("explain.n_instances: must be >= 1")
        if not self.explain.generators:
            raise ConfigInvalid("explain.generators: must be nonempty")
        for llm in list(self.explain.generators) + [self.explain.judge]:
            if llm.temperature < 0:
                raise ConfigInvalid(f"llm {llm.model_name}: temperature must be >= 0")
            if llm.max_tokens <= 0:
                raise ConfigInvalid(f"llm {llm.model_name}: max_tokens must be > 0")

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), sort_keys=True, indent=2))


_SECTION_TYPES = {
    "synth": SynthSection,
    "split": SplitSection,
    "model": ModelSection,
    "train": TrainSection,
    "tree": TreeSection,
    "attribution": AttributionSection,
    "explain": ExplainSection,
    "embedding": EmbeddingSection,
    "bench": BenchSection,
}


def _build_section(cls, raw: dict, path: str):
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"{path}: expected an object")
    known = {f for f in cls.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigInvalid(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)
    if cls is ExplainSection:
        if "generators" in kwargs:
            kwargs["generators"] = [
                _build_section(LlmSection, g, f"{path}.generators[{i}]")
                for i, g in enumerate(kwargs["generators"])]
        if "judge" in kwargs:
            kwargs["judge"] = _build_section(LlmSection, kwargs["judge"], f"{path}.judge")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigInvalid("top level: expected an object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigInvalid(f"top level: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES and value is not None:
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        else:
            kwargs[key] = value
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigInvalid(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
