"""Training/run configuration and its INI-style text form."""
from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, field, fields

ABLATIONS = ("noConvTransE", "noFiLM", "noHRGCN", "noCommunity")


@dataclass
class TrainConfig:
    dim: int = 200
    layers: int = 2
    dropout: float = 0.2
    lr: float = 1e-3
    kernels: int = 50
    bases: int = 2
    window: int = 3
    epochs: int = 30
    patience: int = 5
    seed: int = 0
    relation_weight: float = 1.0
    ablation: str = ""
    # interpretation switches
    literal_norm: bool = True
    community_norm: str = "all"
    gate: str = "scalar"
    learn_delta: bool = True
    delta_init: float = 1.0
    community_split: str = "train"
    dtype: str = "float32"

    def __post_init__(self):
        flags = self.ablation_flags()
        unknown = flags - set(ABLATIONS)
        if unknown:
            raise ValueError(f"unknown ablation(s) {sorted(unknown)}; choose from {ABLATIONS}")
        if self.gate not in ("scalar", "entity"):
            raise ValueError(f"gate must be 'scalar' or 'entity', got {self.gate!r}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.window < 1 or self.layers < 1 or self.dim < 1:
            raise ValueError("window, layers and dim must be >= 1")

    def ablation_flags(self):
        return {a for a in self.ablation.replace("+", ",").split(",") if a}

    def has(self, flag):
        return flag in self.ablation_flags()

    @property
    def variant(self):
        return self.ablation or "full"


@dataclass
class RunConfig:
    dataset_root: str = "data"
    dataset: str = ""
    out: str = "runs"
    mode: str = "filtered"
    train: TrainConfig = field(default_factory=TrainConfig)


_SECTIONS = {"dataset": ("dataset_root", "dataset"), "output": ("out", "mode")}


def _coerce(value: str, like):
    if isinstance(like, bool):
        v = value.strip().lower()
        if v not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {value!r}")
        return v in ("true", "1", "yes")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value.strip()


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Overlay ``[dataset]``, ``[output]`` and ``[train]`` key=value sections onto ``base``."""
    cfg = base or RunConfig()
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    run_vals = {}
    for section, keys in _SECTIONS.items():
        if cp.has_section(section):
            for key, val in cp.items(section):
                if key not in keys:
                    raise ValueError(f"unknown key [{section}] {key}")
                run_vals[key] = _coerce(val, getattr(cfg, key))
    train_vals = asdict(cfg.train)
    if cp.has_section("train"):
        known = {f.name for f in fields(TrainConfig)}
        for key, val in cp.items("train"):
            if key not in known:
                raise ValueError(f"unknown key [train] {key}")
            train_vals[key] = _coerce(val, train_vals[key])
    for extra in set(cp.sections()) - set(_SECTIONS) - {"train"}:
        raise ValueError(f"unknown section [{extra}]")
    return RunConfig(**{**_run_fields(cfg), **run_vals}, train=TrainConfig(**train_vals))


def _run_fields(cfg):
    return {k: getattr(cfg, k) for keys in _SECTIONS.values() for k in keys}


def dump_config(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for section, keys in _SECTIONS.items():
        cp[section] = {k: str(getattr(cfg, k)) for k in keys}
    cp["train"] = {k: str(v) for k, v in asdict(cfg.train).items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
