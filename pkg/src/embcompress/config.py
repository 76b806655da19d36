"""Run configuration: an INI file with sections, overridable from the environment.

Schema (every key optional)::

    [run]
    methods = full, double_hash     ; comma separated
    budgets = 50%, 10%, 1%, 0.1%    ; percentages or fractions
    seed = 0
    out = runs
    jobs = 1

    [data]
    source = synthetic              ; synthetic | csv | checkpoint
    path =                          ; csv file or dataset checkpoint
    samples = 50000
    cardinalities = 10000, 5000, ...
    zipf_s = 1.4
    dense_dim = 4
    label = label                   ; csv only
    categorical = C1, C2            ; csv only
    numeric = I1                    ; csv only
    log_transform = false           ; csv only

    [model]
    d = 16
    lr = 0.001
    batch_size = 128
    hidden = 32
    epochs = 3
    patience = 3

    [posttrain]
    matrix =                        ; dense matrix checkpoint or raw f32 + .shape
    k = 10
    queries = 100
    latency_batch = 1024

Any key can be overridden by an environment variable named
``EMSQ_<SECTION>__<KEY>``, e.g. ``EMSQ_RUN__METHODS=full``.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields

from .core.errors import ConfigError
from .data.synthetic import DEFAULT_CARDINALITIES

ENV_PREFIX = "EMSQ_"
DEFAULT_BUDGETS = (0.5, 0.1, 0.01, 0.001)


def parse_budget(text) -> float:
    """``"50%"`` or ``"0.5"`` -> 0.5."""
    s = str(text).strip()
    try:
        value = float(s[:-1]) / 100.0 if s.endswith("%") else float(s)
    except ValueError:
        raise ConfigError(f"cannot read budget {text!r}") from None
    if not 0 < value <= 1:
        raise ConfigError(f"budget {text!r} must lie in (0%, 100%]")
    return value


def split_list(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(t).strip() for t in text if str(t).strip()]
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"cannot read boolean {text!r}")


@dataclass
class DataConfig:
    source: str = "synthetic"
    path: str = ""
    samples: int = 50_000
    cardinalities: tuple[int, ...] = DEFAULT_CARDINALITIES
    zipf_s: float = 1.4
    dense_dim: int = 4
    label: str = "label"
    categorical: tuple[str, ...] = ()
    numeric: tuple[str, ...] = ()
    log_transform: bool = False


@dataclass
class ModelConfig:
    d: int = 16
    lr: float = 1e-3
    batch_size: int = 128
    hidden: int = 32
    epochs: float = 3.0
    patience: int = 3


@dataclass
class PosttrainConfig:
    matrix: str = ""
    k: int = 10
    queries: int = 100
    latency_batch: int = 1024


@dataclass
class RunConfig:
    """Everything that determines a run; serialized into every report line."""

    methods: tuple[str, ...] = ("full",)
    budgets: tuple[float, ...] = DEFAULT_BUDGETS
    seed: int = 0
    out: str = "runs"
    jobs: int = 1
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    posttrain: PosttrainConfig = field(default_factory=PosttrainConfig)

    def validate(self) -> "RunConfig":
        if not self.methods:
            raise ConfigError("the method list is empty")
        if not self.budgets:
            raise ConfigError("the budget list is empty")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.data.source not in ("synthetic", "csv", "checkpoint"):
            raise ConfigError(f"unknown data source {self.data.source!r}")
        if self.data.source == "synthetic" and self.data.samples < 1:
            raise ConfigError("sample count must be >= 1")
        if self.data.source != "synthetic" and not self.data.path:
            raise ConfigError(f"data source {self.data.source!r} needs a path")
        if self.model.d < 1 or self.model.batch_size < 1 or self.model.epochs <= 0:
            raise ConfigError("need d >= 1, batch_size >= 1 and positive epochs")
        if self.posttrain.k < 1 or self.posttrain.queries < 1 or self.posttrain.latency_batch < 1:
            raise ConfigError("need k, queries and latency_batch >= 1")
        return self

    def to_dict(self) -> dict:
        out = asdict(self)
        out["methods"] = list(self.methods)
        out["budgets"] = list(self.budgets)
        for key in ("cardinalities", "categorical", "numeric"):
            out["data"][key] = list(out["data"][key])
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        sections = {"data": DataConfig, "model": ModelConfig, "posttrain": PosttrainConfig}
        kw = {}
        for name, typ in sections.items():
            values = dict(raw.pop(name, {}) or {})
            kw[name] = typ(**{f.name: _coerce(f, values[f.name]) for f in fields(typ) if f.name in values})
        top = {f.name: _coerce(f, raw[f.name]) for f in fields(cls) if f.name in raw and f.name not in sections}
        return cls(**top, **kw)


_LISTS = {"methods": str, "categorical": str, "numeric": str, "cardinalities": int}


def _coerce(f, value):
    if f.name in _LISTS:
        return tuple(_LISTS[f.name](v) for v in split_list(value))
    if f.name == "budgets":
        return tuple(parse_budget(v) for v in split_list(value))
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            return value if isinstance(value, bool) else _bool(value)
    except ValueError:
        raise ConfigError(f"cannot read {f.name} = {value!r}") from None
    return str(value)


def load_config(path=None, env=None, **overrides) -> RunConfig:
    """Read an INI file (if given), apply environment overrides, then
    explicit keyword overrides for ``[run]`` keys; validate."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raw: dict = {name: dict(parser[name]) for name in parser.sections() if name != "run"}
    if parser.has_section("run"):
        raw.update(parser["run"])
    env = os.environ if env is None else env
    for key, value in env.items():
        if not key.startswith(ENV_PREFIX) or "__" not in key:
            continue
        section, name = key[len(ENV_PREFIX):].lower().split("__", 1)
        if section == "run":
            raw[name] = value
        else:
            raw.setdefault(section, {})[name] = value
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name, typ in (("data", DataConfig), ("model", ModelConfig), ("posttrain", PosttrainConfig)):
        bad = set(raw.get(name, {})) - {f.name for f in fields(typ)}
        if bad:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
    return RunConfig.from_dict(raw).validate()
