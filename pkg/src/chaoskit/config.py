"""Pipeline configuration and its flat ``key = value`` file format.

One setting per line, ``#`` starts a comment. ``auto`` stands for "let
the owning module decide" (``None`` in Python); lists are comma
separated; booleans are ``true``/``false``. Every key can also be given
as a CLI flag of the same name (``--fnn-r`` or ``--fnn_r``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import determinism, embedding, lyapunov


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    inputs: list = field(default_factory=list)
    input_kind: str = "prices"
    date_column: str = "date"
    price_column: str = "price"
    value_column: str = "value"
    date_format: Optional[str] = None
    dayfirst: bool = False

    tau: Optional[int] = None
    lag_method: str = embedding.DEFAULT_LAG_METHOD
    m: Optional[int] = None
    fnn_r: float = embedding.DEFAULT_R
    fnn_sigma: Optional[float] = None
    fnn_theiler: Optional[int] = None
    fnn_star: float = embedding.DEFAULT_FNN_STAR
    m_max: int = embedding.DEFAULT_M_MAX

    mle_eps: Optional[float] = None
    mle_theiler: Optional[int] = None
    max_delta_n: int = lyapunov.DEFAULT_MAX_DELTA_N
    min_neighbors: int = lyapunov.DEFAULT_MIN_NEIGHBORS
    fit_window: int = lyapunov.DEFAULT_FIT_WINDOW
    fit_k1: Optional[int] = None
    fit_k2: Optional[int] = None
    mle_metric: str = "max"

    bins_per_axis: int = determinism.DEFAULT_BINS
    n_min: int = determinism.DEFAULT_N_MIN
    projection: str = "full"
    dump_boxes: bool = False

    output_dir: str = "chaoskit-out"
    output_format: str = "csv"
    jobs: int = 1
    compare: str = "corn/oats"

    def validate(self):
        def check(cond, msg):
            if not cond:
                raise ConfigError(msg)

        check(self.input_kind in ("prices", "series"), f"input_kind must be prices or series, got {self.input_kind!r}")
        check(self.lag_method in embedding.LAG_METHODS, f"unknown lag_method {self.lag_method!r}")
        check(self.tau is None or self.tau >= 1, "tau must be >= 1")
        check(self.m is None or self.m >= 1, "m must be >= 1")
        check(self.fnn_r > 1, "fnn_r must exceed 1")
        check(self.fnn_sigma is None or self.fnn_sigma > 0, "fnn_sigma must be positive")
        check(self.fnn_theiler is None or self.fnn_theiler >= 0, "fnn_theiler must be >= 0")
        check(0 < self.fnn_star < 1, "fnn_star must lie in (0, 1)")
        check(self.m_max >= 1, "m_max must be >= 1")
        check(self.mle_eps is None or self.mle_eps > 0, "mle_eps must be positive")
        check(self.mle_theiler is None or self.mle_theiler >= 0, "mle_theiler must be >= 0")
        check(self.max_delta_n >= 3, "max_delta_n must be >= 3")
        check(self.min_neighbors >= 1, "min_neighbors must be >= 1")
        check(3 <= self.fit_window <= self.max_delta_n, "fit_window must lie in [3, max_delta_n]")
        check((self.fit_k1 is None) == (self.fit_k2 is None), "fit_k1 and fit_k2 go together")
        if self.fit_k1 is not None:
            check(0 <= self.fit_k1 < self.fit_k2 <= self.max_delta_n,
                  "need 0 <= fit_k1 < fit_k2 <= max_delta_n")
            check(self.fit_k2 - self.fit_k1 >= 2, "fit range needs at least 3 points")
        check(self.mle_metric in ("max", "euclidean"), "mle_metric must be max or euclidean")
        check(self.bins_per_axis >= 2, "bins_per_axis must be >= 2")
        check(self.n_min >= 2, "n_min must be >= 2")
        check(self.projection in ("full", "2d"), "projection must be full or 2d")
        check(self.output_format in ("csv", "json"), "output_format must be csv or json")
        check(self.jobs >= 1, "jobs must be >= 1")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_text(self):
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict, base=None):
        cfg = dataclasses.replace(base) if base is not None else cls()
        kinds = field_kinds()
        for key, value in values.items():
            if key not in kinds:
                raise ConfigError(f"unknown configuration key {key!r}")
            setattr(cfg, key, parse_value(kinds[key], value, key))
        return cfg

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)


def field_kinds():
    """Map of key -> (base type, optional, is_list)."""
    kinds = {}
    for f in fields(PipelineConfig):
        ann = str(f.type)
        optional = ann.startswith("Optional")
        if ann == "list":
            kinds[f.name] = (str, False, True)
            continue
        inner = ann[len("Optional["):-1] if optional else ann
        kinds[f.name] = ({"int": int, "float": float, "bool": bool, "str": str}[inner], optional, False)
    return kinds


def parse_value(kind, text, key="value"):
    typ, optional, is_list = kind
    text = text.strip()
    if is_list:
        return [item.strip() for item in text.split(",") if item.strip()]
    if optional and text.lower() in ("auto", ""):
        return None
    try:
        if typ is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        return typ(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {typ.__name__}") from None


def _format(value):
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)
