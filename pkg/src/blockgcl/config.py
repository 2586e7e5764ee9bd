"""Plain-text ``key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored. Keys mirror the
fields of :class:`TrainConfig`, :class:`RunOptions` and :class:`SweepSpec`.
Lists are comma-separated.
"""

from __future__ import annotations

import dataclasses
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .trainer import TrainConfig


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None, source=None):
        self.key, self.line, self.source = key, line, source
        where = []
        if source is not None:
            where.append(str(source) + (f":{line}" if line is not None else ""))
        elif line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(", ".join(where) + ": " + message if where else message)


@dataclass
class RunOptions:
    """Everything a ``train`` run needs besides the training hyperparameters."""

    dataset: str = ""
    row_normalize: bool = False
    split_seed: int = 0
    probe_repeats: int = 5
    probe_seed: int = 0
    probe_epochs: int = 300
    probe_lr: float = 1e-2
    probe_weight_decay: float = 1e-4
    dump_embeddings: bool = False


@dataclass
class SweepSpec:
    datasets: list = field(default_factory=list)
    depths: list = field(default_factory=lambda: [2, 4, 8, 16, 32])
    block_sizes: list = field(default_factory=lambda: [1, 2, 4])
    modes: list = field(default_factory=lambda: ["blockwise", "end2end"])
    runs: int = 5
    base_seed: int = 0
    workers: int = 0
    base: TrainConfig = field(default_factory=TrainConfig)
    options: RunOptions = field(default_factory=RunOptions)

    def validate(self) -> None:
        for name in ("datasets", "depths", "block_sizes", "modes"):
            if not getattr(self, name):
                raise ConfigError("list must not be empty", key=name)
        if self.runs < 1:
            raise ConfigError("must be >= 1", key="runs")
        for d in self.depths:
            if d < 1:
                raise ConfigError(f"depth {d} must be >= 1", key="depths")
        for b in self.block_sizes:
            if b < 1:
                raise ConfigError(f"block size {b} must be >= 1", key="block_sizes")
        for m in self.modes:
            if m not in ("blockwise", "end2end"):
                raise ConfigError(f"unknown mode {m!r}", key="modes")


def parse_lines(text: str, source=None) -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno, source=source)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno, source=source)
        if key in out:
            raise ConfigError("duplicate key", key=key, line=lineno, source=source)
        out[key] = (value, lineno)
    return out


def _convert(text: str, tp, key: str, line: int, source):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if text.lower() in ("", "none", "auto"):
            return None
        tp = next(a for a in args if a is not type(None))
    try:
        if tp is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
        if tp is str:
            return text
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as {tp.__name__}", key, line, source) from None
    raise ConfigError(f"unsupported type {tp}", key, line, source)


def _fields(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


TRAIN_KEYS = _fields(TrainConfig)
RUN_KEYS = _fields(RunOptions)
SWEEP_LIST_KEYS = {"datasets": str, "depths": int, "block_sizes": int, "modes": str}
SWEEP_SCALAR_KEYS = {"runs": int, "base_seed": int, "workers": int}


def _build(cls, keys: dict, entries: dict, source, overrides=None):
    kw = {}
    lines = {}
    for key, tp in keys.items():
        if key in entries:
            text, line = entries[key]
            kw[key] = _convert(text, tp, key, line, source)
            lines[key] = line
    kw.update(overrides or {})
    try:
        return cls(**kw)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in keys if msg.startswith(k + " ")), None)
        raise ConfigError(msg, key=key, line=lines.get(key), source=source) from None


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=path) from None


def parse_train_config(text: str, source=None, overrides: dict | None = None):
    entries = parse_lines(text, source)
    unknown = set(entries) - set(TRAIN_KEYS) - set(RUN_KEYS)
    if unknown:
        key = min(unknown, key=lambda k: entries[k][1])
        raise ConfigError("unknown key", key=key, line=entries[key][1], source=source)
    cfg = _build(TrainConfig, TRAIN_KEYS, entries, source, overrides)
    opts = _build(RunOptions, RUN_KEYS, entries, source)
    if not opts.dataset:
        raise ConfigError("missing required key", key="dataset", source=source)
    return cfg, opts


def load_train_config(path, overrides: dict | None = None):
    return parse_train_config(_read(path), source=path, overrides=overrides)


def parse_sweep_spec(text: str, source=None, overrides: dict | None = None) -> SweepSpec:
    entries = parse_lines(text, source)
    allowed = set(TRAIN_KEYS) | set(RUN_KEYS) | set(SWEEP_LIST_KEYS) | set(SWEEP_SCALAR_KEYS)
    allowed.discard("dataset")
    unknown = set(entries) - allowed
    if unknown:
        key = min(unknown, key=lambda k: entries[k][1])
        raise ConfigError("unknown key", key=key, line=entries[key][1], source=source)
    spec_kw: dict = {}
    for key, tp in SWEEP_LIST_KEYS.items():
        if key in entries:
            text_, line = entries[key]
            items = [t.strip() for t in text_.split(",") if t.strip()]
            spec_kw[key] = [_convert(t, tp, key, line, source) for t in items]
    for key, tp in SWEEP_SCALAR_KEYS.items():
        if key in entries:
            text_, line = entries[key]
            spec_kw[key] = _convert(text_, tp, key, line, source)
    overrides = dict(overrides or {})
    if "seed" in overrides:
        spec_kw["base_seed"] = overrides.pop("seed")
    if "workers" in overrides:
        spec_kw["workers"] = overrides.pop("workers")
    train_entries = {k: v for k, v in entries.items() if k in TRAIN_KEYS}
    # depth and mode vary per cell; the base only has to be valid on its own
    base_over = {"depth": max(spec_kw.get("depths", [2]) + [1]), "mode": "blockwise", "block_size": 1}
    base_over.update(overrides)
    base = _build(TrainConfig, TRAIN_KEYS, train_entries, source, base_over)
    opts = _build(RunOptions, RUN_KEYS, {k: v for k, v in entries.items() if k in RUN_KEYS}, source)
    spec = SweepSpec(base=base, options=opts, **spec_kw)
    try:
        spec.validate()
    except ConfigError as exc:
        line = entries.get(exc.key, (None, None))[1]
        raise ConfigError(str(exc).split(": ", 1)[-1], key=exc.key, line=line, source=source) from None
    return spec


def load_sweep_spec(path, overrides: dict | None = None) -> SweepSpec:
    return parse_sweep_spec(_read(path), source=path, overrides=overrides)


def default_workers() -> int:
    return os.cpu_count() or 1
