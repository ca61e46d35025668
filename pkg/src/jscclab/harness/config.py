"""Plain-text INI config files.

Sections::

    [model]        preset, or any CodecConfig field (depths, widths, window, ...)
    [train]        mode, seed, dataset, crop
    [phase.<n>]    TrainPhaseConfig fields, applied in order of <n>
    [experiment]   ExperimentSpec fields

Lists are comma separated.  Unknown sections or keys raise ``ConfigError``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..codec import CodecConfig, preset
from ..training import TrainPhaseConfig
from .experiments import ExperimentSpec


class ConfigError(ValueError):
    pass


TRAIN_KEYS = {"mode": str, "seed": int, "dataset": str, "crop": int}


@dataclass
class RunConfig:
    codec: Optional[CodecConfig] = None
    phases: list = field(default_factory=list)
    experiment: Optional[ExperimentSpec] = None
    train: dict = field(default_factory=dict)


def _coerce(value: str, target):
    """Convert ``value`` to the type of the dataclass default ``target``."""
    if isinstance(target, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(target, int):
        return int(value)
    if isinstance(target, float):
        return float(value)
    if isinstance(target, tuple) or target is None and "," in value:
        items = [v.strip() for v in value.split(",") if v.strip()]
        out = []
        for v in items:
            try:
                out.append(int(v))
            except ValueError:
                try:
                    out.append(float(v))
                except ValueError:
                    out.append(v)
        return tuple(out)
    return value.strip()


def _fill(cls, section: configparser.SectionProxy, skip=()):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        f = fields[key]
        default = f.default if f.default is not dataclasses.MISSING else (
            f.default_factory() if f.default_factory is not dataclasses.MISSING else None)
        if default is None and key in ("heads", "conv_layers"):
            default = ()
        try:
            kwargs[key] = _coerce(raw, default)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r} in [{section.name}]: {raw!r}") from exc
    return kwargs


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not parser.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config {path}")
    return parse_config(parser)


def parse_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(text)
    return parse_config(parser)


def parse_config(parser: configparser.ConfigParser) -> RunConfig:
    run = RunConfig()
    phases = []
    for name in parser.sections():
        sec = parser[name]
        try:
            if name == "model":
                kwargs = _fill(CodecConfig, sec, skip=("preset",))
                run.codec = preset(sec["preset"], **kwargs) if "preset" in sec else CodecConfig(**kwargs)
            elif name == "train":
                for key, raw in sec.items():
                    if key not in TRAIN_KEYS:
                        raise ConfigError(f"unknown key {key!r} in [train]")
                    run.train[key] = TRAIN_KEYS[key](raw)
            elif name.startswith("phase."):
                order = int(name.split(".", 1)[1])
                kwargs = _fill(TrainPhaseConfig, sec)
                kwargs.setdefault("name", name.split(".", 1)[1])
                phases.append((order, TrainPhaseConfig(**kwargs)))
            elif name == "experiment":
                run.experiment = ExperimentSpec(**_fill(ExperimentSpec, sec))
            else:
                raise ConfigError(f"unknown section [{name}]")
        except ConfigError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid [{name}]: {exc}") from exc
    run.phases = [p for _, p in sorted(phases, key=lambda t: t[0])]
    return run
