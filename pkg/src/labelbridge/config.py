"""Run configuration files.

Grammar (parsed with :mod:`configparser`, no interpolation)::

    # comment
    [section]
    key = value

Sections ``model``, ``optim``, ``train`` and ``data`` carry run settings;
``synth`` carries a synthetic-corpus description (``preset`` plus optional
size overrides and JSON matrix overrides).  Unknown sections or keys are
errors.  Keys left out take their default and a notice is printed.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import sys

import numpy as np

from labelbridge.corpus.synth import PRESETS, SynthConfig
from labelbridge.trainer import DataSection, ModelSection, OptimSection, RunConfig, TrainSection

RUN_SECTIONS = {"model": ModelSection, "optim": OptimSection, "train": TrainSection, "data": DataSection}
SYNTH_SIZE_KEYS = ("n_y", "n_z", "n_val")
SYNTH_MATRIX_KEYS = ("start", "transition", "emission", "y_channel", "z_channel", "length_probs")
SYNTH_KEYS = ("preset", "seed", "disjoint") + SYNTH_SIZE_KEYS + SYNTH_MATRIX_KEYS


class ConfigError(ValueError):
    pass


def _read(path):
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=None, strict=True)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    return cp


def _convert(raw, kind, where):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind.__name__}") from None


def _notice(msg, stream):
    print(f"notice: {msg}", file=sys.stderr if stream is None else stream)


def load_run_config(path, notices=None) -> RunConfig:
    cp = _read(path)
    unknown = [s for s in cp.sections() if s not in RUN_SECTIONS and s != "synth"]
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {unknown}")
    parts = {}
    for name, cls in RUN_SECTIONS.items():
        fields = {f.name: f for f in dataclasses.fields(cls)}
        given = dict(cp[name]) if cp.has_section(name) else {}
        bad = sorted(set(given) - set(fields))
        if bad:
            raise ConfigError(f"{path}: unknown key(s) in [{name}]: {bad}")
        values = {}
        for key, f in fields.items():
            if key in given:
                values[key] = _convert(given[key], type(f.default), f"{path} [{name}] {key}")
            else:
                _notice(f"[{name}] {key} not set, using default {f.default!r}", notices)
        parts[name] = cls(**values)
    try:
        return RunConfig(**parts)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def dump_run_config(cfg: RunConfig):
    lines = []
    for name in RUN_SECTIONS:
        lines.append(f"[{name}]")
        for key, value in dataclasses.asdict(getattr(cfg, name)).items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def load_synth_config(path, notices=None):
    """Returns (SynthConfig, seed or None) from the ``[synth]`` section."""
    cp = _read(path)
    if not cp.has_section("synth"):
        raise ConfigError(f"{path}: no [synth] section")
    given = dict(cp["synth"])
    bad = sorted(set(given) - set(SYNTH_KEYS))
    if bad:
        raise ConfigError(f"{path}: unknown key(s) in [synth]: {bad}")
    preset = given.get("preset")
    if preset is None:
        # a full description, e.g. a generated manifest
        missing = [k for k in SYNTH_MATRIX_KEYS if k not in given]
        if missing:
            raise ConfigError(f"{path}: [synth] needs a preset or every matrix (missing {missing})")
        base = {f.name: f.default for f in dataclasses.fields(SynthConfig)
                if f.default is not dataclasses.MISSING}
    elif preset not in PRESETS:
        raise ConfigError(f"{path}: unknown preset {preset!r} (choose from {sorted(PRESETS)})")
    else:
        base = PRESETS[preset]().to_dict()
    for key in SYNTH_SIZE_KEYS:
        if key in given:
            base[key] = _convert(given[key], int, f"{path} [synth] {key}")
        else:
            _notice(f"[synth] {key} not set, using {base[key]}", notices)
    if "disjoint" in given:
        base["disjoint"] = _convert(given["disjoint"], bool, f"{path} [synth] disjoint")
    for key in SYNTH_MATRIX_KEYS:
        if key in given:
            try:
                base[key] = np.asarray(json.loads(given[key]), dtype=float).tolist()
            except (json.JSONDecodeError, ValueError):
                raise ConfigError(f"{path}: [synth] {key} must be a JSON numeric array") from None
    seed = _convert(given["seed"], int, f"{path} [synth] seed") if "seed" in given else None
    try:
        config = SynthConfig.from_dict(base)
        config.validate()
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None
    return config, seed
