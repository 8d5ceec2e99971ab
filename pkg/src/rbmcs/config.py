"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  Lists are comma separated.
Every key, its type and default is listed in :data:`FIELDS`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _strs(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    # data
    source: str = "synthetic"           # synthetic | wfdb
    data_dir: str = ""
    train_records: tuple = ()
    test_records: tuple = ()
    signal_index: int = 0
    units: str = "adu"                  # adu | mv
    synthetic_seconds: float = 120.0
    synthetic_fs: float = 360.0
    # segmentation
    window: int = 128
    train_stride: int = 0               # 0 -> window // 4
    max_train_segments: int = 2000      # 0 -> all
    max_test_segments: int = 0          # per record, 0 -> all
    # sparsifier
    transform: str = "wavelet"          # wavelet | dictionary
    levels: int = 4
    atoms: int = 0                      # 0 -> 3 * window
    sparsity: int = 0                   # 0 -> sparsity_ratio * window
    sparsity_ratio: float = 0.0         # 0 -> 0.1 (wavelet) / 0.08 (dictionary)
    ksvd_iters: int = 30
    # rbm
    hidden: int = 0                     # 0 -> number of atoms
    rbm_epochs: int = 50
    rbm_learning_rate: float = 0.05
    rbm_batch_size: int = 100
    rbm_weight_decay: float = 1e-4
    # sensing / protocol
    m_ratios: tuple = (0.3,)
    sigma_n_sq: float = 0.25
    repetitions: int = 1
    seed: int = 0
    algorithms: tuple = ("rbm-omp-like", "omp")
    model: str = ""                     # optional pre-trained CSRBM1 file
    timing: bool = True

    @property
    def n_atoms(self):
        if self.transform == "wavelet":
            return self.window
        return self.atoms or 3 * self.window

    @property
    def sparsity_k(self):
        if self.sparsity:
            return self.sparsity
        ratio = self.sparsity_ratio or (0.1 if self.transform == "wavelet" else 0.08)
        return max(1, int(round(ratio * self.window)))

    @property
    def n_hidden(self):
        return self.hidden or self.n_atoms

    @property
    def stride(self):
        return self.train_stride or max(1, self.window // 4)

    def validate(self):
        if self.source not in ("synthetic", "wfdb"):
            raise ConfigError(f"source must be synthetic or wfdb, got {self.source!r}")
        if self.transform not in ("wavelet", "dictionary"):
            raise ConfigError(f"transform must be wavelet or dictionary, got {self.transform!r}")
        if self.units not in ("adu", "mv"):
            raise ConfigError(f"units must be adu or mv, got {self.units!r}")
        if self.source == "wfdb" and not (self.train_records or self.model):
            raise ConfigError("wfdb source needs train_records or a pre-trained model")
        if self.source == "wfdb" and not self.test_records:
            raise ConfigError("wfdb source needs test_records")
        if self.transform == "wavelet" and self.window % (2 ** self.levels):
            raise ConfigError(f"window {self.window} not divisible by 2**{self.levels}")
        for alg in self.algorithms:
            if alg not in ("rbm-omp-like", "omp"):
                raise ConfigError(f"unknown algorithm {alg!r}")
        if not self.m_ratios or any(not 0 < r <= 1 for r in self.m_ratios):
            raise ConfigError("m_ratios must lie in (0, 1]")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        return self


_PARSERS = {int: int, float: float, str: str, bool: _bool}
FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name, text):
    default = FIELDS[name].default
    if isinstance(default, tuple):
        return _floats(text) if name == "m_ratios" else _strs(text)
    return _PARSERS[type(default)](text.strip())


def parse_config(text, overrides=None):
    values = {}
    items = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        items.append((f"line {lineno}", key, val))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, val = (p.strip() for p in item.split("=", 1))
        items.append((f"override {item!r}", key, val))
    for where, key, val in items:
        if key not in FIELDS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key}: {exc}") from exc
    return ExperimentConfig(**values).validate()


def load_config(path, overrides=None):
    return parse_config(Path(path).read_text(), overrides)


def dump_config(cfg):
    lines = []
    for name in FIELDS:
        val = getattr(cfg, name)
        if isinstance(val, tuple):
            val = ",".join(str(v) for v in val)
        elif isinstance(val, bool):
            val = "true" if val else "false"
        lines.append(f"{name} = {val}")
    return "\n".join(lines) + "\n"
