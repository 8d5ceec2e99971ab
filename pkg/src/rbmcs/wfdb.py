"""Minimal PhysioNet WFDB reader: header text and format-212 signal files."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_GAIN = 200.0


class WfdbError(ValueError):
    pass


@dataclass(frozen=True)
class SignalSpec:
    filename: str
    fmt: int
    gain: float
    baseline: int
    units: str
    adc_resolution: int
    adc_zero: int
    description: str = ""


@dataclass(frozen=True)
class RecordMeta:
    record_name: str
    n_signals: int
    sampling_freq: float
    n_samples: int
    signals: tuple = field(default=())


_SIG_FMT = re.compile(r"^(\d+)(?:x\d+)?(?::\d+)?(?:\+\d+)?$")
_GAIN = re.compile(r"^([-+0-9.eE]+)(?:\(([-+]?\d+)\))?(?:/(\S+))?$")


def parse_wfdb_header(text):
    """Parse the record line and signal-specification lines of a ``.hea`` file."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        lines.append((lineno, stripped))
    if not lines:
        raise WfdbError("empty header")

    lineno, record_line = lines[0]
    parts = record_line.split()
    try:
        name = parts[0].split("/")[0]
        n_signals = int(parts[1])
        fs = float(parts[2].split("/")[0].split("(")[0]) if len(parts) > 2 else 250.0
        n_samples = int(parts[3]) if len(parts) > 3 else 0
    except (IndexError, ValueError) as exc:
        raise WfdbError(f"line {lineno}: malformed record line {record_line!r}") from exc

    signals = []
    for lineno, line in lines[1:1 + n_signals]:
        tok = line.split(maxsplit=8)
        try:
            m = _SIG_FMT.match(tok[1])
            if m is None:
                raise ValueError(tok[1])
            fmt = int(m.group(1))
            gain, baseline, units = DEFAULT_GAIN, None, "mV"
            if len(tok) > 2:
                g = _GAIN.match(tok[2])
                if g is None:
                    raise ValueError(tok[2])
                gain = float(g.group(1)) or DEFAULT_GAIN
                baseline = int(g.group(2)) if g.group(2) is not None else None
                units = g.group(3) or units
            adc_res = int(tok[3]) if len(tok) > 3 else 12
            adc_zero = int(tok[4]) if len(tok) > 4 else 0
            description = tok[8] if len(tok) > 8 else ""
        except (IndexError, ValueError) as exc:
            raise WfdbError(f"line {lineno}: malformed signal line {line!r}") from exc
        if gain <= 0:
            raise WfdbError(f"line {lineno}: gain must be positive")
        signals.append(SignalSpec(
            filename=tok[0], fmt=fmt, gain=gain,
            baseline=adc_zero if baseline is None else baseline,
            units=units, adc_resolution=adc_res, adc_zero=adc_zero,
            description=description))
    if len(signals) != n_signals:
        raise WfdbError(f"header declares {n_signals} signals but lists {len(signals)}")
    return RecordMeta(record_name=name, n_signals=n_signals, sampling_freq=fs,
                      n_samples=n_samples, signals=tuple(signals))


def decode_format212(data, n_signals=2):
    """Unpack 12-bit two's-complement pairs; returns an ``(n_signals, n)`` int array."""
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    if buf.size % 3:
        raise WfdbError(f"format 212 data length {buf.size} is not a multiple of 3")
    triples = buf.reshape(-1, 3).astype(np.int32)
    s0 = ((triples[:, 1] & 0x0F) << 8) | triples[:, 0]
    s1 = ((triples[:, 1] & 0xF0) << 4) | triples[:, 2]
    flat = np.empty(2 * triples.shape[0], dtype=np.int32)
    flat[0::2] = s0
    flat[1::2] = s1
    flat[flat >= 2048] -= 4096
    usable = flat.size - flat.size % n_signals
    return flat[:usable].reshape(-1, n_signals).T.copy()


def encode_format212(samples):
    """Inverse of :func:`decode_format212` for an ``(n_signals, n)`` array."""
    samples = np.asarray(samples, dtype=np.int64)
    flat = samples.T.ravel()
    if np.any(flat < -2048) or np.any(flat > 2047):
        raise WfdbError("sample out of 12-bit range")
    if flat.size % 2:
        flat = np.append(flat, 0)
    u = (flat & 0xFFF).reshape(-1, 2)
    out = np.empty((u.shape[0], 3), dtype=np.uint8)
    out[:, 0] = u[:, 0] & 0xFF
    out[:, 1] = ((u[:, 0] >> 8) & 0x0F) | ((u[:, 1] >> 4) & 0xF0)
    out[:, 2] = u[:, 1] & 0xFF
    return out.tobytes()


def to_millivolts(adu, meta):
    adu = np.asarray(adu, dtype=float)
    gains = np.array([s.gain for s in meta.signals])[:, None]
    baselines = np.array([s.baseline for s in meta.signals], dtype=float)[:, None]
    return (adu - baselines) / gains


def read_record(directory, record_name, physical=False):
    """Load a format-212 record; returns ``(meta, signals)`` with one row per signal."""
    directory = Path(directory)
    hea = directory / f"{record_name}.hea"
    if not hea.exists():
        raise FileNotFoundError(hea)
    meta = parse_wfdb_header(hea.read_text())
    for spec in meta.signals:
        if spec.fmt != 212:
            raise WfdbError(f"unsupported WFDB format {spec.fmt} (only 212 is decoded)")
    files = {s.filename for s in meta.signals}
    if len(files) != 1:
        raise WfdbError("signals spread over several files are not supported")
    dat = directory / files.pop()
    adu = decode_format212(dat.read_bytes(), meta.n_signals)
    if meta.n_samples:
        adu = adu[:, :meta.n_samples]
    return meta, (to_millivolts(adu, meta) if physical else adu)


def write_record(directory, record_name, adu, fs, gain=DEFAULT_GAIN, baseline=1024, adc_res=11):
    """Write a format-212 record (used for fixtures and round-trip tests)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    adu = np.atleast_2d(np.asarray(adu, dtype=np.int64))
    n_sig, n = adu.shape
    dat_name = f"{record_name}.dat"
    (directory / dat_name).write_bytes(encode_format212(adu))
    lines = [f"{record_name} {n_sig} {fs:g} {n}"]
    for i in range(n_sig):
        checksum = int(adu[i].sum()) & 0xFFFF
        lines.append(f"{dat_name} 212 {gain:g}({baseline})/mV {adc_res} {baseline} "
                     f"{int(adu[i, 0])} {checksum} 0 signal {i}")
    (directory / f"{record_name}.hea").write_text("\n".join(lines) + "\n")
    return directory / f"{record_name}.hea"
