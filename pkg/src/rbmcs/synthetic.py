"""Seeded synthetic ECG built from Gaussian P, QRS and T waves."""

from __future__ import annotations

import numpy as np

# (offset from R peak in s, width in s, amplitude in mV)
_WAVES = (
    (-0.20, 0.025, 0.15),   # P
    (-0.025, 0.010, -0.12),  # Q
    (0.0, 0.012, 1.20),     # R
    (0.025, 0.010, -0.25),  # S
    (0.30, 0.060, 0.35),    # T
)


def synthetic_ecg(n_samples, fs=360.0, heart_rate=70.0, rr_jitter=0.05, noise_std=0.01,
                  seed=None):
    """Return ``(signal_mV, r_peak_indices)``.

    RR intervals are drawn around ``60 / heart_rate`` with relative jitter
    ``rr_jitter``; wave amplitudes vary by a few percent per beat.  Use
    :func:`to_adu` for a digitised version.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples) / fs
    x = np.zeros(n_samples)
    mean_rr = 60.0 / heart_rate
    r_times = []
    now = 0.5 * mean_rr
    while now < t[-1] + 1.0:
        r_times.append(now)
        now += mean_rr * (1.0 + rr_jitter * rng.standard_normal())
    for r in r_times:
        scale = 1.0 + 0.05 * rng.standard_normal()
        for offset, width, amp in _WAVES:
            centre = r + offset
            lo = np.searchsorted(t, centre - 5 * width)
            hi = np.searchsorted(t, centre + 5 * width)
            if hi <= lo:
                continue
            x[lo:hi] += scale * amp * np.exp(-0.5 * ((t[lo:hi] - centre) / width) ** 2)
    # slow baseline wander plus white noise
    x += 0.05 * np.sin(2 * np.pi * 0.3 * t + rng.uniform(0, 2 * np.pi))
    x += noise_std * rng.standard_normal(n_samples)
    peaks = np.array([int(round(r * fs)) for r in r_times if 0 <= round(r * fs) < n_samples])
    return x, peaks


def to_adu(x_mv, gain=200.0, baseline=1024, bits=11):
    """Quantise millivolts to ADC units as a WFDB digitiser would."""
    adu = np.round(np.asarray(x_mv) * gain + baseline)
    return np.clip(adu, 0, 2 ** bits - 1).astype(np.int64)
