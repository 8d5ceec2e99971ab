"""Segmentation and reconstruction-quality metrics for ECG signals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps


@dataclass(frozen=True)
class PeakMatchResult:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self):
        """``nan`` when no test peaks were reported."""
        denom = self.tp + self.fp
        return self.tp / denom if denom else math.nan

    @property
    def recall(self):
        denom = self.tp + self.fn
        return self.tp / denom if denom else math.nan


def r_snr(x, x_hat):
    """Reconstruction SNR in dB, ``10 log10(||x||^2 / ||x - x_hat||^2)``."""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    num = float(np.sum(x ** 2))
    if num == 0:
        raise ValueError("R-SNR undefined for an all-zero reference signal")
    den = float(np.sum((x - x_hat) ** 2))
    if den == 0:
        return math.inf
    return 10.0 * math.log10(num / den)


def segment(x, n, stride=None):
    """Cut ``x`` into length-``n`` windows; a trailing partial window is dropped.

    ``stride`` defaults to ``n`` (non-overlapping).
    """
    x = np.asarray(x)
    if n < 1:
        raise ValueError("window length must be >= 1")
    stride = n if stride is None else int(stride)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    starts = range(0, x.shape[0] - n + 1, stride)
    return [x[s:s + n] for s in starts]


def concatenate(segments):
    if len(segments) == 0:
        return np.zeros(0)
    return np.concatenate(segments)


def _bandpass(x, fs, low=5.0, high=15.0):
    high = min(high, 0.45 * fs)
    sos = sps.butter(2, [low, high], btype="bandpass", fs=fs, output="sos")
    padlen = min(x.shape[0] - 1, 3 * 6)
    return sps.sosfiltfilt(sos, x, padlen=padlen)


def detect_qrs(x, fs):
    """R-peak indices from a Pan-Tompkins style detector.

    Zero-phase 5-15 Hz band-pass, five-point derivative, squaring and a
    150 ms moving-window integrator feed an adaptive two-level threshold
    with a 200 ms refractory period and RR-based search-back.  Each beat
    is finally placed at the largest band-passed magnitude within 100 ms
    of the integrator peak.  All thresholds scale with the signal, so the
    output does not depend on amplitude.
    """
    x = np.asarray(x, dtype=float)
    if fs <= 0:
        raise ValueError("fs must be positive")
    if x.shape[0] < 16 or np.ptp(x) == 0:
        return np.zeros(0, dtype=int)

    bp = _bandpass(x - np.mean(x), fs)
    deriv = np.convolve(bp, np.array([1.0, 2.0, 0.0, -2.0, -1.0]) * fs / 8.0, mode="same")
    win = max(1, int(round(0.150 * fs)))
    mwi = np.convolve(deriv ** 2, np.ones(win) / win, mode="same")
    if not np.any(mwi > 0):
        return np.zeros(0, dtype=int)

    refractory = int(round(0.200 * fs))
    cands, _ = sps.find_peaks(mwi, distance=max(1, refractory))
    if cands.size == 0:
        return np.zeros(0, dtype=int)

    learn = mwi[: int(2 * fs)]
    spki = 0.25 * learn.max()
    npki = 0.5 * learn.mean()
    thr1 = npki + 0.25 * (spki - npki)

    beats = []
    rr = []
    last_cand = -1
    for ci, idx in enumerate(cands):
        pk = mwi[idx]
        if beats and rr:
            # search-back over skipped candidates if the gap is too long
            rr_avg = np.mean(rr[-8:])
            if idx - beats[-1] > 1.66 * rr_avg:
                skipped = [c for c in cands[last_cand + 1:ci]
                           if c - beats[-1] >= refractory and mwi[c] > 0.5 * thr1]
                if skipped:
                    best = max(skipped, key=lambda c: mwi[c])
                    rr.append(best - beats[-1])
                    beats.append(int(best))
                    spki = 0.25 * mwi[best] + 0.75 * spki
        if pk > thr1 and (not beats or idx - beats[-1] >= refractory):
            if beats:
                rr.append(idx - beats[-1])
            beats.append(int(idx))
            spki = 0.125 * pk + 0.875 * spki
            last_cand = ci
        else:
            npki = 0.125 * pk + 0.875 * npki
        thr1 = npki + 0.25 * (spki - npki)

    half = int(round(0.100 * fs))
    peaks = []
    for b in beats:
        lo, hi = max(0, b - half), min(x.shape[0], b + half + 1)
        p = lo + int(np.argmax(np.abs(bp[lo:hi])))
        if not peaks or p - peaks[-1] >= refractory:
            peaks.append(p)
    return np.array(peaks, dtype=int)


def match_peaks(ref, test, tol=4):
    """One-to-one matching of sorted peak lists within ``+-tol`` samples.

    A single merge-style pass pairs peaks in index order; it yields a
    maximum matching for equal-width windows and is symmetric in its
    arguments (swapping them swaps FP and FN).
    """
    ref = np.sort(np.asarray(ref, dtype=int))
    test = np.sort(np.asarray(test, dtype=int))
    i = j = tp = 0
    while i < ref.size and j < test.size:
        if abs(int(ref[i]) - int(test[j])) <= tol:
            tp += 1
            i += 1
            j += 1
        elif test[j] < ref[i]:
            j += 1
        else:
            i += 1
    return PeakMatchResult(tp=tp, fp=int(test.size - tp), fn=int(ref.size - tp))


def psim(orig_metric, recon_metric):
    """Percentage similarity ``100 - |y - y_bar| / y * 100``; may be negative."""
    if orig_metric == 0:
        raise ValueError("PSim undefined for a zero reference metric")
    return 100.0 - abs(orig_metric - recon_metric) / orig_metric * 100.0
