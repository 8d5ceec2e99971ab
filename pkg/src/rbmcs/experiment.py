"""End-to-end experiment: train the prior, sense, recover, score, write CSV."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dictlearn, evaluation, rbm as rbm_mod
from .persistence import ModelBundle, load_model
from .recovery import build_recovery_model, omp_recover, rbm_omp_like
from .sensing import build_noise_model, gen_bernoulli_matrix, measure
from .synthetic import synthetic_ecg, to_adu
from .transforms import wavelet_model
from .wfdb import parse_wfdb_header, read_record

log = logging.getLogger(__name__)

CSV_COLUMNS = ("algorithm", "transform", "M_over_N", "repetition", "record", "r_snr_mean",
               "precision", "recall", "psim_precision", "psim_recall", "wall_time_ms")


class DataError(RuntimeError):
    pass


@dataclass
class Recording:
    name: str
    signal: np.ndarray
    fs: float
    peaks: np.ndarray | None = None   # reference annotations when known


def _derive_seed(*keys):
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def check_data(cfg):
    """Fail before any computation if a referenced record is missing or unusable."""
    if cfg.model and not Path(cfg.model).exists():
        raise DataError(f"model file not found: {cfg.model}")
    if cfg.source != "wfdb":
        return
    root = Path(cfg.data_dir)
    names = set(cfg.test_records) | (set() if cfg.model else set(cfg.train_records))
    for name in sorted(names):
        hea = root / f"{name}.hea"
        if not hea.exists():
            raise DataError(f"record header not found: {hea}")
        meta = parse_wfdb_header(hea.read_text())
        for spec in meta.signals:
            if not (root / spec.filename).exists():
                raise DataError(f"signal file not found: {root / spec.filename}")
        if cfg.signal_index >= meta.n_signals:
            raise DataError(f"record {name} has no signal {cfg.signal_index}")


def _load_wfdb(cfg, name):
    meta, adu = read_record(cfg.data_dir, name)
    row = adu[cfg.signal_index].astype(float)
    if cfg.units == "mv":
        spec = meta.signals[cfg.signal_index]
        row = (row - spec.baseline) / spec.gain
    return Recording(name, row, meta.sampling_freq)


def _load_synthetic(cfg, name, seed):
    n = int(cfg.synthetic_seconds * cfg.synthetic_fs)
    x, peaks = synthetic_ecg(n, fs=cfg.synthetic_fs, seed=seed)
    if cfg.units == "adu":
        x = to_adu(x).astype(float)
    return Recording(name, x, cfg.synthetic_fs, peaks)


def load_recordings(cfg):
    """Return ``(train, test)`` lists of :class:`Recording`."""
    if cfg.source == "synthetic":
        train = [] if cfg.model else [_load_synthetic(cfg, "synthetic-train", _derive_seed(cfg.seed, 1))]
        test = [_load_synthetic(cfg, "synthetic", _derive_seed(cfg.seed, 2))]
        return train, test
    train = [] if cfg.model else [_load_wfdb(cfg, r) for r in cfg.train_records]
    test = [_load_wfdb(cfg, r) for r in cfg.test_records]
    return train, test


def training_matrix(cfg, recordings):
    """Stack equally many overlapping windows from every training recording."""
    per_record = [evaluation.segment(r.signal, cfg.window, cfg.stride) for r in recordings]
    count = min(len(s) for s in per_record)
    if cfg.max_train_segments:
        count = min(count, max(1, cfg.max_train_segments // len(recordings)))
    if count == 0:
        raise DataError("training recordings are shorter than one window")
    cols = []
    for segs in per_record:
        idx = np.linspace(0, len(segs) - 1, count).round().astype(int)
        cols.extend(segs[i] for i in idx)
    return np.column_stack(cols)


def train_bundle(cfg, G):
    """Learn the sparsifier (if needed), training statistics and the RBM."""
    k = cfg.sparsity_k
    if cfg.transform == "dictionary":
        sparsifier, codes, _ = dictlearn.ksvd_train(G, cfg.n_atoms, k, cfg.ksvd_iters,
                                                    seed=_derive_seed(cfg.seed, 3))
    else:
        sparsifier = wavelet_model(cfg.window, cfg.levels)
        codes = dictlearn.top_k_codes(G, cfg.levels, k)
    stats = dictlearn.training_statistics(G, sparsifier, codes)
    hyper = rbm_mod.CDHyperparameters(learning_rate=cfg.rbm_learning_rate,
                                      batch_size=cfg.rbm_batch_size, epochs=cfg.rbm_epochs,
                                      weight_decay=cfg.rbm_weight_decay)
    model = rbm_mod.cd_train(stats.patterns, cfg.n_hidden, hyper, seed=_derive_seed(cfg.seed, 4))
    return ModelBundle(sparsifier=sparsifier, rbm=model,
                       coeff_variances=stats.coeff_variances,
                       repr_error_variances=stats.repr_error_variances,
                       never_active=stats.never_active,
                       config={"window": cfg.window, "sparsity_k": k,
                               "transform": cfg.transform, "n_hidden": cfg.n_hidden})


def recover_record(recovery_model, segments, algorithm, sigma_n_sq, seed):
    """Sense and recover every segment; returns the reconstructed segments."""
    out = []
    for i, x in enumerate(segments):
        y = measure(recovery_model.sensing, x, sigma_n_sq, seed=_derive_seed(seed, i))
        if algorithm == "rbm-omp-like":
            res = rbm_omp_like(recovery_model, y)
        else:
            res = omp_recover(recovery_model, y)
        out.append(res.x_hat)
    return out


def _qrs_scores(rec, covered, recon):
    truth = rec.peaks
    if truth is None:
        truth = evaluation.detect_qrs(covered, rec.fs)
    else:
        truth = truth[truth < covered.shape[0]]
    orig = evaluation.match_peaks(truth, evaluation.detect_qrs(covered, rec.fs))
    test = evaluation.match_peaks(truth, evaluation.detect_qrs(recon, rec.fs))

    def sim(a, b):
        if math.isnan(a) or math.isnan(b) or a == 0:
            return math.nan
        return evaluation.psim(a, b)

    return (test.precision, test.recall,
            sim(orig.precision, test.precision), sim(orig.recall, test.recall))


def run_experiment(cfg, bundle=None):
    """Run the configured sweep and return CSV rows (dicts keyed by column)."""
    cfg.validate()
    check_data(cfg)
    train, test = load_recordings(cfg)

    if bundle is None and cfg.model:
        bundle = load_model(cfg.model)
    if bundle is None:
        bundle = train_bundle(cfg, training_matrix(cfg, train))
    n = bundle.sparsifier.n_samples
    if n != cfg.window:
        raise DataError(f"model window {n} does not match configured window {cfg.window}")
    k = int(bundle.config.get("sparsity_k", cfg.sparsity_k))

    test_segments = {}
    for rec in test:
        segs = evaluation.segment(rec.signal, n)
        if cfg.max_test_segments:
            segs = segs[:cfg.max_test_segments]
        if not segs:
            raise DataError(f"record {rec.name} is shorter than one window")
        test_segments[rec.name] = segs

    rows = []
    for ratio in cfg.m_ratios:
        m = max(1, int(round(ratio * n)))
        for rep in range(cfg.repetitions):
            op = gen_bernoulli_matrix(m, n, seed=_derive_seed(cfg.seed, 5, m, rep))
            noise = build_noise_model(op, bundle.repr_error_variances, cfg.sigma_n_sq)
            model = build_recovery_model(op, bundle.sparsifier, noise, bundle.rbm,
                                         bundle.coeff_variances, k, bundle.never_active)
            for alg_pos, alg in enumerate(cfg.algorithms):
                for rec_pos, rec in enumerate(test):
                    segs = test_segments[rec.name]
                    start = time.perf_counter()
                    recon = recover_record(model, segs, alg, cfg.sigma_n_sq,
                                           _derive_seed(cfg.seed, 6, m, rep, rec_pos))
                    elapsed = (time.perf_counter() - start) * 1e3 if cfg.timing else 0.0
                    snrs = [evaluation.r_snr(x, xh) for x, xh in zip(segs, recon) if np.any(x)]
                    covered = evaluation.concatenate(segs)
                    prec, rec_, ps_p, ps_r = _qrs_scores(rec, covered, evaluation.concatenate(recon))
                    rows.append({
                        "algorithm": alg, "transform": bundle.sparsifier.kind,
                        "M_over_N": m / n, "repetition": rep, "record": rec.name,
                        "r_snr_mean": float(np.mean(snrs)) if snrs else math.nan,
                        "precision": prec, "recall": rec_,
                        "psim_precision": ps_p, "psim_recall": ps_r,
                        "wall_time_ms": elapsed,
                        "_key": (alg_pos, m, rep, rec_pos),
                    })
                    log.info("%s M/N=%.3f rep=%d %s: R-SNR %.2f dB", alg, m / n, rep,
                             rec.name, rows[-1]["r_snr_mean"])
    rows.sort(key=lambda r: r.pop("_key"))
    return rows


def _fmt(value):
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ("nan" if math.isnan(value) else str(value))
    return str(value)


def write_csv(rows, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def summarize(rows):
    """Macro averages (mean over records) per algorithm and M/N."""
    groups = {}
    for row in rows:
        groups.setdefault((row["algorithm"], row["M_over_N"]), []).append(row)
    out = []
    for (alg, ratio), items in groups.items():
        out.append({
            "algorithm": alg, "M_over_N": ratio,
            **{c: float(np.nanmean([r[c] for r in items]))
               for c in ("r_snr_mean", "precision", "recall", "psim_precision", "psim_recall")},
        })
    return out
