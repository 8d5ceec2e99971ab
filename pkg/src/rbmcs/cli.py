"""Command line entry point (``rbmcs``).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dictlearn, evaluation, rbm as rbm_mod
from .config import ConfigError, load_config, parse_config
from .experiment import (DataError, check_data, load_recordings, run_experiment,
                         train_bundle, training_matrix, write_csv)
from .persistence import ModelBundle, ModelFormatError, load_model, save_model
from .recovery import build_recovery_model, omp_recover, rbm_omp_like
from .sensing import FactorizationError, build_noise_model, gen_bernoulli_matrix, measure
from .transforms import wavelet_model
from .wfdb import WfdbError, read_record

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _config(args):
    overrides = list(args.set or [])
    if args.config:
        return load_config(args.config, overrides)
    return parse_config("", overrides)


def _load_signal(path):
    with np.load(path) as data:
        return np.asarray(data["signal"], dtype=float), float(data["fs"])


def cmd_convert(args):
    meta, adu = read_record(args.record_dir, args.record, physical=args.physical)
    np.savez(args.out, signal=adu[args.signal], fs=meta.sampling_freq)
    print(f"{meta.record_name}: {adu.shape[1]} samples at {meta.sampling_freq:g} Hz -> {args.out}")


def cmd_train_dict(args):
    cfg = _config(args)
    check_data(cfg)
    train, _ = load_recordings(cfg)
    G = training_matrix(cfg, train)
    k = cfg.sparsity_k
    if cfg.transform == "dictionary":
        sparsifier, codes, objective = dictlearn.ksvd_train(
            G, cfg.n_atoms, k, cfg.ksvd_iters, seed=cfg.seed)
        print(f"K-SVD objective {objective[0]:.6g} -> {objective[-1]:.6g}")
    else:
        sparsifier = wavelet_model(cfg.window, cfg.levels)
        codes = dictlearn.top_k_codes(G, cfg.levels, k)
    stats = dictlearn.training_statistics(G, sparsifier, codes)
    bundle = ModelBundle(sparsifier=sparsifier,
                         rbm=rbm_mod.RbmModel.zeros(sparsifier.n_atoms, cfg.n_hidden),
                         coeff_variances=stats.coeff_variances,
                         repr_error_variances=stats.repr_error_variances,
                         never_active=stats.never_active,
                         config={"window": cfg.window, "sparsity_k": k,
                                 "transform": cfg.transform, "n_hidden": cfg.n_hidden})
    save_model(args.out, bundle)
    print(f"saved {sparsifier.kind} model with {sparsifier.n_atoms} atoms to {args.out}")


def cmd_train_rbm(args):
    cfg = _config(args)
    check_data(cfg)
    if args.model:
        base = load_model(args.model)
        train, _ = load_recordings(cfg)
        G = training_matrix(cfg, train)
        k = int(base.config.get("sparsity_k", cfg.sparsity_k))
        if base.sparsifier.kind == "wavelet":
            codes = dictlearn.top_k_codes(G, base.sparsifier.levels, k)
        else:
            codes = dictlearn.omp_codes(base.sparsifier, G, k)
        hyper = rbm_mod.CDHyperparameters(learning_rate=cfg.rbm_learning_rate,
                                          batch_size=cfg.rbm_batch_size,
                                          epochs=cfg.rbm_epochs,
                                          weight_decay=cfg.rbm_weight_decay)
        model = rbm_mod.cd_train(dictlearn.extract_support_patterns(codes), cfg.n_hidden,
                                 hyper, seed=cfg.seed)
        bundle = ModelBundle(base.sparsifier, model, base.coeff_variances,
                             base.repr_error_variances, base.never_active, base.config)
    else:
        train, _ = load_recordings(cfg)
        bundle = train_bundle(cfg, training_matrix(cfg, train))
    save_model(args.out, bundle)
    print(f"saved RBM ({bundle.rbm.n_visible} visible, {bundle.rbm.n_hidden} hidden) to {args.out}")


def cmd_reconstruct(args):
    bundle = load_model(args.model)
    x, fs = _load_signal(args.input)
    n = bundle.sparsifier.n_samples
    k = int(bundle.config.get("sparsity_k", max(1, round(0.1 * n))))
    m = max(1, int(round(args.m_ratio * n)))
    op = gen_bernoulli_matrix(m, n, seed=args.seed)
    noise = build_noise_model(op, bundle.repr_error_variances, args.sigma_n_sq)
    model = build_recovery_model(op, bundle.sparsifier, noise, bundle.rbm,
                                 bundle.coeff_variances, k, bundle.never_active)
    segs = evaluation.segment(x, n)
    recon = []
    for i, seg in enumerate(segs):
        y = measure(op, seg, args.sigma_n_sq, seed=args.seed + 1 + i)
        res = rbm_omp_like(model, y) if args.algorithm == "rbm-omp-like" else omp_recover(model, y)
        recon.append(res.x_hat)
    covered = evaluation.concatenate(segs)
    x_hat = evaluation.concatenate(recon)
    np.savez(args.out, signal=x_hat, fs=fs)
    print(f"{len(segs)} segments, R-SNR {evaluation.r_snr(covered, x_hat):.2f} dB -> {args.out}")


def cmd_evaluate(args):
    x, fs = _load_signal(args.original)
    x_hat, _ = _load_signal(args.reconstructed)
    n = min(x.shape[0], x_hat.shape[0])
    x, x_hat = x[:n], x_hat[:n]
    ref = evaluation.detect_qrs(x, fs)
    res = evaluation.match_peaks(ref, evaluation.detect_qrs(x_hat, fs), tol=args.tol)
    print(f"r_snr_db {evaluation.r_snr(x, x_hat):.4f}")
    print(f"precision {res.precision:.4f}")
    print(f"recall {res.recall:.4f}")
    print(f"psim_precision {evaluation.psim(1.0, res.precision):.2f}")
    print(f"psim_recall {evaluation.psim(1.0, res.recall):.2f}")


def cmd_experiment(args):
    cfg = _config(args)
    rows = run_experiment(cfg)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)


def build_parser():
    parser = argparse.ArgumentParser(prog="rbmcs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        return p

    p = sub.add_parser("convert", help="WFDB format-212 record -> .npz sample file")
    p.add_argument("record_dir")
    p.add_argument("record")
    p.add_argument("--signal", type=int, default=0)
    p.add_argument("--physical", action="store_true", help="convert to millivolts")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = with_config(sub.add_parser("train-dict", help="learn the sparsifier and its statistics"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_dict)

    p = with_config(sub.add_parser("train-rbm", help="train the support-pattern RBM"))
    p.add_argument("--model", help="model from train-dict to extend")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_rbm)

    p = sub.add_parser("reconstruct", help="sense and recover a .npz signal")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--m-ratio", type=float, default=0.3)
    p.add_argument("--sigma-n-sq", type=float, default=0.25)
    p.add_argument("--algorithm", choices=("rbm-omp-like", "omp"), default="rbm-omp-like")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="R-SNR and QRS scores of a reconstruction")
    p.add_argument("--original", required=True)
    p.add_argument("--reconstructed", required=True)
    p.add_argument("--tol", type=int, default=4)
    p.set_defaults(func=cmd_evaluate)

    p = with_config(sub.add_parser("experiment", help="run a configured sweep, emit CSV"))
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, WfdbError, ModelFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FactorizationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
