"""Command-line entry point: ``python -m components_loss <command>``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import synth
from .components import apply_mask, components_to_time, read_mask_csv, write_mask_csv
from .config import LOSS_NAMES, SAMPLE_RATE, OptimizeConfig, StftConfig, TrainConfig, default_weights
from .gradcheck import check_all
from .losses import LossInputs, closed_form_2cl_mask, compute_loss
from .metrics import evaluate as evaluate_metrics
from .optimize import DivergenceError, optimize_mask
from .perceptual import loudness_map
from .signal_io import (
    ManifestError,
    MixSpec,
    SignalBuffer,
    load_manifest,
    measured_snr,
    mix_at_snr,
    read_wav,
    save_manifest,
    write_wav,
)
from .stft import analyze
from .trainer import build_dataset, estimate_mask, init_model, load_checkpoint, mlp_train, save_checkpoint, split_by_utterance

GRADCHECK_TOL = 1e-5
WEIGHT_FLAGS = ("alpha", "beta", "lambda1", "lambda2", "gamma1", "gamma2", "lpc_order")
CSV_COLUMNS = ("utterance", "snr_in", "loss_name", "alpha", "beta",
               "delta_snr", "ssdr", "na_seg", "wlakr_abs", "stoi_proxy")


class CliError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser, loss: bool = True):
    if loss:
        p.add_argument("--loss", choices=LOSS_NAMES, default="2cl")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--lpc-order", type=int)
    p.add_argument("--dft-size", type=int, default=256)
    p.add_argument("--hop", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _weights(args, loss: str | None = None):
    base = default_weights(loss or getattr(args, "loss", "2cl"))
    overrides = {name: getattr(args, name, None) for name in WEIGHT_FLAGS}
    try:
        return base.with_overrides(**overrides)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _stft_config(args) -> StftConfig:
    hop = args.hop if args.hop is not None else args.dft_size // 2
    try:
        config = StftConfig.for_size(args.dft_size)
        if hop != config.hop:
            raise ValueError("hop must equal dft_size / 2")
        return config
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _load_triplet(y_path, s_path, d_path, config: StftConfig):
    s = read_wav(s_path).samples
    d = read_wav(d_path).samples
    y = read_wav(y_path).samples if y_path else s + d
    lengths = (y.size, s.size, d.size)
    if max(lengths) - min(lengths) > config.hop:
        raise CliError(f"signal lengths differ by more than one frame shift: {lengths}")
    n = min(lengths)
    return y[:n], s[:n], d[:n]


def _spectra(y, s, d, config):
    return analyze(y, config), analyze(s, config), analyze(d, config)


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- mix ---------------------------------------------------------------------

def _mix_one(job):
    index, spec, out_dir, headroom = job
    speech = read_wav(spec.clean_path).samples
    noise = read_wav(spec.noise_path).samples
    mix = mix_at_snr(speech, noise, spec.snr_db, spec.seed)
    scale = 0.5 if headroom else 1.0
    stem = Path(out_dir) / f"{index:04d}"
    clips = {}
    for name, sig in (("y", mix.y), ("s", mix.s), ("d", mix.d)):
        info = write_wav(SignalBuffer(scale * sig.samples), f"{stem}_{name}.wav")
        clips[name] = info["clipped"]
    return {
        "index": index,
        "clean_path": spec.clean_path,
        "noise_path": spec.noise_path,
        "snr_db": spec.snr_db,
        "seed": spec.seed,
        "gain": mix.gain,
        "scale": scale,
        "measured_snr_db": measured_snr(mix.s, mix.d),
        "clipped": clips,
        "files": {n: f"{stem}_{n}.wav" for n in ("y", "s", "d")},
    }


def cmd_mix(args):
    try:
        specs = load_manifest(args.manifest)
    except (ManifestError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid manifest: {exc}") from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(i, spec, str(out_dir), args.headroom) for i, spec in enumerate(specs)]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_mix_one, jobs))
    else:
        rows = [_mix_one(job) for job in jobs]
    (out_dir / "metadata.json").write_text(json.dumps(rows, indent=2))
    print(f"mixed {len(rows)} utterance(s) into {out_dir}")
    return 0


# -- synth -------------------------------------------------------------------

def cmd_synth(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snrs = [float(v) for v in args.snrs.split(",")]
    specs = []
    for i in range(args.count):
        s = synth.speech_like(args.duration, seed=args.seed + i)
        kind = synth.NOISE_KINDS[i % len(synth.NOISE_KINDS)]
        n = 0.1 * synth.noise(kind, s.size + SAMPLE_RATE, seed=args.seed + 1000 + i)
        clean = out_dir / f"clean_{i:03d}.wav"
        noise = out_dir / f"noise_{i:03d}_{kind}.wav"
        write_wav(SignalBuffer(s), clean)
        write_wav(SignalBuffer(n), noise)
        specs.append(MixSpec(str(clean), str(noise), snrs[i % len(snrs)], args.seed + i))
    save_manifest(specs, out_dir / "manifest.json")
    print(f"wrote {args.count} clean/noise pairs and {out_dir / 'manifest.json'}")
    return 0


# -- loss --------------------------------------------------------------------

def _mask_for(arg: str, shape):
    if arg == "ones":
        return np.ones(shape)
    mask = read_mask_csv(arg)
    if mask.shape != tuple(shape):
        raise CliError(f"mask shape {mask.shape} does not match spectra {tuple(shape)}")
    return mask


def cmd_loss(args):
    config = _stft_config(args)
    weights = _weights(args)
    y, s, d = _load_triplet(args.y, args.s, args.d, config)
    Y, S, D = _spectra(y, s, d, config)
    inputs = LossInputs.from_frames(Y, S, D, weights, with_weighting=args.loss == "pw-filt")
    mask = _mask_for(args.mask, inputs.shape)
    result = compute_loss(args.loss, mask, inputs, weights, lmap=loudness_map(config.dft_size))
    report = result.report(args.loss, weights)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    print(f"{args.loss} total {result.total:.10g}", file=sys.stderr)
    return 0


# -- gradcheck ---------------------------------------------------------------

def cmd_gradcheck(args):
    losses = args.loss or LOSS_NAMES
    weights = None
    if any(getattr(args, name, None) is not None for name in WEIGHT_FLAGS):
        weights = _weights(args, losses[0])
    try:
        results = check_all(args.trials, args.seed, args.size, args.frames, losses, weights)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(f"{'loss':<8} {'max rel err':>12} {'excluded':>9}  status")
    failed = False
    for r in results:
        ok = r.passed(GRADCHECK_TOL)
        failed |= not ok
        print(f"{r.loss:<8} {r.max_rel_error:>12.3e} {r.excluded:>9}  {'pass' if ok else 'FAIL'}")
    return 1 if failed else 0


# -- optimize ----------------------------------------------------------------

def cmd_optimize(args):
    config = _stft_config(args)
    weights = _weights(args)
    y, s, d = _load_triplet(args.y, args.s, args.d, config)
    Y, S, D = _spectra(y, s, d, config)
    inputs = LossInputs.from_frames(Y, S, D, weights, with_weighting=args.loss == "pw-filt")
    opt = OptimizeConfig(loss=args.loss, weights=weights, max_iter=args.max_iter, tol=args.tol)
    try:
        result = optimize_mask(inputs, opt, lmap=loudness_map(config.dft_size))
    except DivergenceError as exc:
        raise CliError(str(exc)) from None
    write_mask_csv(result.mask, args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss"])
            writer.writerows((i, repr(v)) for i, v in enumerate(result.trace))
    status = "converged" if result.converged else "stopped at max_iter"
    print(f"{args.loss}: {result.iterations} iterations, {status}, loss {result.trace[0]:.6g} -> {result.trace[-1]:.6g}")
    return 0


# -- train -------------------------------------------------------------------

def cmd_train(args):
    config = _stft_config(args)
    weights = _weights(args)
    try:
        specs = load_manifest(args.manifest)
    except (ManifestError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid manifest: {exc}") from None
    if not specs:
        raise CliError("manifest is empty")
    triples = []
    for spec in specs:
        mix = mix_at_snr(read_wav(spec.clean_path), read_wav(spec.noise_path), spec.snr_db, spec.seed)
        triples.append((mix.y.samples, mix.s.samples, mix.d.samples))
    tcfg = TrainConfig(loss=args.loss, weights=weights, epochs=args.epochs, optimizer=args.optimizer,
                       learning_rate=args.lr, seed=args.seed)
    data = build_dataset(triples, args.loss, weights, config, tcfg.context)
    train, val = split_by_utterance(data, tcfg.validation_fraction, args.seed)
    model = init_model(config.k_in, tcfg.context, tcfg.hidden, args.seed)

    def progress(epoch, tr, va, lr):
        if args.verbose:
            print(f"epoch {epoch:4d}  train {tr:.6g}  val {va:.6g}  lr {lr:.3g}")

    try:
        model, history = mlp_train(model, train, val, tcfg, config.dft_size, progress)
    except (ValueError, RuntimeError) as exc:
        raise CliError(str(exc)) from None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "checkpoint.json",
                    {"loss": args.loss, "weights": weights.to_dict(), "epochs": args.epochs})
    history.write_csv(out / "history.csv")
    print(f"trained {args.epochs} epochs: val {history.val_loss[0]:.6g} -> {history.val_loss[-1]:.6g}")
    return 0


# -- evaluate ----------------------------------------------------------------

def _metric_row(s, d, y, mask, config, label, alpha, beta):
    Y, S, D = _spectra(y, s, d, config)
    s_hat, s_tilde, d_tilde = components_to_time(apply_mask(Y, S, D, mask))
    report = evaluate_metrics(s, d, s_hat, s_tilde, d_tilde, config)
    row = {"utterance": label[0], "snr_in": report.snr_in_db, "loss_name": label[1],
           "alpha": alpha, "beta": beta, **report.table_row()}
    return row, report


def cmd_evaluate(args):
    config = _stft_config(args)
    y, s, d = _load_triplet(None, args.s, args.d, config)
    S = analyze(s, config)
    D = analyze(d, config)
    shape = (S.n_frames, config.n_bins)
    utt = Path(args.s).stem
    jobs = []
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
        jobs.append((estimate_mask(model, y, config), "checkpoint", None, None))
    elif args.mask == "closed-form":
        alphas = args.alphas or [args.alpha if args.alpha is not None else 0.5]
        for a in alphas:
            jobs.append((closed_form_2cl_mask(S.magnitude(), D.magnitude(), a), "2cl-closed-form", a, None))
    else:
        jobs.append((_mask_for(args.mask, shape), Path(args.mask).stem if args.mask != "ones" else "ones",
                     args.alpha, args.beta))
    rows, reports = [], []
    for mask, name, a, b in jobs:
        row, report = _metric_row(s, d, y, mask, config, (utt, name), a, b)
        rows.append(row)
        reports.append(report.to_dict() | {"loss_name": name, "alpha": a, "beta": b})
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
        _emit(buf.getvalue(), args.out)
    else:
        _emit(json.dumps(reports[0] if len(reports) == 1 else reports, indent=2) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="components_loss", description=__doc__)
    parser.add_argument("--config", help="JSON file whose keys provide defaults for the flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mix", help="mix clean/noise pairs at the manifest SNRs")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default="mixtures")
    p.add_argument("--headroom", action="store_true", help="scale y, s, d by 0.5 before writing")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("synth", help="write a synthetic clean/noise corpus and manifest")
    p.add_argument("--out-dir", default="corpus")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--snrs", default="-5,0,5,10,15,20")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("loss", help="evaluate a loss for given signals and mask")
    p.add_argument("y")
    p.add_argument("s")
    p.add_argument("d")
    p.add_argument("--mask", default="ones", help="mask CSV or 'ones'")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--loss", action="append", choices=LOSS_NAMES)
    p.add_argument("--size", type=int, default=16, help="DFT size of the random spectra")
    p.add_argument("--frames", type=int, default=40)
    p.add_argument("--trials", type=int, default=100)
    for flag in ("--alpha", "--beta", "--lambda1", "--lambda2", "--gamma1", "--gamma2"):
        p.add_argument(flag, type=float)
    p.add_argument("--lpc-order", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("optimize", help="optimize a mask directly under a loss")
    p.add_argument("y")
    p.add_argument("s")
    p.add_argument("d")
    p.add_argument("--out", default="mask.csv")
    p.add_argument("--trace")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-13)
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("train", help="train the MLP mask estimator")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default="run")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd")
    p.add_argument("--verbose", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="white-box metrics for a mask, checkpoint or closed-form sweep")
    p.add_argument("s")
    p.add_argument("d")
    p.add_argument("--mask", default="ones", help="mask CSV, 'ones' or 'closed-form'")
    p.add_argument("--checkpoint")
    p.add_argument("--alphas", type=lambda v: [float(x) for x in v.split(",")],
                   help="comma-separated alpha sweep for --mask closed-form")
    p.add_argument("--out")
    _add_common(p, loss=False)
    p.set_defaults(func=cmd_evaluate)
    return parser


def _config_defaults(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    data = json.loads(Path(known.config).read_text())
    return {k.replace("-", "_"): v for k, v in data.items()}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        defaults = _config_defaults(argv)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    if defaults:
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                sp.set_defaults(**defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
