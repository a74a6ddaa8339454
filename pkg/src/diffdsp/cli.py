"""Command-line entry point: ``diffdsp <command> ...``.

Exit codes: 0 ok, 1 self-check failure, 2 I/O error, 3 configuration or
schema error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import selfcheck
from .fileio import FormatError, load_params, read_wav, save_params, write_csv, write_wav
from .filters import ImpulseResponse
from .fitting import (
    FitConfig,
    NumericalError,
    acoustic_transfer,
    dereverb,
    fit,
    interpolation_metrics,
    pitch_shift,
    render,
)
from .losses import SpectralLossConfig, compare
from .signal import DEFAULT_SAMPLE_RATE, AudioBuffer, stft_magnitude

EXIT_OK = 0
EXIT_SELFCHECK = 1
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

log = logging.getLogger("diffdsp")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


def _require_out(path: str) -> Path:
    p = Path(path)
    if not p.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {p.parent}")
    return p


def _read(path: Path, args) -> AudioBuffer:
    return read_wav(path, sample_rate=args.sample_rate)


def _fit_config(args) -> FitConfig:
    try:
        loss = SpectralLossConfig(tuple(args.fft_sizes), args.overlap, args.alpha, args.log_epsilon)
        return FitConfig(
            steps=args.steps,
            learning_rate=args.learning_rate,
            decay_rate=args.decay_rate,
            decay_interval=args.decay_interval,
            freeze_f0=not args.train_f0,
            fit_reverb=args.fit_reverb,
            reverb_samples=args.reverb_samples,
            n_harmonics=args.n_harmonics,
            seed=args.seed,
            loss=loss,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# commands -------------------------------------------------------------------


def _fit_one(src: Path, dst: Path, args, cfg: FitConfig) -> None:
    target = _read(src, args)
    params, history = fit(target, cfg)
    save_params(dst, params)
    loss_csv = Path(args.loss_csv) if args.loss_csv and len(args.inputs) == 1 else dst.with_suffix(".loss.csv")
    write_csv(loss_csv, ["step", "loss", "effective_lr"], [(r.step, f"{r.loss:.10g}", f"{r.effective_lr:.10g}") for r in history])
    log.info("%s -> %s (%d steps)", src, dst, len(history))


def cmd_fit(args) -> int:
    cfg = _fit_config(args)
    inputs = [_require_file(p) for p in args.inputs]
    if len(inputs) == 1 and args.output:
        jobs = [(inputs[0], _require_out(args.output))]
    elif args.out_dir:
        out_dir = Path(args.out_dir)
        if not out_dir.is_dir():
            raise FileNotFoundError(f"output directory does not exist: {out_dir}")
        jobs = [(src, out_dir / (src.stem + ".json")) for src in inputs]
    else:
        raise ConfigError("give --output for one input or --out-dir for several")
    if args.loss_csv:
        _require_out(args.loss_csv)
    if args.jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for fut in [pool.submit(_fit_one, s, d, args, cfg) for s, d in jobs]:
                fut.result()
    else:
        for s, d in jobs:
            _fit_one(s, d, args, cfg)
    return EXIT_OK


def cmd_resynth(args) -> int:
    cfg = _fit_config(args)
    src, dst = _require_file(args.input), _require_out(args.output)
    target = _read(src, args)
    params, _ = fit(target, cfg)
    out = render(params)
    write_wav(dst, AudioBuffer(out.samples[: len(target)], out.sample_rate))
    if args.params_out:
        save_params(_require_out(args.params_out), params)
    return EXIT_OK


def cmd_render(args) -> int:
    src, dst = _require_file(args.params), _require_out(args.output)
    write_wav(dst, render(load_params(src)))
    return EXIT_OK


def cmd_dereverb(args) -> int:
    src, dst = _require_file(args.params), _require_out(args.output)
    params = load_params(src)
    if params.reverb_ir is None:
        raise ConfigError(f"{src}: parameter file has no reverb impulse response")
    write_wav(dst, dereverb(params))
    return EXIT_OK


def cmd_transfer(args) -> int:
    dry_path, dst = _require_file(args.dry), _require_out(args.output)
    if bool(args.params) == bool(args.ir):
        raise ConfigError("give exactly one of --params or --ir")
    if args.params:
        params = load_params(_require_file(args.params))
        if params.reverb_ir is None:
            raise ConfigError(f"{args.params}: parameter file has no reverb impulse response")
        ir = params.reverb_ir
    else:
        ir = ImpulseResponse(read_wav(_require_file(args.ir)).samples)
    write_wav(dst, acoustic_transfer(_read(dry_path, args), ir))
    return EXIT_OK


def cmd_shift(args) -> int:
    src, dst = _require_file(args.params), _require_out(args.output)
    params_out = _require_out(args.params_out) if args.params_out else None
    shifted = pitch_shift(load_params(src), args.semitones)
    write_wav(dst, render(shifted))
    if params_out:
        save_params(params_out, shifted)
    return EXIT_OK


def cmd_export_ir(args) -> int:
    src, dst = _require_file(args.params), _require_out(args.output)
    params = load_params(src)
    if params.reverb_ir is None:
        raise ConfigError(f"{src}: parameter file has no reverb impulse response")
    if args.raw:
        params.reverb_ir.taps.astype("<f8").tofile(dst)
    else:
        write_wav(dst, AudioBuffer(params.reverb_ir.taps, params.sample_rate))
    return EXIT_OK


def cmd_metrics(args) -> int:
    a_path, b_path, dst = _require_file(args.reference), _require_file(args.estimate), _require_out(args.output)
    a, b = _read(a_path, args), _read(b_path, args)
    if len(a) != len(b):
        raise ConfigError(f"length mismatch: {a_path} has {len(a)} samples, {b_path} has {len(b)}")
    row = compare(a, b, threshold=args.threshold)
    write_csv(
        dst,
        ["clip_id", "loudness_l1", "f0_l1", "f0_outliers"],
        [(a_path.stem, f"{row['loudness_l1']:.6f}", f"{row['f0_l1']:.6f}", f"{row['f0_outliers']:.6f}")],
    )
    return EXIT_OK


def cmd_interp_metrics(args) -> int:
    pa, pb, dst = _require_file(args.params_a), _require_file(args.params_b), _require_out(args.output)
    a, b = load_params(pa), load_params(pb)
    rows = []
    for task in args.tasks:
        m = interpolation_metrics(a, b, task)
        rows.append((task, f"{m['loudness_l1']:.6f}", f"{m['f0_l1']:.6f}"))
    write_csv(dst, ["task", "loudness_l1", "f0_l1"], rows)
    return EXIT_OK


def cmd_spectrogram(args) -> int:
    from PIL import Image

    src, dst = _require_file(args.input), _require_out(args.output)
    spec = stft_magnitude(_read(src, args), args.fft_size, args.overlap)
    db = 20.0 * np.log10(spec.magnitudes.T[::-1] + 1e-7)
    top = db.max()
    img = np.clip((db - (top - args.dynamic_range)) / args.dynamic_range, 0.0, 1.0)
    Image.fromarray(np.round(img * 255).astype(np.uint8), mode="L").save(dst, format="PNG")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    return EXIT_OK if selfcheck.run() else EXIT_SELFCHECK


# parser ---------------------------------------------------------------------


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    d = FitConfig()
    loss = SpectralLossConfig()
    p.add_argument("--steps", type=int, default=d.steps)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--decay-rate", type=float, default=d.decay_rate)
    p.add_argument("--decay-interval", type=int, default=d.decay_interval)
    p.add_argument("--train-f0", action="store_true", help="optimize f0 instead of freezing the tracker output")
    p.add_argument("--fit-reverb", action="store_true")
    p.add_argument("--reverb-samples", type=int, default=d.reverb_samples)
    p.add_argument("--n-harmonics", type=int, default=d.n_harmonics)
    p.add_argument("--fft-sizes", type=int, nargs="+", default=list(loss.fft_sizes))
    p.add_argument("--overlap", type=float, default=loss.overlap)
    p.add_argument("--alpha", type=float, default=loss.alpha)
    p.add_argument("--log-epsilon", type=float, default=loss.log_epsilon)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diffdsp", description=__doc__.splitlines()[0])
    parser.add_argument("--sample-rate", type=int, default=DEFAULT_SAMPLE_RATE)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit synthesizer parameters to WAV file(s)")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", help="parameter JSON (single input)")
    p.add_argument("--out-dir", help="directory for <stem>.json per input")
    p.add_argument("--loss-csv", help="loss history CSV (default: <output>.loss.csv)")
    p.add_argument("--jobs", type=int, default=1)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("resynth", help="fit then render")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--params-out")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_resynth)

    p = sub.add_parser("render", help="render a parameter file")
    p.add_argument("params")
    p.add_argument("output")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("dereverb", help="render with the reverb bypassed")
    p.add_argument("params")
    p.add_argument("output")
    p.set_defaults(func=cmd_dereverb)

    p = sub.add_parser("transfer", help="apply a learned or given impulse response to dry audio")
    p.add_argument("dry")
    p.add_argument("output")
    p.add_argument("--params")
    p.add_argument("--ir", help="impulse response WAV")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("shift", help="transpose f0 and render")
    p.add_argument("params")
    p.add_argument("semitones", type=float)
    p.add_argument("output")
    p.add_argument("--params-out")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("export-ir", help="write a parameter file's reverb IR")
    p.add_argument("params")
    p.add_argument("output")
    p.add_argument("--raw", action="store_true", help="64-bit little-endian floats instead of WAV")
    p.set_defaults(func=cmd_export_ir)

    p = sub.add_parser("metrics", help="loudness/F0 metrics of an estimate against a reference")
    p.add_argument("reference")
    p.add_argument("estimate")
    p.add_argument("output")
    p.add_argument("--threshold", type=float, default=0.85)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("interp-metrics", help="metrics after swapping control groups between parameter files")
    p.add_argument("params_a")
    p.add_argument("params_b")
    p.add_argument("output")
    p.add_argument("--tasks", nargs="+", default=["reconstruction", "loudness", "f0"],
                   choices=["reconstruction", "loudness", "f0"])
    p.set_defaults(func=cmd_interp_metrics)

    p = sub.add_parser("spectrogram", help="write a log-magnitude spectrogram PNG")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--fft-size", type=int, default=1024)
    p.add_argument("--overlap", type=float, default=0.75)
    p.add_argument("--dynamic-range", type=float, default=80.0)
    p.set_defaults(func=cmd_spectrogram)

    p = sub.add_parser("selfcheck", help="run gradient and oracle checks")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
