"""``wavediff`` command line.

Exit codes: 0 success, 1 I/O or configuration error, 2 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import bench
from .audio import WavFormatError, read_wav, write_wav
from .conditional import interpolation_schedule
from .diffusion import linear_schedule
from .formats import FormatError, read_packet, write_packet
from .pipeline import (CheckpointMismatchError, ConfigError, enhance, generate,
                       load_config, train)
from .wavelets import BASIS_NAMES, PacketMetadataError, SignalTooShortError, basis_by_name, decompose, reconstruct

RUNTIME_ERRORS = (OSError, ConfigError, CheckpointMismatchError, FormatError, WavFormatError,
                  PacketMetadataError, SignalTooShortError)


def _basis(name: str) -> str:
    try:
        return basis_by_name(name).name
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown basis {name!r}; valid bases: {', '.join(BASIS_NAMES)}") from None


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _configs(s: str) -> list[str]:
    names = [n.strip() for n in s.split(",") if n.strip()]
    bad = [n for n in names if n not in bench.CONFIG_LEVELS]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown config {', '.join(bad) or s!r}; choose from {', '.join(bench.CONFIG_LEVELS)}")
    return names


def cmd_dwt(args):
    w = read_wav(args.input)
    write_packet(decompose(w, args.basis, args.levels), args.output)


def cmd_idwt(args):
    write_wav(reconstruct(read_packet(args.input)), args.output, args.format)


def _run_config(args):
    cfg = load_config(args.config)
    overrides = {k: getattr(args, k) for k in ("seed", "steps") if getattr(args, k, None) is not None}
    if getattr(args, "checkpoint", None) and args.command == "train":
        overrides["checkpoint"] = args.checkpoint
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def cmd_train(args):
    cfg = _run_config(args)
    res = train(cfg)
    tail = res.losses[-min(100, len(res.losses)):] if res.losses else [float("nan")]
    print(f"checkpoint={res.checkpoint} steps={len(res.losses)} final_loss={float(np.mean(tail))!r}")


def cmd_generate(args):
    cfg = _run_config(args)
    w = generate(cfg, args.checkpoint, args.output, args.length)
    print(f"wrote {args.output} samples={w.samples.size}")


def cmd_enhance(args):
    cfg = _run_config(args)
    w = enhance(cfg, args.checkpoint, args.input, args.output)
    print(f"wrote {args.output} samples={w.samples.size}")


def cmd_bench(args):
    cmp = bench.compare_macs(args.samples, args.compare)
    records = []
    for name, rep in cmp.reports.items():
        records += rep.records(name)
        records.append(dict(kind="mac_summary", config=name, channels=rep.shape[0], frames=rep.shape[1],
                            first_per_channel=rep.first_layer_per_channel, total=rep.total))
    if "raw" in cmp.reports:
        for name in cmp.reports:
            records.append(dict(kind="mac_ratio", config=name, base="raw",
                                first_per_channel=cmp.ratio(name, what="first_layer_per_channel"),
                                total=cmp.ratio(name)))
    timings = []
    if args.timing:
        threads = None if args.threads == 0 else args.threads
        for name in args.compare:
            cfg = bench.BenchConfig.named(name, n_samples=args.samples, T=args.T, threads=threads)
            timings.append(bench.time_training_step(cfg, args.reps, args.warmup))
            timings.append(bench.time_sampling(cfg))
    lines = [bench.format_record(r) for r in records] + [t.to_record() for t in timings]
    if args.records:
        with open(args.records, "w") as f:
            f.write("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
        print()
    print(bench.format_mac_table(cmp))
    if timings:
        print()
        print(bench.format_timing_table(timings))


def cmd_schedule_dump(args):
    base = linear_schedule(args.T, args.beta_start, args.beta_end)
    cs = interpolation_schedule(base, args.m_schedule)
    print(f"{'t':>4} {'beta':>14} {'alpha_bar':>14} {'m':>14} {'delta':>14}")
    for t in range(1, base.T + 1):
        print(f"{t:>4} {base.beta[t]:>14.8g} {base.alpha_bar[t]:>14.8g} {cs.m[t]:>14.8g} {cs.delta[t]:>14.8g}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavediff", description="Wavelet-domain diffusion for 1-D audio.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("dwt", help="decompose a mono WAV into a packet file")
    s.add_argument("input", help="input WAV (mono PCM16 or float32)")
    s.add_argument("output", help="output packet file")
    s.add_argument("--basis", type=_basis, default="haar", help=f"wavelet basis: {', '.join(BASIS_NAMES)} (default haar)")
    s.add_argument("--levels", type=_positive, default=1, help="decomposition levels (default 1)")
    s.set_defaults(func=cmd_dwt)

    s = sub.add_parser("idwt", help="reconstruct a WAV from a packet file")
    s.add_argument("input", help="input packet file")
    s.add_argument("output", help="output WAV")
    s.add_argument("--format", choices=("float32", "pcm16"), default="float32", help="WAV sample format (default float32)")
    s.set_defaults(func=cmd_idwt)

    def run_flags(s, checkpoint_help, need_checkpoint=True):
        s.add_argument("--config", required=True, help="run config file (key = value lines)")
        s.add_argument("--checkpoint", required=need_checkpoint, help=checkpoint_help)
        s.add_argument("--seed", type=int, help="override the config seed")

    s = sub.add_parser("train", help="train a denoiser from a run config")
    run_flags(s, "checkpoint output path (overrides the config)", need_checkpoint=False)
    s.add_argument("--steps", type=int, help="override the number of training steps")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("generate", help="sample a waveform with a trained synthesis model")
    run_flags(s, "trained checkpoint")
    s.add_argument("--output", required=True, help="output WAV")
    s.add_argument("--length", type=_positive, default=16000, help="samples to generate (default 16000)")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("enhance", help="denoise a WAV with a trained enhancement model")
    run_flags(s, "trained checkpoint")
    s.add_argument("--input", required=True, help="noisy input WAV")
    s.add_argument("--output", required=True, help="output WAV")
    s.set_defaults(func=cmd_enhance)

    s = sub.add_parser("bench", help="MAC counts and optional wall-clock timing")
    s.add_argument("--compare", type=_configs, default=["raw", "wavelet", "multilevel"],
                   help="comma-separated configs from raw, wavelet, multilevel")
    s.add_argument("--samples", type=_positive, default=16384, help="waveform length N (default 16384)")
    s.add_argument("--timing", action="store_true", help="also time training steps and sampling")
    s.add_argument("--reps", type=_positive, default=10, help="timed training steps (default 10)")
    s.add_argument("--warmup", type=int, default=3, help="untimed warmup steps (default 3)")
    s.add_argument("--T", type=_positive, default=50, help="diffusion steps for sampling (default 50)")
    s.add_argument("--threads", type=int, default=1, help="BLAS threads for timing, 0 = library default (default 1)")
    s.add_argument("--records", help="write key=value records to this file instead of stdout")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("schedule-dump", help="print the beta, alpha_bar, m and delta tables")
    s.add_argument("--T", type=_positive, default=50, help="number of diffusion steps (default 50)")
    s.add_argument("--beta-start", type=float, default=1e-4, help="first beta (default 1e-4)")
    s.add_argument("--beta-end", type=float, default=0.05, help="last beta (default 0.05)")
    s.add_argument("--m-schedule", default="snr", choices=("snr", "linear", "zero"),
                   help="interpolation schedule (default snr)")
    s.set_defaults(func=cmd_schedule_dump)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except RUNTIME_ERRORS as exc:
        print(f"wavediff {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # invalid values that argparse could not see, such as a bad schedule
        print(f"wavediff {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
