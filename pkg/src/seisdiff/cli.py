"""
Command-line entry point.

    seisdiff synth   --task T --family {in,out} --count N --seed S --out DIR
    seisdiff train   --data DIR --out DIR [--task T] [--iters N] [--batch B] [--timesteps T]
                     [--seed S] [--profile {full,desk}] [--resume CKPT]
    seisdiff infer   --ckpt F --input DIR --seed S --out DIR [--snapshots t1,t2,...] [--clamp]
    seisdiff fxdecon --input DIR --out DIR [--window 64] [--filter-len 4] [--prewhiten 0.001]
    seisdiff eval    --ref DIR --est DIR --tag NAME --out report.csv
    seisdiff diff    --a DIR --b DIR --out DIR [--scale 3]
    seisdiff replay  RUN_JSON [--out DIR]

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure, 1 anything else.
Errors are reported on stderr as a single line.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Optional, Sequence

from seisdiff.exceptions import SeisDiffError, exit_code_for
from seisdiff.utils import parse_int_list

logger = logging.getLogger("seisdiff")

TASKS = ("demultiple", "denoise", "interpolate")


def _int_list(text: str) -> list[int]:
    try:
        return parse_int_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seisdiff",
        description="Conditional diffusion models for seismic demultiple, denoising and interpolation.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--family", choices=("in", "out"), required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--patch", type=int, default=64, help="square patch side")
    p.add_argument("--noise-fraction", type=float, default=0.5)
    p.add_argument("--noise-mode", choices=("exact", "cap"), default="exact")
    p.add_argument("--decimation", type=float, default=0.5)
    p.add_argument("--previews", type=int, default=0, help="patches rendered as PNG")

    p = sub.add_parser("train", help="train a denoiser")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--iters", type=int, default=200_000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--timesteps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=("full", "desk"), default="full",
                   help="desk sets iters=2000 and timesteps=200")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--beta-start", type=float, default=1e-4)
    p.add_argument("--beta-end", type=float, default=0.02)
    p.add_argument("--checkpoint-every", type=int, default=10_000)
    p.add_argument("--base-channels", type=int, default=32)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("infer", help="sample outputs from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--snapshots", type=_int_list, default=[], help="state labels, e.g. 199,100,0")
    p.add_argument("--clamp", action="store_true", help="keep observed traces (interpolation)")
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--limit", type=int)

    p = sub.add_parser("fxdecon", help="FX-Decon baseline")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--filter-len", type=int, default=4)
    p.add_argument("--prewhiten", type=float, default=0.001)
    p.add_argument("--overlap", type=float, default=0.5)

    p = sub.add_parser("eval", help="SSIM/SNR report")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--tag", required=True)
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--family", help="family tag (defaults to the reference dataset's)")
    p.add_argument("--channel", type=int, default=0, help="channel of 3-D estimate files")

    p = sub.add_parser("diff", help="scaled difference images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float, default=3.0)
    p.add_argument("--no-render", dest="render", action="store_false")

    p = sub.add_parser("replay", help="re-run a recorded run.json")
    p.add_argument("run_json")
    p.add_argument("--out")
    return parser


def _dispatch(args: argparse.Namespace) -> Any:
    from seisdiff.workbench import Workbench

    bench = Workbench()
    if args.command == "synth":
        return bench.synth.run(
            args.task, args.family, args.count, args.seed, args.out,
            patch=args.patch, noise_fraction=args.noise_fraction, noise_mode=args.noise_mode,
            decimation=args.decimation, previews=args.previews,
        )
    if args.command == "train":
        return bench.trainer.run(
            args.data, args.out, task=args.task, iters=args.iters, batch=args.batch,
            timesteps=args.timesteps, seed=args.seed, profile=args.profile, lr=args.lr,
            beta_start=args.beta_start, beta_end=args.beta_end,
            checkpoint_every=args.checkpoint_every, base_channels=args.base_channels,
            depth=args.depth, resume=args.resume, workers=args.workers,
        )
    if args.command == "infer":
        return bench.inference.run(
            args.ckpt, args.input, args.seed, args.out,
            snapshots=args.snapshots, clamp=args.clamp, batch=args.batch, limit=args.limit,
        )
    if args.command == "fxdecon":
        return bench.baseline.run(
            args.input, args.out, window=args.window, filter_len=args.filter_len,
            prewhiten=args.prewhiten, overlap=args.overlap,
        )
    if args.command == "eval":
        return bench.evaluation.run(
            args.ref, args.est, args.tag, args.out, family=args.family, channel=args.channel
        )
    if args.command == "diff":
        return bench.differences.run(args.a, args.b, args.out, scale=args.scale, render=args.render)
    return bench.replay(args.run_json, out=args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run a subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except (SeisDiffError, OSError, FloatingPointError) as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
