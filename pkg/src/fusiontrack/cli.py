"""Command-line front end: ``track``, ``synth`` and ``eval`` subcommands.

Exit codes: 0 success, 1 usage/I/O/config error, 2 no detection in the sequence.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import fields
from pathlib import Path

from . import synth
from .background import GMMParams
from .evaluation import evaluate, read_boxes, write_errors_csv
from .frame_io import FrameFormatError, load_sequence, write_overlay
from .fusion import TrackerConfig
from .particle_filter import TransitionNoise
from .pipeline import track_sequence

EXIT_OK, EXIT_ERROR, EXIT_NO_DETECTION = 0, 1, 2
TRACK_HEADER = ("frame", "cx", "cy", "hx", "hy", "a")
FUSION_HEADER = ("frame_index", "lx", "ly", "vx", "vy", "hx", "hy", "a", "L_cr", "L_tx",
                 "Pr_cr", "Pr_tx", "occluded", "template_updated", "occlusion_run")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _dataclass_flags(group, prefix: str, cls) -> None:
    for f in fields(cls):
        group.add_argument(f"--{prefix}-{f.name.replace('_', '-')}", dest=f"{prefix}_{f.name}",
                           type=type(f.default), default=None, metavar=type(f.default).__name__.upper(),
                           help=f"default {f.default}")


def _overrides(args, prefix: str, cls):
    kw = {f.name: getattr(args, f"{prefix}_{f.name}") for f in fields(cls)}
    return cls(**{k: v for k, v in kw.items() if v is not None})


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fusiontrack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("track", help="detect and track the moving object in a PPM sequence")
    t.add_argument("--frames", required=True, type=Path, help="directory of P6 frames")
    t.add_argument("--pattern", default="*.ppm")
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--seed", type=int, default=42)
    t.add_argument("--particles", type=int, default=200)
    t.add_argument("--sigma-cr", type=float, default=0.1)
    t.add_argument("--sigma-tx", type=float, default=0.1)
    t.add_argument("--abrupt-multiplier", type=float, default=2.0)
    t.add_argument("--spread", choices=("stderr", "std"), default="stderr")
    t.add_argument("--coast-velocity", choices=("track", "state"), default="track")
    t.add_argument("--clear-history-on-update", action="store_true")
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--overlay", action="store_true", help="write boxed frames to OUT/overlay/")
    t.add_argument("--plot", action="store_true", help="write OUT/posteriors.png")
    _dataclass_flags(t.add_argument_group("transition noise"), "noise", TransitionNoise)
    _dataclass_flags(t.add_argument_group("background model"), "gmm", GMMParams)

    s = sub.add_parser("synth", help="render a built-in or scripted scene")
    s.add_argument("script", help="case1, case2 or a script file")
    s.add_argument("--out", required=True, type=Path)

    e = sub.add_parser("eval", help="compare a track CSV with ground truth")
    e.add_argument("track_csv", type=Path)
    e.add_argument("truth_csv", type=Path)
    e.add_argument("--out", type=Path, help="write errors.csv and errors.png here")
    return p


def _fmt(v) -> str:
    return repr(float(v))


def cmd_track(args) -> int:
    if args.particles < 2:
        raise ValueError("--particles must be at least 2")
    if args.workers < 1:
        raise ValueError("--workers must be at least 1")
    config = TrackerConfig(
        n_particles=args.particles, seed=args.seed, sigma_cr=args.sigma_cr, sigma_tx=args.sigma_tx,
        noise=_overrides(args, "noise", TransitionNoise), abrupt_multiplier=args.abrupt_multiplier,
        spread=args.spread, clear_history_on_update=args.clear_history_on_update,
        coast_velocity=args.coast_velocity, workers=args.workers,
    )
    gmm = _overrides(args, "gmm", GMMParams)
    frames = load_sequence(args.frames, args.pattern)
    if not frames:
        raise FileNotFoundError(f"no frames matching {args.pattern!r} in {args.frames}")
    result = track_sequence(frames, config, gmm)

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "track.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(TRACK_HEADER)
        for row in result.track:
            wr.writerow([row[0], *map(_fmt, row[1:])])
    with open(args.out / "fusion.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(FUSION_HEADER)
        for r in result.records:
            s = r.s_hat
            wr.writerow([r.frame_index, *map(_fmt, (s.lx, s.ly, s.vx, s.vy, s.hx, s.hy, s.a,
                                                    r.L_cr, r.L_tx, r.Pr_cr, r.Pr_tx)),
                         int(r.occluded), r.template_updated, r.occlusion_run])

    if result.detection is None:
        print("no detection in the sequence", file=sys.stderr)
        return EXIT_NO_DETECTION
    if args.overlay:
        odir = args.out / "overlay"
        odir.mkdir(exist_ok=True)
        by_index = {f.index: f for f in frames}
        for row in result.track:
            write_overlay(by_index[row[0]], row[1:5], odir / f"f{row[0]:04d}.ppm")
    if args.plot and result.records:
        from .report import plot_posteriors
        plot_posteriors(result.records, args.out / "posteriors.png")
    print(f"detection at frame {result.detection_frame}; tracked {len(result.records)} frames; "
          f"occluded on {sum(r.occluded for r in result.records)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.script in synth.BUILTIN_SCRIPTS:
        script = synth.BUILTIN_SCRIPTS[args.script]()
    elif Path(args.script).is_file():
        script = synth.load_script(args.script)
    else:
        raise ValueError(f"unknown script {args.script!r}: expected "
                         f"{', '.join(sorted(synth.BUILTIN_SCRIPTS))} or a script file")
    frames, truth = synth.write_sequence(script, args.out)
    print(f"wrote {len(frames)} frames and truth.csv to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    result = evaluate(read_boxes(args.track_csv), read_boxes(args.truth_csv))
    for f, err, _, _ in result.rows:
        print(f"{f}\t{err:.4f}")
    print(f"mean center error: {result.mean_center_error:.4f}")
    print(f"mean half-extent error: {result.mean_extent_error:.4f}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_errors_csv(args.out / "errors.csv", result)
        from .report import plot_errors
        plot_errors(result, args.out / "errors.png")
    return EXIT_OK


COMMANDS = {"track": cmd_track, "synth": cmd_synth, "eval": cmd_eval}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, FrameFormatError) as exc:
        print(f"fusiontrack {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
