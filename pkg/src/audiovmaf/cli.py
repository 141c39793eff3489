"""``audiovmaf`` command line: score, render, metrics1d, evaluate, ladder.

JSON goes to stdout (or ``--output``); human-readable summaries go to stderr.
Exit status: 0 success, 1 usage error, 2 pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import PRESETS, PipelineConfig, load_config
from .errors import AudioVmafError, ConfigError

log = logging.getLogger("audiovmaf")

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_config_args(p):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", metavar="FILE", help="INI-style override file")
    g.add_argument("--preset", default="paper-default", choices=sorted(PRESETS))
    g.add_argument("--no-replication", action="store_true", help="place one tile top-left instead of tiling")
    g.add_argument("--colormap", choices=("hsv", "grayscale"))
    g.add_argument("--engine", metavar="FFMPEG", help="ffmpeg with libvmaf (default: $AUDIOVMAF_FFMPEG, PATH)")
    g.add_argument("--model", help="VMAF model name or JSON path (default: $AUDIOVMAF_VMAF_MODEL, vmaf_v0.6.1)")
    g.add_argument("--max-lag", type=float, metavar="SECONDS", help="alignment search range")
    g.add_argument("--keep-intermediates", action="store_true", help="keep spectrogram videos")
    g.add_argument("--workdir", help="directory for intermediate files")


def _common(p):
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = _Parser(prog="audiovmaf", description="Coded-audio quality via spectrogram videos and VMAF.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", help="AudioVMAF score of CODED against REF")
    p.add_argument("ref")
    p.add_argument("coded")
    _add_config_args(p)
    _common(p)

    p = sub.add_parser("render", help="write spectrogram frames as PNGs and/or a video")
    p.add_argument("input")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-png", action="store_true")
    p.add_argument("--video", action="store_true", help="also write frames.mkv")
    p.add_argument("--dump-spectrogram", action="store_true", help="write per-signal binary spectrogram dumps")
    _add_config_args(p)
    _common(p)

    p = sub.add_parser("metrics1d", help="1D SSIM/MS-SSIM/VIFP/GMSM/GMSD on the mid signal")
    p.add_argument("ref")
    p.add_argument("coded")
    p.add_argument("--no-align", action="store_true")
    _add_config_args(p)
    _common(p)

    p = sub.add_parser("evaluate", help="correlation statistics for a scored dataset CSV")
    p.add_argument("csv")
    p.add_argument("--without-anchors", action="store_true")
    _common(p)

    p = sub.add_parser("ladder", help="mean score per bitrate rung")
    p.add_argument("--ref", required=True, help="directory of reference excerpts")
    p.add_argument("--rung", action="append", required=True, metavar="BITRATE=DIR")
    p.add_argument("--tsv", help="write a plot-ready table here")
    p.add_argument("-j", "--jobs", type=int, default=1, help="concurrent excerpt pipelines")
    _add_config_args(p)
    _common(p)
    return parser


def resolve_config(args) -> PipelineConfig:
    overrides: dict = {}
    if getattr(args, "no_replication", False):
        overrides.setdefault("composer", {})["replication"] = False
    if getattr(args, "colormap", None):
        overrides.setdefault("composer", {})["colormap"] = args.colormap
    vmaf = {}
    for key in ("engine", "model", "workdir"):
        if getattr(args, key, None):
            vmaf[key] = getattr(args, key)
    if getattr(args, "keep_intermediates", False):
        vmaf["keep_intermediates"] = True
    if vmaf:
        overrides["vmaf"] = vmaf
    if getattr(args, "max_lag", None) is not None:
        overrides["alignment"] = {"max_lag_s": args.max_lag}
    return load_config(getattr(args, "config", None), getattr(args, "preset", "paper-default"), overrides)


def _emit(args, payload):
    text = json.dumps(payload, indent=2, sort_keys=False)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_score(args, cfg):
    from .vmaf import audiovmaf_score

    result = audiovmaf_score(args.ref, args.coded, cfg)
    payload = result.to_dict()
    payload["config"] = cfg.to_dict()
    _emit(args, payload)
    print(f"AudioVMAF {result.pooled:.3f} over {len(result.per_frame)} frames "
          f"(lag {result.alignment['lag_samples']} samples, model {result.model_id})", file=sys.stderr)


def cmd_render(args, cfg):
    from .composer import compose_stream, save_png
    from .frontend import save_spectrogram
    from .vmaf import load_media, signal_spectrograms, write_video

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = load_media(args.input, cfg)
    specs = signal_spectrograms(buf, cfg)
    names = ["L", "R", "M"] if buf.channel_layout == "stereo" else ["mono"]
    dumps = []
    if args.dump_spectrogram:
        for name, spec in zip(names, specs):
            path = out / f"spectrogram_{name}.erbs"
            save_spectrogram(spec, path)
            dumps.append(str(path))
    n_png = 0
    if not args.no_png:
        for frame in compose_stream(specs, cfg.composer):
            save_png(frame, out / f"frame_{frame.frame_index:05d}.png")
            n_png += 1
    video = None
    if args.video:
        video = out / "frames.mkv"
        write_video(compose_stream(specs, cfg.composer), video, cfg.engine)
    _emit(args, {
        "frames": specs[0].num_columns,
        "pngs": n_png,
        "video": str(video) if video else None,
        "spectrogram_dumps": dumps,
        "channel_layout": buf.channel_layout,
        "signals": names,
        "config": cfg.to_dict(),
    })
    print(f"rendered {specs[0].num_columns} frames to {out}", file=sys.stderr)


def cmd_metrics1d(args, cfg):
    from .errors import MetricError
    from .mediaio import downmix_mid, time_align
    from .metrics1d import metrics_report
    from .vmaf import load_media

    ref = load_media(args.ref, cfg)
    coded = load_media(args.coded, cfg)
    lag = None
    if not args.no_align:
        coded, report = time_align(ref, coded, cfg.max_lag_s)
        lag = report.lag_samples
    if len(ref) != len(coded):
        raise MetricError(f"length mismatch after alignment: {len(ref)} vs {len(coded)} samples")
    signal = "mono"
    if ref.channel_layout == "stereo" or coded.channel_layout == "stereo":
        if ref.channel_layout != coded.channel_layout:
            raise MetricError("channel layout mismatch")
        ref, coded, signal = downmix_mid(ref), downmix_mid(coded), "mid"
    rep = metrics_report(ref.samples[0], coded.samples[0], cfg.metrics1d)
    payload = rep.to_dict()
    payload.update({"signal": signal, "alignment": {"lag_samples": lag}, "config": cfg.to_dict()})
    _emit(args, payload)
    print("  ".join(f"{k}={v:.4f}" for k, v in rep.to_dict().items()), file=sys.stderr)


def cmd_evaluate(args, cfg):
    from .evaluation import evaluate_dataset

    anchors = "without" if args.without_anchors else "with"
    report = evaluate_dataset(args.csv, anchors)
    payload = report.to_dict()
    payload["config"] = {"anchors_filter": anchors, "csv": str(args.csv)}
    _emit(args, payload)
    orr = "n/a" if report.outlier_ratio is None else f"{report.outlier_ratio:.3f}"
    print(f"n={report.n} Rp={report.r_pearson:.3f} Rs={report.r_spearman:.3f} OR={orr} ({anchors} anchors)",
          file=sys.stderr)


def cmd_ladder(args, cfg):
    from .evaluation import ladder_report, parse_rung
    from .vmaf import audiovmaf_score

    rungs = dict(parse_rung(r) for r in args.rung)

    def scorer(ref, coded):
        return audiovmaf_score(ref, coded, cfg).pooled

    report = ladder_report(args.ref, rungs, scorer=scorer, jobs=args.jobs)
    if args.tsv:
        Path(args.tsv).write_text(report.to_tsv())
    payload = report.to_dict()
    payload["config"] = cfg.to_dict()
    _emit(args, payload)
    print(f"{report.verdict}: " + ", ".join(f"{b:g}->{m:.2f}" for b, m in zip(report.bitrates, report.mean_scores))
          + (f" [{', '.join(report.flags)}]" if report.flags else ""), file=sys.stderr)


COMMANDS = {
    "score": cmd_score,
    "render": cmd_render,
    "metrics1d": cmd_metrics1d,
    "evaluate": cmd_evaluate,
    "ladder": cmd_ladder,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args) if args.command != "evaluate" else None
    except ConfigError as exc:
        print(f"audiovmaf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args, cfg)
    except AudioVmafError as exc:
        print(f"audiovmaf {args.command}: failed at stage {exc.stage}: {exc.args[0]}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"audiovmaf {args.command}: failed at stage io: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
