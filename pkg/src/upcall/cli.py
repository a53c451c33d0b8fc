"""Command-line entry point: ``upcall <command> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable audio, bad manifest or model file), 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_ingest import LABEL_TOKENS, AudioError, ManifestError, load_labeled, read_audio, read_clip_at, read_manifest
from .classifier import ModelFormatError, ShapeError, load_model, predict, save_model, train
from .evaluate import evaluate_model, fpr_at_tpr, roc
from .features import FeatureMode, feature_names
from .pipeline import (
    ConfigError,
    PipelineConfig,
    analyze,
    clip_grids,
    config_from_metadata,
    config_metadata,
    feature_matrix,
    load_config,
    parse_key_values,
)
from .spectrogram import to_gray, write_pgm
from .synthgen import SynthSpec, write_dataset

log = logging.getLogger("upcall")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
STAGES = ("raw", "preprocessed", "binary", "regions", "roi")
THRESHOLD_KEY = "operating_threshold"
DEFAULT_THRESHOLD = 0.5
_LABEL_NAMES = {v: k for k, v in LABEL_TOKENS.items()}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which is our data-error code
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers


def _pipeline_config(args) -> PipelineConfig:
    overrides = dict(_split_sets(args.set))
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "features", None) is not None:
        overrides["features"] = args.features
    cfg = load_config(args.config, overrides)
    _announce(cfg.to_text())
    return cfg


def _split_sets(items: Sequence[str] | None) -> list[tuple[str, str]]:
    out = []
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out.append((k.strip(), v.strip()))
    return out


def _announce(text: str) -> None:
    """Effective configuration goes to stderr so stdout stays machine-readable."""
    for line in text.splitlines():
        print(f"# {line}", file=sys.stderr)


def _ensure_fresh(path: Path, force: bool) -> None:
    if path.is_dir() and any(path.iterdir()) and not force:
        raise UsageError(f"{path} exists and is not empty; use --force to overwrite")
    if path.is_file() and not force:
        raise UsageError(f"{path} exists; use --force to overwrite")


def _synth_spec(path: str | None, overrides: dict) -> SynthSpec:
    values: dict = {}
    if path is not None:
        values.update(parse_key_values(Path(path).read_text(encoding="utf-8"), path))
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name: f for f in fields(SynthSpec)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown synth keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for k, v in values.items():
        if not isinstance(v, str):
            kwargs[k] = v
            continue
        try:
            if k == "n_clips" or k == "seed":
                kwargs[k] = int(v)
            elif "," in v:
                lo, hi = (float(p) for p in v.split(","))
                kwargs[k] = (lo, hi)
            else:
                kwargs[k] = float(v)
        except ValueError:
            raise ConfigError(f"bad value for {k}: {v!r}") from None
    try:
        return SynthSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_manifest_clips(path: str):
    manifest = read_manifest(path)
    labeled = list(load_labeled(manifest))
    return [lc.clip for lc in labeled], np.array([lc.label for lc in labeled], dtype=int)


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    spec = _synth_spec(args.spec, {"seed": args.seed, "n_clips": args.n_clips})
    out = Path(args.out_dir)
    _ensure_fresh(out, args.force)
    _announce("".join(f"{f.name}={getattr(spec, f.name)}\n" for f in fields(spec)))
    manifest = write_dataset(spec, out)
    print(f"wrote {spec.n_clips} clips ({spec.n_positive} upcall, {spec.n_clips - spec.n_positive} noise) to {manifest}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    cfg = _pipeline_config(args)
    out = Path(args.out_csv)
    _ensure_fresh(out, args.force)
    clips, labels = _load_manifest_clips(args.manifest)
    X = feature_matrix(clip_grids(clips, cfg, args.jobs), cfg.mode)
    rows = ([c.clip_id, int(lab), *map(repr, x.tolist())] for c, lab, x in zip(clips, labels, X))
    _write_rows(out, ["clip", "label", *feature_names(cfg.mode)], rows)
    print(f"wrote {len(clips)} x {cfg.mode.length} features to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _pipeline_config(args)
    model_path = Path(args.model_out)
    _ensure_fresh(model_path, args.force)
    clips, labels = _load_manifest_clips(args.manifest)
    X = feature_matrix(clip_grids(clips, cfg, args.jobs), cfg.mode)
    result = train(X, labels, cfg.train, metadata=config_metadata(cfg))
    net = result.network
    scores = predict(net, X)
    _, threshold = fpr_at_tpr(roc(scores, labels))
    net.metadata[THRESHOLD_KEY] = repr(float(threshold))
    save_model(net, model_path)
    loss_path = Path(args.loss_csv) if args.loss_csv else model_path.with_suffix(".loss.csv")
    _write_rows(loss_path, ["epoch", "mse"], ((i + 1, repr(v)) for i, v in enumerate(result.loss_trace)))
    if args.scores_csv:
        _write_rows(
            Path(args.scores_csv),
            ["clip", "label", "score"],
            ((c.clip_id, int(lab), repr(float(s))) for c, lab, s in zip(clips, labels, scores)),
        )
    print(
        f"trained {cfg.mode.value} on {len(clips)} clips; final mse {result.loss_trace[-1]:.6f}; "
        f"threshold@TPR90 {threshold:.6f}; model {model_path}"
    )
    return EXIT_OK


def cmd_classify(args) -> int:
    net = load_model(args.model)
    cfg = config_from_metadata(net.metadata)
    if args.features is not None and FeatureMode(args.features) is not cfg.mode:
        raise ConfigError(f"model was trained on {cfg.mode.value} features, not {args.features}")
    _announce(cfg.to_text())
    threshold = float(net.metadata.get(THRESHOLD_KEY, DEFAULT_THRESHOLD))
    clips = [clip for path in args.audio for clip in read_audio(path)]
    X = feature_matrix(clip_grids(clips, cfg, args.jobs), cfg.mode)
    for clip, score in zip(clips, predict(net, X)):
        decision = _LABEL_NAMES[int(score >= threshold)]
        print(f"{clip.clip_id},{float(score)!r},{decision}")
    return EXIT_OK


def cmd_eval(args) -> int:
    models = {}
    for path in args.model:
        net = load_model(path)
        mode = config_from_metadata(net.metadata).mode
        if mode in models:
            raise ConfigError(f"two models for feature mode {mode.value}")
        models[mode] = net
    report = evaluate_model(models, read_manifest(args.manifest), args.report_dir, args.jobs)
    sys.stdout.write(report.summary())
    return EXIT_OK


def _analysis(args):
    cfg = _pipeline_config(args)
    return analyze(read_clip_at(args.audio, args.offset), cfg)


def cmd_render(args) -> int:
    if args.stage not in STAGES:
        raise UsageError(f"unknown stage {args.stage!r}; valid stages: {', '.join(STAGES)}")
    a = _analysis(args)
    if args.stage == "raw":
        gray = to_gray(a.raw.values)
    elif args.stage == "preprocessed":
        gray = to_gray(a.conditioned.values)
    elif args.stage == "binary":
        gray = np.flipud(np.where(a.detection.binary.pixels, 255, 0).astype(np.uint8))
    elif args.stage == "roi":
        gray = to_gray(a.detection.roi.values)
    else:
        # dim the background so kept boundaries stand out at full white
        base = np.flipud(to_gray(a.conditioned.values)).astype(np.float64) * (191.0 / 255.0)
        edge = np.zeros(base.shape, dtype=bool)
        for region in a.detection.kept:
            rr, cc = zip(*region.boundary)
            edge[list(rr), list(cc)] = True
        gray = np.flipud(np.where(edge, 255, np.round(base)).astype(np.uint8))
    write_pgm(args.out_pgm, gray)
    print(f"wrote {args.stage} image {gray.shape[0]}x{gray.shape[1]} to {args.out_pgm}")
    return EXIT_OK


def cmd_detect(args) -> int:
    a = _analysis(args)
    rows = []
    for i, (r, why) in enumerate(zip(a.detection.regions, a.detection.failures)):
        rows.append(
            [
                i,
                int(why is None),
                why or "",
                r.area_px,
                r.perimeter_px,
                repr(r.height_hz),
                repr(r.width_s),
                repr(r.ellipse_orientation_deg),
                repr(r.ellipse_axes_ratio),
                repr(r.hw_ratio),
                repr(r.freq_min_hz),
                repr(r.freq_max_hz),
            ]
        )
    header = [
        "region", "kept", "first_failure", "area_px", "perimeter_px", "height_hz", "width_s",
        "orientation_deg", "axes_ratio", "hw_ratio", "freq_min_hz", "freq_max_hz",
    ]
    if args.out_csv in (None, "-"):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    else:
        _write_rows(Path(args.out_csv), header, rows)
    kept = sum(int(f is None) for f in a.detection.failures)
    print(f"{len(rows)} regions, {kept} kept", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="upcall", description="Right-whale up-call detection pipeline.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def pipeline_opts(sp, features=True):
        sp.add_argument("--config", help="key=value file layered over the defaults")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
        sp.add_argument("--seed", type=int, help="training seed (overrides the config)")
        if features:
            sp.add_argument("--features", choices=[m.value for m in FeatureMode])
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for per-clip work")

    sp = sub.add_parser("synth", help="write a seeded synthetic dataset")
    sp.add_argument("out_dir")
    sp.add_argument("--spec", help="key=value file of generator settings")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-clips", type=int)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("featurize", help="write the feature matrix of a manifest as CSV")
    sp.add_argument("manifest")
    sp.add_argument("out_csv")
    sp.add_argument("--force", action="store_true")
    pipeline_opts(sp)
    sp.set_defaults(func=cmd_featurize)

    sp = sub.add_parser("train", help="train a model on a labeled manifest")
    sp.add_argument("manifest")
    sp.add_argument("model_out")
    sp.add_argument("--loss-csv", help="per-epoch loss (default: MODEL.loss.csv)")
    sp.add_argument("--scores-csv", help="also write training-set scores")
    sp.add_argument("--force", action="store_true")
    pipeline_opts(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("classify", help="score every 2 s slice of audio files")
    sp.add_argument("model")
    sp.add_argument("audio", nargs="+")
    sp.add_argument("--features", choices=[m.value for m in FeatureMode], help="assert the model's mode")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("eval", help="ROC report of one or more models on a manifest")
    sp.add_argument("manifest")
    sp.add_argument("report_dir")
    sp.add_argument("--model", action="append", required=True, help="model file (repeat for several modes)")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("render", help="write one pipeline stage of a clip as PGM")
    sp.add_argument("audio")
    sp.add_argument("stage", help=f"one of: {', '.join(STAGES)}")
    sp.add_argument("out_pgm")
    sp.add_argument("--offset", type=float, default=0.0, help="clip start in seconds")
    pipeline_opts(sp, features=False)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("detect", help="list traced regions of a clip with their screening outcome")
    sp.add_argument("audio")
    sp.add_argument("out_csv", nargs="?", help="CSV path, default stdout")
    sp.add_argument("--offset", type=float, default=0.0)
    pipeline_opts(sp, features=False)
    sp.set_defaults(func=cmd_detect)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"upcall: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AudioError, ManifestError, ModelFormatError, ShapeError, OSError, ValueError) as exc:
        print(f"upcall: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AssertionError, RuntimeError, FloatingPointError) as exc:
        print(f"upcall: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
