"""ROC analysis and evaluation reports."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .audio_ingest import Manifest, load_labeled
from .classifier import Network, predict
from .features import MODE_ORDER, FeatureMode
from .pipeline import clip_grids, config_from_metadata, feature_matrix

log = logging.getLogger(__name__)

TARGET_TPR = 0.90


@dataclass(frozen=True)
class RocCurve:
    """Points ordered by descending threshold, from (0, 0) to (1, 1).

    The first point uses an infinite threshold (nothing flagged).
    """

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.tpr.tolist(), self.fpr.tolist()))


def roc(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """One point per distinct score (ties share a point); AUC by trapezoids."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both positive and negative examples")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tp = np.cumsum(y)[ends]
    fp = np.cumsum(~y)[ends]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds, tpr, fpr, auc)


def fpr_at_tpr(curve: RocCurve, target_tpr: float = TARGET_TPR) -> tuple[float, float]:
    """Lowest FPR among thresholds reaching ``target_tpr``, and that threshold.

    Scores ``>=`` the returned threshold are flagged as up-calls.
    """
    if not 0.0 < target_tpr <= 1.0:
        raise ValueError("target_tpr must be in (0, 1]")
    ok = np.nonzero(curve.tpr >= target_tpr - 1e-12)[0]
    if ok.size == 0:
        raise ValueError(f"no threshold reaches TPR {target_tpr}")
    # fpr is non-decreasing, so the first qualifying point is the cheapest
    i = ok[0]
    return float(curve.fpr[i]), float(curve.thresholds[i])


def write_roc_csv(curve: RocCurve, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "tpr", "fpr"])
        for t, tp, fp in curve.points:
            w.writerow([repr(t), repr(tp), repr(fp)])


@dataclass
class ModeResult:
    mode: FeatureMode
    clip_ids: list[str]
    labels: np.ndarray
    scores: np.ndarray
    curve: RocCurve
    fpr90: float
    threshold90: float


@dataclass
class Report:
    results: list[ModeResult]
    n_clips: int
    n_failed: int

    def summary(self) -> str:
        lines = [
            f"clips scored: {self.n_clips} (failed: {self.n_failed})",
            f"{'features':<12} {'AUC':>8} {'FPR%@TPR90':>11} {'threshold':>10}",
        ]
        for r in self.results:
            lines.append(
                f"{r.mode.value:<12} {r.curve.auc:8.4f} {100 * r.fpr90:11.2f} {r.threshold90:10.4f}"
            )
        return "\n".join(lines) + "\n"


def score_mode(
    model: Network, mode: FeatureMode, clip_ids: list[str], labels: np.ndarray, grids
) -> ModeResult:
    scores = predict(model, feature_matrix(grids, mode))
    curve = roc(scores, labels)
    fpr, thr = fpr_at_tpr(curve)
    return ModeResult(mode, clip_ids, labels, scores, curve, fpr, thr)


def evaluate_model(
    models: Network | Mapping[FeatureMode | str, Network],
    manifest: Manifest,
    report_dir: str | os.PathLike | None = None,
    jobs: int = 1,
) -> Report:
    """Score every manifest clip with each model and write ROC reports.

    Models are keyed by feature mode (a single model uses its own mode).
    Clips that fail to load are logged and skipped; the count is reported.
    """
    if isinstance(models, Network):
        models = {config_from_metadata(models.metadata).mode: models}
    models = {FeatureMode(k): v for k, v in models.items()}
    if not models:
        raise ValueError("no models to evaluate")
    if len(manifest) == 0:
        raise ValueError("manifest is empty")
    configs = {m: config_from_metadata(net.metadata) for m, net in models.items()}
    for mode, cfg in configs.items():
        if cfg.mode is not mode:
            raise ValueError(f"model for {mode.value} was trained on {cfg.mode.value} features")

    clips, labels, failed = [], [], 0
    for entry in manifest.entries:
        try:
            sub = Manifest([entry], manifest.root)
            for lc in load_labeled(sub):
                clips.append(lc.clip)
                labels.append(lc.label)
        except (OSError, ValueError) as exc:
            failed += 1
            log.warning("skipping %s: %s", entry.path, exc)
    if not clips:
        raise ValueError("no clip in the manifest could be loaded")
    labels_arr = np.asarray(labels)
    ids = [c.clip_id for c in clips]

    # modes sharing the same front-end settings share one pass over the audio
    grids_by_cfg: dict[str, list] = {}
    results = []
    for mode in [m for m in MODE_ORDER if m in models]:
        key = configs[mode].with_overrides({"features": FeatureMode.COMBINED20.value}).to_text()
        if key not in grids_by_cfg:
            grids_by_cfg[key] = clip_grids(clips, configs[mode], jobs)
        results.append(score_mode(models[mode], mode, ids, labels_arr, grids_by_cfg[key]))

    report = Report(results, len(clips), failed)
    if report_dir is not None:
        write_report(report, report_dir)
    return report


def write_report(report: Report, report_dir: str | os.PathLike) -> None:
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in report.results:
        with open(out / f"scores_{r.mode.value}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["clip", "label", "score"])
            for cid, lab, sc in zip(r.clip_ids, r.labels.tolist(), r.scores.tolist()):
                w.writerow([cid, lab, repr(sc)])
        write_roc_csv(r.curve, out / f"roc_{r.mode.value}.csv")
    (out / "summary.txt").write_text(report.summary(), encoding="utf-8")
