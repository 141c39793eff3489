"""Objective-vs-subjective statistics and bitrate ladder reports."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import EvaluationError

log = logging.getLogger(__name__)

CSV_COLUMNS = ("excerpt_id", "condition", "is_anchor", "predicted", "mos", "ci95")
AUDIO_SUFFIXES = (".wav", ".mp4", ".m4a", ".aac", ".mkv", ".flac", ".mp3", ".ogg", ".opus")


@dataclass
class EvaluationRecord:
    excerpt_id: str
    condition: str
    predicted: float
    mos: float
    ci95: Optional[float] = None
    is_anchor: bool = False

    def __post_init__(self):
        if not 0.0 <= self.mos <= 100.0:
            raise EvaluationError(f"mos {self.mos} outside [0, 100]")
        if self.ci95 is not None and self.ci95 < 0:
            raise EvaluationError(f"ci95 {self.ci95} is negative")


@dataclass
class CorrelationReport:
    r_pearson: float
    r_spearman: float
    outlier_ratio: Optional[float]
    n: int
    anchors: str = "with"
    subsets: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _vectors(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise EvaluationError("score vectors must be 1D and of equal length")
    if len(x) < 3:
        raise EvaluationError(f"need at least 3 pairs, got {len(x)}")
    return x, y


def pearson(x, y) -> float:
    x, y = _vectors(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise EvaluationError("zero variance")
    return float(np.dot(dx, dy) / math.sqrt(sxx * syy))


def rankdata(a) -> np.ndarray:
    """1-based ranks with ties given their mean rank."""
    a = np.asarray(a, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(len(a))
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    x, y = _vectors(x, y)
    return pearson(rankdata(x), rankdata(y))


def outlier_ratio(records: Sequence[EvaluationRecord]) -> float:
    """Fraction of records whose prediction error exceeds their 95% CI half-width."""
    if not records:
        raise EvaluationError("no records")
    if any(r.ci95 is None for r in records):
        raise EvaluationError("dataset lacks confidence intervals")
    outside = sum(abs(r.predicted - r.mos) > r.ci95 for r in records)
    return outside / len(records)


def _parse_bool(text: str, lineno: int) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise EvaluationError(f"line {lineno}: is_anchor must be 0 or 1, got {text!r}")


def _parse_float(text: str, name: str, lineno: int, optional=False):
    if optional and text.strip() == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise EvaluationError(f"line {lineno}: {name} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise EvaluationError(f"line {lineno}: {name} is not finite")
    return value


def read_dataset(csv_path) -> list:
    """Parse the evaluation CSV (header required, UTF-8, dot decimals).

    An empty ``ci95`` cell is kept as missing; the outlier ratio is then
    unavailable for that dataset.
    """
    records = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EvaluationError(f"{csv_path}: empty file") from None
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise EvaluationError(f"line 1: header lacks column(s) {', '.join(missing)}")
        col = {name: header.index(name) for name in CSV_COLUMNS}
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise EvaluationError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                records.append(EvaluationRecord(
                    excerpt_id=row[col["excerpt_id"]].strip(),
                    condition=row[col["condition"]].strip(),
                    is_anchor=_parse_bool(row[col["is_anchor"]], lineno),
                    predicted=_parse_float(row[col["predicted"]], "predicted", lineno),
                    mos=_parse_float(row[col["mos"]], "mos", lineno),
                    ci95=_parse_float(row[col["ci95"]], "ci95", lineno, optional=True),
                ))
            except EvaluationError as exc:
                msg = str(exc.args[0])
                raise EvaluationError(msg if msg.startswith("line") else f"line {lineno}: {msg}") from None
    if not records:
        raise EvaluationError(f"{csv_path}: no data rows")
    return records


def write_dataset(records: Sequence[EvaluationRecord], csv_path) -> None:
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([r.excerpt_id, r.condition, int(r.is_anchor), repr(r.predicted), repr(r.mos),
                        "" if r.ci95 is None else repr(r.ci95)])


def correlation_stats(records: Sequence[EvaluationRecord]) -> dict:
    pred = [r.predicted for r in records]
    mos = [r.mos for r in records]
    if all(r.ci95 is not None for r in records):
        ratio = outlier_ratio(records)
    else:
        log.warning("ci95 missing for some rows; outlier ratio not reported")
        ratio = None
    return {
        "r_pearson": pearson(pred, mos),
        "r_spearman": spearman(pred, mos),
        "outlier_ratio": ratio,
        "n": len(records),
    }


def evaluate_records(records: Sequence[EvaluationRecord], anchors_filter: str = "with") -> CorrelationReport:
    if anchors_filter not in ("with", "without"):
        raise EvaluationError("anchors_filter must be 'with' or 'without'")
    subsets = {"with_anchors": correlation_stats(records)}
    non_anchor = [r for r in records if not r.is_anchor]
    try:
        subsets["without_anchors"] = correlation_stats(non_anchor)
    except EvaluationError as exc:
        if anchors_filter == "without":
            raise
        log.warning("without-anchors subset not computable: %s", exc)
        subsets["without_anchors"] = None
    primary = subsets["with_anchors" if anchors_filter == "with" else "without_anchors"]
    return CorrelationReport(anchors=anchors_filter, subsets=subsets, **primary)


def evaluate_dataset(csv_path, anchors_filter: str = "with") -> CorrelationReport:
    """Rp, Rs and outlier ratio for a scored dataset, with and without anchor rows."""
    return evaluate_records(read_dataset(csv_path), anchors_filter)


@dataclass
class LadderReport:
    bitrates: list
    mean_scores: list
    per_excerpt: dict
    verdict: str
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_tsv(self) -> str:
        lines = ["bitrate\tmean_score\tn_excerpts"]
        n = len(self.per_excerpt)
        for b, m in zip(self.bitrates, self.mean_scores):
            lines.append(f"{b:g}\t{m:.6f}\t{n}")
        return "\n".join(lines) + "\n"


def _excerpts(directory: Path) -> dict:
    if not directory.is_dir():
        raise EvaluationError(f"not a directory: {directory}")
    return {p.stem: p for p in sorted(directory.iterdir())
            if p.is_file() and p.suffix.lower() in AUDIO_SUFFIXES}


def ladder_report(
    ref_dir,
    coded_dir_per_bitrate: Mapping[float, object],
    scorer: Optional[Callable] = None,
    jobs: int = 1,
) -> LadderReport:
    """Mean score per bitrate over a fixed excerpt set.

    ``scorer(ref_path, coded_path) -> float`` defaults to the pooled
    AudioVMAF score. Files are matched across directories by stem.
    """
    if not coded_dir_per_bitrate:
        raise EvaluationError("no bitrate rungs given")
    if scorer is None:
        from .vmaf import audiovmaf_score

        def scorer(ref, coded):
            return audiovmaf_score(ref, coded).pooled

    refs = _excerpts(Path(ref_dir))
    if not refs:
        raise EvaluationError(f"no audio files in {ref_dir}")
    rungs = sorted((float(b), Path(d)) for b, d in coded_dir_per_bitrate.items())
    jobs_list = []
    for bitrate, d in rungs:
        coded = _excerpts(d)
        if set(coded) != set(refs):
            extra = sorted(set(coded) - set(refs))
            lacking = sorted(set(refs) - set(coded))
            raise EvaluationError(
                f"excerpt mismatch at {bitrate:g}: missing {lacking or '-'}, unexpected {extra or '-'}"
            )
        jobs_list.extend((bitrate, name, refs[name], coded[name]) for name in sorted(refs))

    def run(job):
        bitrate, name, ref, coded = job
        return float(scorer(ref, coded))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        scores = list(pool.map(run, jobs_list))

    per_excerpt: dict = {name: {} for name in sorted(refs)}
    for (bitrate, name, _, _), s in zip(jobs_list, scores):
        per_excerpt[name][f"{bitrate:g}"] = s
    bitrates = [b for b, _ in rungs]
    means = [float(np.mean([per_excerpt[n][f"{b:g}"] for n in per_excerpt])) for b in bitrates]
    monotone = all(b > a for a, b in zip(means, means[1:]))
    flags = ["insufficient rungs"] if len(bitrates) < 2 else []
    return LadderReport(bitrates, means, per_excerpt, "monotone" if monotone else "non-monotone", flags)


def parse_rung(text: str):
    """``"64=path/to/dir"`` or ``"64k=path"`` -> ``(64.0, Path)``."""
    if "=" not in text:
        raise EvaluationError(f"rung must be BITRATE=DIR, got {text!r}")
    rate, _, path = text.partition("=")
    rate = rate.strip().lower().removesuffix("kbps").removesuffix("k")
    try:
        return float(rate), Path(path)
    except ValueError:
        raise EvaluationError(f"bad bitrate in rung {text!r}") from None
