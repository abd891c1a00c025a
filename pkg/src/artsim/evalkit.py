"""Evaluation machinery: retrieved-vs-random trials with exact-match
controls, exact binomial significance, Pearson correlation, per-dataset
accuracy/quartile reports, and pilot-session yield summaries.

Human judgments are external input (a CSV of per-trial selections); the
machine-proxy judge exists only so the full pipeline can be exercised
end-to-end without raters and is clearly labeled as such.
"""

from __future__ import annotations

import csv
import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annforest import RPForestIndex
from .corpus import DatasetManifest
from .errors import (
    ConstantSeries,
    DatasetTooSmall,
    EmptyResponses,
    InvalidParams,
    LengthMismatch,
    NoRetrievals,
    UnknownImage,
)
from .features import DescriptorConfig, DescriptorExtractor
from .raster import RasterImage

__all__ = [
    "Trial",
    "Response",
    "SessionLog",
    "generate_trials",
    "binomial_test",
    "pearson",
    "AccuracyReport",
    "accuracy_report",
    "session_yield",
    "PilotSummary",
    "pilot_summary",
    "machine_proxy_responses",
    "trials_to_jsonl",
    "trials_from_jsonl",
    "responses_to_csv",
    "responses_from_csv",
    "logs_from_csv",
    "parse_duration",
    "format_duration",
]


@dataclass(frozen=True)
class Trial:
    trial_id: str
    seed_id: str
    retrieved_id: str
    random_id: str
    dataset: str
    is_control: bool
    retrieved_distance: float


@dataclass(frozen=True)
class Response:
    participant_id: str
    trial_id: str
    chose_retrieved: int  # 1 if the retrieved image was selected


@dataclass(frozen=True)
class SessionLog:
    participant: str
    duration_seconds: float
    external_seeds: int
    internal_seeds: int
    pins: int
    dataset_pins: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.external_seeds, self.internal_seeds, self.pins) < 0:
            raise ValueError("counts must be >= 0")
        if self.dataset_pins and sum(self.dataset_pins.values()) != self.pins:
            raise ValueError("per-dataset pins must sum to pins")


# ----------------------------------------------------------------------
# Trial generation
# ----------------------------------------------------------------------

def generate_trials(seed_ids, forest: RPForestIndex, manifest: DatasetManifest,
                    rng_seed: int, controls_per_100: int = 4) -> list[Trial]:
    """One retrieved-vs-random trial per seed plus injected exact-match controls.

    Each trial lives inside the seed's dataset: the retrieved image is the
    rank-1 index result within that dataset (the seed itself excluded) and
    the random one is drawn uniformly from the same dataset, never equal to
    the retrieved image. controls_per_100 = 4 reproduces the 4-in-100
    control rate; controls pair the seed's exact image (distance 0) against
    a random one and are spliced in at rng-chosen positions.
    """
    if not 0 <= controls_per_100 < 100:
        raise InvalidParams("controls_per_100 must be in [0, 100)")
    records = manifest.by_id()
    ids_by_tag: dict[str, list[str]] = {}
    offsets_by_tag: dict[str, list[int]] = {}
    id_by_offset: dict[int, str] = {}
    for rec in manifest.records:
        ids_by_tag.setdefault(rec.dataset, []).append(rec.id)
        offsets_by_tag.setdefault(rec.dataset, []).append(rec.offset)
        id_by_offset[rec.offset] = rec.id
    rng = random.Random(rng_seed)

    def rank1_in_dataset(rec) -> tuple[str, float]:
        qv = forest.vectors_[rec.offset].astype(np.float64)
        for r in forest.query(qv, k=min(forest.n_items_, 50)):
            if r.item != rec.offset and id_by_offset[r.item] in ids_by_tag[rec.dataset] \
                    and records[id_by_offset[r.item]].dataset == rec.dataset:
                return id_by_offset[r.item], r.distance
        # approximate pass missed the dataset: exact scan over its rows
        offs = np.array([o for o in offsets_by_tag[rec.dataset] if o != rec.offset])
        dists = 1.0 - forest.vectors_[offs] @ qv
        j = int(np.lexsort((offs, dists))[0])
        return id_by_offset[int(offs[j])], float(dists[j])

    def base_trial(seed_id: str, is_control: bool) -> Trial:
        rec = records.get(seed_id)
        if rec is None:
            raise UnknownImage(seed_id)
        pool = ids_by_tag[rec.dataset]
        if len(pool) < 2:
            raise DatasetTooSmall(f"dataset {rec.dataset} has {len(pool)} images")
        if is_control:
            retrieved, distance = seed_id, 0.0
        else:
            retrieved, distance = rank1_in_dataset(rec)
        random_id = rng.choice([i for i in pool if i != retrieved])
        return Trial("", seed_id, retrieved, random_id, rec.dataset, is_control, distance)

    trials = [base_trial(s, False) for s in seed_ids]
    n_controls = round(len(trials) * controls_per_100 / (100 - controls_per_100))
    control_seeds = [rng.choice(list(seed_ids)) for _ in range(n_controls)]
    controls = [base_trial(s, True) for s in control_seeds]
    total = len(trials) + len(controls)
    positions = sorted(rng.sample(range(total), len(controls)))
    merged: list[Trial | None] = [None] * total
    for pos, trial in zip(positions, controls):
        merged[pos] = trial
    backlog = iter(trials)
    for i in range(total):
        if merged[i] is None:
            merged[i] = next(backlog)
    return [Trial(f"trial_{i:04d}", t.seed_id, t.retrieved_id, t.random_id,
                  t.dataset, t.is_control, t.retrieved_distance)
            for i, t in enumerate(merged)]


# ----------------------------------------------------------------------
# Statistics
# ----------------------------------------------------------------------

def binomial_test(successes: int, n: int, p0: float) -> float:
    """One-sided (upper tail) exact binomial p-value.

    P(X >= successes | X ~ Binomial(n, p0)), summed in log space so large
    n stays stable.
    """
    if not (isinstance(successes, (int, np.integer)) and isinstance(n, (int, np.integer))):
        raise InvalidParams("successes and n must be integers")
    if not 0 <= successes <= n or n < 1:
        raise InvalidParams(f"need 0 <= successes <= n, got {successes}/{n}")
    if not 0.0 < p0 < 1.0:
        raise InvalidParams("p0 must be strictly inside (0, 1)")
    log_p = math.log(p0)
    log_q = math.log1p(-p0)
    log_n_fact = math.lgamma(n + 1)
    terms = [
        log_n_fact - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * log_p + (n - k) * log_q
        for k in range(successes, n + 1)
    ]
    peak = max(terms)
    return float(min(1.0, math.exp(peak + math.log(sum(math.exp(t - peak) for t in terms)))))


def pearson(xs, ys) -> float:
    """Sample Pearson product-moment correlation coefficient."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"series shapes differ: {x.shape} vs {y.shape}")
    if x.shape[0] < 2:
        raise LengthMismatch("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise ConstantSeries("correlation undefined for a constant series")
    return float(np.clip(float(xc @ yc) / (sx * sy), -1.0, 1.0))


# ----------------------------------------------------------------------
# Accuracy report (per-dataset accuracy, distances, quartiles)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetRow:
    dataset: str
    accuracy: float         # mean of per-image accuracies
    avg_distance: float     # mean retrieved distance over images
    pearson_r: float | None  # distance vs incorrect-count; None if undefined
    quartile_pct: tuple[float, float, float, float]


@dataclass(frozen=True)
class AccuracyReport:
    rows: tuple[DatasetRow, ...]   # one per dataset, then "All"
    n_images: int
    n_responses: int
    p_per_response: float  # binomial over every non-control response
    p_per_image: float     # binomial over majority-correct images

    def format_table(self) -> str:
        width = max(10, max(len(row.dataset) for row in self.rows))
        header = (f"{'Dataset':<{width}} {'Avg Acc.':>9} {'Avg Dist.':>10} "
                  f"{'Pearson':>8} {'Q1(%)':>6} {'Q2(%)':>6} {'Q3(%)':>6} {'Q4(%)':>6}")
        lines = [header, "-" * len(header)]
        for row in self.rows:
            r = "n/a" if row.pearson_r is None else f"{row.pearson_r:.2f}"
            q = "".join(f" {v:>6.1f}" for v in row.quartile_pct)
            lines.append(f"{row.dataset:<{width}} {row.accuracy * 100:>8.2f}% "
                         f"{row.avg_distance:>10.3f} {r:>8}{q}")
        lines.append(f"binomial p (per response): {self.p_per_response:.3g}   "
                     f"(per image): {self.p_per_image:.3g}")
        return "\n".join(lines)


def accuracy_report(trials, responses) -> AccuracyReport:
    """Aggregate selections into the per-dataset summary table.

    Control trials are excluded from every aggregate. Quartiles are over
    per-image accuracy, ascending, ties broken by ascending trial id; the
    percentages say how much of each quartile's population each dataset
    contributes. Significance is offered both per response and per image
    (majority-correct), since either aggregation is defensible.
    """
    if not responses:
        raise EmptyResponses("no responses")
    by_id = {t.trial_id: t for t in trials}
    correct: dict[str, int] = {}
    total: dict[str, int] = {}
    for resp in responses:
        trial = by_id.get(resp.trial_id)
        if trial is None:
            raise InvalidParams(f"response references unknown trial {resp.trial_id!r}")
        if trial.is_control:
            continue
        total[resp.trial_id] = total.get(resp.trial_id, 0) + 1
        correct[resp.trial_id] = correct.get(resp.trial_id, 0) + int(resp.chose_retrieved)
    if not total:
        raise EmptyResponses("only control trials were answered")

    answered = sorted(total, key=lambda tid: tid)
    accuracy = {tid: correct[tid] / total[tid] for tid in answered}
    incorrect = {tid: total[tid] - correct[tid] for tid in answered}

    # quartiles: ascending accuracy, tie by trial id; earlier quartiles take
    # the remainder when the count is not divisible by 4
    order = sorted(answered, key=lambda tid: (accuracy[tid], tid))
    quartiles = [list(part) for part in np.array_split(np.array(order, dtype=object), 4)]

    datasets = sorted({by_id[tid].dataset for tid in answered})
    rows = []
    for tag in datasets + ["All"]:
        ids = [tid for tid in answered if tag == "All" or by_id[tid].dataset == tag]
        accs = [accuracy[tid] for tid in ids]
        dists = [by_id[tid].retrieved_distance for tid in ids]
        try:
            r = pearson(dists, [incorrect[tid] for tid in ids])
        except (ConstantSeries, LengthMismatch):
            r = None
        q_pct = tuple(
            100.0 * sum(1 for tid in part if tag == "All" or by_id[tid].dataset == tag)
            / len(part) if part else 0.0
            for part in quartiles
        )
        rows.append(DatasetRow(tag, float(np.mean(accs)), float(np.mean(dists)), r, q_pct))

    n_resp = sum(total.values())
    n_correct = sum(correct.values())
    majority = sum(1 for tid in answered if accuracy[tid] > 0.5)
    return AccuracyReport(
        rows=tuple(rows),
        n_images=len(answered),
        n_responses=n_resp,
        p_per_response=binomial_test(n_correct, n_resp, 0.5),
        p_per_image=binomial_test(majority, len(answered), 0.5),
    )


# ----------------------------------------------------------------------
# Pilot study summaries
# ----------------------------------------------------------------------

def session_yield(external_seeds: float, internal_seeds: float, pins: float) -> float:
    """Images pinned per retrieval action, reported to 2 decimals."""
    actions = external_seeds + internal_seeds
    if actions < 1:
        raise NoRetrievals("no retrieval actions")
    return math.floor(pins / actions * 100 + 0.5) / 100


@dataclass(frozen=True)
class PilotSummary:
    rows: tuple           # one (SessionLog, yield) per participant
    avg: SessionLog       # arithmetic means of the count columns
    avg_yield: float      # yield recomputed from the mean counts

    def format_table(self) -> str:
        tags = sorted({k for log, _ in self.rows for k in log.dataset_pins})
        header = (f"{'Part.':<8} {'Duration':>9} {'Ext.Seeds':>9} {'Int.Seeds':>9} "
                  f"{'Pins':>6} {'Yield':>6}"
                  + "".join(f" {t[:7].capitalize():>8}" for t in tags))
        lines = [header, "-" * len(header)]
        for log, y in self.rows:
            cells = "".join(f" {log.dataset_pins.get(t, 0):>8}" for t in tags)
            lines.append(f"{log.participant:<8} {format_duration(log.duration_seconds):>9} "
                         f"{log.external_seeds:>9} {log.internal_seeds:>9} "
                         f"{log.pins:>6} {y:>6.2f}{cells}")
        avg = self.avg
        cells = "".join(f" {avg.dataset_pins.get(t, 0.0):>8.2f}" for t in tags)
        lines.append(f"{'Avg':<8} {format_duration(avg.duration_seconds):>9} "
                     f"{avg.external_seeds:>9.2f} {avg.internal_seeds:>9.2f} "
                     f"{avg.pins:>6.2f} {self.avg_yield:>6.2f}{cells}")
        return "\n".join(lines)


def pilot_summary(logs) -> PilotSummary:
    """Per-participant rows plus a mean row.

    The mean row averages every count column arithmetically; its yield is
    recomputed from the mean counts (total pins per total retrievals),
    which is how a yield of averages is meaningful.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("need at least one session log")
    rows = tuple((log, session_yield(log.external_seeds, log.internal_seeds, log.pins))
                 for log in logs)
    n = len(logs)
    tags = sorted({k for log in logs for k in log.dataset_pins})
    mean_pins_by_tag = {t: sum(log.dataset_pins.get(t, 0) for log in logs) / n for t in tags}
    avg = SessionLog(
        participant="Avg",
        duration_seconds=sum(log.duration_seconds for log in logs) / n,
        external_seeds=sum(log.external_seeds for log in logs) / n,
        internal_seeds=sum(log.internal_seeds for log in logs) / n,
        pins=sum(log.pins for log in logs) / n,
        dataset_pins=mean_pins_by_tag,
    )
    return PilotSummary(rows, avg,
                        session_yield(avg.external_seeds, avg.internal_seeds, avg.pins))


def parse_duration(text: str) -> float:
    """'12m19s' -> seconds (plain numbers are taken as seconds)."""
    text = text.strip()
    m = re.fullmatch(r"(?:(\d+)m)?(\d+(?:\.\d+)?)s?", text)
    if not m:
        raise ValueError(f"bad duration {text!r}")
    minutes = int(m.group(1)) if m.group(1) else 0
    return minutes * 60 + float(m.group(2))


def format_duration(seconds: float) -> str:
    total = int(seconds)
    return f"{total // 60}m{total % 60:02d}s"


# ----------------------------------------------------------------------
# Machine-proxy judge (NOT a human simulation: a second descriptor config
# acting as an independent similarity opinion, for pipeline tests only)
# ----------------------------------------------------------------------

PROXY_JUDGE_CONFIG = DescriptorConfig(grid=3, color_bins=6, gradient_bins=6, resize_edge=96)


def machine_proxy_responses(trials, manifest: DatasetManifest, base_dir,
                            judge: DescriptorConfig = PROXY_JUDGE_CONFIG,
                            participant_id: str = "machine-proxy") -> list[Response]:
    """Answer every trial by comparing judge-descriptor distances."""
    extractor = DescriptorExtractor.from_config(judge)
    records = manifest.by_id()
    cache: dict[str, np.ndarray] = {}

    def vec(image_id: str) -> np.ndarray:
        if image_id not in cache:
            img = RasterImage.load(Path(base_dir) / records[image_id].path)
            cache[image_id] = extractor.extract(img)
        return cache[image_id]

    out = []
    for trial in trials:
        seed = vec(trial.seed_id)
        d_retr = 1.0 - float(seed @ vec(trial.retrieved_id))
        d_rand = 1.0 - float(seed @ vec(trial.random_id))
        out.append(Response(participant_id, trial.trial_id, int(d_retr <= d_rand)))
    return out


# ----------------------------------------------------------------------
# File formats
# ----------------------------------------------------------------------

def trials_to_jsonl(trials, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(json.dumps(vars(t)) + "\n")


def trials_from_jsonl(path) -> list[Trial]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(Trial(**json.loads(line)))
    return out


def responses_to_csv(responses, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id", "trial_id", "chose_retrieved"])
        for r in responses:
            writer.writerow([r.participant_id, r.trial_id, r.chose_retrieved])


def responses_from_csv(path) -> list[Response]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Response(row["participant_id"], row["trial_id"],
                                int(row["chose_retrieved"])))
    return out


def logs_from_csv(path) -> list[SessionLog]:
    """Pilot CSV: participant,duration,external_seeds,internal_seeds,pins
    plus one column per pin source (camera, abstract, ...)."""
    fixed = {"participant", "duration", "external_seeds", "internal_seeds", "pins"}
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            pins = {k: int(v) for k, v in row.items() if k not in fixed and v != ""}
            out.append(SessionLog(
                participant=row["participant"],
                duration_seconds=parse_duration(row["duration"]),
                external_seeds=int(row["external_seeds"]),
                internal_seeds=int(row["internal_seeds"]),
                pins=int(row["pins"]),
                dataset_pins=pins,
            ))
    return out
