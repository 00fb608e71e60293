"""Monte-Carlo Rademacher estimates, conditional estimates, paired gap reports
and the conditional/unconditional decomposition check."""
from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..geometry import AxisBox, trial_rng
from ..models import ClassSpec
from .constraints import LabeledSample, constraints_to_json
from .solve import sup_correlation

MONO_TOL = 1e-12
ZERO_GAP = 1e-9

CSV_COLUMNS = ("scenario_id", "class", "n", "trials", "seed", "R_predict_mean", "R_predict_se",
               "R_explain_mean_or_upper", "R_explain_lower", "gap_mean", "gap_ci_low", "gap_ci_high",
               "verdict", "runtime_ms")


@dataclass(frozen=True)
class EventSpec:
    """Product event: point i lies in regions[i] (None = anywhere) and, if given,
    the labels equal `labels`."""

    regions: tuple
    labels: tuple | None = None
    max_attempts: int = 100000
    direct: bool = True

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.labels is not None:
            labels = tuple(int(s) for s in self.labels)
            if len(labels) != len(self.regions) or any(s not in (-1, 1) for s in labels):
                raise DomainError("bad-event", "event labels must be +-1, one per point")
            object.__setattr__(self, "labels", labels)
        if self.max_attempts < 1:
            raise DomainError("bad-event", "max_attempts must be positive")

    @property
    def n(self) -> int:
        return len(self.regions)

    def region_masses(self, dist) -> list:
        return [1.0 if r is None else dist.box_mass(r) for r in self.regions]

    def probability(self, dist) -> float:
        p = math.prod(self.region_masses(dist))
        if self.labels is not None:
            p *= 0.5 ** self.n
        return p

    def holds(self, X, sigma) -> bool:
        for i, r in enumerate(self.regions):
            if r is not None and not r.contains(X[i]):
                return False
        return self.labels is None or tuple(int(s) for s in sigma) == self.labels

    def to_json(self) -> dict:
        return {"regions": [None if r is None else r.to_json() for r in self.regions],
                "labels": None if self.labels is None else list(self.labels),
                "max_attempts": self.max_attempts, "direct": self.direct}

    @classmethod
    def from_json(cls, doc: dict) -> "EventSpec":
        try:
            regions = tuple(None if r is None else AxisBox.from_json(r) for r in doc["regions"])
        except KeyError as exc:
            raise DomainError("bad-document", "event needs a regions list") from exc
        return cls(regions, doc.get("labels"), int(doc.get("max_attempts", 100000)), bool(doc.get("direct", True)))

    @classmethod
    def everything(cls, n: int) -> "EventSpec":
        return cls((None,) * n)


def draw_sample(dist, n: int, rng, event: EventSpec | None = None) -> LabeledSample:
    """Points first, then labels, both from the trial's own stream."""
    if event is None:
        X = dist.sample(n, rng)
        return LabeledSample(X, 2 * rng.integers(0, 2, size=n) - 1)
    if event.n != n:
        raise DomainError("bad-event", f"event describes {event.n} points, sample has {n}")
    if event.direct:
        X = np.vstack([dist.sample(1, rng) if r is None else dist.sample_in(r, 1, rng) for r in event.regions])
        sig = 2 * rng.integers(0, 2, size=n) - 1
        if event.labels is not None:
            sig = np.array(event.labels)
        return LabeledSample(X, sig)
    for _ in range(event.max_attempts):
        X = dist.sample(n, rng)
        sig = 2 * rng.integers(0, 2, size=n) - 1
        if event.holds(X, sig):
            return LabeledSample(X, sig)
    raise DomainError("rejection-exhausted", f"no draw hit the event in {event.max_attempts} attempts")


def _check_event(event: EventSpec, dist):
    if any(m <= 0 for m in event.region_masses(dist)):
        raise DomainError("zero-mass", "an event region has zero mass under the distribution")


@dataclass(frozen=True)
class _Job:
    cls: ClassSpec
    constraint_sets: tuple
    dist: object
    n: int
    seed: int
    event: EventSpec | None
    hints: tuple


def _run_trials(job: _Job, trials) -> list:
    out = []
    for t in trials:
        sample = draw_sample(job.dist, job.n, trial_rng(job.seed, t), job.event)
        row = []
        for cs in job.constraint_sets:
            r = sup_correlation(job.cls, cs, sample, job.dist, job.hints)
            row.append((r.kind, r.lower, r.upper))
        out.append(row)
    return out


def _chunks(trials: int, parts: int) -> list:
    size = max(1, math.ceil(trials / parts))
    return [range(a, min(trials, a + size)) for a in range(0, trials, size)]


def run_paired(job: _Job, trials: int, workers: int = 1) -> list:
    """Per-trial solver results in trial order, independent of the worker count."""
    if trials < 1:
        raise DomainError("bad-budget", "trials must be at least 1")
    if workers <= 1 or trials == 1:
        return _run_trials(job, range(trials))
    chunks = _chunks(trials, 4 * workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_trials, [job] * len(chunks), chunks))
    return [row for part in parts for row in part]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("XINFORM_WORKERS", "1")))
    except ValueError:
        return 1


def _se(v: np.ndarray) -> float:
    return float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


@dataclass(frozen=True)
class RademacherEstimate:
    kind: str  # "exact-per-trial" or "bracket-per-trial"
    n: int
    trials: int
    lower: np.ndarray = field(compare=False, repr=False)
    upper: np.ndarray = field(compare=False, repr=False)

    @property
    def exact(self) -> bool:
        return self.kind == "exact-per-trial"

    @property
    def mean(self) -> float:
        """Point estimate; for brackets the upper mean (the conservative side)."""
        return float(self.upper.mean())

    @property
    def standard_error(self) -> float:
        return _se(self.upper)

    @property
    def lower_mean(self) -> float:
        return float(self.lower.mean())

    @property
    def lower_se(self) -> float:
        return _se(self.lower)

    def to_json(self) -> dict:
        doc = {"kind": self.kind, "n": self.n, "trials": self.trials}
        if self.exact:
            doc.update(mean=self.mean, standard_error=self.standard_error)
        else:
            doc.update(lower={"mean": self.lower_mean, "standard_error": self.lower_se},
                       upper={"mean": self.mean, "standard_error": self.standard_error})
        return doc


def _estimate(rows, idx, n, trials) -> RademacherEstimate:
    kinds = {r[idx][0] for r in rows}
    lo = np.array([r[idx][1] for r in rows])
    hi = np.array([r[idx][2] for r in rows])
    kind = "exact-per-trial" if kinds == {"exact"} else "bracket-per-trial"
    return RademacherEstimate(kind, n, trials, lo, hi)


def empirical_rademacher(cls: ClassSpec, constraints, dist, n: int, trials: int, seed: int,
                         workers: int = 1, hints=()) -> RademacherEstimate:
    job = _Job(cls, (tuple(constraints),), dist, n, seed, None, tuple(hints))
    return _estimate(run_paired(job, trials, workers), 0, n, trials)


def conditional_rademacher(cls: ClassSpec, constraints, dist, n: int, event: EventSpec, trials: int, seed: int,
                           workers: int = 1, hints=()) -> RademacherEstimate:
    _check_event(event, dist)
    job = _Job(cls, (tuple(constraints),), dist, n, seed, event, tuple(hints))
    return _estimate(run_paired(job, trials, workers), 0, n, trials)


@dataclass(frozen=True)
class GapReport:
    scenario_id: str
    class_label: str
    n: int
    trials: int
    seed: int
    predict: RademacherEstimate
    explain: RademacherEstimate
    gaps: np.ndarray = field(compare=False, repr=False)
    gap_se: float = 0.0
    verdict: str = "inconclusive"
    monotonicity_violations: int = 0
    conditional: bool = False
    runtime_ms: float | None = None

    @property
    def gap_mean(self) -> float:
        return float(self.gaps.mean())

    @property
    def ci(self) -> tuple:
        return self.gap_mean - 3 * self.gap_se, self.gap_mean + 3 * self.gap_se

    def to_json(self) -> dict:
        lo, hi = self.ci
        doc = {
            "scenario_id": self.scenario_id, "class": self.class_label, "n": self.n, "trials": self.trials,
            "seed": self.seed, "conditional": self.conditional,
            "predict": self.predict.to_json(), "explain": self.explain.to_json(),
            "gap": {"mean": self.gap_mean, "standard_error": self.gap_se, "ci_low": lo, "ci_high": hi,
                    "min": float(self.gaps.min()), "max": float(self.gaps.max())},
            "verdict": self.verdict, "monotonicity_violations": self.monotonicity_violations,
            "per_trial": {"predict_lower": self.predict.lower.tolist(), "predict_upper": self.predict.upper.tolist(),
                          "explain_lower": self.explain.lower.tolist(), "explain_upper": self.explain.upper.tolist()},
        }
        if self.runtime_ms is not None:
            doc["runtime_ms"] = self.runtime_ms
        return doc

    def csv_row(self) -> dict:
        lo, hi = self.ci
        return {
            "scenario_id": self.scenario_id, "class": self.class_label, "n": self.n, "trials": self.trials,
            "seed": self.seed, "R_predict_mean": repr(self.predict.mean if self.predict.exact else self.predict.lower_mean),
            "R_predict_se": repr(self.predict.standard_error if self.predict.exact else self.predict.lower_se),
            "R_explain_mean_or_upper": repr(self.explain.mean),
            "R_explain_lower": "" if self.explain.exact else repr(self.explain.lower_mean),
            "gap_mean": repr(self.gap_mean), "gap_ci_low": repr(lo), "gap_ci_high": repr(hi),
            "verdict": self.verdict,
            "runtime_ms": "" if self.runtime_ms is None else f"{self.runtime_ms:.1f}",
        }


def csv_text(reports, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    if header:
        w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def append_csv(path, reports):
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(reports, header=new))


def _verdict(pred: RademacherEstimate, expl: RademacherEstimate):
    """Per-trial gaps, their standard error and the verdict."""
    if pred.exact and expl.exact:
        gaps = pred.upper - expl.upper
        se = _se(gaps)
        mean = float(gaps.mean())
        if mean > max(ZERO_GAP, 3 * se):
            return gaps, se, "informative"
        if np.all(gaps <= ZERO_GAP):
            return gaps, se, "non-informative-consistent"
        return gaps, se, "inconclusive"
    # brackets can only certify a strict gap
    gaps = pred.lower - expl.upper
    se = math.hypot(pred.lower_se, expl.standard_error)
    verdict = "informative" if expl.mean < pred.lower_mean - 3 * se else "inconclusive"
    return gaps, se, verdict


def gap_report(cls: ClassSpec, predict_constraints, explain_constraints, dist, n: int, trials: int, seed: int,
               event: EventSpec | None = None, scenario_id: str = "custom", workers: int = 1, hints=(),
               timing: bool = False) -> GapReport:
    pc, ec = tuple(predict_constraints), tuple(explain_constraints)
    missing = [c for c in pc if c not in ec]
    if missing:
        raise DomainError("bad-constraints", "explanation constraints must include every prediction constraint")
    if event is not None:
        _check_event(event, dist)
    start = time.perf_counter()
    job = _Job(cls, (pc, ec), dist, n, seed, event, tuple(hints))
    rows = run_paired(job, trials, workers)
    assert len(rows) == trials and all(len(r) == 2 for r in rows), "paired trials lost alignment"
    pred = _estimate(rows, 0, n, trials)
    expl = _estimate(rows, 1, n, trials)
    gaps, se, verdict = _verdict(pred, expl)
    # an explanation class is a subset: its sup (or its upper bound) never exceeds the prediction one
    viol = int(np.sum(expl.upper > pred.upper + MONO_TOL))
    if pred.exact and expl.exact:
        viol = int(np.sum(gaps < -MONO_TOL))
    runtime = (time.perf_counter() - start) * 1000.0 if timing else None
    return GapReport(scenario_id, cls.label(), n, trials, seed, pred, expl, gaps, se, verdict, viol,
                     event is not None, runtime)


def _events_disjoint(a: EventSpec, b: EventSpec, dist) -> bool:
    if a.labels is not None and b.labels is not None and a.labels != b.labels:
        return True
    for ra, rb in zip(a.regions, b.regions):
        if ra is None or rb is None:
            continue
        cut = ra.intersect(rb)
        if cut is None or dist.box_mass(cut) == 0:
            return True
    return False


def decomposition_check(cls: ClassSpec, constraints, dist, n: int, partition, trials: int, seed: int,
                        workers: int = 1, hints=()) -> dict:
    """Compare R_n with sum_k Pr(A_k) R_n(. | A_k) over a partition of product events."""
    parts = list(partition)
    if not parts:
        raise DomainError("bad-partition", "the partition needs at least one event")
    probs = [e.probability(dist) for e in parts]
    if abs(sum(probs) - 1.0) > 1e-9:
        raise DomainError("bad-partition", f"event probabilities sum to {sum(probs)}, not 1")
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            if not _events_disjoint(parts[i], parts[j], dist):
                raise DomainError("bad-partition", f"events {i + 1} and {j + 1} overlap")
    whole = empirical_rademacher(cls, constraints, dist, n, trials, seed, workers, hints)
    conds = []
    # same seed throughout: a full-space event then reproduces the unconditional draws exactly
    for e, p in zip(parts, probs):
        if p == 0:
            continue
        conds.append((p, conditional_rademacher(cls, constraints, dist, n, e, trials, seed, workers, hints)))
    rhs = sum(p * est.mean for p, est in conds)
    rhs_se = math.sqrt(sum((p * est.standard_error) ** 2 for p, est in conds))
    combined = math.hypot(whole.standard_error, rhs_se)
    diff = whole.mean - rhs
    return {
        "unconditional": {"mean": whole.mean, "standard_error": whole.standard_error},
        "decomposed": {"mean": rhs, "standard_error": rhs_se},
        "events": [{"probability": p, "mean": est.mean, "standard_error": est.standard_error} for p, est in conds],
        "discrepancy": diff, "combined_se": combined,
        "agree": bool(abs(diff) <= 3 * combined),
        "constraints": constraints_to_json(constraints),
    }
