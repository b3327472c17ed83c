"""Detection and utility metrics computed from round reports."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .server import MALICIOUS, RoundReport

MODEL_CHOICES = ("customized", "personalized", "best")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int  # malicious flagged
    fp: int  # benign flagged
    tn: int  # benign passed
    fn: int  # malicious passed

    @classmethod
    def from_sets(cls, malicious: Iterable[int], benign: Iterable[int],
                  flagged: Iterable[int]) -> "ConfusionCounts":
        mal, ben, flag = set(malicious), set(benign), set(flagged)
        return cls(tp=len(mal & flag), fp=len(ben & flag), tn=len(ben - flag), fn=len(mal - flag))


def _pct(num: int, den: int) -> float | None:
    return None if den == 0 else 100.0 * num / den


def detection_metrics(c: ConfusionCounts) -> tuple[float | None, float | None, float | None]:
    """(DAcc, FPR, FNR) in percent; None where the denominator is empty."""
    dacc = _pct(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn)
    fpr = _pct(c.fp, c.fp + c.tn)
    fnr = _pct(c.fn, c.fn + c.tp)
    return dacc, fpr, fnr


def flagged_ids(reports: Sequence[RoundReport]) -> set[int]:
    """Every client judged malicious in any round so far (cumulative)."""
    return {r.client_id for rep in reports for r in rep.rows if r.verdict == MALICIOUS}


def _round_means(report: RoundReport, benign_ids: set[int]) -> tuple[float, float]:
    rows = [r for r in report.rows if r.client_id in benign_ids]
    if not rows:
        return float("nan"), float("nan")
    cust = float(np.mean([r.acc_customized for r in rows]))
    pers = [r.acc_personalized for r in rows if not np.isnan(r.acc_personalized)]
    return cust, float(np.mean(pers)) if pers else float("nan")


def round_tacc(report: RoundReport, benign_ids: Iterable[int], model_choice: str = "best") -> float:
    if model_choice not in MODEL_CHOICES:
        raise ConfigurationError(f"model_choice must be one of {MODEL_CHOICES}")
    cust, pers = _round_means(report, set(benign_ids))
    if model_choice == "customized":
        return cust
    if model_choice == "personalized":
        return pers
    # family with the higher average, not per-client maxima
    return float(np.nanmax([cust, pers]))


def tacc(reports: Sequence[RoundReport], benign_ids: Iterable[int], model_choice: str = "best") -> float:
    """Mean final-round test accuracy over benign clients."""
    benign_ids = set(benign_ids)
    if not benign_ids:
        raise ConfigurationError("no benign clients to average over")
    if not reports:
        raise ConfigurationError("no round reports")
    return round_tacc(reports[-1], benign_ids, model_choice)


def r2acc(series: Sequence[float], target: float) -> int | None:
    """First round index whose accuracy reaches ``target``."""
    for t, acc in enumerate(series):
        if acc >= target:
            return t
    return None


def tacc_series(reports: Sequence[RoundReport], benign_ids: Iterable[int],
                model_choice: str = "best") -> list[float]:
    benign_ids = set(benign_ids)
    return [round_tacc(rep, benign_ids, model_choice) for rep in reports]


def norm_series(reports: Sequence[RoundReport], role: str, field: str = "update_norm") -> list[float | None]:
    """Per-round mean of a norm column over clients with the given role."""
    out = []
    for rep in reports:
        vals = [getattr(r, field) for r in rep.rows if r.role == role]
        out.append(float(np.mean(vals)) if vals else None)
    return out
