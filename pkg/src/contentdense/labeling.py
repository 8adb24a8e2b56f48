"""Heuristic content-density scoring and percentile-based labeling.

A lead's density score is the fraction of its reference summary's
(word, POS) tuples that also occur somewhere in the lead. Scores near 1
mean the lead already covers the summary's content. Binary labels are then
assigned by score percentile: the bottom tail is non_content_dense, the top
tail is content_dense, and the middle of the distribution is excluded so
the resulting training task is a balanced, well-separated binary problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import AnnotatedLead, WordPosTuple
from .errors import DegenerateDistributionError, EmptySummaryError, ValidationError

CONTENT_DENSE = "content_dense"
NON_CONTENT_DENSE = "non_content_dense"
LABELS = (CONTENT_DENSE, NON_CONTENT_DENSE)

#: Leads whose summary has fewer words than this are conventionally skipped
#: by corpus-level scoring (short summaries make the overlap fraction noisy).
MIN_SUMMARY_WORDS = 25


@dataclass(frozen=True)
class DensityScore:
    lead_id: str
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(
                f"{self.lead_id}: score {self.score} outside [0, 1]"
            )


@dataclass(frozen=True)
class HeuristicLabel:
    lead_id: str
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"unknown label {self.label!r}")


def content_density_score(summary: Sequence[WordPosTuple],
                          lead: Iterable[WordPosTuple]) -> float:
    """Fraction of summary tuples whose (word, POS) pair occurs in the lead.

    Each summary tuple counts once per occurrence in the summary, in both
    numerator and denominator; membership is tested against the set of lead
    tuples. Raises EmptySummaryError on an empty summary.
    """
    if not summary:
        raise EmptySummaryError("summary has no word/POS tuples")
    lead_set = frozenset(lead)
    hits = sum(1 for t in summary if t in lead_set)
    return hits / len(summary)


def score_leads(leads: Iterable[AnnotatedLead],
                min_summary_words: int = MIN_SUMMARY_WORDS,
                ) -> tuple[list[DensityScore], list[str]]:
    """Score every lead whose summary passes the length gate.

    Returns (scores, skipped_ids): a lead is skipped when it has no summary
    or its summary is shorter than ``min_summary_words`` words.
    """
    scores: list[DensityScore] = []
    skipped: list[str] = []
    for lead in leads:
        if lead.summary is None or len(lead.summary) < min_summary_words:
            skipped.append(lead.id)
            continue
        value = content_density_score(lead.summary, lead.tuples)
        scores.append(DensityScore(lead.id, value))
    return scores, skipped


def _percentile_thresholds(sorted_values: Sequence[float],
                           low_pct: float, high_pct: float) -> tuple[float, float]:
    n = len(sorted_values)
    low_rank = math.floor(low_pct * n / 100.0) + 1
    high_rank = math.ceil(high_pct * n / 100.0)
    low_rank = min(max(low_rank, 1), n)
    high_rank = min(max(high_rank, 1), n)
    return sorted_values[low_rank - 1], sorted_values[high_rank - 1]


def percentile_label(scores: Sequence[DensityScore],
                     low_pct: float = 20.0,
                     high_pct: float = 80.0) -> list[HeuristicLabel]:
    """Label the tails of the score distribution and balance the classes.

    Scores strictly below the low_pct percentile value become
    non_content_dense; scores strictly above the high_pct percentile value
    become content_dense; everything else is excluded. The percentile value
    at low_pct is the sorted score at 1-based rank floor(low_pct*N/100)+1,
    and at high_pct the score at rank ceil(high_pct*N/100), so the two tails
    hold the expected fraction of the data on evenly spread scores.

    If the two classes differ in size, the larger one is trimmed by dropping
    members nearest its threshold value (ties on distance break by lead id,
    ascending ids dropped first), leaving equal class sizes.

    Raises DegenerateDistributionError when either tail is empty (for
    example when all scores are identical), ValidationError on fewer than
    two scores or percentile bounds outside 0 <= low <= high <= 100.
    """
    if len(scores) < 2:
        raise ValidationError("need at least two scores to label")
    if not (0.0 <= low_pct <= high_pct <= 100.0):
        raise ValidationError(
            f"percentile bounds must satisfy 0 <= low <= high <= 100, "
            f"got {low_pct}, {high_pct}"
        )
    ids = [s.lead_id for s in scores]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate lead ids in scores")

    sorted_values = sorted(s.score for s in scores)
    t_low, t_high = _percentile_thresholds(sorted_values, low_pct, high_pct)

    low_class = [s for s in scores if s.score < t_low]
    high_class = [s for s in scores if s.score > t_high]
    if not low_class or not high_class:
        raise DegenerateDistributionError(
            "percentile thresholds leave an empty class "
            f"(low tail {len(low_class)}, high tail {len(high_class)}); "
            "the score distribution is too concentrated to split"
        )

    def trim(members: list[DensityScore], threshold: float,
             target: int) -> list[DensityScore]:
        if len(members) <= target:
            return members
        by_distance = sorted(members,
                             key=lambda s: (abs(s.score - threshold), s.lead_id))
        dropped = {s.lead_id for s in by_distance[: len(members) - target]}
        return [s for s in members if s.lead_id not in dropped]

    target = min(len(low_class), len(high_class))
    low_class = trim(low_class, t_low, target)
    high_class = trim(high_class, t_high, target)

    label_of = {s.lead_id: NON_CONTENT_DENSE for s in low_class}
    label_of.update({s.lead_id: CONTENT_DENSE for s in high_class})
    return [HeuristicLabel(s.lead_id, label_of[s.lead_id])
            for s in scores if s.lead_id in label_of]


def labels_to_mapping(labels: Iterable[HeuristicLabel]) -> dict[str, str]:
    """Convenience: list of HeuristicLabel to lead_id → label dict."""
    return {hl.lead_id: hl.label for hl in labels}
