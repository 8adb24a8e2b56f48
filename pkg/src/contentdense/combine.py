"""Choosing between a lead summary and a system summary by density score.

Both summaries of an article are scored with a trained classifier's
content-dense probability; the system summary is emitted when the score
difference (system minus lead) clears a cutoff. Includes the two reference
baselines (always-dense, article-length logistic) and an exact binomial
check for whether a combination beats a fixed success rate.

Correctness against human preference counts a tie judgment as correct for
either choice.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import AnnotatedLead, lead_from_record, lead_to_record
from .errors import (
    ContentDenseError,
    CorpusFormatError,
    DataLeakError,
    ValidationError,
)
from .features import FeatureSpace, SparseFeatureVector
from .labeling import CONTENT_DENSE
from .learn import LOSS_LOGISTIC, LinearModel, TrainConfig, train_linear

PREF_SYSTEM = "system"
PREF_LEAD = "lead"
PREF_TIE = "tie"
PREFERENCES = (PREF_SYSTEM, PREF_LEAD, PREF_TIE)

DEFAULT_CUTOFFS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


def _summary_tokens(lead: AnnotatedLead) -> tuple[str, ...]:
    return tuple(w for s in lead.sentences for w in s.tokens)


@dataclass(frozen=True)
class SummaryPair:
    """Two candidate summaries of one article plus the human judgment."""

    article_id: str
    lead_summary: AnnotatedLead
    system_summary: AnnotatedLead
    human_preference: str

    def __post_init__(self):
        if not self.article_id:
            raise ValidationError("pair has an empty article_id")
        if self.human_preference not in PREFERENCES:
            raise ValidationError(
                f"unknown preference {self.human_preference!r}"
            )
        if _summary_tokens(self.lead_summary) == _summary_tokens(
                self.system_summary):
            raise ValidationError(
                f"pair {self.article_id!r} has identical summaries; "
                "identical pairs are excluded"
            )


@dataclass(frozen=True)
class CombinationDecision:
    article_id: str
    score_system: float
    score_lead: float
    score_difference: float
    cutoff: float
    chosen: str

    def __post_init__(self):
        if self.score_difference != self.score_system - self.score_lead:
            raise ValidationError("score_difference does not match the scores")
        expected = (PREF_SYSTEM if self.score_difference >= self.cutoff
                    else PREF_LEAD)
        if self.chosen != expected:
            raise ValidationError(
                f"chosen {self.chosen!r} contradicts difference "
                f"{self.score_difference} at cutoff {self.cutoff}"
            )


def decide(pair: SummaryPair, classifier, cutoff: float) -> CombinationDecision:
    """Score both summaries and apply the cutoff rule.

    ``classifier`` is anything with predict_proba(lead) -> probability of
    content_dense, normally a trained LeadClassifier. The system summary
    wins exactly when score_system - score_lead >= cutoff.
    """
    score_system = classifier.predict_proba(pair.system_summary)
    score_lead = classifier.predict_proba(pair.lead_summary)
    diff = score_system - score_lead
    return CombinationDecision(
        article_id=pair.article_id,
        score_system=score_system,
        score_lead=score_lead,
        score_difference=diff,
        cutoff=cutoff,
        chosen=PREF_SYSTEM if diff >= cutoff else PREF_LEAD,
    )


@dataclass(frozen=True)
class CutoffRow:
    """One row of the cutoff sweep.

    The preference breakdown covers only the pairs whose system summary
    was chosen at this cutoff; correctness covers every pair, with human
    ties correct under either choice.
    """

    cutoff: float
    n_total: int
    n_system_chosen: int
    chosen_pref_system: int
    chosen_pref_lead: int
    chosen_pref_tie: int
    n_correct: int

    def __post_init__(self):
        parts = (self.chosen_pref_system + self.chosen_pref_lead
                 + self.chosen_pref_tie)
        if parts != self.n_system_chosen:
            raise ValidationError(
                "preference breakdown does not sum to the chosen count"
            )

    @property
    def pct_correct(self) -> float:
        return 100.0 * self.n_correct / self.n_total


def sweep_cutoffs(pairs: Sequence[SummaryPair], classifier,
                  cutoffs: Sequence[float] = DEFAULT_CUTOFFS,
                  ) -> list[CutoffRow]:
    """Evaluate the combination rule at each cutoff.

    Summaries are scored once; every cutoff reuses the same score
    differences, so decisions are a pure function of (scores, cutoff).
    """
    if not pairs:
        raise ValidationError("no summary pairs to sweep")
    diffs = []
    for pair in pairs:
        decision = decide(pair, classifier, 0.0)
        diffs.append(decision.score_difference)
    rows = []
    for cutoff in cutoffs:
        chosen = [PREF_SYSTEM if d >= cutoff else PREF_LEAD for d in diffs]
        breakdown = Counter(
            pair.human_preference
            for pair, choice in zip(pairs, chosen) if choice == PREF_SYSTEM
        )
        n_correct = sum(
            pair.human_preference in (choice, PREF_TIE)
            for pair, choice in zip(pairs, chosen)
        )
        rows.append(CutoffRow(
            cutoff=float(cutoff),
            n_total=len(pairs),
            n_system_chosen=sum(c == PREF_SYSTEM for c in chosen),
            chosen_pref_system=breakdown.get(PREF_SYSTEM, 0),
            chosen_pref_lead=breakdown.get(PREF_LEAD, 0),
            chosen_pref_tie=breakdown.get(PREF_TIE, 0),
            n_correct=n_correct,
        ))
    return rows


def baseline_always_dense(gold_labels: Iterable[str]) -> float:
    """Accuracy of predicting content_dense for everything."""
    labels = list(gold_labels)
    if not labels:
        raise ValidationError("no gold labels")
    return sum(label == CONTENT_DENSE for label in labels) / len(labels)


LENGTH_SPACE = FeatureSpace("LENGTH", {"article_word_count": 0})


@dataclass(frozen=True)
class LengthScaler:
    """Min-max map of article word counts onto [0, 1], fit on training data.

    Counts outside the training range clamp to the ends, which cannot move
    a value across a decision threshold learned strictly inside the range.
    A degenerate range maps everything to 0.
    """

    low: float
    high: float

    def transform(self, count: float) -> float:
        if self.high == self.low:
            return 0.0
        z = (count - self.low) / (self.high - self.low)
        return min(1.0, max(0.0, z))

    def vector(self, lead: AnnotatedLead) -> SparseFeatureVector:
        value = self.transform(lead.article_word_count)
        return SparseFeatureVector(LENGTH_SPACE.name,
                                   {0: value} if value else {})


def train_length_model(train_leads: Sequence[AnnotatedLead],
                       labels: Mapping[str, str],
                       c: float = 1.0,
                       config: TrainConfig | None = None,
                       ) -> tuple[LinearModel, LengthScaler]:
    """One-feature logistic model over scaled article length."""
    if not train_leads:
        raise ValidationError("no training leads")
    counts = [float(l.article_word_count) for l in train_leads]
    scaler = LengthScaler(low=min(counts), high=max(counts))
    X = [scaler.vector(l) for l in train_leads]
    y = [labels[l.id] for l in train_leads]
    model = train_linear(X, y, LENGTH_SPACE, LOSS_LOGISTIC, c, config)
    return model, scaler


def baseline_article_length(train_leads: Sequence[AnnotatedLead],
                            test_leads: Sequence[AnnotatedLead],
                            labels: Mapping[str, str],
                            c: float = 1.0,
                            config: TrainConfig | None = None) -> float:
    """Test accuracy of the article-length logistic baseline."""
    if not test_leads:
        raise ValidationError("no test leads")
    overlap = {l.id for l in train_leads} & {l.id for l in test_leads}
    if overlap:
        raise DataLeakError(
            f"training and test sets share {len(overlap)} lead(s), "
            f"e.g. {sorted(overlap)[0]!r}"
        )
    model, scaler = train_length_model(train_leads, labels, c, config)
    correct = sum(
        model.predict_label(scaler.vector(l)) == labels[l.id]
        for l in test_leads
    )
    return correct / len(test_leads)


def binomial_superiority_check(successes: int, n: int, p0: float) -> float:
    """Exact one-sided upper-tail binomial p-value P[X >= successes].

    X is Binomial(n, p0). Terms are computed in log space and summed with
    compensated addition, so the result is accurate for any n the sweep
    tables produce.
    """
    if not (isinstance(successes, int) and isinstance(n, int)):
        raise ValidationError("successes and n must be integers")
    if n < 1 or not 0 <= successes <= n:
        raise ValidationError(f"need 0 <= successes <= n, got {successes}/{n}")
    if not (math.isfinite(p0) and 0.0 < p0 < 1.0):
        raise ValidationError(f"p0 must lie strictly inside (0, 1), got {p0}")
    if successes == 0:
        return 1.0
    log_p = math.log(p0)
    log_q = math.log1p(-p0)
    log_n_fact = math.lgamma(n + 1)
    terms = [
        math.exp(log_n_fact - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                 + k * log_p + (n - k) * log_q)
        for k in range(successes, n + 1)
    ]
    return min(1.0, math.fsum(terms))


def pair_to_record(pair: SummaryPair) -> dict:
    return {
        "article_id": pair.article_id,
        "human_preference": pair.human_preference,
        "lead_summary": lead_to_record(pair.lead_summary),
        "system_summary": lead_to_record(pair.system_summary),
    }


def pair_from_record(rec: dict) -> SummaryPair:
    if not isinstance(rec, dict):
        raise CorpusFormatError("pair record is not a JSON object")
    for key in ("article_id", "human_preference", "lead_summary",
                "system_summary"):
        if key not in rec:
            raise CorpusFormatError(f"pair record missing field {key!r}")
    return SummaryPair(
        article_id=rec["article_id"],
        lead_summary=lead_from_record(rec["lead_summary"]),
        system_summary=lead_from_record(rec["system_summary"]),
        human_preference=rec["human_preference"],
    )


def load_pairs(path: str | Path) -> list[SummaryPair]:
    """Load a JSON-lines pair file, naming the line of any bad record."""
    pairs = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"line {lineno}: {e}") from e
            try:
                pairs.append(pair_from_record(rec))
            except ContentDenseError as e:
                raise type(e)(f"line {lineno}: {e}") from e
    return pairs


def save_pairs(pairs: Sequence[SummaryPair], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair_to_record(pair), ensure_ascii=False,
                                separators=(",", ":")) + "\n")
