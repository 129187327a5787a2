"""Inter-annotator agreement, tag distributions, throughput statistics.

All computations are pure functions over snapshots and safe to call
concurrently. Agreement is token-level over the shared units of a task:
both raw observed agreement and Cohen's kappa are reported, since either
may be the figure a project wants to quote.
"""

from __future__ import annotations

import itertools
import statistics
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

from .domain import TimingRecord, TokenState, Unit
from .errors import (
    AlignmentError,
    DegenerateMarginalsError,
    EmptyScopeError,
    InsufficientDataError,
    NoOverlapError,
)


@dataclass(frozen=True)
class LabelSequencePair:
    """Two annotators' tag sequences aligned over the same (unit, token)
    positions."""

    annotator_a: str
    annotator_b: str
    labels_a: tuple[str, ...]
    labels_b: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.labels_a) != len(self.labels_b):
            raise AlignmentError(
                f"label sequences differ in length: {len(self.labels_a)} vs {len(self.labels_b)}"
            )
        if not self.labels_a:
            raise AlignmentError("label sequences must be non-empty")


def observed_agreement(pair: LabelSequencePair) -> float:
    """Fraction of aligned positions with exactly equal labels."""
    hits = sum(a == b for a, b in zip(pair.labels_a, pair.labels_b))
    return hits / len(pair.labels_a)


def cohen_kappa(pair: LabelSequencePair) -> float:
    """(p_o - p_e) / (1 - p_e) with chance agreement from the two marginal
    label distributions.

    Identical sequences give exactly 1.0. When both annotators used a single
    identical label, chance agreement is 1 and kappa is undefined:
    :class:`DegenerateMarginalsError`.
    """
    n = len(pair.labels_a)
    marginal_a = Counter(pair.labels_a)
    marginal_b = Counter(pair.labels_b)
    if len(marginal_a) == 1 and marginal_a.keys() == marginal_b.keys():
        raise DegenerateMarginalsError(
            f"both annotators used only {next(iter(marginal_a))!r}; kappa is undefined"
        )
    p_o = observed_agreement(pair)
    p_e = sum(marginal_a[label] / n * marginal_b[label] / n for label in marginal_a)
    return (p_o - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class PairAgreement:
    observed_agreement: float
    kappa: Optional[float]  # None when the pair's marginals are degenerate
    n_tokens: int


@dataclass(frozen=True)
class IaaReport:
    """Symmetric pairwise agreement matrix plus the task-level mean."""

    entries: Mapping[tuple[str, str], PairAgreement]
    mean_observed_agreement: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def get(self, annotator_a: str, annotator_b: str) -> PairAgreement:
        key = (annotator_a, annotator_b) if annotator_a <= annotator_b else (annotator_b, annotator_a)
        return self.entries[key]


def pairwise_iaa_matrix(
    shared_unit_ids: Sequence[str],
    labels_by_annotator: Mapping[str, Mapping[tuple[str, int], str]],
) -> IaaReport:
    """Agreement over the shared units for every unordered annotator pair.

    ``labels_by_annotator`` maps annotator id -> {(unit_id, token_index):
    tag} for annotators whose assignments were submitted or accepted. All
    annotators must cover the same shared positions.
    """
    if not shared_unit_ids:
        raise NoOverlapError("task has no shared units")
    if len(labels_by_annotator) < 2:
        raise InsufficientDataError(
            f"need >= 2 submitted annotators, have {len(labels_by_annotator)}"
        )
    shared = set(shared_unit_ids)
    positions_by_annotator = {
        annotator: sorted(pos for pos in labels.keys() if pos[0] in shared)
        for annotator, labels in labels_by_annotator.items()
    }
    annotators = sorted(labels_by_annotator)
    positions = positions_by_annotator[annotators[0]]
    for annotator in annotators[1:]:
        if positions_by_annotator[annotator] != positions:
            raise AlignmentError(f"annotator {annotator} covers different shared positions")
    if not positions:
        raise NoOverlapError("shared units carry no annotated tokens")

    entries: dict[tuple[str, str], PairAgreement] = {}
    for a, b in itertools.combinations(annotators, 2):
        pair = LabelSequencePair(
            a,
            b,
            tuple(labels_by_annotator[a][pos] for pos in positions),
            tuple(labels_by_annotator[b][pos] for pos in positions),
        )
        try:
            kappa: Optional[float] = cohen_kappa(pair)
        except DegenerateMarginalsError:
            kappa = None
        entries[(a, b)] = PairAgreement(observed_agreement(pair), kappa, len(positions))
    mean = statistics.fmean(entry.observed_agreement for entry in entries.values())
    return IaaReport(entries, mean)


def tag_distribution(tags: Iterable[str]) -> dict[str, int]:
    """Counts per tag name; the sum equals the number of tagged tokens."""
    return dict(Counter(tags))


@dataclass(frozen=True)
class TimingStats:
    n: int
    mean: Optional[float] = None
    median: Optional[float] = None
    min: Optional[float] = None
    max: Optional[float] = None


def timing_stats(records: Iterable[TimingRecord | float]) -> TimingStats:
    """Order statistics over per-unit annotation durations (seconds)."""
    durations = [
        r.duration_seconds if isinstance(r, TimingRecord) else float(r) for r in records
    ]
    if not durations:
        return TimingStats(n=0)
    return TimingStats(
        n=len(durations),
        mean=statistics.fmean(durations),
        median=statistics.median(durations),
        min=min(durations),
        max=max(durations),
    )


def auto_tag_coverage(units: Iterable[Unit]) -> float:
    """Fraction of tokens the pre-tagger handled: AutoTagged / total."""
    total = 0
    auto = 0
    for unit in units:
        for token in unit.tokens:
            total += 1
            auto += token.state is TokenState.AUTO_TAGGED
    if total == 0:
        raise EmptyScopeError("coverage undefined over zero tokens")
    return auto / total
