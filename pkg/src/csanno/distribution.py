"""Overlap-controlled partitioning of task units across annotators.

A fixed fraction of the units (rounded half-up) is shared by every
annotator so agreement can be measured; the rest are dealt round-robin.
The plan is a pure function of its inputs, so re-planning the same task
always yields the identical partition.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from types import MappingProxyType
from typing import Mapping, Sequence

from .errors import EmptyTaskError, NoAnnotatorsError, ValidationError


@dataclass(frozen=True)
class OverlapPlan:
    shared_unit_ids: tuple[str, ...]
    exclusive_unit_ids: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "exclusive_unit_ids", MappingProxyType(dict(self.exclusive_unit_ids)))

    def units_for(self, annotator_id: str) -> tuple[str, ...]:
        """Full slice for one annotator: every shared unit plus their own."""
        return self.shared_unit_ids + self.exclusive_unit_ids[annotator_id]


def shared_count(n_units: int, overlap_percent: float) -> int:
    """round(p*N) with exact decimal half-up semantics.

    Going through the shortest decimal repr avoids binary-float artifacts
    like 0.7*45 = 31.499999999999996 rounding down to 31 instead of 32.
    """
    product = Decimal(repr(overlap_percent)) * n_units
    return int(product.quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def plan_overlap(
    unit_ids: Sequence[str],
    annotator_ids: Sequence[str],
    overlap_percent: float,
) -> OverlapPlan:
    """Deterministic partition: first round(p*N) units in task order are
    shared by all annotators, the remainder dealt round-robin to annotators
    sorted by id (exclusive slice sizes differ by at most one)."""
    if not annotator_ids:
        raise NoAnnotatorsError("at least one annotator required")
    if not unit_ids:
        raise EmptyTaskError("at least one unit required")
    if len(set(unit_ids)) != len(unit_ids):
        raise ValidationError("unit ids must be duplicate-free")
    if len(set(annotator_ids)) != len(annotator_ids):
        raise ValidationError("annotator ids must be duplicate-free")
    if not 0.0 <= overlap_percent <= 1.0:
        raise ValidationError("overlap_percent must lie in [0, 1]")

    n_shared = shared_count(len(unit_ids), overlap_percent)
    shared = tuple(unit_ids[:n_shared])
    remainder = unit_ids[n_shared:]
    ordered = sorted(annotator_ids)
    exclusive: dict[str, list[str]] = {a: [] for a in ordered}
    for i, unit_id in enumerate(remainder):
        exclusive[ordered[i % len(ordered)]].append(unit_id)
    return OverlapPlan(shared, {a: tuple(units) for a, units in exclusive.items()})
