"""Domain types for frequency grids, beams, assignments and plans.

Indices are 1-based throughout: slots run over ``{1..n_bw}``, rows over
``{1..n_fr*n_p}``. A row combines a frequency reuse and a polarization;
``decompose_reuse`` maps between the two coordinate systems.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, PlanStructureError, UnsupportedConfigurationError


@dataclass(frozen=True)
class FrequencyGrid:
    """Dimensions of the assignment grid: n_fr*n_p rows by n_bw slot columns."""

    n_bw: int
    n_fr: int
    n_p: int
    slot_bandwidth_hz: float = 1.0

    def __post_init__(self):
        if self.n_bw < 1:
            raise DomainError(f"n_bw must be >= 1, got {self.n_bw}")
        if self.n_fr < 1:
            raise DomainError(f"n_fr must be >= 1, got {self.n_fr}")
        if self.n_p not in (1, 2):
            raise DomainError(f"n_p must be 1 or 2, got {self.n_p}")
        if self.slot_bandwidth_hz <= 0:
            raise DomainError("slot_bandwidth_hz must be positive")

    @property
    def n_rows(self) -> int:
        return self.n_fr * self.n_p


@dataclass(frozen=True)
class Beam:
    """One beam (user group or gateway) with its demand and variable domains.

    ``allowed_rows`` / ``allowed_slots`` are inclusive 1-based sub-ranges
    restricting the row choice and the slot span the beam may occupy.
    """

    id: int
    kind: str = "user"
    lat: float = 0.0
    lon: float = 0.0
    demand_bps: float = 0.0
    min_slots: int = 1
    allowed_rows: tuple[int, int] | None = None
    allowed_slots: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in ("user", "gateway"):
            raise DomainError(f"beam kind must be user|gateway, got {self.kind!r}")
        if self.min_slots < 1:
            raise DomainError("min_slots must be >= 1")

    def row_range(self, grid: FrequencyGrid) -> tuple[int, int]:
        lo, hi = self.allowed_rows if self.allowed_rows else (1, grid.n_rows)
        if not (1 <= lo <= hi <= grid.n_rows):
            raise DomainError(
                f"beam {self.id}: allowed_rows {self.allowed_rows} outside 1..{grid.n_rows}"
            )
        return lo, hi

    def slot_range(self, grid: FrequencyGrid) -> tuple[int, int]:
        lo, hi = self.allowed_slots if self.allowed_slots else (1, grid.n_bw)
        if not (1 <= lo <= hi <= grid.n_bw):
            raise DomainError(
                f"beam {self.id}: allowed_slots {self.allowed_slots} outside 1..{grid.n_bw}"
            )
        return lo, hi


@dataclass(frozen=True)
class Assignment:
    """Per-beam decision triple (f, g, b) plus an activation flag.

    For inactive assignments f/g/b are ignored by every consumer.
    """

    f: int = 0
    g: int = 0
    b: int = 0
    active: bool = True

    @staticmethod
    def inactive() -> "Assignment":
        return Assignment(0, 0, 0, active=False)

    @property
    def last_slot(self) -> int:
        return self.f + self.b - 1


@dataclass(frozen=True)
class FrequencyPlan:
    """A total map beam id -> Assignment."""

    assignments: Mapping[int, Assignment]

    def __getitem__(self, beam_id: int) -> Assignment:
        return self.assignments[beam_id]

    def active_items(self) -> Iterable[tuple[int, Assignment]]:
        for beam_id in sorted(self.assignments):
            a = self.assignments[beam_id]
            if a.active:
                yield beam_id, a


def _canonical_pairs(pairs: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    out = set()
    for i, j in pairs:
        if i == j:
            raise DomainError(f"restriction pair ({i}, {i}) is reflexive")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


@dataclass(frozen=True)
class RestrictionSets:
    """Unordered intra-group (handover) and inter-group (interference) pairs."""

    intra: frozenset[tuple[int, int]] = frozenset()
    inter: frozenset[tuple[int, int]] = frozenset()

    @staticmethod
    def of(
        intra: Iterable[tuple[int, int]] = (),
        inter: Iterable[tuple[int, int]] = (),
    ) -> "RestrictionSets":
        return RestrictionSets(_canonical_pairs(intra), _canonical_pairs(inter))

    def check_ids(self, beam_ids: Iterable[int]) -> None:
        known = set(beam_ids)
        for name, pairs in (("intra", self.intra), ("inter", self.inter)):
            for i, j in pairs:
                if i not in known or j not in known:
                    raise DomainError(f"{name} pair ({i}, {j}) references unknown beam")

    def all_pairs(self) -> frozenset[tuple[int, int]]:
        return self.intra | self.inter


@dataclass(frozen=True)
class ObjectiveWeights:
    """Weights of the linear objective; beta2..beta5 act through their
    absolute values. ``per_beam`` overrides individual weights by beam id."""

    beta1: float = 1.0
    beta2: float = 0.0
    beta3: float = 0.0
    beta4: float = 0.0
    beta5: float = 0.0
    per_beam: Mapping[int, Mapping[str, float]] = field(default_factory=dict)

    def for_beam(self, beam_id: int) -> tuple[float, float, float, float, float]:
        o = self.per_beam.get(beam_id, {})
        return (
            o.get("beta1", self.beta1),
            abs(o.get("beta2", self.beta2)),
            abs(o.get("beta3", self.beta3)),
            abs(o.get("beta4", self.beta4)),
            abs(o.get("beta5", self.beta5)),
        )

    def uses_power(self) -> bool:
        if abs(self.beta4) > 0:
            return True
        return any(abs(o.get("beta4", 0.0)) > 0 for o in self.per_beam.values())


@dataclass(frozen=True)
class Violation:
    """One constraint violation found by validate_plan."""

    kind: str  # spectrum-bound | below-min-slots | domain | intra-overlap | inter-overlap
    beams: tuple[int, ...]
    detail: str = ""

    def __str__(self) -> str:
        ids = ",".join(str(b) for b in self.beams)
        return f"{self.kind}[{ids}] {self.detail}".rstrip()


def decompose_reuse(g: int, n_p: int) -> tuple[int, int]:
    """Split row index g into (reuse k, polarization m) with g = n_p*k - m."""
    if g < 1:
        raise DomainError(f"row index must be >= 1, got {g}")
    k = -(-g // n_p)  # ceil(g / n_p)
    m = n_p * k - g
    return k, m


def compose_reuse(k: int, m: int, n_p: int) -> int:
    """Inverse of decompose_reuse."""
    return n_p * k - m


def overlaps(a: Assignment, b: Assignment) -> bool:
    """True iff the slot intervals of two active assignments intersect."""
    return a.f <= b.last_slot and b.f <= a.last_slot


def validate_plan(
    plan: FrequencyPlan,
    grid: FrequencyGrid,
    restrictions: RestrictionSets,
    beams: Sequence[Beam],
) -> list[Violation]:
    """Check a plan against every restriction; returns all violations.

    Inactive beams are exempt from every check. An empty result means the
    plan is valid.
    """
    by_id = {b.id: b for b in beams}
    missing = [b for b in by_id if b not in plan.assignments]
    if missing:
        raise PlanStructureError(f"plan missing beams {sorted(missing)}")

    violations: list[Violation] = []
    for beam in beams:
        a = plan[beam.id]
        if not a.active:
            continue
        row_lo, row_hi = beam.row_range(grid)
        slot_lo, slot_hi = beam.slot_range(grid)
        if a.b < 1 or a.f < 1 or a.last_slot > grid.n_bw:
            violations.append(
                Violation(
                    "spectrum-bound",
                    (beam.id,),
                    f"slots [{a.f},{a.last_slot}] outside 1..{grid.n_bw}",
                )
            )
            continue
        if a.b < beam.min_slots:
            violations.append(
                Violation("below-min-slots", (beam.id,), f"b={a.b} < c={beam.min_slots}")
            )
        if not (row_lo <= a.g <= row_hi):
            violations.append(
                Violation("domain", (beam.id,), f"g={a.g} outside rows [{row_lo},{row_hi}]")
            )
        elif not (slot_lo <= a.f and a.last_slot <= slot_hi):
            violations.append(
                Violation(
                    "domain",
                    (beam.id,),
                    f"slots [{a.f},{a.last_slot}] outside allowed [{slot_lo},{slot_hi}]",
                )
            )

    def _both_active(i: int, j: int) -> tuple[Assignment, Assignment] | None:
        ai, aj = plan[i], plan[j]
        if ai.active and aj.active:
            return ai, aj
        return None

    for i, j in sorted(restrictions.intra):
        pair = _both_active(i, j)
        if pair and pair[0].g == pair[1].g and overlaps(*pair):
            violations.append(
                Violation("intra-overlap", (i, j), f"row {pair[0].g} shared slots")
            )
    for i, j in sorted(restrictions.inter):
        pair = _both_active(i, j)
        if pair is None:
            continue
        mi = decompose_reuse(pair[0].g, grid.n_p)[1]
        mj = decompose_reuse(pair[1].g, grid.n_p)[1]
        if mi == mj and overlaps(*pair):
            violations.append(
                Violation("inter-overlap", (i, j), f"polarization {mi} shared slots")
            )
    return violations


def total_normalized_bandwidth(plan: FrequencyPlan, grid: FrequencyGrid, n_s: int) -> float:
    """Sum of active slot counts over the constellation capacity
    n_s * n_bw * n_fr * n_p."""
    if n_s < 1:
        raise DomainError(f"satellite count must be >= 1, got {n_s}")
    c_tot = n_s * grid.n_bw * grid.n_fr * grid.n_p
    return sum(a.b for _, a in plan.active_items()) / c_tot


def objective_value(
    plan: FrequencyPlan,
    weights: ObjectiveWeights,
    power_table: Mapping[int, "object"] | None = None,
) -> float:
    """Evaluate the plan objective.

    Per beam: (beta1*b - |beta2|*g - |beta3|*f - |beta4|*P(f, b)) if active,
    plus |beta5| for each active beam. ``power_table`` maps beam id to an
    object exposing ``value(f, b)`` and is required when any beta4 != 0.
    """
    total = 0.0
    for beam_id in sorted(plan.assignments):
        a = plan.assignments[beam_id]
        b1, b2, b3, b4, b5 = weights.for_beam(beam_id)
        if not a.active:
            continue
        term = b1 * a.b - b2 * a.g - b3 * a.f
        if b4 > 0:
            if power_table is None or beam_id not in power_table:
                raise UnsupportedConfigurationError(
                    f"beta4 > 0 but no power table entry for beam {beam_id}"
                )
            term -= b4 * power_table[beam_id].value(a.f, a.b)
        total += term + b5
    return total


PLAN_CSV_HEADER = ["beam_id", "active", "f", "g", "b"]


def save_plan_csv(plan: FrequencyPlan, path) -> None:
    """Write one `beam_id, active, f, g, b` record per beam."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLAN_CSV_HEADER)
        for beam_id in sorted(plan.assignments):
            a = plan.assignments[beam_id]
            writer.writerow([beam_id, int(a.active), a.f, a.g, a.b])


def load_plan_csv(path) -> FrequencyPlan:
    """Read a plan written by save_plan_csv."""
    assignments: dict[int, Assignment] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PLAN_CSV_HEADER:
            raise PlanStructureError(f"bad plan header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                beam_id, active, f, g, b = (int(x) for x in row)
            except ValueError as exc:
                raise PlanStructureError(f"line {lineno}: {exc}") from exc
            assignments[beam_id] = Assignment(f, g, b, active=bool(active))
    return FrequencyPlan(assignments)
