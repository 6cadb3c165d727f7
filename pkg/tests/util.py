"""Shared builders and independent reference implementations for the tests.

Everything here is deliberately written without reusing package internals
beyond the public data types, so oracle comparisons stay independent.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from freqplan import (
    Assignment,
    Beam,
    ConstellationGeometry,
    FrequencyGrid,
    FrequencyPlan,
    ObjectiveWeights,
    RestrictionSets,
    Scenario,
)


def random_instance(
    rng: np.random.Generator,
    max_beams: int = 5,
    max_bw: int = 5,
    max_fr: int = 2,
    n_p: int = 2,
    density_choices: tuple[float, ...] = (0.0, 0.3, 1.0),
) -> tuple[Scenario, ObjectiveWeights]:
    """Small random instance with explicit restriction sets."""
    n_bw = int(rng.integers(2, max_bw + 1))
    n_fr = int(rng.integers(1, max_fr + 1))
    n_b = int(rng.integers(2, max_beams + 1))
    # keep the instance inside the brute-force enumeration guard (1e8)
    per_beam = n_fr * n_p * n_bw * n_bw
    while per_beam**n_b > 10**8:
        n_b -= 1
    grid = FrequencyGrid(n_bw=n_bw, n_fr=n_fr, n_p=n_p)
    beams = tuple(
        Beam(
            id=i + 1,
            lat=float(rng.uniform(-50, 50)),
            lon=float(rng.uniform(0, 360)),
            demand_bps=float(rng.uniform(1e6, 1e8)),
            min_slots=int(rng.integers(1, n_bw + 1)),
        )
        for i in range(n_b)
    )
    pairs = [(i + 1, j + 1) for i in range(n_b) for j in range(i + 1, n_b)]
    d_intra = float(rng.choice(density_choices))
    d_inter = float(rng.choice(density_choices))
    intra = [p for p in pairs if rng.random() < d_intra]
    inter = [p for p in pairs if rng.random() < d_inter]
    scenario = Scenario(
        grid=grid,
        beams=beams,
        geometry=ConstellationGeometry(n_s=2, altitude_km=8062.0),
        restrictions=RestrictionSets.of(intra=intra, inter=inter),
    )
    weights = ObjectiveWeights(
        beta1=1.0,
        beta2=float(rng.uniform(0, 0.3)),
        beta3=float(rng.uniform(0, 0.3)),
    )
    return scenario, weights


def ref_decompose(g: int, n_p: int) -> tuple[int, int]:
    """Reference reuse/polarization split: smallest k >= g / n_p."""
    k = math.ceil(g / n_p)
    return k, n_p * k - g


def ref_intervals_overlap(f1: int, b1: int, f2: int, b2: int) -> bool:
    return max(f1, f2) <= min(f1 + b1 - 1, f2 + b2 - 1)


def ref_plan_is_valid(
    plan: FrequencyPlan,
    grid: FrequencyGrid,
    restrictions: RestrictionSets,
    beams,
) -> bool:
    """Reference validity check, written independently of validate_plan."""
    by_id = {b.id: b for b in beams}
    for beam_id, beam in by_id.items():
        a = plan[beam_id]
        if not a.active:
            continue
        row_lo, row_hi = beam.allowed_rows or (1, grid.n_fr * grid.n_p)
        slot_lo, slot_hi = beam.allowed_slots or (1, grid.n_bw)
        if a.b < beam.min_slots or a.f < slot_lo or a.f + a.b - 1 > slot_hi:
            return False
        if not (row_lo <= a.g <= row_hi):
            return False
    for i, j in restrictions.intra:
        ai, aj = plan[i], plan[j]
        if ai.active and aj.active and ai.g == aj.g:
            if ref_intervals_overlap(ai.f, ai.b, aj.f, aj.b):
                return False
    for i, j in restrictions.inter:
        ai, aj = plan[i], plan[j]
        if ai.active and aj.active:
            if ref_decompose(ai.g, grid.n_p)[1] == ref_decompose(aj.g, grid.n_p)[1]:
                if ref_intervals_overlap(ai.f, ai.b, aj.f, aj.b):
                    return False
    return True


def all_active_plans(scenario: Scenario):
    """Yield every all-active plan over the per-beam (f, g, b) domains."""
    grid = scenario.grid
    per_beam = []
    for beam in scenario.beams:
        row_lo, row_hi = beam.allowed_rows or (1, grid.n_fr * grid.n_p)
        slot_lo, slot_hi = beam.allowed_slots or (1, grid.n_bw)
        opts = [
            (f, g, b)
            for g in range(row_lo, row_hi + 1)
            for b in range(beam.min_slots, slot_hi - slot_lo + 2)
            for f in range(slot_lo, slot_hi - b + 2)
        ]
        per_beam.append(opts)
    ids = [b.id for b in scenario.beams]
    for combo in itertools.product(*per_beam):
        yield FrequencyPlan(
            {i: Assignment(f, g, b) for i, (f, g, b) in zip(ids, combo)}
        )


def model_accepts_plan(model, scenario: Scenario, plan: FrequencyPlan) -> bool:
    """Whether an all-active plan extends to a feasible point of the model.

    The plan fixes f/g/b (and the implied k/m); the pair binaries are
    existentially quantified, so each pair's auxiliary combinations are
    enumerated independently (constraints never couple two pairs).
    """
    values: dict[str, float] = {}
    grid = scenario.grid
    for beam in scenario.beams:
        a = plan[beam.id]
        k, m = ref_decompose(a.g, grid.n_p)
        values[f"f_{beam.id}"] = float(a.f)
        values[f"g_{beam.id}"] = float(a.g)
        values[f"b_{beam.id}"] = float(a.b)
        values[f"k_{beam.id}"] = float(k)
        values[f"m_{beam.id}"] = float(m)

    # bounds on the fixed integer variables must hold
    aux_names = []
    for var in model.variables:
        if var.name in values:
            if not (var.lower - 1e-9 <= values[var.name] <= var.upper + 1e-9):
                return False
        else:
            aux_names.append(var.name)

    by_pair: dict[tuple[str, str], list[str]] = {}
    for name in aux_names:
        kind, i, j = name.split("_")
        by_pair.setdefault((i, j), []).append(name)

    cons_by_pair: dict[tuple[str, str], list] = {p: [] for p in by_pair}
    base_cons = []
    for con in model.constraints:
        pair = None
        for _, v in con.terms:
            if v not in values:
                kind, i, j = v.split("_")
                pair = (i, j)
                break
        if pair is None:
            base_cons.append(con)
        else:
            cons_by_pair[pair].append(con)

    def holds(con, vals) -> bool:
        lhs = sum(c * vals[v] for c, v in con.terms)
        if con.sense == "<=":
            return lhs <= con.rhs + 1e-9
        if con.sense == ">=":
            return lhs >= con.rhs - 1e-9
        return abs(lhs - con.rhs) <= 1e-9

    if not all(holds(con, values) for con in base_cons):
        return False
    for pair, names in by_pair.items():
        satisfied = False
        for combo in itertools.product((0.0, 1.0), repeat=len(names)):
            vals = dict(values)
            vals.update(zip(names, combo))
            if all(holds(con, vals) for con in cons_by_pair[pair]):
                satisfied = True
                break
        if not satisfied:
            return False
    return True
