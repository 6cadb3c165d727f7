"""Scenario construction: constellation geometry, synthetic beam generation,
beam-to-satellite routing over time, and restriction-set derivation.

The constellation is a single circular equatorial plane with satellites
equally spaced in argument of longitude. Sub-satellite points advance in
longitude at a uniform rate of one revolution per orbital period (rotating
frame approximation); this is the documented stand-in for full orbit
propagation and is sufficient to produce realistic handover patterns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, RoutingError, ScenarioFormatError
from .model import Beam, FrequencyGrid, RestrictionSets
from .power import LinkBudget

EARTH_RADIUS_KM = 6371.0
MU_EARTH_KM3_S2 = 398600.4418


@dataclass(frozen=True)
class ConstellationGeometry:
    """Single-plane circular equatorial constellation."""

    n_s: int
    altitude_km: float

    def __post_init__(self):
        if self.n_s < 1:
            raise DomainError(f"n_s must be >= 1, got {self.n_s}")
        if self.altitude_km <= 0:
            raise DomainError("altitude_km must be positive")

    @property
    def period_min(self) -> float:
        a = EARTH_RADIUS_KM + self.altitude_km
        return 2.0 * math.pi * math.sqrt(a**3 / MU_EARTH_KM3_S2) / 60.0

    @property
    def spacing_deg(self) -> float:
        return 360.0 / self.n_s

    def subsatellite_lon(self, sat: int, t_min: float) -> float:
        """Longitude of satellite `sat` (0-based) at time t, degrees in [0, 360)."""
        lon = sat * self.spacing_deg + 360.0 * (t_min / self.period_min)
        return lon % 360.0


@dataclass(frozen=True)
class Scenario:
    """A complete problem instance: grid, beams, geometry and sim parameters."""

    grid: FrequencyGrid
    beams: tuple[Beam, ...]
    geometry: ConstellationGeometry
    horizon_min: float = 60.0
    step_min: float = 1.0
    half_cone_deg: float = 1.0
    interference_multiplier: float = 4.0
    min_elevation_deg: float = 10.0
    restrictions: RestrictionSets | None = None
    link: LinkBudget | None = None

    def __post_init__(self):
        if not self.beams:
            raise DomainError("scenario needs at least one beam")
        if not (self.horizon_min >= self.step_min > 0):
            raise DomainError("need horizon_min >= step_min > 0")
        if self.half_cone_deg <= 0:
            raise DomainError("half_cone_deg must be positive")
        ids = [b.id for b in self.beams]
        if len(ids) != len(set(ids)):
            raise DomainError("beam ids must be unique")
        if self.restrictions is not None:
            self.restrictions.check_ids(ids)

    def beam_ids(self) -> list[int]:
        return [b.id for b in self.beams]

    def beam(self, beam_id: int) -> Beam:
        for b in self.beams:
            if b.id == beam_id:
                return b
        raise KeyError(beam_id)


def central_angle_deg(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Geocentric great-circle angle between two lat/lon points, degrees."""
    p1, l1, p2, l2 = map(math.radians, (lat1, lon1, lat2, lon2))
    cosang = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(l1 - l2)
    return math.degrees(math.acos(max(-1.0, min(1.0, cosang))))


def elevation_deg(central_deg: float, altitude_km: float) -> float:
    """Elevation of a satellite seen from a ground point at the given
    geocentric central angle."""
    psi = math.radians(central_deg)
    ratio = EARTH_RADIUS_KM / (EARTH_RADIUS_KM + altitude_km)
    if math.sin(psi) == 0.0:
        return 90.0
    return math.degrees(math.atan2(math.cos(psi) - ratio, math.sin(psi)))


@dataclass(frozen=True)
class GenerationParams:
    """Controls for the synthetic user/beam generator."""

    lat_band_deg: tuple[float, float] = (-50.0, 50.0)
    demand_range_bps: tuple[float, float] = (10e6, 500e6)
    min_slots: int = 1
    n_gateways: int = 0


def generate_synthetic(
    seed: int,
    n_users: int,
    grid: FrequencyGrid,
    geometry: ConstellationGeometry,
    params: GenerationParams = GenerationParams(),
    *,
    horizon_min: float = 60.0,
    step_min: float = 1.0,
    half_cone_deg: float = 1.0,
    interference_multiplier: float = 4.0,
    min_elevation_deg: float = 10.0,
    link: LinkBudget | None = None,
) -> Scenario:
    """Sample users, cluster them greedily into beams, and build a scenario.

    Deterministic for a fixed seed. Users go to the first existing cluster
    where they stay within 2*half_cone_deg of every member; cluster centroid
    becomes the beam center and demands add up.
    """
    if n_users < 1:
        raise DomainError(f"n_users must be >= 1, got {n_users}")
    rng = np.random.default_rng(seed)
    lat_lo, lat_hi = params.lat_band_deg
    lats = rng.uniform(lat_lo, lat_hi, size=n_users)
    lons = rng.uniform(0.0, 360.0, size=n_users)
    lo, hi = params.demand_range_bps
    demands = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n_users))

    clusters: list[list[int]] = []
    for u in range(n_users):
        placed = False
        for members in clusters:
            if all(
                central_angle_deg(lats[u], lons[u], lats[v], lons[v]) <= 2.0 * half_cone_deg
                for v in members
            ):
                members.append(u)
                placed = True
                break
        if not placed:
            clusters.append([u])

    beams = []
    for idx, members in enumerate(clusters, start=1):
        beams.append(
            Beam(
                id=idx,
                kind="user",
                lat=float(np.mean(lats[members])),
                lon=float(np.mean(lons[members])),
                demand_bps=float(np.sum(demands[members])),
                min_slots=params.min_slots,
            )
        )
    for gw in range(params.n_gateways):
        beams.append(
            Beam(
                id=len(clusters) + gw + 1,
                kind="gateway",
                lat=float(rng.uniform(lat_lo, lat_hi)),
                lon=float(rng.uniform(0.0, 360.0)),
                demand_bps=float(np.exp(rng.uniform(math.log(lo), math.log(hi)))),
                min_slots=params.min_slots,
            )
        )

    return Scenario(
        grid=grid,
        beams=tuple(beams),
        geometry=geometry,
        horizon_min=horizon_min,
        step_min=step_min,
        half_cone_deg=half_cone_deg,
        interference_multiplier=interference_multiplier,
        min_elevation_deg=min_elevation_deg,
        link=link,
    )


def routing_steps(scenario: Scenario) -> list[float]:
    """Time steps {0, step, ...} up to and including the horizon."""
    steps = []
    t = 0.0
    k = 0
    while t <= scenario.horizon_min + 1e-9:
        steps.append(t)
        k += 1
        t = k * scenario.step_min
    return steps


def route_beams(scenario: Scenario) -> dict[float, dict[int, int]]:
    """Map each (time step, beam) to the nearest visible satellite (0-based).

    Raises RoutingError when a beam has no satellite above the minimum
    elevation at some step.
    """
    geom = scenario.geometry
    routing: dict[float, dict[int, int]] = {}
    for t in routing_steps(scenario):
        at_t: dict[int, int] = {}
        sat_lons = [geom.subsatellite_lon(s, t) for s in range(geom.n_s)]
        for beam in scenario.beams:
            best: tuple[float, int] | None = None
            for s, slon in enumerate(sat_lons):
                ang = central_angle_deg(beam.lat, beam.lon, 0.0, slon)
                if elevation_deg(ang, geom.altitude_km) < scenario.min_elevation_deg:
                    continue
                if best is None or (ang, s) < best:
                    best = (ang, s)
            if best is None:
                raise RoutingError(beam.id, t)
            at_t[beam.id] = best[1]
        routing[t] = at_t
    return routing


def derive_intra_pairs(
    scenario: Scenario, routing: Mapping[float, Mapping[int, int]]
) -> frozenset[tuple[int, int]]:
    """Pairs of beams sharing a satellite at any routing step."""
    pairs: set[tuple[int, int]] = set()
    ids = scenario.beam_ids()
    for at_t in routing.values():
        by_sat: dict[int, list[int]] = {}
        for beam_id in ids:
            by_sat.setdefault(at_t[beam_id], []).append(beam_id)
        for members in by_sat.values():
            for a in range(len(members)):
                for b in range(a + 1, len(members)):
                    i, j = members[a], members[b]
                    pairs.add((min(i, j), max(i, j)))
    return frozenset(pairs)


def derive_inter_pairs(scenario: Scenario) -> frozenset[tuple[int, int]]:
    """Pairs of beams whose footprint centers are closer than
    interference_multiplier * half_cone_deg (strict)."""
    threshold = scenario.interference_multiplier * scenario.half_cone_deg
    pairs: set[tuple[int, int]] = set()
    beams = scenario.beams
    for a in range(len(beams)):
        for b in range(a + 1, len(beams)):
            sep = central_angle_deg(beams[a].lat, beams[a].lon, beams[b].lat, beams[b].lon)
            if sep < threshold:
                i, j = beams[a].id, beams[b].id
                pairs.add((min(i, j), max(i, j)))
    return frozenset(pairs)


def derive_restrictions(scenario: Scenario) -> RestrictionSets:
    """Compute R_A from routing and R_E from static footprint separation.

    Returns the scenario's explicit restriction sets when present.
    """
    if scenario.restrictions is not None:
        return scenario.restrictions
    routing = route_beams(scenario)
    return RestrictionSets(
        intra=derive_intra_pairs(scenario, routing),
        inter=derive_inter_pairs(scenario),
    )


def with_restrictions(scenario: Scenario) -> Scenario:
    """Scenario with restriction sets materialized."""
    if scenario.restrictions is not None:
        return scenario
    return replace(scenario, restrictions=derive_restrictions(scenario))


# --- JSON serialization ---------------------------------------------------


def _require(obj: Mapping, key: str, path: str):
    if key not in obj:
        raise ScenarioFormatError(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def scenario_to_dict(scenario: Scenario) -> dict:
    doc: dict = {
        "grid": {
            "n_bw": scenario.grid.n_bw,
            "n_fr": scenario.grid.n_fr,
            "n_p": scenario.grid.n_p,
            "slot_bandwidth_hz": scenario.grid.slot_bandwidth_hz,
        },
        "geometry": {
            "n_s": scenario.geometry.n_s,
            "altitude_km": scenario.geometry.altitude_km,
        },
        "beams": [
            {
                "id": b.id,
                "kind": b.kind,
                "lat": b.lat,
                "lon": b.lon,
                "demand_bps": b.demand_bps,
                "min_slots": b.min_slots,
                **({"allowed_rows": list(b.allowed_rows)} if b.allowed_rows else {}),
                **({"allowed_slots": list(b.allowed_slots)} if b.allowed_slots else {}),
            }
            for b in scenario.beams
        ],
        "sim": {
            "horizon_min": scenario.horizon_min,
            "step_min": scenario.step_min,
            "half_cone_deg": scenario.half_cone_deg,
            "interference_multiplier": scenario.interference_multiplier,
            "min_elevation_deg": scenario.min_elevation_deg,
        },
    }
    if scenario.restrictions is not None:
        doc["restrictions"] = {
            "intra": [list(p) for p in sorted(scenario.restrictions.intra)],
            "inter": [list(p) for p in sorted(scenario.restrictions.inter)],
        }
    if scenario.link is not None:
        lb = scenario.link
        doc["link"] = {
            "rolloff": lb.rolloff,
            "obo_db": lb.obo_db,
            "g_tx_db": lb.g_tx_db,
            "g_rx_db": lb.g_rx_db,
            "t_sys_k": lb.t_sys_k,
            "carrier_hz": lb.carrier_hz,
            "distance_m": lb.distance_m,
        }
    return doc


def scenario_from_dict(doc: Mapping) -> Scenario:
    grid_doc = _require(doc, "grid", "")
    for key in ("n_bw", "n_fr", "n_p"):
        _require(grid_doc, key, "grid")
    try:
        grid = FrequencyGrid(
            n_bw=int(grid_doc["n_bw"]),
            n_fr=int(grid_doc["n_fr"]),
            n_p=int(grid_doc["n_p"]),
            slot_bandwidth_hz=float(grid_doc.get("slot_bandwidth_hz", 1.0)),
        )
    except DomainError as exc:
        raise ScenarioFormatError("grid", str(exc)) from exc

    geom_doc = _require(doc, "geometry", "")
    try:
        geometry = ConstellationGeometry(
            n_s=int(_require(geom_doc, "n_s", "geometry")),
            altitude_km=float(_require(geom_doc, "altitude_km", "geometry")),
        )
    except DomainError as exc:
        raise ScenarioFormatError("geometry", str(exc)) from exc

    beams = []
    for idx, bdoc in enumerate(_require(doc, "beams", "")):
        path = f"beams[{idx}]"
        try:
            beams.append(
                Beam(
                    id=int(_require(bdoc, "id", path)),
                    kind=bdoc.get("kind", "user"),
                    lat=float(bdoc.get("lat", 0.0)),
                    lon=float(bdoc.get("lon", 0.0)),
                    demand_bps=float(bdoc.get("demand_bps", 0.0)),
                    min_slots=int(bdoc.get("min_slots", 1)),
                    allowed_rows=tuple(bdoc["allowed_rows"]) if "allowed_rows" in bdoc else None,
                    allowed_slots=tuple(bdoc["allowed_slots"]) if "allowed_slots" in bdoc else None,
                )
            )
        except DomainError as exc:
            raise ScenarioFormatError(path, str(exc)) from exc

    restrictions = None
    if "restrictions" in doc:
        rdoc = doc["restrictions"]
        try:
            restrictions = RestrictionSets.of(
                intra=[tuple(p) for p in rdoc.get("intra", [])],
                inter=[tuple(p) for p in rdoc.get("inter", [])],
            )
        except DomainError as exc:
            raise ScenarioFormatError("restrictions", str(exc)) from exc

    link = None
    if "link" in doc:
        ldoc = doc["link"]
        try:
            link = LinkBudget(
                rolloff=float(ldoc.get("rolloff", 0.1)),
                obo_db=float(ldoc.get("obo_db", 0.5)),
                g_tx_db=float(ldoc.get("g_tx_db", 45.0)),
                g_rx_db=float(ldoc.get("g_rx_db", 40.0)),
                t_sys_k=float(ldoc.get("t_sys_k", 290.0)),
                carrier_hz=float(ldoc.get("carrier_hz", 19.7e9)),
                distance_m=float(ldoc.get("distance_m", 8062e3)),
            )
        except DomainError as exc:
            raise ScenarioFormatError("link", str(exc)) from exc

    sim = doc.get("sim", {})
    try:
        return Scenario(
            grid=grid,
            beams=tuple(beams),
            geometry=geometry,
            horizon_min=float(sim.get("horizon_min", 60.0)),
            step_min=float(sim.get("step_min", 1.0)),
            half_cone_deg=float(sim.get("half_cone_deg", 1.0)),
            interference_multiplier=float(sim.get("interference_multiplier", 4.0)),
            min_elevation_deg=float(sim.get("min_elevation_deg", 10.0)),
            restrictions=restrictions,
            link=link,
        )
    except DomainError as exc:
        raise ScenarioFormatError("sim", str(exc)) from exc


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError("<document>", f"invalid JSON: {exc}") from exc
    return scenario_from_dict(doc)
