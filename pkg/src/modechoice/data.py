"""Choice data domain model, ingestion and validation.

Observations arrive in long format (one row per observation x alternative),
persons in wide format. ``load_dataset`` validates both and returns an
immutable :class:`Dataset`; ``Dataset.arrays`` exposes a columnar view used
by the likelihood engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .alternatives import MODE_INDEX, MODES, N_ALT, TRANSIT_MODES, Mode
from .integration import IntegrationDimensions, composite_index_with_flag

WEATHER = ("sunny", "cloudy", "rainy", "snowy", "unknown")
SEASONS = ("winter", "spring", "summer", "fall")
PERIODS = ("night", "am_peak", "midday", "pm_peak", "evening")

OBS_COLUMNS = [
    "person_id", "obs_id", "source", "alt", "avail", "chosen", "cost_cad", "ivtt_min",
    "walk_min", "dist_km", "purpose_ws", "snow", "weather", "season", "period",
]
PERSON_COLUMNS = [
    "person_id", "migrant", "full_time", "student", "child_0_10", "safe", "cyc_friendly",
    "car_owned", "car_observed", "bike_owned", "integ_econ", "integ_soc", "integ_civic",
    "integ_health",
]

COST_SCALE = 10.0
TIME_SCALE = 10.0
DIST_SCALE = 1000.0


class DataValidationError(ValueError):
    """Raised with every problem found in an input table, not just the first."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class AlternativeAttributes:
    cost: float = 0.0  # CAD
    ivtt: float = 0.0  # minutes; total travel time for walk and bicycle
    walk_access: float = 0.0  # minutes, transit-like modes only
    distance: float = 0.0  # km
    available: bool = True

    def __post_init__(self):
        for name in ("cost", "ivtt", "walk_access", "distance"):
            v = getattr(self, name)
            if not (v >= 0) or math.isinf(v):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class ScaledAttributes:
    cost: float
    ivtt: float
    walk: float
    dist: float


def scale_attributes(raw: AlternativeAttributes) -> ScaledAttributes:
    return ScaledAttributes(
        cost=raw.cost / COST_SCALE,
        ivtt=raw.ivtt / TIME_SCALE,
        walk=raw.walk_access / TIME_SCALE,
        dist=raw.distance / DIST_SCALE,
    )


def unscale_attributes(scaled: ScaledAttributes, available: bool = True) -> AlternativeAttributes:
    return AlternativeAttributes(
        cost=scaled.cost * COST_SCALE,
        ivtt=scaled.ivtt * TIME_SCALE,
        walk_access=scaled.walk * TIME_SCALE,
        distance=scaled.dist * DIST_SCALE,
        available=available,
    )


@dataclass(frozen=True)
class ChoiceObservation:
    obs_id: str
    person_id: str
    source: str  # "RP" or "SP"
    chosen: Mode
    attributes: Mapping[Mode, AlternativeAttributes]
    purpose_work_study: bool = False
    snow: bool = False
    weather: str = "sunny"
    season: str = "summer"
    period: str = "midday"
    sp_trigger: bool = False

    def __post_init__(self):
        if self.source not in ("RP", "SP"):
            raise ValueError(f"source must be RP or SP, got {self.source!r}")
        if Mode.EMOBILITY in self.attributes and self.source != "SP":
            raise ValueError(f"observation {self.obs_id}: e-mobility only allowed in SP observations")
        chosen_attr = self.attributes.get(self.chosen)
        if chosen_attr is None or not chosen_attr.available:
            raise ValueError(f"observation {self.obs_id}: chosen unavailable")
        if sum(a.available for a in self.attributes.values()) < 2:
            raise ValueError(f"observation {self.obs_id}: fewer than two available alternatives")

    @property
    def available_modes(self) -> list[Mode]:
        return [m for m in MODES if m in self.attributes and self.attributes[m].available]


@dataclass(frozen=True)
class PersonProfile:
    person_id: str
    migrant: bool = False
    full_time: bool = False
    student: bool = False
    child_0_10: bool = False
    safe: bool = False
    cycling_friendly: bool = False
    car_owned: bool = False
    bike_owned: bool = False
    car_observed: bool = False
    integration_raw: float = 5.5
    integration_centred: float = 0.0


def center_integration(raw: Sequence[float]) -> np.ndarray:
    """Subtract the sample mean from raw integration indices (one per person)."""
    values = np.asarray(raw, dtype=float)
    if values.size == 0:
        raise ValueError("cannot centre an empty person list")
    if np.any((values < 1.0) | (values > 10.0)):
        raise ValueError("integration index outside [1, 10]")
    return values - math.fsum(values) / values.size


def build_availability(
    person: PersonProfile,
    routed: Mapping[Mode | str, bool],
    observed_car_use: bool | None = None,
) -> dict[Mode, bool]:
    """Availability flags for the six RP modes.

    ``routed`` says whether the routing step produced viable attributes for
    each mode. Car needs ownership or observed use on top of a route;
    bicycle needs stated ownership only.
    """
    routes = {Mode.parse(k): bool(v) for k, v in routed.items()}
    car_access = person.car_owned or (person.car_observed if observed_car_use is None else observed_car_use)
    flags = {
        Mode.CAR: car_access and routes.get(Mode.CAR, False),
        Mode.BUS: routes.get(Mode.BUS, False),
        Mode.SUBWAY: routes.get(Mode.SUBWAY, False),
        Mode.TRAIN: routes.get(Mode.TRAIN, False),
        Mode.WALK: routes.get(Mode.WALK, False),
        Mode.BICYCLE: person.bike_owned,
    }
    if not any(flags.values()):
        raise ValueError(f"person {person.person_id}: empty choice set")
    return flags


@dataclass(frozen=True)
class ChoiceArrays:
    """Columnar view of a dataset; observations sorted by person."""

    obs_ids: np.ndarray
    person_ids: tuple[str, ...]
    person_idx: np.ndarray  # (n,) index into person_ids
    offsets: np.ndarray  # (G+1,) observation ranges per person
    avail: np.ndarray  # (n, J) bool
    chosen: np.ndarray  # (n,) int
    is_sp: np.ndarray  # (n,) bool
    sp_trigger: np.ndarray
    cost: np.ndarray  # scaled, (n, J)
    ivtt: np.ndarray
    walk: np.ndarray
    dist: np.ndarray
    tp_ws: np.ndarray  # (n,)
    snow: np.ndarray
    mig: np.ndarray  # per observation
    ft: np.ndarray
    stu: np.ndarray
    child: np.ndarray
    safe: np.ndarray
    cyc_fr: np.ndarray
    integ: np.ndarray
    person_mig: np.ndarray  # (G,)

    @property
    def n_obs(self) -> int:
        return len(self.obs_ids)

    @property
    def n_persons(self) -> int:
        return len(self.person_ids)


@dataclass(frozen=True)
class Dataset:
    persons: tuple[PersonProfile, ...]
    observations: tuple[ChoiceObservation, ...]
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [p.person_id for p in self.persons]
        if len(set(ids)) != len(ids):
            raise DataValidationError(["duplicate person_id in persons"])
        known = set(ids)
        problems = [
            f"observation {o.obs_id}: unknown person_id {o.person_id!r}"
            for o in self.observations
            if o.person_id not in known
        ]
        if problems:
            raise DataValidationError(problems)

    @cached_property
    def person_map(self) -> dict[str, PersonProfile]:
        return {p.person_id: p for p in self.persons}

    @cached_property
    def by_person(self) -> dict[str, list[ChoiceObservation]]:
        out: dict[str, list[ChoiceObservation]] = {p.person_id: [] for p in self.persons}
        for o in self.observations:
            out[o.person_id].append(o)
        return out

    @property
    def counts(self) -> dict[str, int]:
        return {pid: len(obs) for pid, obs in self.by_person.items()}

    @property
    def n_obs(self) -> int:
        return len(self.observations)

    def with_observations(self, observations: Iterable[ChoiceObservation]) -> "Dataset":
        """Dataset restricted to ``observations``; persons left without any are dropped."""
        obs = tuple(observations)
        keep = {o.person_id for o in obs}
        persons = tuple(p for p in self.persons if p.person_id in keep)
        return Dataset(persons, obs, self.flags)

    def recentred(self) -> "Dataset":
        centred = center_integration([p.integration_raw for p in self.persons])
        persons = tuple(replace(p, integration_centred=float(c)) for p, c in zip(self.persons, centred))
        return Dataset(persons, self.observations, self.flags)

    @cached_property
    def arrays(self) -> ChoiceArrays:
        return _build_arrays(self)


def _build_arrays(ds: Dataset) -> ChoiceArrays:
    person_ids = tuple(p.person_id for p in ds.persons if ds.by_person[p.person_id])
    pindex = {pid: i for i, pid in enumerate(person_ids)}
    ordered = [o for pid in person_ids for o in ds.by_person[pid]]
    n = len(ordered)
    shape = (n, N_ALT)
    avail = np.zeros(shape, dtype=bool)
    cost = np.zeros(shape)
    ivtt = np.zeros(shape)
    walk = np.zeros(shape)
    dist = np.zeros(shape)
    chosen = np.empty(n, dtype=np.int64)
    person_idx = np.empty(n, dtype=np.int64)
    for i, o in enumerate(ordered):
        person_idx[i] = pindex[o.person_id]
        chosen[i] = MODE_INDEX[o.chosen]
        for m, a in o.attributes.items():
            j = MODE_INDEX[m]
            avail[i, j] = a.available
            cost[i, j] = a.cost / COST_SCALE
            ivtt[i, j] = a.ivtt / TIME_SCALE
            walk[i, j] = a.walk_access / TIME_SCALE
            dist[i, j] = a.distance / DIST_SCALE
    counts = np.bincount(person_idx, minlength=len(person_ids)) if n else np.zeros(len(person_ids), int)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    pmap = ds.person_map
    persons = [pmap[pid] for pid in person_ids]

    def per_obs(attr):
        vals = np.array([float(getattr(p, attr)) for p in persons]) if persons else np.zeros(0)
        return vals[person_idx] if n else np.zeros(0)

    return ChoiceArrays(
        obs_ids=np.array([o.obs_id for o in ordered], dtype=object),
        person_ids=person_ids,
        person_idx=person_idx,
        offsets=offsets,
        avail=avail,
        chosen=chosen,
        is_sp=np.array([o.source == "SP" for o in ordered], dtype=bool),
        sp_trigger=np.array([o.sp_trigger for o in ordered], dtype=bool),
        cost=cost,
        ivtt=ivtt,
        walk=walk,
        dist=dist,
        tp_ws=np.array([float(o.purpose_work_study) for o in ordered]),
        snow=np.array([float(o.snow) for o in ordered]),
        mig=per_obs("migrant"),
        ft=per_obs("full_time"),
        stu=per_obs("student"),
        child=per_obs("child_0_10"),
        safe=per_obs("safe"),
        cyc_fr=per_obs("cycling_friendly"),
        integ=per_obs("integration_centred"),
        person_mig=np.array([float(p.migrant) for p in persons]),
    )


# --------------------------------------------------------------------------
# file I/O


def _read_table(table) -> pd.DataFrame:
    if isinstance(table, pd.DataFrame):
        return table.copy()
    path = Path(table)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return pd.read_csv(path, dtype={"person_id": str, "obs_id": str})


def _as_bool(value) -> bool:
    if isinstance(value, str):
        value = value.strip()
    return bool(int(float(value)))


def load_dataset(observations_table, persons_table) -> Dataset:
    """Validate long-format observations and persons tables into a Dataset.

    Every problem found is collected and raised together in a
    :class:`DataValidationError`; each message carries its row location.
    """
    obs_df = _read_table(observations_table)
    per_df = _read_table(persons_table)
    problems: list[str] = []

    missing = [c for c in OBS_COLUMNS if c not in obs_df.columns]
    if missing:
        problems.append(f"observations: missing columns {missing}")
    pmissing = [c for c in PERSON_COLUMNS if c not in per_df.columns]
    if pmissing:
        problems.append(f"persons: missing columns {pmissing}")
    if problems:
        raise DataValidationError(problems)

    obs_df["person_id"] = obs_df["person_id"].astype(str)
    obs_df["obs_id"] = obs_df["obs_id"].astype(str)
    per_df["person_id"] = per_df["person_id"].astype(str)

    persons, integ_flags = _parse_persons(per_df, problems)
    known = {p.person_id for p in persons}

    # file row numbers: header is line 1
    obs_df["_row"] = np.arange(len(obs_df)) + 2
    dup = obs_df.duplicated(subset=["obs_id", "alt"], keep=False)
    for _, r in obs_df[dup].iterrows():
        problems.append(f"observations row {r['_row']}: duplicate (obs_id, alternative) ({r['obs_id']}, {r['alt']})")

    observations: list[ChoiceObservation] = []
    for obs_id, grp in obs_df.groupby("obs_id", sort=False):
        rows = grp["_row"].tolist()
        loc = f"observations rows {rows[0]}-{rows[-1]}" if len(rows) > 1 else f"observations row {rows[0]}"
        pids = grp["person_id"].unique()
        if len(pids) != 1:
            problems.append(f"{loc}: observation {obs_id} spans several person_ids")
            continue
        pid = pids[0]
        if pid not in known:
            problems.append(f"{loc}: unknown person_id {pid!r}")
            continue
        chosen_rows = grp[grp["chosen"].map(_as_bool)]
        if len(chosen_rows) != 1:
            problems.append(f"{loc}: observation {obs_id} has {len(chosen_rows)} chosen rows (expected 1)")
            continue
        crow = chosen_rows.iloc[0]
        if not _as_bool(crow["avail"]):
            problems.append(f"observations row {crow['_row']}: chosen unavailable in observation {obs_id}")
            continue
        first = grp.iloc[0]
        try:
            attrs = {}
            for _, r in grp.iterrows():
                m = Mode.parse(r["alt"])
                attrs[m] = AlternativeAttributes(
                    cost=float(r["cost_cad"]),
                    ivtt=float(r["ivtt_min"]),
                    walk_access=float(r["walk_min"]),
                    distance=float(r["dist_km"]),
                    available=_as_bool(r["avail"]),
                )
            sp_trigger = False
            if "sp_trigger" in grp.columns:
                sp_trigger = bool(grp["sp_trigger"].fillna(0).map(_as_bool).any())
            observations.append(
                ChoiceObservation(
                    obs_id=str(obs_id),
                    person_id=pid,
                    source=str(first["source"]).strip().upper(),
                    chosen=Mode.parse(crow["alt"]),
                    attributes=attrs,
                    purpose_work_study=_as_bool(first["purpose_ws"]),
                    snow=_as_bool(first["snow"]),
                    weather=str(first["weather"]),
                    season=str(first["season"]),
                    period=str(first["period"]),
                    sp_trigger=sp_trigger,
                )
            )
        except ValueError as exc:
            problems.append(f"{loc}: {exc}")
            continue
        o = observations[-1]
        for col, allowed in (("weather", WEATHER), ("season", SEASONS), ("period", PERIODS)):
            if getattr(o, col) not in allowed:
                problems.append(f"{loc}: {col} {getattr(o, col)!r} not in {allowed}")

    if problems:
        raise DataValidationError(problems)
    ds = Dataset(tuple(persons), tuple(observations), tuple(integ_flags))
    empty = [pid for pid, obs in ds.by_person.items() if not obs]
    if empty:
        ds = ds.with_observations(ds.observations)
    return ds


def load_persons(persons_table) -> tuple[tuple[PersonProfile, ...], tuple[str, ...]]:
    """Validate a persons table on its own; returns (persons, flags)."""
    df = _read_table(persons_table)
    missing = [c for c in PERSON_COLUMNS if c not in df.columns]
    if missing:
        raise DataValidationError([f"persons: missing columns {missing}"])
    df["person_id"] = df["person_id"].astype(str)
    problems: list[str] = []
    persons, flags = _parse_persons(df, problems)
    if problems:
        raise DataValidationError(problems)
    return tuple(persons), tuple(flags)


def _parse_persons(df: pd.DataFrame, problems: list[str]) -> tuple[list[PersonProfile], list[str]]:
    flags: list[str] = []
    raw = []
    for i, r in enumerate(df.to_dict("records")):
        row = i + 2
        try:
            index, reweighted = composite_index_with_flag(IntegrationDimensions.from_mapping(r))
        except ValueError as exc:
            problems.append(f"persons row {row}: {exc}")
            continue
        if reweighted:
            flags.append(f"person {r['person_id']}: integration dimensions missing, reweighted")
        try:
            raw.append(
                PersonProfile(
                    person_id=str(r["person_id"]),
                    migrant=_as_bool(r["migrant"]),
                    full_time=_as_bool(r["full_time"]),
                    student=_as_bool(r["student"]),
                    child_0_10=_as_bool(r["child_0_10"]),
                    safe=_as_bool(r["safe"]),
                    cycling_friendly=_as_bool(r["cyc_friendly"]),
                    car_owned=_as_bool(r["car_owned"]),
                    car_observed=_as_bool(r["car_observed"]),
                    bike_owned=_as_bool(r["bike_owned"]),
                    integration_raw=float(index),
                )
            )
        except (ValueError, TypeError) as exc:
            problems.append(f"persons row {row}: {exc}")
    ids = [p.person_id for p in raw]
    seen = set()
    for i, pid in enumerate(ids):
        if pid in seen:
            problems.append(f"persons row {i + 2}: duplicate person_id {pid!r}")
        seen.add(pid)
    if not raw:
        return [], flags
    centred = center_integration([p.integration_raw for p in raw])
    return [replace(p, integration_centred=float(c)) for p, c in zip(raw, centred)], flags


def observations_frame(ds: Dataset) -> pd.DataFrame:
    rows = []
    for o in ds.observations:
        for m in MODES:
            a = o.attributes.get(m)
            if a is None:
                continue
            rows.append(
                {
                    "person_id": o.person_id,
                    "obs_id": o.obs_id,
                    "source": o.source,
                    "alt": m.value,
                    "avail": int(a.available),
                    "chosen": int(m == o.chosen),
                    "cost_cad": a.cost,
                    "ivtt_min": a.ivtt,
                    "walk_min": a.walk_access,
                    "dist_km": a.distance,
                    "purpose_ws": int(o.purpose_work_study),
                    "snow": int(o.snow),
                    "weather": o.weather,
                    "season": o.season,
                    "period": o.period,
                    "sp_trigger": int(o.sp_trigger),
                }
            )
    return pd.DataFrame(rows, columns=OBS_COLUMNS + ["sp_trigger"])


def persons_frame(persons: Iterable[PersonProfile], dims: Mapping[str, IntegrationDimensions] | None = None) -> pd.DataFrame:
    """Persons table; without explicit dimension scores the composite is written to every dimension."""
    rows = []
    for p in persons:
        d = (dims or {}).get(p.person_id)
        e, s, c, h = (d.economic, d.social, d.civic, d.health) if d else (p.integration_raw,) * 4
        rows.append(
            {
                "person_id": p.person_id,
                "migrant": int(p.migrant),
                "full_time": int(p.full_time),
                "student": int(p.student),
                "child_0_10": int(p.child_0_10),
                "safe": int(p.safe),
                "cyc_friendly": int(p.cycling_friendly),
                "car_owned": int(p.car_owned),
                "car_observed": int(p.car_observed),
                "bike_owned": int(p.bike_owned),
                "integ_econ": e,
                "integ_soc": s,
                "integ_civic": c,
                "integ_health": h,
            }
        )
    return pd.DataFrame(rows, columns=PERSON_COLUMNS)


def write_dataset(ds: Dataset, observations_path, persons_path) -> None:
    observations_frame(ds).to_csv(observations_path, index=False, float_format="%.10g")
    persons_frame(ds.persons).to_csv(persons_path, index=False, float_format="%.10g")


def transit_modes_available(obs: ChoiceObservation) -> list[Mode]:
    return [m for m in TRANSIT_MODES if m in obs.attributes and obs.attributes[m].available]
