"""Counterfactual fare, access-time and integration scenarios on a representative trip.

Probabilities are closed-form MNL at RP scale. Integration levels are given
in standard-deviation units of the integration index around the sample mean.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .alternatives import MODES, RP_MODES, TRANSIT_MODES, Mode
from .data import AlternativeAttributes, ChoiceObservation, PersonProfile
from .mnl import choice_probabilities
from .model import ModelSpec, ParameterVector, published_parameters
from .utility import systematic_utility

DEFAULT_INTEGRATION_SD = 2.0
DEFAULT_LEVELS = (-1.0, 0.0, 1.0)
BASELINE_FARE = 3.25
BASELINE_ACCESS = 15.0


@dataclass(frozen=True)
class RepresentativeTrip:
    """A fully specified RP choice situation whose transit fare and access time are levers."""

    person: PersonProfile
    observation: ChoiceObservation
    integration_sd: float = DEFAULT_INTEGRATION_SD

    @property
    def fare(self) -> float:
        return self.observation.attributes[Mode.BUS].cost

    @property
    def access(self) -> float:
        return self.observation.attributes[Mode.BUS].walk_access

    def _with_transit(self, **changes) -> "RepresentativeTrip":
        attrs = dict(self.observation.attributes)
        for m in TRANSIT_MODES:
            if m in attrs:
                attrs[m] = replace(attrs[m], **changes)
        return replace(self, observation=replace(self.observation, attributes=attrs))

    def with_fare(self, fare: float) -> "RepresentativeTrip":
        """Same trip with every transit sub-mode charging ``fare``."""
        return self._with_transit(cost=float(fare))

    def with_access(self, minutes: float) -> "RepresentativeTrip":
        return self._with_transit(walk_access=float(minutes))

    def at_integration(self, sd_units: float) -> "RepresentativeTrip":
        """Person shifted to ``sd_units`` standard deviations from mean integration."""
        p = replace(self.person, integration_centred=float(sd_units) * self.integration_sd)
        return replace(self, person=p)


def load_representative_trip(path=None, integration_sd: float | None = None) -> RepresentativeTrip:
    """Read a trip fixture (defaults to the packaged calibrated profile)."""
    if path is None:
        text = resources.files("modechoice").joinpath("resources/representative_trip.json").read_text()
    else:
        text = Path(path).read_text()
    d = json.loads(text)
    person = PersonProfile(**d["person"])
    attrs = {Mode.parse(k): AlternativeAttributes(available=v.get("available", True), **{
        f: float(v[f]) for f in ("cost", "ivtt", "walk_access", "distance")})
        for k, v in d["alternatives"].items()}
    obs = ChoiceObservation(obs_id="representative", person_id=person.person_id, source="RP",
                            chosen=next(m for m in MODES if m in attrs and attrs[m].available),
                            attributes=attrs, **d.get("trip", {}))
    sd = integration_sd if integration_sd is not None else float(d.get("integration_sd", DEFAULT_INTEGRATION_SD))
    return RepresentativeTrip(person, obs, sd)


def _default_params(params, spec):
    spec = spec or ModelSpec.load("M3")
    if spec.is_mixed:
        raise ValueError("scenarios use closed-form MNL probabilities; pass an MNL spec")
    if params is None:
        params = published_parameters(spec.name, spec)
    elif isinstance(params, Mapping):
        params = ParameterVector(spec.parameters, [params[n] for n in spec.parameters])
    return params, spec


def mode_probabilities(trip: RepresentativeTrip, params=None, spec: ModelSpec | None = None) -> dict[Mode, float]:
    params, spec = _default_params(params, spec)
    obs = trip.observation
    avail = {m: (m in obs.attributes and obs.attributes[m].available) for m in RP_MODES}
    V = {m: systematic_utility(obs, trip.person, params, params["b_time"], params["b_cost"], spec, m)
         for m in RP_MODES if avail[m]}
    return choice_probabilities(V, avail)


def transit_probability(trip: RepresentativeTrip, params=None, spec: ModelSpec | None = None) -> float:
    p = mode_probabilities(trip, params, spec)
    return sum(p[m] for m in TRANSIT_MODES if m in p)


@dataclass
class SweepTable:
    """Combined transit probability (percent) per lever value and integration level."""

    lever: str
    grid: tuple[float, ...]
    levels: tuple[float, ...]
    percent: np.ndarray  # (len(grid), len(levels))

    @property
    def gains(self) -> np.ndarray:
        """Last grid value minus first, in percentage points, per level."""
        return self.percent[-1] - self.percent[0]

    def format(self) -> str:
        unit = "Fare (CAD)" if self.lever == "fare" else "Access (min)"
        heads = [_level_label(lv) for lv in self.levels]
        lines = [f"{unit:<14}" + "".join(f"{h:>12}" for h in heads)]
        for x, row in zip(self.grid, self.percent):
            label = f"{x:.2f}" if self.lever == "fare" else f"{x:g}"
            lines.append(f"{label:<14}" + "".join(f"{v:>12.1f}" for v in row))
        lines.append(f"{'Gain (pp)':<14}" + "".join(f"{g:>+12.1f}" for g in self.gains))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"lever": self.lever, "grid": list(self.grid), "levels": list(self.levels),
                "percent": self.percent.tolist(), "gains": self.gains.tolist()}


def _level_label(level: float) -> str:
    if level == 0:
        return "Mean"
    return f"{level:+g} SD"


def _check_grid(grid: Sequence[float], name: str) -> tuple[float, ...]:
    g = tuple(float(x) for x in grid)
    if not g:
        raise ValueError(f"{name} grid is empty")
    if any(x < 0 for x in g):
        raise ValueError(f"{name} grid must be nonnegative")
    if any(b > a for a, b in zip(g, g[1:])):
        raise ValueError(f"{name} grid must be decreasing")
    return g


def _sweep(trip, params, spec, grid, levels, setter, lever) -> SweepTable:
    params, spec = _default_params(params, spec)
    out = np.zeros((len(grid), len(levels)))
    for j, lv in enumerate(levels):
        t = trip.at_integration(lv)
        for i, x in enumerate(grid):
            out[i, j] = 100.0 * transit_probability(setter(t, x), params, spec)
    return SweepTable(lever, tuple(grid), tuple(levels), out)


def sweep_fare(trip: RepresentativeTrip, params=None, fare_grid: Sequence[float] = (3.25, 2.50, 1.50, 0.0),
               integration_levels: Sequence[float] = DEFAULT_LEVELS, spec: ModelSpec | None = None) -> SweepTable:
    """Transit probability as every transit fare is set to each value of ``fare_grid``."""
    grid = _check_grid(fare_grid, "fare")
    return _sweep(trip, params, spec, grid, tuple(integration_levels), RepresentativeTrip.with_fare, "fare")


def sweep_access(trip: RepresentativeTrip, params=None, access_grid: Sequence[float] = (15, 10, 5, 0),
                 integration_levels: Sequence[float] = DEFAULT_LEVELS, spec: ModelSpec | None = None) -> SweepTable:
    """Transit probability as access walking time falls, with fares at the trip's level."""
    grid = _check_grid(access_grid, "access")
    if grid[0] != BASELINE_ACCESS:
        raise ValueError(f"access grid must start at the {BASELINE_ACCESS:g}-minute baseline")
    return _sweep(trip, params, spec, grid, tuple(integration_levels), RepresentativeTrip.with_access, "access")


@dataclass
class IntegrationCurve:
    levels: np.ndarray  # SD units
    probabilities: dict[Mode, np.ndarray]

    @property
    def transit(self) -> np.ndarray:
        return sum(self.probabilities[m] for m in TRANSIT_MODES)

    @property
    def car_transit_gap(self) -> np.ndarray:
        return self.probabilities[Mode.CAR] - self.transit

    @property
    def swing(self) -> float:
        """Transit probability at the low end minus the high end."""
        return float(self.transit[0] - self.transit[-1])

    def write_series(self, path) -> None:
        """CSV of (step, level_sd, mode, probability); one row per step and mode."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "level_sd", "mode", "probability"])
            for k, lv in enumerate(self.levels):
                for m, p in self.probabilities.items():
                    w.writerow([k, f"{lv:.6g}", m.value, f"{p[k]:.10f}"])


def integration_gradient(trip: RepresentativeTrip, params=None, integ_range: tuple[float, float] = (-1.0, 1.0),
                         steps: int = 21, spec: ModelSpec | None = None) -> IntegrationCurve:
    """Mode probabilities across integration levels (SD units) at the trip's fare and access."""
    params, spec = _default_params(params, spec)
    if "b_integ_pt" not in spec.parameters:
        raise ValueError(f"spec {spec.name} has no transit integration term")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    levels = np.linspace(integ_range[0], integ_range[1], steps)
    probs = {m: np.zeros(steps) for m in RP_MODES}
    for k, lv in enumerate(levels):
        for m, p in mode_probabilities(trip.at_integration(lv), params, spec).items():
            probs[m][k] = p
    return IntegrationCurve(levels, probs)
