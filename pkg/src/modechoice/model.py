"""Model specifications and named parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import yaml

# Display labels, in the order used by report tables.
PARAMETER_LABELS = {
    "mu_sp": "μ_SP (SP scale)",
    "asc_bus": "α_bus",
    "asc_sub": "α_sub",
    "asc_walk": "α_walk",
    "asc_bike": "α_bike",
    "asc_emob": "α_emob",
    "b_cost": "β_C (Cost)",
    "b_time": "β_T (IVTT)",
    "mu_time": "μ_T (IVTT mean)",
    "sigma_time": "σ_T (IVTT s.d.)",
    "delta_mig": "δ_MIG (immigrant shift)",
    "mu_cost": "μ_C (Cost log-mean)",
    "sigma_cost": "σ_C (Cost log-s.d.)",
    "b_access": "β_A (Walk time)",
    "b_dist_car": "β_D1 (Dist. car)",
    "b_dist_pt": "β_D2 (Dist. PT)",
    "b_dist_train": "β_D3 (Dist. train)",
    "b_dist_active": "β_D4 (Dist. active)",
    "b_work": "β_W (Work/study → Car)",
    "b_child": "β_Ch (Child → PT)",
    "b_mig": "β_M (Immigrant → Sub)",
    "b_ft": "β_F (Full-time → Sub)",
    "b_stu_train": "β_St (Student → Train)",
    "b_stu_walk": "β_Sw (Student → Walk)",
    "b_safe": "β_S (Safe → Sub)",
    "b_cycfr": "β_Cy (Cycle-fr. → Bike)",
    "b_integ_pt": "β_I1 (INTEG_C → PT)",
    "b_integ_active": "β_I2 (INTEG_C → Active)",
    "b_snow": "β_Sn (Snow → Active)",
}
ALL_PARAMETERS = tuple(PARAMETER_LABELS)

RANDOM_HYPER = ("mu_time", "sigma_time", "delta_mig", "mu_cost", "sigma_cost")
# Optimized on the log scale to keep them positive.
LOG_PARAMETERS = frozenset({"sigma_time", "sigma_cost", "mu_sp"})
SOCIODEMOGRAPHIC = ("b_work", "b_child", "b_mig", "b_ft", "b_stu_train", "b_stu_walk")

# Conventional start values on the natural scale; everything else starts at 0.
START_VALUES = {"mu_cost": -1.0, "sigma_time": 0.1, "sigma_cost": 0.1, "mu_sp": 1.0}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    name: str
    label: str
    kind: str  # "mnl" or "mxl"
    joint: bool
    parameters: tuple[str, ...]
    random: Mapping[str, Mapping] = field(default_factory=dict)
    draws: int = 500
    trip_cap: int = 300

    def __post_init__(self):
        problems = []
        if self.kind not in ("mnl", "mxl"):
            problems.append(f"kind must be mnl or mxl, got {self.kind!r}")
        unknown = [p for p in self.parameters if p not in PARAMETER_LABELS]
        if unknown:
            problems.append(f"unknown parameters {unknown}")
        if len(set(self.parameters)) != len(self.parameters):
            problems.append("duplicate parameters")
        if self.kind == "mxl":
            missing = [p for p in RANDOM_HYPER if p not in self.parameters]
            if missing:
                problems.append(f"mixed logit spec lacks {missing}")
            if "b_time" in self.parameters or "b_cost" in self.parameters:
                problems.append("mixed logit spec must use random time/cost hyperparameters, not b_time/b_cost")
        else:
            clash = [p for p in RANDOM_HYPER if p in self.parameters]
            if clash:
                problems.append(f"MNL spec cannot contain {clash}")
        if ("mu_sp" in self.parameters) != self.joint:
            problems.append("mu_sp must be present exactly when joint is true")
        if "asc_emob" in self.parameters and not self.joint:
            problems.append("asc_emob requires a joint spec")
        if self.draws < 1:
            problems.append("draws must be positive")
        if self.trip_cap < 1:
            problems.append("trip_cap must be positive")
        if problems:
            raise SpecError("; ".join(problems))

    @property
    def is_mixed(self) -> bool:
        return self.kind == "mxl"

    @property
    def n_parameters(self) -> int:
        return len(self.parameters)

    @property
    def utility_parameters(self) -> tuple[str, ...]:
        """Coefficients that multiply a utility feature directly."""
        skip = set(RANDOM_HYPER) | {"mu_sp"}
        return tuple(p for p in self.parameters if p not in skip)

    def includes(self, name: str) -> bool:
        return name in self.parameters

    @classmethod
    def from_mapping(cls, d: Mapping) -> "ModelSpec":
        return cls(
            name=str(d["name"]),
            label=str(d.get("label", d["name"])),
            kind=str(d["kind"]),
            joint=bool(d.get("joint", False)),
            parameters=tuple(d["parameters"]),
            random=dict(d.get("random") or {}),
            draws=int(d.get("draws", 500)),
            trip_cap=int(d.get("trip_cap", 300)),
        )

    @classmethod
    def load(cls, name_or_path: str | Path) -> "ModelSpec":
        """Load a packaged spec by name (``M1``..``M4``) or a YAML file path."""
        key = str(name_or_path)
        if key.upper() in ("M1", "M2", "M3", "M4"):
            text = resources.files("modechoice.specs").joinpath(f"{key.lower()}.yaml").read_text()
        else:
            path = Path(key)
            if not path.exists():
                raise SpecError(f"spec file not found: {path}")
            text = path.read_text()
        return cls.from_mapping(yaml.safe_load(text))

    def replace(self, **kw) -> "ModelSpec":
        d = dict(
            name=self.name, label=self.label, kind=self.kind, joint=self.joint,
            parameters=self.parameters, random=self.random, draws=self.draws, trip_cap=self.trip_cap,
        )
        d.update(kw)
        return ModelSpec(**d)


class ParameterVector:
    """Named coefficients on the natural scale, with per-name frozen flags."""

    def __init__(self, names: Iterable[str], values: Iterable[float] | None = None,
                 frozen: Iterable[str] = ()):
        self.names = tuple(names)
        vals = np.zeros(len(self.names)) if values is None else np.asarray(list(values), dtype=float)
        if vals.shape != (len(self.names),):
            raise ValueError("values do not match names")
        self.values = vals
        self._index = {n: i for i, n in enumerate(self.names)}
        self.frozen = frozenset(frozen)
        bad = self.frozen - set(self.names)
        if bad:
            raise KeyError(f"frozen names not in vector: {sorted(bad)}")

    @classmethod
    def from_dict(cls, d: Mapping[str, float], frozen: Iterable[str] = ()) -> "ParameterVector":
        return cls(list(d), list(d.values()), frozen)

    @classmethod
    def start(cls, spec: ModelSpec) -> "ParameterVector":
        return cls(spec.parameters, [START_VALUES.get(p, 0.0) for p in spec.parameters])

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> float:
        return float(self.values[self._index[name]])

    def get(self, name: str, default: float = 0.0) -> float:
        i = self._index.get(name)
        return default if i is None else float(self.values[i])

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def updated(self, **kw: float) -> "ParameterVector":
        d = self.as_dict()
        for k, v in kw.items():
            if k not in d:
                raise KeyError(k)
            d[k] = v
        return ParameterVector(self.names, d.values(), self.frozen)

    def with_frozen(self, names: Iterable[str]) -> "ParameterVector":
        return ParameterVector(self.names, self.values, self.frozen | set(names))

    def check(self) -> None:
        for n in ("sigma_time", "sigma_cost"):
            if n in self and self[n] < 0:
                raise ValueError(f"{n} must be nonnegative")
        if "mu_sp" in self and not self["mu_sp"] > 0:
            raise ValueError("mu_sp must be positive")

    # internal (optimizer) scale: log for positive parameters
    def to_internal(self) -> np.ndarray:
        self.check()
        out = self.values.copy()
        for i, n in enumerate(self.names):
            if n in LOG_PARAMETERS:
                out[i] = np.log(max(out[i], 1e-300))
        return out

    @classmethod
    def from_internal(cls, names, theta, frozen=()) -> "ParameterVector":
        vals = np.array(theta, dtype=float)
        for i, n in enumerate(names):
            if n in LOG_PARAMETERS:
                vals[i] = np.exp(vals[i])
        return cls(names, vals, frozen)

    def __repr__(self) -> str:
        body = ", ".join(f"{n}={v:.4g}" for n, v in zip(self.names, self.values))
        return f"ParameterVector({body})"


def internal_jacobian(names, theta) -> np.ndarray:
    """Diagonal of d(natural)/d(internal)."""
    return np.array([np.exp(t) if n in LOG_PARAMETERS else 1.0 for n, t in zip(names, theta)])


# Published estimates, used for defaults in scenarios and synthetic truth.
PUBLISHED = {
    "M1": {
        "asc_bus": -0.271, "asc_sub": 2.211, "asc_walk": 0.965, "asc_bike": -2.234,
        "b_cost": -0.766, "b_time": -0.361, "b_access": -0.461,
        "b_dist_car": 0.356, "b_dist_pt": 0.106, "b_dist_train": 0.311, "b_dist_active": -0.581,
        "b_work": -0.291, "b_child": 0.426, "b_mig": -0.708, "b_ft": -0.306,
        "b_stu_train": -1.562, "b_stu_walk": 0.574, "b_cycfr": 0.704,
        "b_integ_pt": -0.179, "b_integ_active": -0.259, "b_snow": -0.622,
    },
    "M3": {
        "mu_sp": 0.298, "asc_bus": -0.310, "asc_sub": 1.873, "asc_walk": 0.888, "asc_bike": -2.314,
        "asc_emob": -1.294, "b_cost": -0.801, "b_time": -0.347, "b_access": -0.455,
        "b_dist_car": 0.353, "b_dist_pt": 0.108, "b_dist_train": 0.302, "b_dist_active": -0.575,
        "b_work": -0.252, "b_child": 0.355, "b_mig": -0.653, "b_ft": -0.246,
        "b_stu_train": -1.534, "b_stu_walk": 0.577, "b_safe": 0.278, "b_cycfr": 0.720,
        "b_integ_pt": -0.213, "b_integ_active": -0.273, "b_snow": -0.660,
    },
    "M2": {
        "asc_bus": -0.396, "asc_sub": 2.107, "asc_walk": 1.088, "asc_bike": -1.713,
        "mu_time": -0.848, "sigma_time": 0.713, "delta_mig": 0.556, "mu_cost": -2.130, "sigma_cost": 1.724,
        "b_access": -0.448, "b_dist_car": 0.394, "b_dist_pt": 0.110, "b_dist_train": 0.276,
        "b_dist_active": -0.864, "b_ft": -0.684, "b_stu_walk": 0.559, "b_integ_pt": -0.095,
    },
    "M4": {
        "mu_sp": 0.281, "asc_bus": -0.519, "asc_sub": 2.016, "asc_walk": 0.834, "asc_bike": -1.869,
        "asc_emob": -0.810, "mu_time": -0.798, "sigma_time": 0.706, "delta_mig": 0.525,
        "mu_cost": -2.039, "sigma_cost": 1.697, "b_access": -0.531, "b_dist_car": 0.382,
        "b_dist_pt": 0.107, "b_dist_train": 0.251, "b_dist_active": -0.846, "b_ft": -0.673,
        "b_stu_walk": 0.656, "b_integ_pt": -0.106,
    },
}


def published_parameters(model: str, spec: ModelSpec | None = None) -> ParameterVector:
    values = PUBLISHED[model.upper()]
    names = spec.parameters if spec is not None else tuple(values)
    return ParameterVector(names, [values[n] for n in names])
