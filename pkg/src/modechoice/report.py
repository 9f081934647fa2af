"""Plain-text and CSV renderings of estimation, VOT and scenario results."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .analysis import format_vot_table, vot_table
from .estimation import EstimationResult
from .model import PARAMETER_LABELS, ModelSpec, SpecError
from .scenario import SweepTable

MINUS = "−"
LABEL_WIDTH = 30
COL_WIDTH = 20


def signed(x: float, digits: int = 3) -> str:
    """Fixed-point number with a typographic minus sign."""
    return f"{x:.{digits}f}".replace("-", MINUS)


def estimate_cell(result: EstimationResult, name: str) -> str:
    if name not in result.estimates:
        return ""
    est = signed(result.estimates[name])
    if name in result.estimates.frozen:
        return f"{est} (fixed)"
    t = result.robust_t.get(name)
    return est if t is None or not np.isfinite(t) else f"{est} ({signed(t, 2)})"


def _ordered_names(results: Sequence[EstimationResult]) -> list[str]:
    seen = {n for r in results for n in r.estimates.names}
    extra = sorted(seen - set(PARAMETER_LABELS))
    return [n for n in PARAMETER_LABELS if n in seen] + extra


def parameter_rows(results: Sequence[EstimationResult]) -> list[list[str]]:
    return [[PARAMETER_LABELS.get(n, n)] + [estimate_cell(r, n) for r in results] for n in _ordered_names(results)]


def _random_count(result: EstimationResult) -> int:
    try:
        return 2 if ModelSpec.load(result.meta.get("spec", "")).is_mixed else 0
    except (SpecError, FileNotFoundError, KeyError, ValueError):
        return 2 if "mu_time" in result.estimates else 0


def fit_rows(results: Sequence[EstimationResult]) -> list[list[str]]:
    if not results:
        return []
    rows = [
        ("Parameters", lambda r: f"{r.n_params:d}"),
        ("Random parameters", lambda r: f"{_random_count(r):d}"),
        ("Observations", lambda r: f"{r.n_obs:d}"),
        ("Persons", lambda r: f"{r.n_persons:d}"),
        ("LL(0)", lambda r: signed(r.ll0, 1)),
        ("LL(final)", lambda r: signed(r.ll_final, 1)),
        ("Adj. rho2(0)", lambda r: signed(r.adj_rho2, 3)),
        ("AIC", lambda r: f"{r.aic:,.1f}"),
        ("Converged", lambda r: "yes" if r.converged else "no"),
    ]
    return [[label] + [f(r) for r in results] for label, f in rows]


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = [f"{header[0]:<{LABEL_WIDTH}}" + "".join(f"{h:>{COL_WIDTH}}" for h in header[1:])]
    lines.append("-" * len(lines[0]))
    lines += [f"{r[0]:<{LABEL_WIDTH}}" + "".join(f"{c:>{COL_WIDTH}}" for c in r[1:]) for r in rows]
    return "\n".join(lines)


def parameter_table(results: Sequence[EstimationResult]) -> str:
    """Estimates with robust t-ratios in parentheses, one column per model."""
    return _table(["Parameter"] + [r.model or f"Model {i + 1}" for i, r in enumerate(results)],
                  parameter_rows(results))


def fit_table(results: Sequence[EstimationResult]) -> str:
    return _table(["Statistic"] + [r.model or f"Model {i + 1}" for i, r in enumerate(results)], fit_rows(results))


def vot_report(results: Sequence[EstimationResult]) -> str:
    rows, ratios = vot_table({r.model or f"Model {i + 1}": r.estimates for i, r in enumerate(results)})
    return format_vot_table(rows, ratios)


def write_parameter_csv(results: Sequence[EstimationResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter"] + [f"{r.model}:{k}" for r in results for k in ("estimate", "robust_se", "robust_t")])
        for n in _ordered_names(results):
            row = [n]
            for r in results:
                row += [r.estimates[n] if n in r.estimates else "", r.robust_se.get(n, ""), r.robust_t.get(n, "")]
            w.writerow(row)


def sweep_from_dict(d: Mapping) -> SweepTable:
    return SweepTable(d["lever"], tuple(d["grid"]), tuple(d["levels"]), np.asarray(d["percent"], dtype=float))


def scenario_report(d: Mapping) -> str:
    """Fare and access tables plus the integration swing from a saved scenario file."""
    parts = []
    for key, title in (("fare", "Fare reduction"), ("access", "Access time reduction")):
        if key in d:
            parts.append(f"{title}: combined transit probability (%)\n{sweep_from_dict(d[key]).format()}")
    if "integration" in d:
        g = d["integration"]
        parts.append(f"Integration swing ({g['levels'][0]:+g} to {g['levels'][-1]:+g} SD): "
                     f"{100 * g['swing']:.1f} pp")
    return "\n\n".join(parts).replace("-", MINUS)


def load_result_file(path) -> tuple[str, object]:
    """Classify a saved file as an estimation result or a scenario result."""
    d = json.loads(Path(path).read_text())
    if "parameters" in d and "ll_final" in d:
        return "estimation", EstimationResult.from_dict(d)
    if "fare" in d or "access" in d or "integration" in d:
        return "scenario", d
    raise ValueError(f"{path}: not an estimation or scenario result")


def render_report(paths: Sequence) -> str:
    """Text report over any mix of estimation and scenario result files.

    With no files, the parameter and fit tables are emitted with their
    headers only.
    """
    estimations, scenarios = [], []
    for p in paths:
        kind, obj = load_result_file(p)
        (estimations if kind == "estimation" else scenarios).append(obj)
    sections = [
        "Parameter estimates (robust t-ratios)\n" + parameter_table(estimations),
        "Model fit\n" + fit_table(estimations),
    ]
    if estimations:
        sections.append("Values of travel time (CAD/hr)\n" + vot_report(estimations))
    sections += [scenario_report(s) for s in scenarios]
    return "\n\n".join(sections) + "\n"
