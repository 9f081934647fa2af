"""Command-line entry point: pipeline, estimate, cv, scenario, synth and report subcommands.

Every run writes its outputs and a ``manifest.json`` under the run
directory given by ``--out``. Failures print a JSON error record on stderr
(and into ``error.json`` when the run directory exists) and exit nonzero.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import pandas as pd
import scipy
import sklearn
import yaml

from . import __version__, kernels
from .data import DataValidationError, load_dataset, write_dataset
from .estimation import EstimationError, Tolerances, estimate
from .joint import estimate_balanced
from .model import ModelSpec, ParameterVector, SpecError, published_parameters

log = logging.getLogger("modechoice")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
COMMANDS = ("pipeline", "estimate", "cv", "scenario", "synth", "report")


class ConfigError(Exception):
    """Invalid invocation or configuration; ``problems`` lists every issue found."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError([message])


# ---------------------------------------------------------------- config


def _expect(problems: list[str], cfg: Mapping, key: str, types, where: str, required: bool = False):
    if key not in cfg or cfg[key] is None:
        if required:
            problems.append(f"{where}.{key}: required")
        return None
    value = cfg[key]
    if not isinstance(value, types) or isinstance(value, bool) and bool not in _as_tuple(types):
        names = "/".join(t.__name__ for t in _as_tuple(types))
        problems.append(f"{where}.{key}: expected {names}, got {type(value).__name__}")
        return None
    return value


def _as_tuple(t):
    return t if isinstance(t, tuple) else (t,)


def _path_exists(problems: list[str], value, where: str, base: Path) -> None:
    if value is not None and not _resolve(value, base).exists():
        problems.append(f"{where}: file not found: {_resolve(value, base)}")


def _resolve(value, base: Path) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _check_spec(problems: list[str], value, where: str, base: Path) -> None:
    if value is None:
        return
    try:
        ModelSpec.load(value if str(value).upper() in ("M1", "M2", "M3", "M4") else _resolve(value, base))
    except (SpecError, OSError, yaml.YAMLError) as exc:
        problems.append(f"{where}: {exc}")


def validate_config(cfg: Mapping, command: str, base: Path) -> list[str]:
    """Every problem in ``cfg`` relevant to ``command``; an empty list means valid."""
    problems: list[str] = []
    if not isinstance(cfg, Mapping):
        return ["config: top level must be a mapping"]
    sections = {"data", "model", "estimation", "cv", "scenario", "synth", "pipeline", "report", "seed", "workers"}
    for key in cfg:
        if key not in sections:
            problems.append(f"config.{key}: unknown section")
    for key in ("seed", "workers"):
        _expect(problems, cfg, key, int, "config")
    sec = {}
    for name in sections - {"seed", "workers"}:
        value = cfg.get(name, {}) or {}
        if not isinstance(value, Mapping):
            problems.append(f"{name}: expected a mapping")
            value = {}
        sec[name] = value

    data, model, est = sec["data"], sec["model"], sec["estimation"]
    if command in ("estimate", "cv"):
        for key in ("observations", "persons"):
            _path_exists(problems, _expect(problems, data, key, str, "data", required=True), f"data.{key}", base)
    if command == "pipeline":
        for key in ("events", "persons"):
            _path_exists(problems, _expect(problems, data, key, str, "data", required=True), f"data.{key}", base)
        pipe = sec["pipeline"]
        provider = _expect(problems, pipe, "provider", str, "pipeline")
        if provider not in (None, "synthetic"):
            problems.append(f"pipeline.provider: unknown provider {provider!r} (available: synthetic)")
        for key in ("anchors", "links", "fare_table"):
            _expect(problems, pipe, key, Mapping, "pipeline")
        _expect(problems, pipe, "min_trip_km", (int, float), "pipeline")
    if command in ("estimate", "cv", "synth"):
        where = "synth" if command == "synth" else "model"
        holder = sec["synth"] if command == "synth" else model
        _check_spec(problems, _expect(problems, holder, "spec", str, where, required=command != "synth"),
                    f"{where}.spec", base)
        _expect(problems, model, "start", Mapping, "model")
        _expect(problems, model, "frozen", list, "model")
        for key in ("draws", "trip_cap", "maxiter"):
            v = _expect(problems, est, key, int, "estimation")
            if v is not None and v <= 0:
                problems.append(f"estimation.{key}: must be positive")
        backend = _expect(problems, est, "backend", str, "estimation")
        if backend is not None and backend not in kernels.available_backends():
            problems.append(f"estimation.backend: {backend!r} not in {kernels.available_backends()}")
        grad = _expect(problems, est, "gradient", str, "estimation")
        if grad not in (None, "analytic", "numerical"):
            problems.append(f"estimation.gradient: must be 'analytic' or 'numerical', got {grad!r}")
        tol = _expect(problems, est, "tolerances", Mapping, "estimation")
        if tol is not None:
            try:
                Tolerances.from_mapping(tol)
            except TypeError as exc:
                problems.append(f"estimation.tolerances: {exc}")
        _expect(problems, est, "balanced", bool, "estimation")
    if command == "cv":
        k = _expect(problems, sec["cv"], "k", int, "cv")
        if k is not None and k < 2:
            problems.append("cv.k: must be at least 2")
    if command == "scenario":
        sc = sec["scenario"]
        _path_exists(problems, _expect(problems, sc, "trip", str, "scenario"), "scenario.trip", base)
        _path_exists(problems, _expect(problems, sc, "params", str, "scenario"), "scenario.params", base)
        _check_spec(problems, _expect(problems, sc, "spec", str, "scenario"), "scenario.spec", base)
        for key in ("fare_grid", "access_grid", "levels", "integration_range"):
            v = _expect(problems, sc, key, list, "scenario")
            if v is not None and not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
                problems.append(f"scenario.{key}: entries must be numbers")
        _expect(problems, sc, "steps", int, "scenario")
        _expect(problems, sc, "integration_sd", (int, float), "scenario")
    if command == "synth":
        syn = sec["synth"]
        for key in ("n_persons", "n_obs", "sp_per_person"):
            v = _expect(problems, syn, key, int, "synth")
            if v is not None and v < 0:
                problems.append(f"synth.{key}: must be nonnegative")
        _expect(problems, syn, "recover", bool, "synth")
        truth = syn.get("truth")
        if truth is not None and not isinstance(truth, (str, Mapping)):
            problems.append("synth.truth: expected a model name or a mapping of parameter values")
        marg = _expect(problems, syn, "marginals", Mapping, "synth")
        for k, v in (marg or {}).items():
            if not isinstance(v, (int, float)) or not 0 <= v <= 1:
                problems.append(f"synth.marginals.{k}: must be a probability")
    if command == "report":
        res = _expect(problems, sec["report"], "results", list, "report")
        for i, p in enumerate(res or []):
            _path_exists(problems, p, f"report.results[{i}]", base)
    return problems


def load_config(path: str | None) -> tuple[dict, Path, str]:
    """Parsed config, its directory (for relative paths) and the SHA-256 of its bytes."""
    if path is None:
        return {}, Path.cwd(), hashlib.sha256(b"").hexdigest()
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"--config: file not found: {p}"])
    raw = p.read_bytes()
    try:
        cfg = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise ConfigError([f"--config: not valid YAML/JSON: {exc}"]) from exc
    return cfg, p.resolve().parent, hashlib.sha256(raw).hexdigest()


# ---------------------------------------------------------------- commands


class Run:
    """Context of one command invocation."""

    def __init__(self, args, cfg: dict, base: Path, config_hash: str):
        self.args = args
        self.cfg = cfg
        self.base = base
        self.config_hash = config_hash
        self.out = Path(args.out)
        self.seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        self.workers = args.workers if args.workers is not None else int(cfg.get("workers", kernels.default_workers()))
        est = cfg.get("estimation") or {}
        self.draws = args.draws if args.draws is not None else est.get("draws")
        self.trip_cap = args.trip_cap if args.trip_cap is not None else est.get("trip_cap")
        self.outputs: list[str] = []

    def section(self, name: str) -> dict:
        return dict(self.cfg.get(name) or {})

    def path(self, value) -> Path:
        return _resolve(value, self.base)

    def write_text(self, name: str, text: str) -> Path:
        p = self.out / name
        p.write_text(text)
        self.outputs.append(name)
        return p

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, json.dumps(obj, indent=2, default=_json_default))

    def track(self, name: str) -> None:
        self.outputs.append(name)

    def estimate_kwargs(self) -> dict:
        est = self.section("estimation")
        model = self.section("model")
        kw: dict[str, Any] = {
            "seed": self.seed,
            "workers": self.workers,
            "gradient": est.get("gradient", "analytic"),
            "backend": est.get("backend"),
            "tolerances": Tolerances.from_mapping(est.get("tolerances")),
        }
        if self.draws is not None:
            kw["n_draws"] = int(self.draws)
        if self.trip_cap is not None:
            kw["trip_cap"] = int(self.trip_cap)
        if model.get("start"):
            kw["start"] = dict(model["start"])
        if model.get("frozen"):
            kw["frozen"] = list(model["frozen"])
        return kw

    def spec(self, value) -> ModelSpec:
        key = str(value)
        return ModelSpec.load(key if key.upper() in ("M1", "M2", "M3", "M4") else self.path(key))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    return str(o)


def _save_result(run: Run, result, name: str = "result") -> None:
    result.save(run.out / f"{name}.json")
    run.track(f"{name}.json")
    run.write_text(f"{name}.txt", result.format_table() + "\n")


def cmd_pipeline(run: Run) -> None:
    from .pipeline.run import PipelineConfig, run_files

    data = run.section("data")
    pipe = run.section("pipeline")
    pipe.pop("provider", None)
    config = PipelineConfig.from_mapping({**pipe, "workers": run.workers, "seed": run.seed})
    result = run_files(run.path(data["events"]), run.path(data["persons"]), run.out, config)
    for name in ("observations.csv", "persons.csv", "pipeline_report.json", "routing_cache.json", "weather_cache.json"):
        run.track(name)
    print(f"pipeline: {result.dataset.n_obs} observations for {len(result.dataset.persons)} persons -> {run.out}")


def cmd_estimate(run: Run) -> None:
    data = run.section("data")
    ds = load_dataset(run.path(data["observations"]), run.path(data["persons"]))
    spec = run.spec(run.section("model")["spec"])
    result = estimate(ds, spec, **run.estimate_kwargs())
    _save_result(run, result)
    print(result.format_table())
    if run.section("estimation").get("balanced"):
        kw = run.estimate_kwargs()
        kw.pop("start", None)
        balanced = estimate_balanced(ds, spec, result, **kw)
        _save_result(run, balanced, "balanced")
        print(balanced.format_table())


def cmd_cv(run: Run) -> None:
    from .validation import cross_validate

    data = run.section("data")
    ds = load_dataset(run.path(data["observations"]), run.path(data["persons"]))
    spec = run.spec(run.section("model")["spec"])
    k = int(run.section("cv").get("k", 5))
    kw = run.estimate_kwargs()
    kw.pop("seed")
    if spec.is_mixed:
        from .estimation import prepare_data

        ds = prepare_data(ds, spec, kw.pop("trip_cap", None), run.seed)
        kw["apply_cap"] = False
    else:
        kw.pop("trip_cap", None)
        kw.pop("n_draws", None)
    report = cross_validate(ds, spec, k, run.seed, **kw)
    run.write_json("cv.json", report.to_dict())
    run.write_text("cv.txt", report.summary() + "\n")
    print(report.summary())


def cmd_scenario(run: Run) -> None:
    from .estimation import EstimationResult
    from .scenario import integration_gradient, load_representative_trip, sweep_access, sweep_fare

    sc = run.section("scenario")
    trip = load_representative_trip(run.path(sc["trip"]) if sc.get("trip") else None, sc.get("integration_sd"))
    spec = run.spec(sc.get("spec", "M3"))
    params = EstimationResult.load(run.path(sc["params"])).estimates if sc.get("params") else None
    levels = tuple(sc.get("levels", (-1.0, 0.0, 1.0)))
    fare = sweep_fare(trip, params, tuple(sc.get("fare_grid", (3.25, 2.5, 1.5, 0.0))), levels, spec)
    access = sweep_access(trip, params, tuple(sc.get("access_grid", (15, 10, 5, 0))), levels, spec)
    curve = integration_gradient(trip, params, tuple(sc.get("integration_range", (-1.0, 1.0))),
                                 int(sc.get("steps", 21)), spec)
    curve.write_series(run.out / "integration_series.csv")
    run.track("integration_series.csv")
    gap_trip = trip.with_fare(0.0).with_access(0.0)
    gap_curve = integration_gradient(gap_trip, params, (levels[0], levels[-1]), len(levels), spec)
    doc = {
        "fare": fare.to_dict(),
        "access": access.to_dict(),
        "integration": {"levels": curve.levels.tolist(), "transit": curve.transit.tolist(), "swing": curve.swing,
                        "car_transit_gap": curve.car_transit_gap.tolist()},
        "gap_at_zero_fare_and_access": {"levels": gap_curve.levels.tolist(), "transit": gap_curve.transit.tolist(),
                                        "swing": gap_curve.swing},
    }
    run.write_json("scenario.json", doc)
    from .report import scenario_report

    text = scenario_report(doc)
    run.write_text("scenario.txt", text + "\n")
    print(text)


def cmd_synth(run: Run) -> None:
    from .synth import generate_population, recovery_report, simulate_choices

    syn = run.section("synth")
    spec = run.spec(syn.get("spec", "M1"))
    truth_cfg = syn.get("truth", spec.name)
    if isinstance(truth_cfg, str):
        truth = published_parameters(truth_cfg, spec)
    else:
        missing = [n for n in spec.parameters if n not in truth_cfg]
        if missing:
            raise ConfigError([f"synth.truth: missing values for {missing}"])
        truth = ParameterVector(spec.parameters, [float(truth_cfg[n]) for n in spec.parameters])
    persons = generate_population(int(syn.get("n_persons", 100)), syn.get("marginals"), seed=run.seed)
    ds = simulate_choices(persons, truth, spec, int(syn.get("n_obs", 100)), seed=run.seed + 1,
                          sp_per_person=int(syn.get("sp_per_person", 0)))
    write_dataset(ds, run.out / "observations.csv", run.out / "persons.csv")
    run.track("observations.csv")
    run.track("persons.csv")
    run.write_json("truth.json", {"spec": spec.name, "parameters": truth.as_dict()})
    print(f"synth: {ds.n_obs} observations for {len(ds.persons)} persons -> {run.out}")
    if syn.get("recover"):
        result = estimate(ds, spec, **run.estimate_kwargs())
        _save_result(run, result)
        rows = recovery_report(truth, result)
        pd.DataFrame([asdict(r) for r in rows]).to_csv(run.out / "recovery.csv", index=False)
        run.track("recovery.csv")
        flagged = [r.name for r in rows if r.flagged]
        print(f"recovery: {len(rows)} free parameters, flagged: {flagged or 'none'}")


def cmd_report(run: Run) -> None:
    from .report import render_report, write_parameter_csv, load_result_file

    paths = [run.path(p) for p in run.section("report").get("results", [])]
    paths += [Path(p) for p in run.args.results]
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise ConfigError([f"report: file not found: {m}" for m in missing])
    text = render_report(paths)
    run.write_text("report.txt", text)
    estimations = [obj for kind, obj in map(load_result_file, paths) if kind == "estimation"]
    write_parameter_csv(estimations, run.out / "parameters.csv")
    run.track("parameters.csv")
    print(text, end="")


HANDLERS: dict[str, Callable[[Run], None]] = {
    "pipeline": cmd_pipeline, "estimate": cmd_estimate, "cv": cmd_cv,
    "scenario": cmd_scenario, "synth": cmd_synth, "report": cmd_report,
}


# ---------------------------------------------------------------- driver


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--draws", type=int, help="Halton draws per person for mixed logit")
    common.add_argument("--trip-cap", type=int, help="RP trips kept per person for mixed logit")
    common.add_argument("--workers", type=int, help="worker threads (default: available cores)")
    common.add_argument("--out", default="run", help="run directory for outputs and the manifest")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="modechoice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"modechoice {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "pipeline": "GPS events and persons -> choice data files",
        "estimate": "estimate an M1-M4 spec on choice data",
        "cv": "k-fold cross-validated prediction accuracy",
        "scenario": "fare, access and integration scenario tables",
        "synth": "simulate a synthetic dataset (optionally re-estimate it)",
        "report": "render parameter, fit, VOT and scenario tables",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "report":
            p.add_argument("results", nargs="*", help="result files (added to report.results)")
    return parser


def _versions() -> dict:
    return {"modechoice": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pd.__version__, "scikit-learn": sklearn.__version__,
            "kernel_backend": kernels.BACKEND,
            "platform": platform.platform()}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _error_record(kind: str, problems: Sequence[str], command: str | None) -> dict:
    return {"status": "error", "command": command, "error": kind, "problems": list(problems)}


def _emit_error(record: dict, out: Path | None) -> None:
    text = json.dumps(record, indent=2)
    print(text, file=sys.stderr)
    if out is not None and out.is_dir():
        (out / "error.json").write_text(text)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = None
    out = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg, base, config_hash = load_config(args.config)
        problems = validate_config(cfg, command, base)
        for flag in ("seed", "draws", "trip_cap", "workers"):
            v = getattr(args, flag)
            if v is not None and flag != "seed" and v <= 0:
                problems.append(f"--{flag.replace('_', '-')}: must be positive")
        if problems:
            raise ConfigError(problems)
        run = Run(args, cfg, base, config_hash)
        out = run.out
        out.mkdir(parents=True, exist_ok=True)
        started = time.time()
        HANDLERS[command](run)
        manifest = {
            "status": "ok",
            "command": command,
            "argv": argv,
            "config_path": str(Path(args.config).resolve()) if args.config else None,
            "config_sha256": config_hash,
            "config": cfg,
            "seed": run.seed,
            "draws": run.draws,
            "trip_cap": run.trip_cap,
            "workers": run.workers,
            "versions": _versions(),
            "elapsed_s": round(time.time() - started, 3),
            "outputs": {name: _sha256(out / name) for name in dict.fromkeys(run.outputs) if (out / name).exists()},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default))
        return EXIT_OK
    except ConfigError as exc:
        _emit_error(_error_record("config", exc.problems, command), out)
        return EXIT_CONFIG
    except DataValidationError as exc:
        _emit_error(_error_record("data", exc.problems, command), out)
        return EXIT_CONFIG
    except (FileNotFoundError, SpecError) as exc:
        _emit_error(_error_record("input", [str(exc)], command), out)
        return EXIT_CONFIG
    except (EstimationError, np.linalg.LinAlgError, ValueError, KeyError) as exc:
        _emit_error(_error_record(type(exc).__name__, [str(exc)], command), out)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last resort, still a structured record
        log.debug("unhandled error", exc_info=True)
        _emit_error(_error_record(type(exc).__name__, [str(exc)], command), out)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
