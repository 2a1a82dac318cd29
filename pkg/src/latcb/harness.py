"""Experiment harness: configuration, dispatch, rate fits, artifacts.

Experiments are described by JSON configs (potential, geometry, numerical
parameters, declared acceptance bands) and produce a gnuplot-ready CSV
table plus a JSON report per run.  Outputs are deterministic: floats are
serialized with ``repr`` (shortest round-trip form), reductions run in a
fixed order, the config hash and tool version are embedded in every
artifact, and no timestamps are written, so identical config + seed give
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .fields import TrigField
from .potentials import Potential, potential_from_config
from .stability import (
    dispersion_spectrum,
    instability_eigenprobe,
    legendre_hadamard_min,
    max_frequency,
    stability_constant,
)
from .static import MacroForce, SolverError, static_converge_sweep
from .stress import CBModel, stress_consistency_field
from .dynamics import InitialData, dynamic_error_sweep, instability_demo

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "RateReport",
    "fit_rate",
    "run",
]

EXPERIMENTS = (
    "stability",
    "dispersion",
    "stress-consistency",
    "static-converge",
    "dynamic-converge",
    "instability-demo",
)

_GOLDEN_FRAC = 0.6180339887498949


class ConfigError(Exception):
    """Invalid configuration (schema violation or unreadable file)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _field_error(name: str, message: str) -> ConfigError:
    return ConfigError(f"config field {name!r}: {message}")


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``raw`` keeps the parsed JSON object verbatim; its canonical
    serialization is hashed into every output artifact.
    """

    experiment: str
    name: str
    potential: dict
    geometry: dict
    params: dict
    tolerances: dict
    seed: int
    raw: dict

    @classmethod
    def from_dict(cls, obj) -> ExperimentConfig:
        if not isinstance(obj, dict):
            raise ConfigError("config root must be a JSON object")
        experiment = obj.get("experiment")
        if experiment not in EXPERIMENTS:
            raise _field_error(
                "experiment", f"must be one of {', '.join(EXPERIMENTS)}; got {experiment!r}"
            )
        for key, kind in (
            ("potential", dict),
            ("geometry", dict),
            ("params", dict),
            ("tolerances", dict),
        ):
            if key in obj and not isinstance(obj[key], kind):
                raise _field_error(key, "must be a JSON object")
        name = obj.get("name", experiment.replace("-", "_"))
        if not isinstance(name, str) or not name:
            raise _field_error("name", "must be a nonempty string")
        seed = obj.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise _field_error("seed", "must be a nonnegative integer")
        cfg = cls(
            experiment=experiment,
            name=name,
            potential=obj.get("potential", {}),
            geometry=obj.get("geometry", {}),
            params=obj.get("params", {}),
            tolerances=obj.get("tolerances", {}),
            seed=seed,
            raw=obj,
        )
        cfg._validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config parse error in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            )
        return cls.from_dict(obj)

    def _validate(self):
        needs_potential = self.experiment != "instability-demo"
        if needs_potential:
            if "variant" not in self.potential:
                raise _field_error("potential.variant", "required")
            try:
                P = potential_from_config(self.potential)
            except (KeyError, ValueError, TypeError) as exc:
                raise _field_error("potential", f"not resolvable: {exc}")
            if "d" in self.geometry and int(self.geometry["d"]) != P.d:
                raise _field_error("geometry.d", "does not match the potential dimension")
        if self.experiment in ("stress-consistency", "static-converge", "dynamic-converge"):
            self.eps_list()  # validates presence and shape

    def eps_list(self) -> list[float]:
        """Spacing sweep from the geometry block (eps_list or N_list)."""
        geo = self.geometry
        if "eps_list" in geo:
            vals = geo["eps_list"]
        elif "N_list" in geo:
            if not isinstance(geo["N_list"], list):
                raise _field_error("geometry.N_list", "must be a list of integers")
            vals = [1.0 / n for n in geo["N_list"]]
        else:
            raise _field_error("geometry", "needs eps_list or N_list")
        if not isinstance(vals, list) or len(vals) < 3:
            raise _field_error("geometry", "the spacing sweep needs at least 3 values")
        out = []
        for v in vals:
            v = float(v)
            n = round(1.0 / v)
            if v <= 0 or abs(n * v - 1.0) > 1e-9 or n < 4:
                raise _field_error(
                    "geometry", f"spacings must be reciprocals of integers >= 4; got {v!r}"
                )
            out.append(v)
        if len(set(out)) != len(out):
            raise _field_error("geometry", "spacings must be distinct")
        return sorted(out, reverse=True)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    """Log-log least-squares fit of errors against spacings."""

    eps: list
    errors: list
    slope: float
    intercept: float
    fit_residual: float
    band: list | None = None
    passed: bool | None = None
    dropped: list = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "errors": self.errors,
            "slope": self.slope,
            "intercept": self.intercept,
            "fit_residual": self.fit_residual,
            "band": self.band,
            "passed": self.passed,
            "dropped": self.dropped,
        }


def fit_rate(eps_list, errors, band=None, noise_floor=None) -> RateReport:
    """Least-squares slope of log error against log spacing.

    Requires at least three positive pairs.  When ``noise_floor`` is given
    (the solver tolerance), the coarsest spacing is excluded if its error
    sits within 10x that floor — such a point measures solver noise, not
    the model error — provided at least three points remain.  ``band``
    declares the acceptance interval for the slope.
    """
    eps = np.asarray(list(eps_list), dtype=float)
    err = np.asarray(list(errors), dtype=float)
    if eps.shape != err.shape or eps.ndim != 1 or eps.size < 3:
        raise ValueError("rate fits need at least 3 (eps, error) pairs")
    if np.any(eps <= 0) or np.any(err <= 0):
        raise ValueError("rate fits need positive spacings and errors")
    order = np.argsort(eps)[::-1]
    eps, err = eps[order], err[order]
    dropped = []
    if noise_floor is not None and eps.size > 3 and err[0] <= 10.0 * noise_floor:
        dropped.append(float(eps[0]))
        eps, err = eps[1:], err[1:]
    x, y = np.log(eps), np.log(err)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    if not math.isfinite(slope):
        raise ValueError("rate fit produced a non-finite slope")
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    passed = None
    if band is not None:
        lo, hi = float(band[0]), float(band[1])
        passed = bool(lo <= slope <= hi)
    return RateReport(
        eps=[float(e) for e in eps],
        errors=[float(e) for e in err],
        slope=slope,
        intercept=intercept,
        fit_residual=resid,
        band=None if band is None else [float(band[0]), float(band[1])],
        passed=passed,
        dropped=dropped,
    )


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, comments, columns, rows):
    lines = [f"# {c}" for c in comments]
    lines.append("# columns: " + ",".join(columns))
    for row in rows:
        lines.append(",".join(_format_value(v) for v in row))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def _check(checks: list, name: str, ok: bool, observed, constraint: str):
    checks.append(
        {"name": name, "passed": bool(ok), "observed": observed, "constraint": constraint}
    )
    return bool(ok)


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------
# each runner returns (passed, report_fields, tables); tables are
# (suffix, columns, rows) with suffix "" for the main `<name>.csv`.

def _run_stability(cfg: ExperimentConfig, rng, workers: int):
    P = potential_from_config(cfg.potential)
    default_grid = {1: 512, 2: 128, 3: 32}[P.d]
    n_grid = int(cfg.params.get("n_grid", default_grid))
    gamma = stability_constant(P, n_grid=n_grid)
    omega = max_frequency(P)
    lh = legendre_hadamard_min(CBModel(P))
    rows = [("gamma", gamma), ("omega_max", omega), ("lh_min", lh)]
    report = {"gamma": gamma, "omega_max": omega, "lh_min": lh}
    if "eigenprobe_N" in cfg.params:
        quotient, _ = instability_eigenprobe(P, int(cfg.params["eigenprobe_N"]))
        rows.append(("alternating_quotient", quotient))
        report["alternating_quotient"] = quotient
    checks = []
    tol = cfg.tolerances
    if "gamma_value" in tol:
        abs_tol = float(tol.get("gamma_abs_tol", 1e-6))
        _check(
            checks,
            "gamma_value",
            abs(gamma - float(tol["gamma_value"])) <= abs_tol,
            gamma,
            f"|gamma - {tol['gamma_value']}| <= {abs_tol}",
        )
    if "gamma_min" in tol:
        _check(checks, "gamma_min", gamma >= float(tol["gamma_min"]), gamma,
               f"gamma >= {tol['gamma_min']}")
    if "eigenprobe_value" in tol:
        abs_tol = float(tol.get("eigenprobe_abs_tol", 1e-10))
        q = report.get("alternating_quotient")
        _check(
            checks,
            "eigenprobe_value",
            q is not None and abs(q - float(tol["eigenprobe_value"])) <= abs_tol,
            q,
            f"|quotient - {tol['eigenprobe_value']}| <= {abs_tol}",
        )
    report["checks"] = checks
    passed = all(c["passed"] for c in checks)
    return passed, report, [("", ("quantity", "value"), rows)]


def _run_dispersion(cfg: ExperimentConfig, rng, workers: int):
    P = potential_from_config(cfg.potential)
    d = P.d
    default_nk = {1: 256, 2: 48, 3: 12}[d]
    n_k = int(cfg.params.get("n_k", default_nk))
    axis = -np.pi + (np.arange(n_k) + _GOLDEN_FRAC) * (2.0 * np.pi / n_k)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    k_grid = np.stack([g.ravel() for g in grids], axis=-1)
    spec = dispersion_spectrum(P, k_grid)
    n_eig = spec.eigs.shape[1]
    columns = (
        tuple(f"k{i + 1}" for i in range(d))
        + tuple(f"eig{i + 1}" for i in range(n_eig))
        + ("normalizer",)
        + tuple(f"ratio{i + 1}" for i in range(n_eig))
    )
    rows = [tuple(row) for row in spec.to_rows()]
    finite = spec.ratios[np.isfinite(spec.ratios)]
    min_ratio = float(np.min(finite))
    max_omega = float(np.sqrt(np.max(np.abs(spec.eigs))))
    report = {"min_ratio": min_ratio, "max_omega_sampled": max_omega, "n_k": n_k}
    checks = []
    if "min_ratio_min" in cfg.tolerances:
        bound = float(cfg.tolerances["min_ratio_min"])
        _check(checks, "min_ratio_min", min_ratio >= bound, min_ratio,
               f"min ratio >= {bound}")
    report["checks"] = checks
    return all(c["passed"] for c in checks), report, [("", columns, rows)]


def _initial_field(spec: dict, default_kind: str = "sin") -> TrigField:
    """Band-limited scalar field on the unit torus from a config block."""
    if "terms" in spec:
        terms = [
            (tuple(int(m) for m in t[0]), int(t[1]), str(t[2]), float(t[3]))
            for t in spec["terms"]
        ]
        d = len(terms[0][0])
        return TrigField.from_terms(d, 1, terms)
    mode = int(spec.get("mode", 1))
    kind = str(spec.get("kind", default_kind))
    if "grad_amplitude" in spec:
        amp = float(spec["grad_amplitude"]) / (2.0 * np.pi * abs(mode))
    else:
        amp = float(spec.get("amplitude", 0.0))
    return TrigField.from_terms(1, 1, [((mode,), 0, kind, amp)])


def _run_stress_consistency(cfg: ExperimentConfig, rng, workers: int):
    P = potential_from_config(cfg.potential)
    M = CBModel(P)
    U = _initial_field(cfg.params.get("displacement", {"grad_amplitude": 0.05, "mode": 1}))
    n_per_cell = int(cfg.params.get("n_per_cell", 4))
    eps_list = cfg.eps_list()
    rows = []
    for eps in eps_list:
        rep = stress_consistency_field(P, M, U, eps, n_per_cell=n_per_cell)
        rows.append((eps, rep["err_stress"], rep["err_div"]))
    band = cfg.tolerances.get("slope_band")
    rr_stress = fit_rate(eps_list, [r[1] for r in rows], band=band)
    rr_div = fit_rate(eps_list, [r[2] for r in rows], band=band)
    checks = []
    if band is not None:
        _check(checks, "stress_slope", rr_stress.passed, rr_stress.slope,
               f"slope in {band}")
        _check(checks, "divergence_slope", rr_div.passed, rr_div.slope,
               f"slope in {band}")
    report = {
        "stress_rate": rr_stress.to_dict(),
        "divergence_rate": rr_div.to_dict(),
        "checks": checks,
    }
    table = [("", ("eps", "err_stress", "err_div"), rows)]
    return all(c["passed"] for c in checks), report, table


def _macro_force(cfg: ExperimentConfig) -> MacroForce:
    params = cfg.params
    delta = float(params.get("delta", 0.01))
    force_spec = params.get("force", {})
    if "terms" in force_spec:
        F = MacroForce(_initial_field(force_spec))
        return F.scaled(delta / F.delta)
    return MacroForce.single_mode(
        delta,
        mode=int(force_spec.get("mode", 1)),
        kind=str(force_spec.get("kind", "sin")),
    )


def _run_static_converge(cfg: ExperimentConfig, rng, workers: int):
    P = potential_from_config(cfg.potential)
    if P.d != 1:
        raise SolverError("the static sweep is one-dimensional")
    F = _macro_force(cfg)
    eps_list = cfg.eps_list()
    tol = float(cfg.params.get("solver_tol", 1e-10))
    halved = bool(cfg.params.get("delta_halving", True))
    sweep = static_converge_sweep(
        P,
        F,
        eps_list,
        n_grid=int(cfg.params.get("n_grid", 256)),
        tol=tol,
        q=int(cfg.params.get("quadrature", 6)),
        halved=halved,
        workers=workers,
    )
    band = cfg.tolerances.get("slope_band")
    rr = fit_rate(sweep["eps"], sweep["errors"], band=band, noise_floor=tol)
    columns = ["eps", "error", "residual", "newton_iterations"]
    rows = []
    for j, det in enumerate(sweep["details"]["full"]["members"]):
        row = [det["eps"], det["error"], det["residual"], det["newton_iterations"]]
        if halved:
            row += [sweep["errors_half"][j], sweep["half_ratios"][j]]
        rows.append(tuple(row))
    if halved:
        columns += ["error_half_delta", "half_ratio"]
    checks = []
    if band is not None:
        _check(checks, "error_slope", rr.passed, rr.slope, f"slope in {band}")
    if halved and "half_ratio_band" in cfg.tolerances:
        lo, hi = (float(v) for v in cfg.tolerances["half_ratio_band"])
        ratios = sweep["half_ratios"]
        ok = all(lo <= r <= hi for r in ratios)
        _check(checks, "delta_halving", ok, ratios, f"ratios in [{lo}, {hi}]")
    report = {
        "rate": rr.to_dict(),
        "delta": sweep["delta"],
        "checks": checks,
    }
    if halved:
        report["half_ratios"] = sweep["half_ratios"]
    return all(c["passed"] for c in checks), report, [("", tuple(columns), rows)]


def _run_dynamic_converge(cfg: ExperimentConfig, rng, workers: int):
    P = potential_from_config(cfg.potential)
    if P.d != 1:
        raise SolverError("the dynamic sweep is one-dimensional")
    params = cfg.params
    U0 = _initial_field(params.get("U0", {"grad_amplitude": 0.05, "mode": 1}))
    U1 = _initial_field(params.get("U1", {"amplitude": 0.0, "mode": 1}))
    data = InitialData(U0, U1)
    eps_list = cfg.eps_list()
    half_check = bool(params.get("half_dt_check", True))
    sweep = dynamic_error_sweep(
        P,
        data,
        T=float(params.get("T", 0.5)),
        eps_list=eps_list,
        n_snap=int(params.get("n_snap", 17)),
        n_grid=int(params.get("n_grid", 128)),
        cfl=float(params.get("cfl", 0.2)),
        q=int(params.get("quadrature", 6)),
        half_dt_check=half_check,
        workers=workers,
    )
    band = cfg.tolerances.get("slope_band")
    rr = fit_rate(sweep["eps"], sweep["errors"], band=band)
    rows = [
        (det["eps"], det["error"], det["energy_drift"])
        for det in sweep["details"]
    ]
    checks = []
    if band is not None:
        _check(checks, "error_slope", rr.passed, rr.slope, f"slope in {band}")
    if half_check and "half_dt_rel_max" in cfg.tolerances:
        bound = float(cfg.tolerances["half_dt_rel_max"])
        rel = sweep["half_dt"]["rel_change"]
        _check(checks, "half_dt_control", rel < bound, rel, f"relative change < {bound}")
    report = {"rate": rr.to_dict(), "T": sweep["T"], "checks": checks}
    if half_check:
        report["half_dt"] = sweep["half_dt"]
    table = [("", ("eps", "error", "energy_drift"), rows)]
    return all(c["passed"] for c in checks), report, table


def _run_instability_demo(cfg: ExperimentConfig, rng, workers: int):
    params = cfg.params
    eps = float(params.get("eps", 1.0 / 64.0))
    rep = instability_demo(
        eps,
        a_unstable=tuple(params.get("a_unstable", (-1.0, 0.5))),
        a_stable=tuple(params.get("a_stable", (2.0, -0.25))),
        cfl=float(params.get("cfl", 0.2)),
        window_start=float(params.get("window_start", 1.0)),
    )
    rows = [
        (t, n, 0.5 * eps**2 * math.exp(t))
        for t, n in zip(rep["times"], rep["velocity_norms"])
    ]
    tol = cfg.tolerances
    checks = []
    if "growth_ratio_min" in tol:
        bound = float(tol["growth_ratio_min"])
        _check(checks, "growth_lower_bound", rep["min_growth_ratio"] >= bound,
               rep["min_growth_ratio"], f"min ratio >= {bound}")
    if "stable_factor" in tol:
        bound = float(tol["stable_factor"]) * eps**2
        _check(checks, "stable_chain_bounded", rep["stable_max_norm"] <= bound,
               rep["stable_max_norm"], f"max norm <= {bound}")
        _check(checks, "smooth_probe_bounded", rep["smooth_max_norm"] <= bound,
               rep["smooth_max_norm"], f"max norm <= {bound}")
    if "cb_zero_tol" in tol:
        bound = float(tol["cb_zero_tol"])
        _check(checks, "cb_stays_zero", rep["cb_max_amplitude"] <= bound,
               rep["cb_max_amplitude"], f"max amplitude <= {bound}")
    report = {k: v for k, v in rep.items() if k not in ("times", "velocity_norms")}
    report["checks"] = checks
    table = [("", ("t", "velocity_norm", "growth_bound"), rows)]
    return all(c["passed"] for c in checks), report, table


_RUNNERS = {
    "stability": _run_stability,
    "dispersion": _run_dispersion,
    "stress-consistency": _run_stress_consistency,
    "static-converge": _run_static_converge,
    "dynamic-converge": _run_dynamic_converge,
    "instability-demo": _run_instability_demo,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run(
    config_path,
    out_dir=None,
    workers: int = 1,
    seed: int | None = None,
    expect_experiment: str | None = None,
) -> int:
    """Run one experiment config; returns the process exit status.

    0: all declared acceptance bands passed; 1: some band failed;
    2: configuration error; 3: runtime/solver error.
    """
    from . import __version__

    try:
        cfg = ExperimentConfig.from_file(config_path)
        if expect_experiment is not None and cfg.experiment != expect_experiment:
            raise _field_error(
                "experiment",
                f"config declares {cfg.experiment!r} but the {expect_experiment!r} "
                "subcommand was invoked",
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if seed is not None:
        cfg.seed = seed
    rng = np.random.default_rng(cfg.seed)
    out = Path(out_dir) if out_dir is not None else Path(".")
    try:
        out.mkdir(parents=True, exist_ok=True)
        passed, report_fields, tables = _RUNNERS[cfg.experiment](cfg, rng, max(1, workers))
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    comments = [
        f"latcb {__version__}",
        f"experiment: {cfg.experiment}",
        f"config sha256: {cfg.config_hash}",
        f"seed: {cfg.seed}",
    ]
    for suffix, columns, rows in tables:
        write_csv(out / f"{cfg.name}{suffix}.csv", comments, columns, rows)
    report = {
        "experiment": cfg.experiment,
        "name": cfg.name,
        "version": __version__,
        "config_sha256": cfg.config_hash,
        "seed": cfg.seed,
        "passed": bool(passed),
    }
    report.update(report_fields)
    _atomic_write(
        out / f"{cfg.name}.report.json",
        json.dumps(report, indent=2, sort_keys=True) + "\n",
    )
    for c in report_fields.get("checks", []):
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {cfg.name}:{c['name']} observed={c['observed']} ({c['constraint']})")
    return 0 if passed else 1
