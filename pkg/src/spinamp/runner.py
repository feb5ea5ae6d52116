"""Declarative batch runs: config validation, grid sweeps, result files.

A config is a YAML (or JSON) mapping::

    kind: collective_gain
    name: gain-scaling
    grid:            # scalars or lists; the sweep is the cartesian product
      N: [20, 40, 60]
      phi: 0.01
    solver: {rtol: 1.0e-9, atol: 1.0e-12, points: 300, span: 3.0}
    output: {dir: out/gain, trajectories: false}

Each grid point runs independently; results are aggregated into
``results.csv`` sorted by the parameter tuple, so the bytes do not depend on
scheduling or worker count.  ``report.json`` adds scaling fits where they
apply and ``manifest.json`` records the config, code version and timing.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import __version__

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "KINDS",
    "load_config",
    "run_experiment",
    "sweep",
    "format_value",
    "resolve_workers",
]

WORKERS_ENV = "SPINAMP_WORKERS"


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# kind -> (parameter defaults in column order, result columns)
KINDS = {
    "collective_gain": (
        {"N": None, "Gamma": 1.0, "n_th": 0.0, "phi": 0.01},
        ("t_max", "G_max", "sigma2_add", "sigma2_heuristic", "trace_drift", "casimir_drift")),
    "finite_temperature": (
        {"N": None, "n_th": None, "Gamma": 1.0, "phi": 0.01},
        ("t_max", "G_max", "G_max_zero_T", "G_ratio", "trace_drift")),
    "local_dissipation": (
        {"N": None, "C_phi": math.inf, "C_rel": math.inf, "Gamma": 1.0, "phi": 0.01},
        ("t_max", "G_max", "G_max_ideal", "G_ratio", "trace_drift")),
    "coherent_tc": (
        {"N": None, "g": 1.0, "phi": 0.01, "engine": "exact"},
        ("t_max", "G_max", "norm_drift", "excitation_drift")),
    "cavity_qme": (
        {"N": None, "g": None, "kappa": None, "Delta": 0.0, "phi": 0.05, "fock_cutoff": 0},
        ("t_max", "G_max", "Gamma_eff", "G_max_adiabatic", "max_rel_dev", "photons_max")),
    "oat_sweep": (
        {"N": None, "eta": None, "channel": "phi", "engine": "meanfield", "g": 1.0,
         "kappa": 1.0},
        ("chi", "Gamma_coll", "gamma_phi", "gamma_rel", "Delta", "tau1", "G_sub",
         "G_ideal", "ratio")),
    "decoupling": (
        {"N": None, "sigma_omega": None, "T": None, "g": 1.0, "seed": 0, "cycles": 1,
         "input_photons": 1, "fock_cutoff": 0},
        ("distance",)),
    "sensitivity": (
        {"N": None, "xi_det": None, "c0": 0.42, "sigma2_add": 1.3},
        ("G", "dphi2_amplified", "dphi2_unamplified", "ratio_to_sql", "N_crossover")),
}


def _schema():
    text = resources.files("spinamp").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description."""

    kind: str
    grid: dict
    name: str = "run"
    rtol: float = 1e-9
    atol: float = 1e-12
    points: int = 300
    span: float = 3.0
    out_dir: str = "out"
    trajectories: bool = False
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        try:
            jsonschema.validate(d, _schema())
        except jsonschema.ValidationError as e:
            path = ".".join(str(p) for p in e.absolute_path)
            raise ConfigError(e.message, path) from None
        kind = d["kind"]
        defaults, _ = KINDS[kind]
        grid = {}
        for key, val in d["grid"].items():
            if key not in defaults:
                raise ConfigError(f"unknown parameter for kind {kind!r}", f"grid.{key}")
            vals = val if isinstance(val, list) else [val]
            grid[key] = vals
        for key, dflt in defaults.items():
            if key not in grid:
                if dflt is None:
                    raise ConfigError("required parameter missing", f"grid.{key}")
                grid[key] = [dflt]
        solver = d.get("solver", {})
        out = d.get("output", {})
        return cls(kind=kind, grid=grid, name=d.get("name", kind),
                   rtol=float(solver.get("rtol", 1e-9)),
                   atol=float(solver.get("atol", 1e-12)),
                   points=int(solver.get("points", 300)),
                   span=float(solver.get("span", 3.0)),
                   out_dir=out.get("dir", "out"),
                   trajectories=bool(out.get("trajectories", False)), raw=d)

    @property
    def param_names(self) -> tuple:
        return tuple(KINDS[self.kind][0])

    @property
    def result_names(self) -> tuple:
        return KINDS[self.kind][1]

    def points_list(self) -> list:
        """All grid points as dicts, sorted by parameter tuple."""
        names = self.param_names
        combos = itertools.product(*(self.grid[n] for n in names))
        pts = [dict(zip(names, c)) for c in combos]
        return sorted(pts, key=lambda p: tuple(_sort_key(p[n]) for n in names))

    def with_tolerances(self, rtol=None, atol=None) -> "ExperimentConfig":
        d = dict(self.raw)
        solver = dict(d.get("solver", {}))
        if rtol is not None:
            solver["rtol"] = rtol
        if atol is not None:
            solver["atol"] = atol
        d["solver"] = solver
        return ExperimentConfig.from_dict(d)


def _sort_key(v):
    if isinstance(v, bool):
        return (0, int(v), "")
    if isinstance(v, (int, float)):
        return (0, float(v), "")
    return (1, 0.0, str(v))


def load_config(path) -> ExperimentConfig:
    """Read and validate a YAML or JSON config file."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return ExperimentConfig.from_dict(data)


def format_value(v) -> str:
    """15 significant digits, '.' decimal separator, no locale."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".15g")
    return str(v)


# ---------------------------------------------------------------------------
# per-kind point evaluation


def _grid(scale, cfg):
    return np.linspace(0.0, cfg.span * scale, cfg.points)


def _collective_scale(N, Gamma, n_th=0.0):
    return max(math.log(N), 1.0) / (Gamma * N * (1 + 2 * n_th))


def _pm_gain(run, N, phi):
    from .dicke import coherent_spin_state
    from .sensing import gain_curve
    tp = run(coherent_spin_state(N, phi, np.pi / 2))
    tm = run(coherent_spin_state(N, -phi, np.pi / 2))
    return tp, tm, gain_curve(tp, tm, phi)


def _drift(x):
    x = np.asarray(x)
    return float(np.max(np.abs(x - x[0])))


def _run_collective(p, cfg):
    from .liouvillian import EnsembleParams, evolve_collective
    from .sensing import added_noise, heuristic_added_noise_bound
    N = int(p["N"])
    ens = EnsembleParams(N, Gamma=p["Gamma"], n_th=p["n_th"])
    grid = _grid(_collective_scale(N, p["Gamma"], p["n_th"]), cfg)
    tp, tm, gc = _pm_gain(lambda s: evolve_collective(ens, s, grid, rtol=cfg.rtol,
                                                      atol=cfg.atol), N, p["phi"])
    row = {"t_max": gc.t_max, "G_max": gc.G_max,
           "sigma2_add": added_noise(tp, gc, N),
           "sigma2_heuristic": heuristic_added_noise_bound(gc.G_max, N),
           "trace_drift": max(tp.max_trace_error(), tm.max_trace_error()),
           "casimir_drift": _drift(tp.extras["casimir"])}
    return row, tp


def _run_thermal(p, cfg):
    from .liouvillian import EnsembleParams, evolve_collective
    N = int(p["N"])
    out = []
    for n in (p["n_th"], 0.0):
        ens = EnsembleParams(N, Gamma=p["Gamma"], n_th=n)
        grid = _grid(_collective_scale(N, p["Gamma"], n), cfg)
        out.append(_pm_gain(lambda s: evolve_collective(ens, s, grid, rtol=cfg.rtol,
                                                        atol=cfg.atol), N, p["phi"]))
    (tp, tm, gc), (_, _, g0) = out
    row = {"t_max": gc.t_max, "G_max": gc.G_max, "G_max_zero_T": g0.G_max,
           "G_ratio": gc.G_max / g0.G_max,
           "trace_drift": max(tp.max_trace_error(), tm.max_trace_error())}
    return row, tp


def _run_local(p, cfg):
    from .liouvillian import EnsembleParams, evolve_collective, evolve_permutation_invariant
    N = int(p["N"])
    G = p["Gamma"]
    rate = lambda C: 0.0 if math.isinf(C) else N * G / C
    ens = EnsembleParams(N, Gamma=G, gamma_rel=rate(p["C_rel"]), gamma_phi=rate(p["C_phi"]))
    grid = _grid(_collective_scale(N, G), cfg)
    kw = dict(rtol=cfg.rtol, atol=cfg.atol)
    tp, tm, gc = _pm_gain(lambda s: evolve_permutation_invariant(ens, s, grid, **kw),
                          N, p["phi"])
    ideal = EnsembleParams(N, Gamma=G)
    _, _, g0 = _pm_gain(lambda s: evolve_collective(ideal, s, grid, **kw), N, p["phi"])
    row = {"t_max": gc.t_max, "G_max": gc.G_max, "G_max_ideal": g0.G_max,
           "G_ratio": gc.G_max / g0.G_max,
           "trace_drift": max(tp.max_trace_error(), tm.max_trace_error())}
    return row, tp


def _run_tc(p, cfg):
    N, g, phi = int(p["N"]), float(p["g"]), float(p["phi"])
    grid = _grid(max(math.log(math.sqrt(N)), 1.0) / (g * math.sqrt(N)), cfg)
    if p["engine"] == "exact":
        from .sensing import gain_curve
        from .tavis_cummings import evolve_tc_unitary
        tp = evolve_tc_unitary(g, N, phi, grid)
        tm = evolve_tc_unitary(g, N, -phi, grid)
        gc = gain_curve(tp, tm, phi)
        row = {"t_max": gc.t_max, "G_max": gc.G_max,
               "norm_drift": max(_drift(tp.extras["norm"]), _drift(tm.extras["norm"])),
               "excitation_drift": max(_drift(tp.extras["excitation"]),
                                       _drift(tm.extras["excitation"]))}
        return row, tp
    if p["engine"] == "cumulant":
        from .meanfield import coherent_constraints, integrate_coherent_cumulant
        tr = integrate_coherent_cumulant(g, N, phi, grid, rtol=cfg.rtol)
        t_max, G_max = tr.peak("Sy")
        spin, exc = coherent_constraints(tr)
        # relative drift of the two constants of motion
        row = {"t_max": t_max, "G_max": G_max,
               "norm_drift": _drift(spin) / abs(spin[0]),
               "excitation_drift": _drift(exc) / max(abs(exc[0]), 1.0)}
        return row, tr
    raise ValueError(f"unknown engine {p['engine']!r}")


def _run_cavity(p, cfg):
    from .liouvillian import CavityParams, EnsembleParams, evolve_cavity_qme, \
        evolve_collective
    N = int(p["N"])
    cav = CavityParams(float(p["g"]), float(p["kappa"]), float(p["Delta"]),
                       fock_cutoff=int(p["fock_cutoff"]) or None)
    spins = EnsembleParams(N, Gamma=0.0)
    Geff = cav.gamma_eff() if cav.kappa > 0 else 0.0
    scale = _collective_scale(N, Geff) if Geff > 0 else \
        max(math.log(math.sqrt(N)), 1.0) / (cav.g * math.sqrt(N))
    grid = _grid(scale, cfg)
    kw = dict(rtol=cfg.rtol, atol=cfg.atol)
    tp, tm, gc = _pm_gain(lambda s: evolve_cavity_qme(cav, spins, s, grid, **kw), N, p["phi"])
    row = {"t_max": gc.t_max, "G_max": gc.G_max, "Gamma_eff": Geff,
           "photons_max": float(np.max(tp.extras["photons"]))}
    if Geff > 0:
        ens = EnsembleParams(N, Gamma=Geff)
        ap, _, ga = _pm_gain(lambda s: evolve_collective(ens, s, grid, **kw), N, p["phi"])
        win = grid <= 2 * ga.t_max
        dev = np.abs(tp.sy[win] - ap.sy[win]) / np.max(np.abs(ap.sy[win]))
        row.update(G_max_adiabatic=ga.G_max, max_rel_dev=float(np.max(dev)))
    else:
        row.update(G_max_adiabatic=float("nan"), max_rel_dev=float("nan"))
    return row, tp


def _run_oat(p, cfg):
    from .oat import OATParams, _peak_grid, oat_gsub, optimize_detuning
    N = int(p["N"])
    tmpl = OATParams.from_cavity(N, p["g"], p["kappa"], 1.0)
    D, G, tau1, best = optimize_detuning(tmpl, float(p["eta"]), kind=p["channel"],
                                         g=p["g"], kappa=p["kappa"], engine=p["engine"])
    ideal = OATParams(N, 1.0)
    gi = oat_gsub(ideal, _peak_grid(ideal), engine=p["engine"]).G_max
    row = {"chi": best.chi, "Gamma_coll": best.Gamma_coll, "gamma_phi": best.gamma_phi,
           "gamma_rel": best.gamma_rel, "Delta": D, "tau1": tau1, "G_sub": G,
           "G_ideal": gi, "ratio": G / gi}
    return row, None


def _run_decoupling(p, cfg):
    from .tavis_cummings import DecouplingConfig, simulate_decoupling_sequence
    dc = DecouplingConfig.random(int(p["N"]), float(p["sigma_omega"]), float(p["T"]),
                                 g=float(p["g"]), seed=int(p["seed"]),
                                 cycles=int(p["cycles"]),
                                 input_photons=int(p["input_photons"]),
                                 fock_cutoff=int(p["fock_cutoff"]) or None)
    return {"distance": simulate_decoupling_sequence(dc)}, None


def _run_sensitivity(p, cfg):
    from .sensing import amplified_error
    N, xi, c0, s2 = float(p["N"]), float(p["xi_det"]), float(p["c0"]), float(p["sigma2_add"])
    G = c0 * math.sqrt(N)
    amp = float(amplified_error(N, xi * xi, s2, G))
    return {"G": G, "dphi2_amplified": amp, "dphi2_unamplified": (1 + xi * xi) / N,
            "ratio_to_sql": amp * N, "N_crossover": xi * xi / (c0 * c0)}, None


_RUNNERS = {
    "collective_gain": _run_collective,
    "finite_temperature": _run_thermal,
    "local_dissipation": _run_local,
    "coherent_tc": _run_tc,
    "cavity_qme": _run_cavity,
    "oat_sweep": _run_oat,
    "decoupling": _run_decoupling,
    "sensitivity": _run_sensitivity,
}


def _evaluate(args):
    cfg, index, params = args
    try:
        row, traj = _RUNNERS[cfg.kind](params, cfg)
        traj_file = ""
        if cfg.trajectories and traj is not None:
            tdir = Path(cfg.out_dir) / "trajectories"
            tdir.mkdir(parents=True, exist_ok=True)
            traj_file = f"trajectories/point_{index:04d}.csv"
            traj.to_csv(Path(cfg.out_dir) / traj_file)
        return index, row, "", traj_file
    except Exception as e:  # recorded per row
        return index, {}, f"point {index}: {type(e).__name__}: {e}", ""


def resolve_workers(workers=None) -> int:
    """Explicit value, else ``$SPINAMP_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else 1
    if int(workers) < 1:
        raise ConfigError("worker count must be >= 1", "workers")
    return int(workers)


def sweep(cfg: ExperimentConfig, workers=None):
    """Evaluate every grid point; returns rows in parameter-tuple order.

    Each row is ``(params, results, error, trajectory_file)``.
    """
    workers = resolve_workers(workers)
    pts = cfg.points_list()
    jobs = [(cfg, i, p) for i, p in enumerate(pts)]
    if workers == 1 or len(jobs) == 1:
        out = [_evaluate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            out = list(ex.map(_evaluate, jobs))
    out.sort(key=lambda r: r[0])
    return [(pts[i], row, err, tf) for i, row, err, tf in out]


def _write_csv(path, cfg, rows):
    header = list(cfg.param_names) + list(cfg.result_names) + ["error"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for params, res, err, _ in rows:
            vals = [format_value(params[k]) for k in cfg.param_names]
            vals += [format_value(res[k]) if k in res else "" for k in cfg.result_names]
            w.writerow(vals + [err])


def _fits(cfg, rows):
    from .fitting import fit_scaling
    ok = [(p, r) for p, r, e, _ in rows if not e]
    plans = {"collective_gain": [("G_max", "sqrtN"), ("t_max", "logN-over-N")],
             "coherent_tc": [("G_max", "sqrtN"), ("t_max", "logsqrtN-over-sqrtN")]}
    fits = {}
    for col, model in plans.get(cfg.kind, []):
        N = [p["N"] for p, _ in ok]
        if len(set(N)) != len(N) or len(N) < 4:
            continue
        fits[f"{col}:{model}"] = fit_scaling(N, [r[col] for _, r in ok], model).to_dict()
    return fits


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(x.item())
    return x


def run_experiment(cfg: ExperimentConfig, workers=None, out_dir=None) -> dict:
    """Run a config and write ``results.csv``, ``report.json``, ``manifest.json``.

    Returns a summary dict with ``n_points``, ``n_failed`` and the output
    paths.
    """
    if out_dir is not None:
        cfg = ExperimentConfig.from_dict({**cfg.raw, "output": {
            **cfg.raw.get("output", {}), "dir": str(out_dir)}})
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = sweep(cfg, workers)
    wall = time.perf_counter() - t0
    _write_csv(out / "results.csv", cfg, rows)
    n_failed = sum(1 for r in rows if r[2])
    report = {"kind": cfg.kind, "name": cfg.name, "n_points": len(rows),
              "n_failed": n_failed,
              "rows": [{**{k: _jsonable(v) for k, v in p.items()},
                        **{k: _jsonable(v) for k, v in r.items()}, "error": e}
                       for p, r, e, _ in rows]}
    try:
        report["fits"] = _fits(cfg, rows)
    except ValueError as e:
        report["fits"] = {"error": str(e)}
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    manifest = {"config": cfg.raw, "version": __version__,
                "python": platform.python_version(), "numpy": np.__version__,
                "wall_time_s": wall, "workers": resolve_workers(workers),
                "tolerances": {"rtol": cfg.rtol, "atol": cfg.atol},
                "points": [{"index": i, "params": {k: _jsonable(v) for k, v in p.items()},
                            "trajectory": tf, "error": e}
                           for i, (p, _, e, tf) in enumerate(rows)],
                "outputs": ["results.csv", "report.json"]}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return {"n_points": len(rows), "n_failed": n_failed, "out_dir": str(out),
            "results": str(out / "results.csv")}
