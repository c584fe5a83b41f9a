"""Config-driven experiment runner.

    semichaos run <config.yaml> [--output-root DIR]
    semichaos validate <config.yaml>
    semichaos list-experiments

Configs are flat YAML mappings with dotted keys (``params.beta: 8``). Every requested
output is written as one CSV or JSON-lines file per (output, N) pair next to a
``manifest.json``. ``SEMICHAOS_OUTPUT_ROOT`` overrides the output root.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import re
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import mpmath
import numpy as np
import yaml

from . import __version__
from .classical import (DickeParams, IntegrationAborted, KickedTopParams, dicke_point_from_energy,
                        poincare_section)
from .core import BlochAngles, PrecisionConfig, SingularCoordinatesError
from .fluctuations import propagate_dicke, propagate_kicked_top
from .lyapunov import benettin_spectrum, ks_rate, lyapunov_estimate
from .quantifiers import dicke_quantifiers, kicked_top_quantifiers
from .quantum_ed import (CutoffError, DickeEvolver, dicke_hamiltonian, dicke_initial_state,
                         evolve_and_entropy_dicke, kicked_top_ed_series)

log = logging.getLogger("semichaos")

OUTPUTS = ("trajectory", "poincare", "lyapunov", "entropy", "qfi", "squeezing", "otoc",
           "ed_compare")
MODEL_OUTPUTS = {
    "kicked_top": set(OUTPUTS) - {"poincare"},
    "dicke": set(OUTPUTS),
}
ENV_ROOT = "SEMICHAOS_OUTPUT_ROOT"

_PI_RE = re.compile(r"^\s*(-?[0-9.]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*$")


class ConfigError(ValueError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def parse_number(v):
    """Float from a YAML scalar; accepts 'pi', '3pi/4', '-pi/2', 'arccos(0.1)'."""
    if isinstance(v, bool):
        raise ValueError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    s = str(v).strip()
    m = _PI_RE.match(s)
    if m:
        a = m.group(1)
        coef = -1.0 if a == "-" else float(a) if a else 1.0
        return coef * np.pi / (float(m.group(2)) if m.group(2) else 1.0)
    m = re.match(r"^\s*arccos\(\s*(-?[0-9.eE+-]+)\s*\)\s*$", s)
    if m:
        return float(np.arccos(float(m.group(1))))
    return float(s)


@dataclass
class ExperimentConfig:
    name: str
    model: str
    params: dict
    initial_condition: dict
    N_list: list
    t_final: float
    precision: PrecisionConfig
    lyapunov: dict
    outputs: list
    output_dir: str
    format: str = "csv"
    sample_dt: float = 0.05
    ed: dict = field(default_factory=dict)
    description: str = ""
    raw: dict = field(default_factory=dict)

    def config_hash(self):
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    # model objects -----------------------------------------------------
    def model_params(self):
        p = self.params
        if self.model == "kicked_top":
            return KickedTopParams(parse_number(p.get("alpha", np.pi / 2)),
                                   parse_number(p.get("beta", 8.0)))
        return DickeParams(parse_number(p.get("omega", 1.0)), parse_number(p.get("omega0", 1.0)),
                           parse_number(p.get("gamma", 0.0)))

    def initial_angles(self):
        ic = self.initial_condition
        if "cos_theta0" in ic:
            theta = float(np.arccos(parse_number(ic["cos_theta0"])))
        else:
            theta = parse_number(ic["theta0"])
        return BlochAngles(theta, parse_number(ic.get("phi0", 0.0)))

    def initial_state(self):
        a = self.initial_angles()
        if self.model == "kicked_top":
            return a
        ic = self.initial_condition
        return dicke_point_from_energy(parse_number(ic["E"]), a, self.model_params())


def unflatten(flat):
    out = {}
    for key, val in flat.items():
        node = out
        parts = str(key).split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError([f"key {key!r} collides with a scalar entry"])
        node[parts[-1]] = val
    return out


def load_config(path):
    path = Path(path)
    with open(path) as fh:
        flat = yaml.safe_load(fh) or {}
    if not isinstance(flat, dict):
        raise ConfigError(["config must be a mapping of dotted keys"])
    return build_config(flat, name=path.stem)


def build_config(flat, name="experiment"):
    errors = []
    nested = unflatten(flat)
    model = nested.get("model")
    if model not in MODEL_OUTPUTS:
        errors.append(f"model must be one of {sorted(MODEL_OUTPUTS)}, got {model!r}")
    outputs = nested.get("outputs") or []
    if not isinstance(outputs, list) or not outputs:
        errors.append("outputs must be a non-empty list")
        outputs = []
    bad = [o for o in outputs if o not in OUTPUTS]
    if bad:
        errors.append(f"unknown outputs {bad}")
    if model in MODEL_OUTPUTS:
        unsupported = [o for o in outputs if o in OUTPUTS and o not in MODEL_OUTPUTS[model]]
        if unsupported:
            errors.append(f"outputs {unsupported} are not available for model {model}")
    fmt = nested.get("format", "csv")
    if fmt not in ("csv", "jsonl"):
        errors.append(f"format must be csv or jsonl, got {fmt!r}")
    ic = nested.get("initial", {})
    if not isinstance(ic, dict) or not ({"theta0", "cos_theta0"} & set(ic)):
        errors.append("initial.theta0 or initial.cos_theta0 is required")
    if model == "dicke" and "E" not in ic:
        errors.append("initial.E is required for the dicke model")
    lyap = nested.get("lyapunov", {}) or {}
    if "lyapunov" in outputs:
        for k in ("K", "s", "n_steps", "rng_seed"):
            if k not in lyap:
                errors.append(f"lyapunov.{k} is required when the lyapunov output is requested")
    N_list = nested.get("N_list", []) or []
    if "ed_compare" in outputs and not N_list:
        errors.append("N_list must be non-empty for ed_compare")
    if any((not isinstance(n, int)) or n < 1 for n in N_list):
        errors.append("N_list entries must be positive integers")
    if "t_final" not in nested:
        errors.append("t_final is required")
    prec = nested.get("precision", {}) or {}
    try:
        if prec.get("mode", "machine") == "extended":
            precision = PrecisionConfig.extended(int(prec.get("digits", 400)))
        elif prec.get("mode", "machine") == "machine":
            precision = PrecisionConfig()
        else:
            raise ValueError(f"unknown precision mode {prec.get('mode')!r}")
    except ValueError as exc:
        errors.append(str(exc))
        precision = PrecisionConfig()
    numeric = []
    for section in ("params", "initial"):
        for k, v in (nested.get(section) or {}).items():
            try:
                parse_number(v)
            except (TypeError, ValueError):
                numeric.append(f"{section}.{k}")
    if numeric:
        errors.append(f"non-numeric values for {numeric}")
    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(
        name=str(nested.get("name", name)),
        model=model,
        params=nested.get("params", {}) or {},
        initial_condition=ic,
        N_list=list(N_list),
        t_final=float(nested["t_final"]),
        precision=precision,
        lyapunov=lyap,
        outputs=list(outputs),
        output_dir=str(nested.get("output_dir", name)),
        format=fmt,
        sample_dt=float(nested.get("sample_dt", 0.05)),
        ed=nested.get("ed", {}) or {},
        description=str(nested.get("description", "")),
        raw=flat,
    )
    try:
        cfg.model_params()
        cfg.initial_state()
    except ValueError as exc:
        raise ConfigError([f"initial condition: {exc}"]) from exc
    return cfg


# serialisation -------------------------------------------------------------

def _fmt(v, digits):
    if isinstance(v, mpmath.mpf):
        return mpmath.nstr(v, digits, strip_zeros=False, min_fixed=1, max_fixed=0)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    return float(format(float(v), ".17g"))


def emit_series(name, columns, rows, fmt="csv", directory=".", digits=17):
    """Write a rectangular table; mpf entries become decimal strings with `digits` digits."""
    rows = [list(r) for r in rows]
    if any(len(r) != len(columns) for r in rows):
        raise ValueError(f"{name}: rows must have {len(columns)} entries")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.{fmt}"
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for r in rows:
                w.writerow([_csv_cell(v, digits) for v in r])
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for r in rows:
                fh.write(json.dumps({c: _fmt(v, digits) for c, v in zip(columns, r)}) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def _csv_cell(v, digits):
    x = _fmt(v, digits)
    if isinstance(x, float):
        return format(x, ".17g")
    return x


def read_series(path):
    """Inverse of emit_series (numbers come back as float, decimal strings as str)."""
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            cols = next(r)
            return cols, [list(row) for row in r]
    rows = [json.loads(line) for line in open(path)]
    cols = list(rows[0]) if rows else []
    return cols, [[row[c] for c in cols] for row in rows]


def _table(cols: dict):
    names = list(cols)
    n = len(next(iter(cols.values())))
    return names, [[cols[c][i] for c in names] for i in range(n)]


# jobs ----------------------------------------------------------------------

def _semiclassical(cfg: ExperimentConfig):
    p = cfg.model_params()
    x0 = cfg.initial_state()
    if cfg.model == "kicked_top":
        run = propagate_kicked_top(x0, p, int(cfg.t_final), cfg.precision)
        q = kicked_top_quantifiers(run)
        aborted = run.aborted_at
    else:
        try:
            run = propagate_dicke(x0, p, cfg.t_final, sample_dt=cfg.sample_dt)
            aborted = None
        except IntegrationAborted as exc:
            from .fluctuations import DickeRun
            run = DickeRun(exc.trajectory, exc.trajectory.tangent)
            aborted = float(exc.trajectory.times[-1])
        q = dicke_quantifiers(run)
    return run, q, aborted


def _trajectory_table(cfg, run):
    traj = run.trajectory
    X = np.asarray(traj.states, dtype=object if cfg.precision.is_extended else float)
    cols = {"t": traj.times}
    if cfg.model == "kicked_top":
        cols["theta"], cols["phi"] = X[:, 0], X[:, 1]
    else:
        cols.update(Q=X[:, 0], P=X[:, 1], phi=X[:, 2], theta=X[:, 3])
        if traj.energy is not None:
            cols["energy"] = traj.energy
    return cols


def _ed_kicked_top(cfg, N, sc):
    ic = cfg.initial_angles()
    p = cfg.model_params()
    n = int(cfg.ed.get("n_kicks", min(cfg.t_final, 40)))
    ed = kicked_top_ed_series(N, p.alpha, p.beta, ic.theta, ic.phi, n,
                              otoc_kicks=cfg.ed.get("otoc_kicks"))
    m = min(n + 1, len(sc.times))
    return {"t": ed.times[:m], "S_A_ed": ed.S_A[:m], "S_A_sc": sc.S_A[:m],
            "f_Q_ed": ed.f_Q[:m], "f_Q_sc": sc.f_Q[:m], "c_ed": ed.c[:m], "c_sc": sc.c_ab[:m]}


def _ed_dicke(cfg, N, sc):
    a = cfg.initial_angles()
    x0 = cfg.initial_state()
    delta = float(cfg.ed.get("delta", 8))
    N_cut = int(round(delta * N))
    t_ed = float(cfg.ed.get("t_final", min(cfg.t_final, 10.0)))
    m = np.asarray(sc.times) <= t_ed + 1e-12
    times = np.asarray(sc.times)[m]
    H = dicke_hamiltonian(N, N_cut, cfg.model_params())
    st = dicke_initial_state(a.theta, a.phi, x0.Q, x0.P, N, N_cut)
    out = evolve_and_entropy_dicke(st, H, times, evolver=DickeEvolver(H, N, N_cut), with_qfi=True)
    return {"t": times, "S_A_ed": out["S_A"], "S_A_sc": sc.S_A[m], "f_Q_ed": out["f_Q"],
            "f_Q_sc": sc.f_Q[m], "boson_tail": out["tail"]}


def run_experiment(cfg: ExperimentConfig, root=None):
    """Execute every requested output; returns the manifest dict."""
    root = Path(root or os.environ.get(ENV_ROOT, "."))
    out_dir = root / cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = cfg.precision.digits if cfg.precision.is_extended else 17
    timings, aborts, files = {}, [], []

    def emit(name, cols):
        names, rows = _table(cols)
        files.append(str(emit_series(name, names, rows, cfg.format, out_dir, digits).name))

    need_sc = set(cfg.outputs) & {"trajectory", "poincare", "entropy", "qfi", "squeezing",
                                  "otoc", "ed_compare"}
    sc = run = None
    if need_sc:
        t0 = time.perf_counter()
        run, sc, aborted = _semiclassical(cfg)
        timings["semiclassical"] = time.perf_counter() - t0
        if aborted is not None:
            aborts.append({"job": "semiclassical", "reason": "pole guard", "at": aborted})
    if "trajectory" in cfg.outputs:
        emit("trajectory", _trajectory_table(cfg, run))
    if "poincare" in cfg.outputs:
        pts = poincare_section(run.trajectory, cfg.model_params())
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        emit("poincare", {"phi": pts[:, 0], "cos_theta": pts[:, 1]})
    if "entropy" in cfg.outputs:
        cols = {"t": sc.times, "S_A": sc.S_A, "S2_A": sc.S2_A}
        if cfg.model == "kicked_top" and cfg.precision.is_extended:
            with cfg.precision.context():
                cols["det_2G"] = [4 * (G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]) for G in run.G]
        emit("entropy", cols)
    if "qfi" in cfg.outputs:
        cols = {"t": sc.times, "f_Q": sc.f_Q}
        if "f_Q_all_quadratures" in sc.extra:
            cols["f_Q_all_quadratures"] = sc.extra["f_Q_all_quadratures"]
        emit("qfi", cols)
    if "squeezing" in cfg.outputs:
        emit("squeezing", {"t": sc.times, "xi2": sc.xi2})
    if "otoc" in cfg.outputs:
        emit("otoc", {"t": sc.times, "c_zz": sc.c_ab})
    if "lyapunov" in cfg.outputs:
        t0 = time.perf_counter()
        ly = cfg.lyapunov
        try:
            series = benettin_spectrum(cfg.model, cfg.initial_state(), int(ly["K"]),
                                       parse_number(ly["s"]), int(ly["n_steps"]),
                                       cfg.model_params(), int(ly["rng_seed"]))
            cols = {"r": series.r_values}
            for k in range(series.K):
                cols[f"lambda_{k + 1}"] = series.exponents[:, k]
            emit("lyapunov", cols)
            try:
                lam, unc = lyapunov_estimate(series)
                summary = {"lambda": lam.tolist(), "uncertainty": unc.tolist(),
                           "ks_rate": ks_rate(lam, unc), "rank_events": len(series.events)}
            except ValueError as exc:
                summary = {"error": str(exc)}
            (out_dir / "lyapunov_summary.json").write_text(json.dumps(summary, indent=2))
            files.append("lyapunov_summary.json")
        except (SingularCoordinatesError, IntegrationAborted) as exc:
            aborts.append({"job": "lyapunov", "reason": str(exc)})
        timings["lyapunov"] = time.perf_counter() - t0
    if "ed_compare" in cfg.outputs:
        for N in cfg.N_list:
            t0 = time.perf_counter()
            try:
                cols = _ed_kicked_top(cfg, N, sc) if cfg.model == "kicked_top" else \
                    _ed_dicke(cfg, N, sc)
                emit(f"ed_compare_N{N}", cols)
            except (CutoffError, MemoryError) as exc:
                aborts.append({"job": f"ed_compare_N{N}", "reason": str(exc)})
            timings[f"ed_compare_N{N}"] = time.perf_counter() - t0
    manifest = {
        "experiment": cfg.name,
        "config_hash": cfg.config_hash(),
        "seed": cfg.lyapunov.get("rng_seed"),
        "precision": {"mode": cfg.precision.mode, "digits": cfg.precision.digits},
        "versions": _versions(),
        "timings": timings,
        "aborts": aborts,
        "files": files,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    return manifest


def _versions():
    import numba
    import scipy
    return {"semichaos": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "mpmath": mpmath.__version__, "numba": numba.__version__,
            "python": platform.python_version()}


def shipped_experiments():
    pkg = resources.files("semichaos") / "experiments"
    return sorted((p for p in pkg.iterdir() if p.name.endswith(".yaml")), key=lambda p: p.name)


def _resolve(path):
    p = Path(path)
    if p.exists():
        return p
    for q in shipped_experiments():
        if q.name in (path, f"{path}.yaml"):
            return Path(str(q))
    return p


def _error_record(kind, errors):
    json.dump({"status": "error", "kind": kind, "errors": errors}, sys.stderr)
    sys.stderr.write("\n")


def main(argv=None):
    ap = argparse.ArgumentParser(prog="semichaos", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--output-root", default=None)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    sub.add_parser("list-experiments", help="list the shipped experiment configs")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.cmd == "list-experiments":
        for p in shipped_experiments():
            desc = (yaml.safe_load(p.read_text()) or {}).get("description", "")
            print(f"{p.name[:-5]:28s} {desc}")
        return 0
    path = _resolve(args.config)
    try:
        cfg = load_config(path)
    except FileNotFoundError:
        _error_record("io", [f"no such config: {args.config}"])
        return 2
    except (ConfigError, yaml.YAMLError) as exc:
        _error_record("validation", getattr(exc, "errors", [str(exc)]))
        return 2
    if args.cmd == "validate":
        print(json.dumps({"status": "ok", "experiment": cfg.name, "config_hash": cfg.config_hash()}))
        return 0
    manifest = run_experiment(cfg, args.output_root)
    print(json.dumps({"status": "ok", "files": manifest["files"], "aborts": manifest["aborts"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
