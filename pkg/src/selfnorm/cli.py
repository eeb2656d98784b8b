"""Command-line front end.

Configuration is a YAML mapping::

    model:
      kind: iid            # or "ma"
      alpha: 0.8
      p: 1.0
      scale: 1.0
      coeffs: [1.0, 0.5]   # ma only
    n: 10000
    reps: 2000
    seed: 0
    functionals: [selfnorm_at_1]
    limit:   {n_points: 10000, u_min: 0.01, n_mc_cluster: 100000, paths: 1,
              sensitivity_samples: 2000}
    normalization: {n_mc: 2000000}
    simulate: {paths: 1}
    ecf:     {samples: 20000, n_points: 1000, z_max: 5.0, z_step: 0.25}
    diagnostics: {u_list: [0.5, 0.25, 0.1], delta: 0.5, reps: 200, n: 10000}

Every key except ``model`` is optional. The parsed configuration, with
defaults filled in and the effective seed applied, is serialized as sorted
compact JSON; its SHA-256 is the config digest recorded in ``manifest.json``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np
import yaml

from . import __version__
from .limit_sim import (build_limit_V, build_limit_W, sample_limit_terminals, sample_poisson_series,
                        truncation_variance)
from .m1_metric import d_m1, d_m1_exact
from .models import IID, MA, ModelSpec, norm_seq, sample_path, write_path_csv
from .paths import read_cadlag_csv, write_cadlag_csv
from .tail_cluster import build_cluster_law
from .triples import triple_V, triple_W
from .verify import (FUNCTIONALS, ExperimentConfig, ecf_compare, fclt_experiment, karamata_check,
                     ks_two_sample, small_jump_diagnostic)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
THREADS_ENV = "SELFNORM_THREADS"

DEFAULTS = {
    "n": 10_000,
    "reps": 2000,
    "seed": 0,
    "functionals": ["selfnorm_at_1"],
    "limit": {"n_points": 10_000, "u_min": 0.01, "n_mc_cluster": 100_000, "paths": 1,
              "sensitivity_samples": 2000},
    "normalization": {"n_mc": 2_000_000},
    "simulate": {"paths": 1},
    "ecf": {"samples": 20_000, "n_points": 1000, "z_max": 5.0, "z_step": 0.25},
    "diagnostics": {"u_list": [0.5, 0.25, 0.1], "delta": 0.5, "reps": 200, "n": 10_000},
}


class ConfigError(ValueError):
    def __init__(self, field: str, msg: str):
        super().__init__(f"config field '{field}': {msg}")
        self.field = field


# configuration

def _number(d, key, path, kind=float, lo=None, hi=None, lo_open=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(path, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(path, "must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {v}")
    return v


def _section(raw, name):
    sec = raw.get(name, {}) or {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected a mapping")
    unknown = set(sec) - set(DEFAULTS[name])
    if unknown:
        raise ConfigError(f"{name}.{sorted(unknown)[0]}", "unknown key")
    return {**DEFAULTS[name], **sec}


def parse_config(raw, seed: int | None = None) -> dict:
    """Validate a raw mapping and return the canonical configuration."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    allowed = set(DEFAULTS) | {"model"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    m = raw.get("model")
    if not isinstance(m, dict):
        raise ConfigError("model", "required mapping is missing")
    kind = m.get("kind", IID)
    if kind not in (IID, MA):
        raise ConfigError("model.kind", f"must be '{IID}' or '{MA}', got {kind!r}")
    if "alpha" not in m:
        raise ConfigError("model.alpha", "missing")
    model = {
        "kind": kind,
        "alpha": _number(m, "alpha", "model.alpha"),
        "p": _number({"p": m.get("p", 1.0)}, "p", "model.p", lo=0.0, hi=1.0),
        "scale": _number({"s": m.get("scale", 1.0)}, "s", "model.scale", lo=0.0, lo_open=True),
    }
    if not 0.0 < model["alpha"] < 2.0:
        raise ConfigError("model.alpha", f"must lie in (0, 2), got {model['alpha']}")
    if kind == MA:
        coeffs = m.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError("model.coeffs", "ma model needs a nonempty list")
        model["coeffs"] = [_number({"c": c}, "c", "model.coeffs") for c in coeffs]
        if not any(coeffs):
            raise ConfigError("model.coeffs", "at least one coefficient must be nonzero")
    else:
        model["coeffs"] = [1.0]

    cfg = {"model": model}
    full = {**DEFAULTS, **{k: v for k, v in raw.items() if k in DEFAULTS}}
    cfg["n"] = _number(full, "n", "n", int, lo=1)
    cfg["reps"] = _number(full, "reps", "reps", int, lo=2)
    s = full["seed"] if seed is None else seed
    cfg["seed"] = _number({"seed": s}, "seed", "seed", int, lo=0, hi=2**64 - 1)
    fs = full["functionals"]
    if not isinstance(fs, list) or not fs or any(f not in FUNCTIONALS for f in fs):
        raise ConfigError("functionals", f"nonempty subset of {list(FUNCTIONALS)} required")
    cfg["functionals"] = list(dict.fromkeys(fs))

    lim = _section(raw, "limit")
    cfg["limit"] = {
        "n_points": _number(lim, "n_points", "limit.n_points", int, lo=1),
        "u_min": _number(lim, "u_min", "limit.u_min", lo=0.0, hi=1.0, lo_open=True),
        "n_mc_cluster": _number(lim, "n_mc_cluster", "limit.n_mc_cluster", int, lo=100),
        "paths": _number(lim, "paths", "limit.paths", int, lo=0),
        "sensitivity_samples": _number(lim, "sensitivity_samples", "limit.sensitivity_samples", int, lo=2),
    }
    nm = _section(raw, "normalization")
    cfg["normalization"] = {"n_mc": _number(nm, "n_mc", "normalization.n_mc", int, lo=1000)}
    sim = _section(raw, "simulate")
    cfg["simulate"] = {"paths": _number(sim, "paths", "simulate.paths", int, lo=1)}
    ecf = _section(raw, "ecf")
    cfg["ecf"] = {
        "samples": _number(ecf, "samples", "ecf.samples", int, lo=1),
        "n_points": _number(ecf, "n_points", "ecf.n_points", int, lo=1),
        "z_max": _number(ecf, "z_max", "ecf.z_max", lo=0.0, lo_open=True),
        "z_step": _number(ecf, "z_step", "ecf.z_step", lo=0.0, lo_open=True),
    }
    dg = _section(raw, "diagnostics")
    u_list = dg["u_list"]
    if not isinstance(u_list, list) or not u_list:
        raise ConfigError("diagnostics.u_list", "expected a nonempty list")
    cfg["diagnostics"] = {
        "u_list": [_number({"u": u}, "u", "diagnostics.u_list", lo=0.0, lo_open=True) for u in u_list],
        "delta": _number(dg, "delta", "diagnostics.delta", lo=0.0, lo_open=True),
        "reps": _number(dg, "reps", "diagnostics.reps", int, lo=1),
        "n": _number(dg, "n", "diagnostics.n", int, lo=1),
    }
    return cfg


def load_config(path, seed: int | None = None) -> dict:
    with open(path) as fh:
        text = fh.read()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML ({exc})") from None
    return parse_config(raw, seed)


def config_digest(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def model_from_config(cfg: dict) -> ModelSpec:
    m = cfg["model"]
    if m["kind"] == MA:
        return ModelSpec.ma(m["coeffs"], m["alpha"], m["p"], m["scale"])
    return ModelSpec.iid(m["alpha"], m["p"], m["scale"])


# output

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


class Run:
    """Single writer for one invocation; keeps ``manifest.json`` current."""

    def __init__(self, out_dir, command, cfg, seed):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.manifest = {
            "command": command,
            "tool_version": __version__,
            "config_digest": config_digest(cfg) if cfg is not None else None,
            "seed": seed,
            "started": _now(),
            "finished": None,
            "status": "running",
            "outputs": [],
        }
        self._flush()

    def path(self, name):
        self.manifest["outputs"].append(name)
        self._flush()
        return os.path.join(self.out_dir, name)

    def write_json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, sort_keys=True, indent=2)
            fh.write("\n")

    def write_columns(self, name, columns: dict):
        keys = list(columns)
        rows = zip(*(columns[k] for k in keys))
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(keys)
            for r in rows:
                w.writerow([repr(float(v)) for v in r])

    def finish(self, status):
        self.manifest["finished"] = _now()
        self.manifest["status"] = status
        self._flush()

    def _flush(self):
        tmp = os.path.join(self.out_dir, "manifest.json.tmp")
        with open(tmp, "w") as fh:
            json.dump(self.manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, os.path.join(self.out_dir, "manifest.json"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# subcommands

def _seeds(cfg):
    return np.random.SeedSequence(cfg["seed"]).spawn(4)


def cmd_simulate(cfg, run, threads):
    model = model_from_config(cfg)
    s_bn, s_paths, _, _ = _seeds(cfg)
    ns = norm_seq(model, cfg["n"], n_mc=cfg["normalization"]["n_mc"], seed=s_bn)
    run.write_json("norm_seq.json", _jsonable(ns.to_dict()))
    for k, ss in enumerate(s_paths.spawn(cfg["simulate"]["paths"])):
        write_path_csv(run.path(f"path_{k:03d}.csv"), sample_path(model, cfg["n"], np.random.default_rng(ss)))
    return EXIT_OK


def _limit_settings(cfg, halve):
    n_points, u_min = cfg["limit"]["n_points"], cfg["limit"]["u_min"]
    if halve:
        n_points, u_min = 2 * n_points, u_min / 2.0
    return n_points, u_min


def cmd_limit(cfg, run, threads, halve_truncation=False):
    model = model_from_config(cfg)
    alpha = model.alpha
    p, q = model.tail_balance
    _, _, s_cluster, s_lim = _seeds(cfg)
    cl = build_cluster_law(model, np.random.default_rng(s_cluster), cfg["limit"]["n_mc_cluster"])
    cc = cl.summary
    triples = {
        "theta": cl.theta,
        "theta_stderr": cl.theta_stderr,
        "p": p,
        "q": q,
        "cluster_constants": cc.to_dict(),
        "V": triple_V(cl.theta, alpha, p, q, cc).to_dict(),
    }
    triples["W"] = triple_W(cl.theta, alpha, cc.m2).to_dict()
    run.write_json("triples.json", _jsonable(triples))

    n_points, u_min = _limit_settings(cfg, halve_truncation)
    s_paths, s_base, s_half = s_lim.spawn(3)
    trunc = {"n_points": n_points, "u_min": u_min if alpha >= 1 else None,
             "halved": halve_truncation, "paths": []}
    for k, ss in enumerate(s_paths.spawn(cfg["limit"]["paths"])):
        rng = np.random.default_rng(ss)
        series = sample_poisson_series(cl.theta, alpha, cl, n_points, rng,
                                       min_magnitude=u_min / 2 if alpha >= 1 else None)
        V = build_limit_V(series, alpha, p, q, u_min)
        W = build_limit_W(series)
        write_cadlag_csv(run.path(f"limit_V_{k:03d}.csv"), V)
        write_cadlag_csv(run.path(f"limit_W_{k:03d}.csv"), W)
        trunc["paths"].append({"smallest_magnitude": series.smallest_magnitude,
                               "n_points": series.n_points, "V": V.meta, "W": W.meta})
    if halve_truncation:
        m = cfg["limit"]["sensitivity_samples"]
        base_np, base_u = _limit_settings(cfg, False)
        v0, _ = sample_limit_terminals(cl, alpha, p, q, m, np.random.default_rng(s_base), base_np, base_u)
        v1, _ = sample_limit_terminals(cl, alpha, p, q, m, np.random.default_rng(s_half), n_points, u_min)
        ks = ks_two_sample(v0, v1)
        trunc["sensitivity"] = {
            "samples": m,
            "base": {"n_points": base_np, "u_min": base_u if alpha >= 1 else None,
                     "median": float(np.median(v0))},
            "halved": {"n_points": n_points, "u_min": u_min if alpha >= 1 else None,
                       "median": float(np.median(v1))},
            "ks": ks.to_dict(),
        }
    run.write_json("truncation.json", _jsonable(trunc))
    return EXIT_OK


def _experiment_config(cfg, threads):
    return ExperimentConfig(
        model=model_from_config(cfg), n=cfg["n"], reps=cfg["reps"], seed=cfg["seed"],
        functionals=tuple(cfg["functionals"]), u_list=tuple(cfg["diagnostics"]["u_list"]),
        delta=cfg["diagnostics"]["delta"], n_points=cfg["limit"]["n_points"],
        u_min=cfg["limit"]["u_min"], n_mc_cluster=cfg["limit"]["n_mc_cluster"],
        n_mc_bn=cfg["normalization"]["n_mc"], threads=threads)


def _diagnostics(cfg, model, ns_n=None):
    d = cfg["diagnostics"]
    ss = np.random.SeedSequence([cfg["seed"], 1])
    probs = small_jump_diagnostic(model, d["n"], d["u_list"], d["delta"], d["reps"],
                                  np.random.default_rng(ss), n_mc=cfg["normalization"]["n_mc"])
    out = {"small_jump": {"n": d["n"], "delta": d["delta"], "reps": d["reps"],
                          "rows": [{"u": u, "probability": probs[u]} for u in d["u_list"]]}}
    if model.kind == IID:
        rows = []
        for u in d["u_list"]:
            if u <= 1.0:
                emp, lim, rel = karamata_check(model, d["n"], u)
                rows.append({"u": u, "empirical": emp, "limit": lim, "rel_error": rel})
        out["karamata"] = {"n": d["n"], "rows": rows}
    else:
        out["karamata"] = None
    return out


def cmd_verify(cfg, run, threads, inject_drift=0.0, diagnostics=False):
    ec = _experiment_config(cfg, threads)
    model = ec.model
    alpha = model.alpha
    p, q = model.tail_balance
    # same stream fclt_experiment would use for its own cluster law
    s_cluster = np.random.SeedSequence(cfg["seed"]).spawn(5)[1]
    cl = build_cluster_law(model, np.random.default_rng(s_cluster), ec.n_mc_cluster)
    report = fclt_experiment(ec, cluster=cl)

    # the limit sample of V(1) against its characteristic function
    tv = triple_V(cl.theta, alpha, p, q, cl.summary)
    if inject_drift:
        tv = replace(tv, drift=tv.drift + inject_drift)
    e = cfg["ecf"]
    v, _ = sample_limit_terminals(cl, alpha, p, q, e["samples"],
                                  np.random.default_rng(np.random.SeedSequence([cfg["seed"], 2])),
                                  e["n_points"], ec.u_min)
    z = np.arange(-e["z_max"], e["z_max"] + 0.5 * e["z_step"], e["z_step"])
    if alpha >= 1.0:
        # per-atom truncation; theta E[sum_j |eta_j|**alpha] = 1
        trunc_var = truncation_variance(alpha, ec.u_min)
    else:
        # whole clusters beyond the last retained point P_n ~ (n_points/theta)**(-1/alpha)
        pn = (e["n_points"] / cl.theta) ** (-1.0 / alpha)
        eta = cl.sample(10_000, np.random.default_rng(np.random.SeedSequence([cfg["seed"], 3])))
        trunc_var = truncation_variance(alpha, pn, cl.theta * float(np.mean(eta.sum(axis=1) ** 2)))
    ecf = ecf_compare(v, tv, z, trunc_var)
    ecf_pass = ecf.max_excess < 0.02 + ecf.noise_floor
    report.extra["ecf"] = {**ecf.to_dict(), "samples": e["samples"], "n_points": e["n_points"],
                           "z_max": e["z_max"], "z_step": e["z_step"], "injected_drift": inject_drift,
                           "truncation_variance": trunc_var,
                           "threshold": 0.02 + ecf.noise_floor}
    report.flags["pass_ecf"] = bool(ecf_pass)
    if diagnostics:
        report.extra["diagnostics"] = _diagnostics(cfg, model)

    run.write_json("report.json", _jsonable(report.to_dict()))
    run.write_columns("samples.csv", report.samples)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_diagnostics(cfg, run, threads):
    run.write_json("diagnostics.json", _jsonable(_diagnostics(cfg, model_from_config(cfg))))
    return EXIT_OK


def cmd_m1dist(path_a, path_b, resolution=None, tol=1e-3, exact=False):
    x, y = read_cadlag_csv(path_a), read_cadlag_csv(path_b)
    if x.dim != y.dim:
        raise ConfigError("paths", f"dimension mismatch {x.dim} vs {y.dim}")
    if x.dim != 1:
        raise ConfigError("paths", "m1dist compares one-dimensional paths")
    if exact:
        rep = {"value": d_m1_exact(x, y), "method": "exact"}
    else:
        res = d_m1(x, y, resolution=resolution, tol=tol, report=True)
        rep = {**res.to_dict(), "method": "discrete", "tol": tol}
    return rep


# entry point

def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--threads", type=int,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")

    ap = argparse.ArgumentParser(prog="selfnorm", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="finite-n sample paths and normalizing constants")
    lp = sub.add_parser("limit", parents=[common], help="limit paths, triples and truncation metadata")
    lp.add_argument("--halve-truncation", action="store_true",
                    help="double n_points, halve u_min and report the sensitivity")
    mp = sub.add_parser("m1dist", parents=[common], help="M1 distance between two path CSV files")
    mp.add_argument("path_a")
    mp.add_argument("path_b")
    mp.add_argument("--resolution", type=int, help="vertices per resampled graph")
    mp.add_argument("--tol", type=float, default=1e-3, help="refinement tolerance (default 1e-3)")
    mp.add_argument("--exact", action="store_true", help="use the free-space decision procedure")
    vp = sub.add_parser("verify", parents=[common], help="KS and ECF checks of finite-n against the limit")
    vp.add_argument("--inject-drift", type=float, default=0.0,
                    help="add this to the V drift before the ECF check (negative control)")
    vp.add_argument("--diagnostics", action="store_true", help="also run the small-jump and Karamata tables")
    sub.add_parser("diagnostics", parents=[common], help="small-jump probabilities and Karamata table")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "m1dist":
            rep = cmd_m1dist(args.path_a, args.path_b, args.resolution, args.tol, args.exact)
            print(json.dumps(_jsonable(rep), sort_keys=True))
            return EXIT_OK
        threads = _threads(args.threads)
        if args.config is None:
            raise ConfigError("--config", "a configuration file is required")
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"selfnorm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"selfnorm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"selfnorm: error: {exc}", file=sys.stderr)
        return EXIT_IO

    run = None
    try:
        run = Run(args.out, args.command, cfg, cfg["seed"])
        if args.command == "simulate":
            code = cmd_simulate(cfg, run, threads)
        elif args.command == "limit":
            code = cmd_limit(cfg, run, threads, args.halve_truncation)
        elif args.command == "verify":
            code = cmd_verify(cfg, run, threads, args.inject_drift, args.diagnostics)
        else:
            code = cmd_diagnostics(cfg, run, threads)
    except OSError as exc:
        print(f"selfnorm: error: {exc}", file=sys.stderr)
        if run is not None:
            try:
                run.finish("failed")
            except OSError:
                pass
        return EXIT_IO
    except Exception:
        if run is not None:
            run.finish("failed")
        raise
    run.finish("ok" if code == EXIT_OK else "checks_failed")
    return code


if __name__ == "__main__":
    sys.exit(main())
