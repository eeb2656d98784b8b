"""Monte Carlo checks linking finite-n partial sums to the simulated limits."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import kstwobign

from .limit_sim import build_limit_V, build_limit_W, sample_limit_terminals, sample_poisson_series
from .models import IID, ModelSpec, NormSeq, norm_seq, sample_path, truncated_mean
from .paths import CadlagPath
from .tail_cluster import ClusterLaw, build_cluster_law
from .triples import CharTriple, char_function, sample_triple, triple_V, triple_W

__all__ = [
    "FUNCTIONALS",
    "ExperimentConfig",
    "TestReport",
    "KSResult",
    "ECFComparison",
    "partial_sum_process",
    "self_normalized_process",
    "ks_two_sample",
    "ks_critical_value",
    "ecf_compare",
    "fclt_experiment",
    "small_jump_diagnostic",
    "karamata_check",
]

FUNCTIONALS = ("value_at_1", "value_at_half", "sup_norm", "selfnorm_at_1")
LOW_POWER_REPS = 100


def partial_sum_process(X, ns: NormSeq) -> CadlagPath:
    """``t -> (sum_{k<=nt} X_k/a_n - [nt] b_n, sum_{k<=nt} X_k**2/a_n**2)`` as a step path."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 1 or X.size != ns.n:
        raise ValueError(f"expected {ns.n} observations, got shape {X.shape}")
    k = np.arange(ns.n + 1)
    first = np.concatenate([[0.0], np.cumsum(X / ns.a_n)]) - k * ns.b_n
    second = np.concatenate([[0.0], np.cumsum((X / ns.a_n) ** 2)])
    return CadlagPath.step(k / ns.n, np.column_stack([first, second]))


def self_normalized_process(X, ns: NormSeq) -> CadlagPath:
    """``t -> (S_[nt] - [nt] c_n) / zeta_n`` with ``zeta_n**2 = sum X_i**2``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 1 or X.size != ns.n:
        raise ValueError(f"expected {ns.n} observations, got shape {X.shape}")
    zeta = math.sqrt(float(np.dot(X, X)))
    if zeta == 0.0:
        raise ValueError("all observations are zero")
    k = np.arange(ns.n + 1)
    s = np.concatenate([[0.0], np.cumsum(X)])
    return CadlagPath.step(k / ns.n, (s - k * ns.c_n) / zeta)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    crit_1pct: float
    crit_5pct: float

    @property
    def pass_1pct(self) -> bool:
        return self.statistic < self.crit_1pct

    @property
    def pass_5pct(self) -> bool:
        return self.statistic < self.crit_5pct

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(pass_1pct=self.pass_1pct, pass_5pct=self.pass_5pct)
        return d


def ks_critical_value(m: int, k: int, level: float) -> float:
    """Asymptotic two-sample critical value ``K_{1-level} sqrt((m+k)/(m k))``."""
    return float(kstwobign.ppf(1.0 - level) * math.sqrt((m + k) / (m * k)))


def ks_two_sample(a, b) -> KSResult:
    """Two-sample Kolmogorov-Smirnov statistic with the asymptotic Kolmogorov p-value."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = a.size * b.size / (a.size + b.size)
    p = float(kstwobign.sf(math.sqrt(en) * d))
    return KSResult(d, p, ks_critical_value(a.size, b.size, 0.01), ks_critical_value(a.size, b.size, 0.05))


@dataclass(frozen=True)
class ECFComparison:
    max_error: float
    noise_floor: float
    z_at_max: float
    max_excess: float

    def to_dict(self) -> dict:
        return asdict(self)


def ecf_compare(samples, triple: CharTriple, z_grid, truncation_var: float = 0.0) -> ECFComparison:
    """Largest modulus gap between the empirical and the model characteristic function.

    If the samples omit an independent mean-zero remainder of variance
    ``truncation_var``, their characteristic function differs from the model
    by at most ``z**2 truncation_var / 2``. ``max_excess`` is the largest gap
    beyond that allowance and equals ``max_error`` when ``truncation_var = 0``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    z = np.asarray(z_grid, dtype=float).ravel()
    ecf = np.array([np.mean(np.exp(1j * zk * x)) for zk in z])
    err = np.abs(ecf - char_function(triple, z))
    k = int(np.argmax(err))
    allowance = np.minimum(2.0, 0.5 * z**2 * truncation_var)
    excess = float(np.max(err - allowance)) if z.size else 0.0
    return ECFComparison(float(err[k]), 2.0 / math.sqrt(x.size), float(z[k]), excess)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    n: int = 10_000
    reps: int = 2000
    seed: int = 0
    functionals: tuple = ("selfnorm_at_1",)
    u_list: tuple = (0.5, 0.25, 0.1)
    delta: float = 0.5
    n_points: int = 10_000
    u_min: float = 1e-2
    n_mc_cluster: int = 100_000
    n_mc_bn: int = 2_000_000
    centering: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError("reps must be >= 2")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        fs = tuple(self.functionals)
        if not fs:
            raise ValueError("functionals must be nonempty")
        bad = [f for f in fs if f not in FUNCTIONALS]
        if bad:
            raise ValueError(f"unknown functionals {bad}; choose from {FUNCTIONALS}")
        object.__setattr__(self, "functionals", fs)
        object.__setattr__(self, "u_list", tuple(float(u) for u in self.u_list))

    def to_dict(self) -> dict:
        # threads does not affect results, so it stays out of the report
        d = {k: v for k, v in asdict(self).items() if k not in ("model", "threads")}
        d["model"] = self.model.to_dict()
        d["functionals"] = list(self.functionals)
        d["u_list"] = list(self.u_list)
        return d


@dataclass
class TestReport:
    """Outcome of :func:`fclt_experiment`; ``samples`` holds the raw functional values."""

    __test__ = False  # not a pytest class

    config: dict
    ks: dict
    norm_seq: dict
    limit: dict
    flags: dict
    samples: dict = field(default_factory=dict, repr=False)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r["pass_1pct"] for r in self.ks.values()) and all(
            v for k, v in self.flags.items() if k.startswith("pass"))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "ks": self.ks,
            "norm_seq": self.norm_seq,
            "limit": self.limit,
            "flags": self.flags,
            "extra": self.extra,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _finite_functionals(model, ns, n, functionals, seeds, centering):
    c = ns.c_n if centering else 0.0
    out = {f: np.empty(len(seeds)) for f in functionals}
    w1 = np.empty(len(seeds))
    half = n // 2
    for r, ss in enumerate(seeds):
        X = sample_path(model, n, np.random.default_rng(ss))
        s = np.cumsum(X)
        zeta2 = float(np.dot(X, X))
        w1[r] = zeta2 / ns.a_n**2
        if "value_at_1" in out:
            out["value_at_1"][r] = (s[-1] - n * c) / ns.a_n
        if "value_at_half" in out:
            out["value_at_half"][r] = (s[half - 1] - half * c) / ns.a_n if half else 0.0
        if "sup_norm" in out:
            centred = s - np.arange(1, n + 1) * c
            out["sup_norm"][r] = max(0.0, float(np.abs(centred).max())) / ns.a_n
        if "selfnorm_at_1" in out:
            out["selfnorm_at_1"][r] = (s[-1] - n * c) / math.sqrt(zeta2)
    return out, w1


def _limit_functionals(cluster, alpha, p, q, functionals, seeds, n_points, u_min, centering):
    out = {f: np.empty(len(seeds)) for f in functionals}
    w1 = np.empty(len(seeds))
    need_path = any(f in functionals for f in ("value_at_half", "sup_norm"))
    for r, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        if not need_path:
            v, w = sample_limit_terminals(cluster, alpha, p, q, 1, rng, n_points, u_min)
            v1, w1[r] = float(v[0]), float(w[0])
            if not centering and alpha < 1:
                v1 += (p - q) * alpha / (1 - alpha)
        else:
            series = sample_poisson_series(cluster.theta, alpha, cluster, n_points, rng,
                                           min_magnitude=u_min / 2 if alpha >= 1 else None)
            V = build_limit_V(series, alpha, p, q, u_min)
            W = build_limit_W(series)
            v1, w1[r] = float(V.terminal[0]), float(W.terminal[0])
            if not centering and alpha < 1:
                v1 += (p - q) * alpha / (1 - alpha)
            if "value_at_half" in out:
                vh = float(V(0.5))
                if not centering and alpha < 1:
                    vh += 0.5 * (p - q) * alpha / (1 - alpha)
                out["value_at_half"][r] = vh
            if "sup_norm" in out:
                if not centering and alpha < 1:
                    raise ValueError("sup_norm needs centering for alpha < 1")
                out["sup_norm"][r] = float(max(np.abs(V.left).max(), np.abs(V.right).max()))
        if "value_at_1" in out:
            out["value_at_1"][r] = v1
        if "selfnorm_at_1" in out:
            out["selfnorm_at_1"][r] = v1 / math.sqrt(w1[r])
    return out, w1


def _run_chunked(fn, seeds, threads, *args):
    if threads <= 1 or len(seeds) < 2 * threads:
        return fn(*args, seeds)
    parts = np.array_split(np.arange(len(seeds)), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda idx: fn(*args, [seeds[i] for i in idx]), parts))
    merged = {k: np.concatenate([r[0][k] for r in results]) for k in results[0][0]}
    return merged, np.concatenate([r[1] for r in results])


def fclt_experiment(cfg: ExperimentConfig, cluster: ClusterLaw | None = None,
                    ns: NormSeq | None = None) -> TestReport:
    """Compare finite-n functionals with their limit counterparts by two-sample KS tests.

    Finite-n replicate ``r`` and limit replicate ``r`` use independent seeds
    spawned from ``cfg.seed``; results do not depend on ``cfg.threads``.
    """
    model = cfg.model
    root = np.random.SeedSequence(cfg.seed)
    s_bn, s_cluster, s_finite, s_limit, s_w = root.spawn(5)
    alpha = model.alpha
    p, q = model.tail_balance

    if ns is None:
        ns = norm_seq(model, cfg.n, n_mc=cfg.n_mc_bn, seed=s_bn)
    if cluster is None:
        cluster = build_cluster_law(model, np.random.default_rng(s_cluster), cfg.n_mc_cluster)
    cc = cluster.summary

    fin, fin_w = _run_chunked(
        lambda m, nsq, n, fs, ctr, seeds: _finite_functionals(m, nsq, n, fs, seeds, ctr),
        s_finite.spawn(cfg.reps), cfg.threads, model, ns, cfg.n, cfg.functionals, cfg.centering)
    lim, lim_w = _run_chunked(
        lambda cl, a, pp, qq, fs, npnt, u, ctr, seeds: _limit_functionals(cl, a, pp, qq, fs, seeds, npnt, u, ctr),
        s_limit.spawn(cfg.reps), cfg.threads, cluster, alpha, p, q, cfg.functionals,
        cfg.n_points, cfg.u_min, cfg.centering)

    ks = {f: ks_two_sample(fin[f], lim[f]).to_dict() for f in cfg.functionals}
    ks["w_at_1"] = ks_two_sample(fin_w, lim_w).to_dict()
    tw = triple_W(cluster.theta, alpha, cc.m2)
    w_stable = sample_triple(tw, np.random.default_rng(s_w), cfg.reps)
    ks["w_at_1_vs_stable"] = ks_two_sample(lim_w, w_stable).to_dict()

    limit = {
        "theta": cluster.theta,
        "theta_stderr": cluster.theta_stderr,
        "p": p,
        "q": q,
        "constants": cc.to_dict(),
        "n_points": cfg.n_points,
        "u_min": cfg.u_min if alpha >= 1 else None,
        "same_sign": model.same_sign,
        "triple_W": tw.to_dict(),
    }
    if alpha != 1.0 or cc.log_term is not None:
        limit["triple_V"] = triple_V(cluster.theta, alpha, p, q, cc).to_dict()
    flags = {"low_power": cfg.reps < LOW_POWER_REPS, "within_hypotheses": model.same_sign}
    samples = {f"finite_{f}": fin[f] for f in cfg.functionals}
    samples.update({f"limit_{f}": lim[f] for f in cfg.functionals})
    samples["finite_w_at_1"], samples["limit_w_at_1"] = fin_w, lim_w
    return TestReport(cfg.to_dict(), ks, ns.to_dict(), limit, flags, samples)


def small_jump_diagnostic(model: ModelSpec, n: int, u_list, delta: float, reps: int,
                          rng: np.random.Generator, ns: NormSeq | None = None,
                          n_mc: int = 1_000_000) -> dict:
    """Estimate ``Pr(max_k |sum_{i<=k} (X_i/a_n 1{|X_i|/a_n <= u} - mean)| > delta)`` per ``u``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if any(u <= 0 for u in u_list):
        raise ValueError("u_list entries must be positive")
    if ns is None:
        ns = norm_seq(model, n, n_mc=n_mc, seed=0)
    means = {u: truncated_mean(model, u * ns.a_n, n_mc=n_mc, seed=0)[0] / ns.a_n for u in u_list}
    hits = {u: 0 for u in u_list}
    for _ in range(reps):
        y = sample_path(model, n, rng) / ns.a_n
        for u in u_list:
            small = np.where(np.abs(y) <= u, y, 0.0) - means[u]
            s = np.cumsum(small)
            if max(0.0, float(np.abs(s).max())) > delta:
                hits[u] += 1
    return {u: hits[u] / reps for u in u_list}


def karamata_check(model: ModelSpec, n: int, u: float) -> tuple[float, float, float]:
    """``n E[X**2/a_n**2 ; |X| <= u a_n]`` against its limit ``u**(2-alpha) alpha/(2-alpha)``."""
    if model.kind != IID:
        raise ValueError("karamata_check needs an iid Pareto model")
    if not 0.0 < u <= 1.0:
        raise ValueError(f"u must lie in (0, 1], got {u}")
    law = model.law
    a_n = law.scale * n ** (1.0 / law.alpha)
    empirical = n * law.truncated_abs_moment(u * a_n, 2.0) / a_n**2
    limit = u ** (2.0 - law.alpha) * law.alpha / (2.0 - law.alpha)
    return empirical, limit, abs(empirical - limit) / limit
