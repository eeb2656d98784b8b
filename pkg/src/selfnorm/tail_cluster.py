"""Tail process, extremal index and normalized cluster law of a moving average.

For ``X_t = sum_j c_j Z_{t-j}`` a large value at time 0 is caused by a single
large innovation. The anchor ``J`` (the coefficient carrying that innovation)
has ``Pr(J = j) = |c_j|**alpha / sum_k |c_k|**alpha`` and the tail process is
``Y_i = |Y_0| * eps * c_{J+i} / |c_J|`` with ``|Y_0|`` standard Pareto(alpha)
and ``eps`` the innovation sign.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .models import ModelSpec

__all__ = [
    "TailProcessModel",
    "ClusterConstants",
    "ClusterLaw",
    "sample_tail_process",
    "extremal_index",
    "sample_clusters",
    "sample_cluster",
    "cluster_constants",
    "build_cluster_law",
]


@dataclass(frozen=True)
class TailProcessModel:
    """Tail process of ``model`` on the lags ``-window..window``."""

    model: ModelSpec
    window: int | None = None

    def __post_init__(self):
        if self.window is None:
            object.__setattr__(self, "window", self.model.order)
        if self.window < self.model.order:
            raise ValueError(f"window must be >= MA order {self.model.order}, got {self.window}")
        if not self.model.same_sign:
            warnings.warn(
                "coefficients of mixed sign: clusters may contain values of opposite sign, "
                "outside the hypotheses of the joint limit theorem",
                stacklevel=2,
            )

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.window, self.window + 1)

    @property
    def anchor_probs(self) -> np.ndarray:
        w = np.abs(np.asarray(self.model.coeffs)) ** self.model.alpha
        return w / w.sum()


@dataclass(frozen=True)
class ClusterConstants:
    """Monte Carlo moments of the normalized cluster ``(eta_j)``.

    ``c_plus = E[S**alpha ; S > 0]`` and ``c_minus = E[(-S)**alpha ; S < 0]``
    with ``S = sum_j eta_j``; ``m2 = E[(sum_j eta_j**2)**(alpha/2)]``;
    ``abs_moment = E[(sum_j |eta_j|)**alpha]``; ``sign_moment =
    E[sum_j sign(eta_j) |eta_j|**alpha]``; ``log_term`` is
    ``E[sum_j eta_j log|S / eta_j|]`` and is only computed for ``alpha == 1``.
    """

    alpha: float
    c_plus: float
    c_minus: float
    m2: float
    abs_moment: float
    sign_moment: float
    mean_sum: float
    log_term: float | None
    n_samples: int
    std_errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "c_plus": self.c_plus,
            "c_minus": self.c_minus,
            "m2": self.m2,
            "abs_moment": self.abs_moment,
            "sign_moment": self.sign_moment,
            "mean_sum": self.mean_sum,
            "log_term": self.log_term,
            "n_samples": self.n_samples,
            "std_errors": dict(self.std_errors),
        }


@dataclass(frozen=True)
class ClusterLaw:
    """Sampler for ``(eta_j)`` with the extremal index and summary constants."""

    tp: TailProcessModel
    theta: float
    theta_stderr: float = 0.0
    summary: ClusterConstants | None = None

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        return sample_clusters(self.tp, size, rng)


def sample_tail_process(tp: TailProcessModel, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw ``(Y_{-m}, ..., Y_m)``; with ``size`` the lag axis is last."""
    shape = () if size is None else tuple(np.atleast_1d(size))
    m = tp.window
    c = np.asarray(tp.model.coeffs)
    q = c.size - 1
    law = tp.model.law

    anchor = rng.choice(q + 1, size=shape, p=tp.anchor_probs)
    radius = (1.0 - rng.random(shape)) ** (-1.0 / law.alpha)
    sign = np.where(rng.random(shape) < law.p, 1.0, -1.0)

    # padded coefficients: c_k for k in [-m, q + m], zero outside [0, q]
    padded = np.zeros(q + 2 * m + 1)
    padded[m : m + q + 1] = c
    idx = np.asarray(anchor)[..., None] + tp.lags + m
    ratio = padded[idx] / np.abs(c[anchor])[..., None]
    return (radius * sign)[..., None] * ratio


def extremal_index(tp: TailProcessModel, n_mc: int, rng: np.random.Generator,
                   chunk: int = 1_000_000) -> tuple[float, float]:
    """Monte Carlo ``Pr(sup_{i >= 1} |Y_i| <= 1)`` with its binomial standard error."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    m = tp.window
    hits, done = 0, 0
    while done < n_mc:
        k = min(chunk, n_mc - done)
        y = sample_tail_process(tp, rng, size=k)
        if m == 0:
            hits += k
        else:
            hits += int(np.count_nonzero(np.abs(y[:, m + 1 :]).max(axis=1) <= 1.0))
        done += k
    theta = hits / done
    return theta, math.sqrt(theta * (1.0 - theta) / done)


def sample_clusters(tp: TailProcessModel, size: int, rng: np.random.Generator,
                    return_proposals: bool = False):
    """Draw ``size`` normalized clusters by rejection.

    A tail-process draw is accepted iff ``sup_{i <= -1} |Y_i| <= 1``; the
    accepted vector is divided by its largest absolute entry. Each returned
    row therefore has maximal absolute value exactly 1.
    """
    m = tp.window
    out = np.empty((size, 2 * m + 1))
    filled, proposals = 0, 0
    batch = max(16, size)
    while filled < size:
        y = sample_tail_process(tp, rng, size=batch)
        proposals += batch
        if m > 0:
            y = y[np.abs(y[:, :m]).max(axis=1) <= 1.0]
        rate = max(y.shape[0] / batch, 0.05)
        take = min(size - filled, y.shape[0])
        y = y[:take]
        out[filled : filled + take] = y / np.abs(y).max(axis=1, keepdims=True)
        filled += take
        batch = max(16, int(1.2 * (size - filled) / rate))
    if return_proposals:
        return out, proposals
    return out


def sample_cluster(tp: TailProcessModel, rng: np.random.Generator) -> np.ndarray:
    return sample_clusters(tp, 1, rng)[0]


def _log_terms(eta: np.ndarray, s: np.ndarray) -> np.ndarray:
    # eta_j log|S / eta_j| with the convention 0 for eta_j == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = eta * np.log(np.abs(s[:, None] / eta))
    return np.where(eta == 0.0, 0.0, t).sum(axis=1)


def cluster_constants(cl, alpha: float, n_mc: int, rng: np.random.Generator) -> ClusterConstants:
    """Monte Carlo means and standard errors of the cluster moments."""
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    tp = cl.tp if isinstance(cl, ClusterLaw) else cl
    eta = sample_clusters(tp, n_mc, rng)
    s = eta.sum(axis=1)
    samples = {
        "c_plus": np.where(s > 0, np.abs(s) ** alpha, 0.0),
        "c_minus": np.where(s < 0, np.abs(s) ** alpha, 0.0),
        "m2": (eta**2).sum(axis=1) ** (alpha / 2),
        "abs_moment": np.abs(eta).sum(axis=1) ** alpha,
        "sign_moment": (np.sign(eta) * np.abs(eta) ** alpha).sum(axis=1),
        "mean_sum": s,
    }
    if alpha == 1.0:
        samples["log_term"] = _log_terms(eta, s)
    means = {k: float(v.mean()) for k, v in samples.items()}
    ses = {k: float(v.std() / math.sqrt(n_mc)) for k, v in samples.items()}
    return ClusterConstants(
        alpha=alpha,
        c_plus=means["c_plus"],
        c_minus=means["c_minus"],
        m2=means["m2"],
        abs_moment=means["abs_moment"],
        sign_moment=means["sign_moment"],
        mean_sum=means["mean_sum"],
        log_term=means.get("log_term"),
        n_samples=n_mc,
        std_errors=ses,
    )


def build_cluster_law(model: ModelSpec, rng: np.random.Generator, n_mc: int = 100_000,
                      window: int | None = None) -> ClusterLaw:
    """Extremal index and cluster constants of ``model`` in one call."""
    tp = TailProcessModel(model, window)
    theta, se = extremal_index(tp, n_mc, rng)
    cc = cluster_constants(tp, model.alpha, n_mc, rng)
    return ClusterLaw(tp, theta, se, cc)
