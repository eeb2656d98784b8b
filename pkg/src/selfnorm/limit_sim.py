"""Series representation of the limit pair ``(V, W)`` from a Poisson cluster process.

The limit point process has atoms ``(T_i, P_i eta_ij)`` where
``P_i = (Gamma_i / theta)**(-1/alpha)`` for standard Poisson arrivals
``Gamma_i``, ``T_i`` are uniform on [0, 1] and ``(eta_ij)_j`` are i.i.d.
normalized clusters. Then ``W(t) = sum_{T_i <= t} sum_j P_i**2 eta_ij**2`` and
``V`` is the (compensated, for ``alpha >= 1``) sum of the atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .paths import LINEAR, CadlagPath
from .tail_cluster import ClusterLaw

__all__ = [
    "PointMeasure",
    "PoissonSeries",
    "sample_poisson_series",
    "summation_functional",
    "b_u",
    "build_limit_W",
    "build_limit_V",
    "limit_terminals",
    "sample_limit_terminals",
    "truncation_variance",
]


@dataclass(frozen=True, eq=False)
class PointMeasure:
    """Finite point measure on ``[0, 1] x (R minus 0)``, atoms sorted by time (stable)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        x = np.asarray(self.values, dtype=float).reshape(-1)
        if t.shape != x.shape:
            raise ValueError("times and values must have equal length")
        if np.any((t < 0) | (t > 1)):
            raise ValueError("atom times must lie in [0, 1]")
        if np.any(x == 0) or not np.all(np.isfinite(x)):
            raise ValueError("atom values must be finite and nonzero")
        order = np.argsort(t, kind="stable")
        object.__setattr__(self, "times", t[order])
        object.__setattr__(self, "values", x[order])

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True, eq=False)
class PoissonSeries:
    """Atoms ``(T_i, P_i, eta_i)`` of the limit cluster process, ``P_i`` decreasing."""

    times: np.ndarray
    magnitudes: np.ndarray
    clusters: np.ndarray
    theta: float
    alpha: float
    gamma_cutoff: float
    meta: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.magnitudes.size

    @property
    def smallest_magnitude(self) -> float:
        return float(self.magnitudes[-1]) if self.n_points else math.inf

    def point_measure(self) -> PointMeasure:
        x = self.magnitudes[:, None] * self.clusters
        t = np.broadcast_to(self.times[:, None], x.shape)
        nz = x != 0
        return PointMeasure(t[nz], x[nz])


def _arrivals(theta, alpha, n_points, rng, min_magnitude=None):
    gammas = np.cumsum(rng.standard_exponential(n_points))
    if min_magnitude is not None:
        # keep going until the magnitudes drop below min_magnitude
        g_stop = theta * min_magnitude ** (-alpha)
        while gammas[-1] < g_stop:
            extra = max(16, int(1.2 * (g_stop - gammas[-1])) + 16)
            gammas = np.append(gammas, gammas[-1] + np.cumsum(rng.standard_exponential(extra)))
        gammas = gammas[: max(n_points, int(np.searchsorted(gammas, g_stop, side="right")) + 1)]
    return gammas


def sample_poisson_series(theta: float, alpha: float, cluster: ClusterLaw, n_points: int,
                          rng: np.random.Generator, min_magnitude: float | None = None) -> PoissonSeries:
    """Draw the ``n_points`` largest atoms (more if needed to reach ``min_magnitude``)."""
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    gammas = _arrivals(theta, alpha, n_points, rng, min_magnitude)
    mags = (gammas / theta) ** (-1.0 / alpha)
    times = rng.random(gammas.size)
    etas = cluster.sample(gammas.size, rng)
    return PoissonSeries(times, mags, etas, theta, alpha, float(gammas[-1]),
                         {"smallest_magnitude": float(mags[-1]), "n_points": int(gammas.size)})


def _jump_path(times, jumps, slope: float = 0.0) -> CadlagPath:
    """Pure-jump path plus a linear drift ``slope * t``; atoms at equal times merge."""
    times = np.asarray(times, dtype=float)
    jumps = np.asarray(jumps, dtype=float)
    if jumps.ndim == 1:
        jumps = jumps[:, None]
    dim = jumps.shape[1]
    order = np.argsort(times, kind="stable")
    times, jumps = times[order], jumps[order]
    uniq, start = np.unique(times, return_index=True)
    merged = np.add.reduceat(jumps, start, axis=0) if times.size else np.zeros((0, dim))
    at_zero = uniq.size > 0 and uniq[0] == 0.0
    base = merged[0] if at_zero else np.zeros(dim)
    if at_zero:
        uniq, merged = uniq[1:], merged[1:]
    knots = np.concatenate([[0.0], uniq])
    level = base + np.vstack([np.zeros((1, dim)), np.cumsum(merged, axis=0)])
    if slope == 0.0:
        return CadlagPath.step(knots, level)
    right = level + slope * knots[:, None]
    left = right - np.vstack([np.zeros((1, dim)), merged])
    if knots[-1] < 1.0:
        knots = np.append(knots, 1.0)
        right = np.vstack([right, right[-1:] + slope * (1.0 - knots[-2])])
        left = np.vstack([left, right[-1:]])
    return CadlagPath(knots, left, right, LINEAR)


def summation_functional(pm: PointMeasure, u: float) -> CadlagPath:
    """Two-dimensional step path ``t -> (sum x_i, sum x_i**2)`` over atoms ``t_i <= t, |x_i| > u``."""
    if not u > 0:
        raise ValueError(f"u must be positive, got {u}")
    keep = np.abs(pm.values) > u
    x = pm.values[keep]
    return _jump_path(pm.times[keep], np.column_stack([x, x**2]))


def b_u(alpha: float, p: float, q: float, u: float) -> float:
    """``int_{u < |x| <= 1} x mu(dx)`` for ``mu(dx) = (p 1{x>0} + q 1{x<0}) alpha |x|**(-alpha-1) dx``."""
    if not 0.0 < u <= 1.0:
        raise ValueError(f"u must lie in (0, 1], got {u}")
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if alpha == 1.0:
        return (p - q) * math.log(1.0 / u)
    return (p - q) * alpha * (1.0 - u ** (1.0 - alpha)) / (1.0 - alpha)


def truncation_variance(alpha: float, u: float, weight: float = 1.0) -> float:
    """Variance ``weight alpha/(2-alpha) u**(2-alpha)`` of the compensated jumps of size at most ``u``.

    ``weight`` is the total tail weight of the jump measure. For the per-atom
    truncation of ``V`` it is ``theta E[sum_j |eta_j|**alpha]``, which equals 1.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if u < 0:
        raise ValueError("u must be nonnegative")
    return weight * alpha / (2.0 - alpha) * u ** (2.0 - alpha)


def build_limit_W(series: PoissonSeries) -> CadlagPath:
    """``W(t) = sum_{T_i <= t} P_i**2 sum_j eta_ij**2`` over the retained atoms.

    ``meta["tail_mean"]`` estimates the expected contribution of the atoms
    beyond the truncation, ``theta alpha/(2-alpha) P_n**(2-alpha) E[sum_j eta_j**2]``.
    """
    u = (series.clusters**2).sum(axis=1)
    jumps = series.magnitudes**2 * u
    path = _jump_path(series.times, jumps)
    a, pn = series.alpha, series.smallest_magnitude
    tail = series.theta * a / (2 - a) * pn ** (2 - a) * float(u.mean()) if series.n_points else 0.0
    path.meta.update(tail_mean=tail, smallest_magnitude=pn, n_points=series.n_points)
    return path


def _v_parts(magnitudes, clusters, theta, alpha, p, q, u_min):
    """Atom weights and drift slope of ``V``; shared by the path and terminal samplers."""
    atoms = magnitudes[..., None] * clusters
    if alpha < 1.0:
        if magnitudes.shape[-1] == 0:
            comp = np.zeros(magnitudes.shape[:-1])
        else:
            pn = magnitudes[..., -1]
            mean_sum = clusters.sum(axis=-1).mean(axis=-1)
            comp = theta * alpha / (1.0 - alpha) * pn ** (1.0 - alpha) * mean_sum
        slope = -(p - q) * alpha / (1.0 - alpha) + comp
        return atoms, slope, comp
    atoms = np.where(np.abs(atoms) > u_min, atoms, 0.0)
    return atoms, -b_u(alpha, p, q, u_min), 0.0


def build_limit_V(series: PoissonSeries, alpha: float, p: float, q: float,
                  u_min: float = 1e-2) -> CadlagPath:
    """Limit path ``V`` from the retained atoms of ``series``.

    For ``alpha < 1`` every retained atom is summed and the drift is
    ``-t (p - q) alpha/(1 - alpha)``; the expected sum of the atoms beyond the
    truncation, ``theta alpha/(1-alpha) P_n**(1-alpha) E[sum_j eta_j]``, is
    added back as a drift (``meta["tail_compensation"]``). For
    ``alpha in [1, 2)`` only atoms with ``P_i |eta_ij| > u_min`` are summed and
    ``t * b_u(alpha, p, q, u_min)`` is subtracted; ``meta["sensitivity"]`` is
    the change of ``V(1)`` when ``u_min`` is halved (NaN if the series does
    not reach ``u_min / 2``).

    ``p, q`` are the tail weights of the marginal of the sequence, which equal
    the innovation weights for same-signed coefficients.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if alpha >= 1.0 and not 0.0 < u_min < 1.0:
        raise ValueError(f"u_min must lie in (0, 1), got {u_min}")
    atoms, slope, comp = _v_parts(series.magnitudes, series.clusters, series.theta, alpha, p, q, u_min)
    t = np.broadcast_to(series.times[:, None], atoms.shape)
    nz = atoms != 0
    path = _jump_path(t[nz], atoms[nz], float(slope))
    meta = {"smallest_magnitude": series.smallest_magnitude, "n_points": series.n_points}
    if alpha < 1.0:
        meta["tail_compensation"] = float(comp)
    else:
        pn = series.smallest_magnitude
        half, half_slope, _ = _v_parts(series.magnitudes, series.clusters, series.theta, alpha, p, q, u_min / 2)
        sens = float(half.sum() + half_slope - atoms.sum() - slope) if pn <= u_min / 2 else math.nan
        meta.update(u_min=u_min, complete=bool(pn <= u_min), sensitivity=sens)
    path.meta.update(meta)
    return path


def limit_terminals(magnitudes, clusters, theta, alpha, p, q, u_min=1e-2):
    """``(V(1), W(1))`` from arrays of magnitudes ``(..., n)`` and clusters ``(..., n, L)``."""
    atoms, slope, _ = _v_parts(magnitudes, clusters, theta, alpha, p, q, u_min)
    v1 = atoms.sum(axis=(-2, -1)) + slope
    w1 = (magnitudes**2 * (clusters**2).sum(axis=-1)).sum(axis=-1)
    return v1, w1


def sample_limit_terminals(cluster: ClusterLaw, alpha: float, p: float, q: float, size: int,
                           rng: np.random.Generator, n_points: int = 10_000, u_min: float = 1e-2,
                           chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` joint samples of ``(V(1), W(1))`` from independent series.

    ``V(1)`` and ``W(1)`` of one sample share the same atoms. For
    ``alpha >= 1`` the arrivals are extended until the magnitudes fall below
    ``u_min``, so no atom above the threshold is lost.
    """
    theta = cluster.theta
    if alpha >= 1.0:
        n_points = max(n_points, int(math.ceil(1.5 * theta * u_min ** (-alpha))) + 64)
    v_out, w_out = np.empty(size), np.empty(size)
    done = 0
    while done < size:
        k = min(chunk, size - done)
        gam = np.cumsum(rng.standard_exponential((k, n_points)), axis=1)
        mags = (gam / theta) ** (-1.0 / alpha)
        if alpha >= 1.0 and np.any(mags[:, -1] > u_min):
            raise RuntimeError("series did not reach u_min; increase n_points")
        etas = cluster.sample(k * n_points, rng).reshape(k, n_points, -1)
        v_out[done : done + k], w_out[done : done + k] = limit_terminals(mags, etas, theta, alpha, p, q, u_min)
        done += k
    return v_out, w_out
