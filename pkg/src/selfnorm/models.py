"""Heavy-tailed innovations, moving-average sequences and their normalizing constants.

The marginal family is the two-sided Pareto law: ``|Z|`` is Pareto with
index ``alpha`` above ``scale`` and the sign is ``+`` with probability ``p``.
Sequences are finite-order moving averages ``X_t = sum_j c_j Z_{t-j}``; the
i.i.d. case is the moving average with the single coefficient 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IID = "iid"
MA = "ma"

__all__ = [
    "IID",
    "MA",
    "InnovationLaw",
    "ModelSpec",
    "NormSeq",
    "innovations_from_uniforms",
    "sample_innovation",
    "sample_innovations",
    "ma_filter",
    "sample_path",
    "truncated_mean",
    "norm_seq",
    "write_path_csv",
    "read_path_csv",
]


@dataclass(frozen=True)
class InnovationLaw:
    """Two-sided Pareto law with tail index ``alpha`` and positive-tail weight ``p``."""

    alpha: float
    p: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    def tail(self, x):
        """``Pr(|Z| > x)``."""
        x = np.asarray(x, dtype=float)
        return np.where(x < self.scale, 1.0, (np.maximum(x, self.scale) / self.scale) ** -self.alpha)

    def truncated_abs_moment(self, level: float, power: float) -> float:
        """``E[|Z|**power ; |Z| <= level]`` in closed form."""
        s, a = self.scale, self.alpha
        if level <= s:
            return 0.0
        if math.isclose(power, a):
            return a * s**a * math.log(level / s)
        return a * s**a * (level ** (power - a) - s ** (power - a)) / (power - a)


@dataclass(frozen=True)
class ModelSpec:
    """Stationary moving average of i.i.d. two-sided Pareto innovations."""

    law: InnovationLaw
    coeffs: tuple = (1.0,)
    kind: str = IID

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(self.coeffs))
        object.__setattr__(self, "coeffs", coeffs)
        if self.kind not in (IID, MA):
            raise ValueError(f"kind must be '{IID}' or '{MA}', got {self.kind!r}")
        if not coeffs or not any(c != 0.0 for c in coeffs):
            raise ValueError("coeffs must contain at least one nonzero entry")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coeffs must be finite")
        if self.kind == IID and coeffs != (1.0,):
            raise ValueError("coeffs of an iid model must be exactly (1,)")

    @classmethod
    def iid(cls, alpha: float, p: float = 1.0, scale: float = 1.0) -> "ModelSpec":
        return cls(InnovationLaw(alpha, p, scale), (1.0,), IID)

    @classmethod
    def ma(cls, coeffs, alpha: float, p: float = 1.0, scale: float = 1.0) -> "ModelSpec":
        return cls(InnovationLaw(alpha, p, scale), tuple(coeffs), MA)

    @property
    def alpha(self) -> float:
        return self.law.alpha

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def tail_weight(self) -> float:
        """``sum_j |c_j|**alpha``: ``Pr(|X| > x) ~ tail_weight * Pr(|Z| > x)``."""
        return float(np.sum(np.abs(self.coeffs) ** self.alpha))

    @property
    def tail_balance(self) -> tuple[float, float]:
        """Weights ``(p, q)`` of the positive and negative tails of the marginal of ``X``."""
        c = np.asarray(self.coeffs)
        w = np.abs(c) ** self.alpha
        plus = np.sum(w[c > 0]) * self.law.p + np.sum(w[c < 0]) * self.law.q
        p = float(plus / w.sum())
        return p, 1.0 - p

    @property
    def same_sign(self) -> bool:
        """True when every cluster of extremes carries a single sign."""
        c = np.asarray(self.coeffs)
        nz = c[c != 0.0]
        return bool(np.all(nz > 0) or np.all(nz < 0))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.law.alpha,
            "p": self.law.p,
            "scale": self.law.scale,
            "coeffs": list(self.coeffs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        kind = str(d.get("kind", IID)).lower()
        law = InnovationLaw(float(d["alpha"]), float(d.get("p", 1.0)), float(d.get("scale", 1.0)))
        coeffs = tuple(d.get("coeffs", (1.0,)))
        return cls(law, coeffs, kind)


@dataclass(frozen=True)
class NormSeq:
    """Normalizing ``a_n`` and centering ``b_n``, ``c_n = a_n b_n`` for sample size ``n``."""

    n: int
    a_n: float
    b_n: float
    c_n: float
    b_n_stderr: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "a_n": self.a_n,
            "b_n": self.b_n,
            "c_n": self.c_n,
            "b_n_stderr": self.b_n_stderr,
            "meta": dict(self.meta),
        }


def innovations_from_uniforms(law: InnovationLaw, u_mag, u_sign):
    """Inverse-transform map from two uniforms to a two-sided Pareto draw.

    ``|Z| = scale * u_mag**(-1/alpha)``; the sign is ``+`` iff ``u_sign < p``.

    >>> float(innovations_from_uniforms(InnovationLaw(1.0, 1.0), 0.25, 0.5))
    4.0
    """
    u_mag = np.asarray(u_mag, dtype=float)
    u_sign = np.asarray(u_sign, dtype=float)
    mag = law.scale * u_mag ** (-1.0 / law.alpha)
    return np.where(u_sign < law.p, mag, -mag)


def sample_innovations(law: InnovationLaw, size, rng: np.random.Generator) -> np.ndarray:
    # 1 - U keeps the magnitude finite (U in [0, 1) -> 1 - U in (0, 1])
    u_mag = 1.0 - rng.random(size)
    u_sign = rng.random(size)
    return innovations_from_uniforms(law, u_mag, u_sign)


def sample_innovation(law: InnovationLaw, rng: np.random.Generator) -> float:
    return float(sample_innovations(law, None, rng))


def ma_filter(coeffs, innovations) -> np.ndarray:
    """Apply ``X_t = sum_j c_j Z_{t-j}`` to innovations ``z_{1-q}, ..., z_n``.

    The first ``q`` innovations serve as burn-in, so the output has
    ``len(innovations) - q`` entries.
    """
    c = np.asarray(coeffs, dtype=float)
    z = np.asarray(innovations, dtype=float)
    if z.shape[-1] < c.size:
        raise ValueError("need at least len(coeffs) innovations")
    if c.size == 1:
        return c[0] * z
    if z.ndim == 1:
        return np.convolve(z, c, mode="valid")
    q = c.size - 1
    out = np.zeros(z.shape[:-1] + (z.shape[-1] - q,))
    for j, cj in enumerate(c):
        if cj != 0.0:
            out += cj * z[..., q - j : z.shape[-1] - j]
    return out


def sample_path(model: ModelSpec, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw ``X_1, ..., X_n``; ``size`` adds leading replicate dimensions."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    shape = (n + model.order,) if size is None else tuple(np.atleast_1d(size)) + (n + model.order,)
    z = sample_innovations(model.law, shape, rng)
    if model.kind == IID:
        return z
    return ma_filter(model.coeffs, z)


def truncated_mean(model: ModelSpec, level: float, *, n_mc: int = 2_000_000, seed=0,
                   chunk: int = 1_000_000) -> tuple[float, float]:
    """``E[X_1 ; |X_1| <= level]`` and its standard error.

    Exact for i.i.d. models. For moving averages the componentwise truncated
    means ``sum_j E[c_j Z ; |c_j Z| <= level]`` are known in closed form and
    only the correction ``E[X 1{|X|<=level} - sum_j c_j Z_j 1{|c_j Z_j|<=level}]``
    is estimated by Monte Carlo. The correction vanishes unless the event
    ``|X| <= level`` disagrees with its componentwise version, which keeps the
    standard error small at the levels ``a_n`` of interest.
    """
    law = model.law
    if model.kind == IID:
        return (law.p - law.q) * law.truncated_abs_moment(level, 1.0), 0.0

    c = np.asarray(model.coeffs)
    closed = 0.0
    for cj in c:
        if cj != 0.0:
            closed += cj * (law.p - law.q) * law.truncated_abs_moment(level / abs(cj), 1.0)

    rng = np.random.default_rng(seed)
    q = model.order
    total, total_sq, done = 0.0, 0.0, 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        z = sample_innovations(law, (m, q + 1), rng)
        comp = z * c[::-1]
        x = comp.sum(axis=1)
        diff = np.where(np.abs(x) <= level, x, 0.0)
        diff -= np.where(np.abs(comp) <= level, comp, 0.0).sum(axis=1)
        total += diff.sum()
        total_sq += np.dot(diff, diff)
        done += m
    mean = total / done
    var = max(total_sq / done - mean**2, 0.0)
    return closed + mean, math.sqrt(var / done)


def norm_seq(model: ModelSpec, n: int, *, n_mc: int = 2_000_000, seed=0) -> NormSeq:
    """Normalizing sequences for sample size ``n``.

    ``a_n`` solves ``n Pr(|X_1| > a_n) = 1`` with the exact Pareto tail for
    i.i.d. models and the first-order tail ``sum_j |c_j|**alpha Pr(|Z| > x)``
    for moving averages. ``b_n = E[(X_1/a_n) 1{|X_1| <= a_n}]`` and
    ``c_n = a_n b_n``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    law = model.law
    a_n = law.scale * (n * model.tail_weight) ** (1.0 / law.alpha)
    mean, se = truncated_mean(model, a_n, n_mc=n_mc, seed=seed)
    meta = {"tail": "exact" if model.kind == IID else "first-order asymptotic"}
    if model.kind == MA:
        meta.update(n_mc=n_mc, seed=seed if isinstance(seed, int) else str(seed))
    return NormSeq(n=n, a_n=a_n, b_n=mean / a_n, c_n=mean, b_n_stderr=se / a_n, meta=meta)


def write_path_csv(path, values) -> None:
    """Write a sample path as ``index,value`` rows (1-based index)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(values, dtype=float), start=1):
            w.writerow([i, repr(float(v))])


def read_path_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([float(r[1]) for r in rows[1:]])
