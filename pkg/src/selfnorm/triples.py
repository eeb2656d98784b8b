"""Characteristic triples of the stable limits, their characteristic functions,
and a Chambers-Mallows-Stuck sampler used as an independent distributional check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .tail_cluster import ClusterConstants

__all__ = [
    "CharTriple",
    "triple_V",
    "triple_W",
    "char_exponent",
    "char_function",
    "stable_params",
    "cms_stable_sample",
    "sample_triple",
]

QUAD_TOL = 1e-8


@dataclass(frozen=True)
class CharTriple:
    """Triple ``(gaussian, nu, drift)`` with a stable Levy measure.

    ``nu(dx) = alpha_eff * (weight_plus 1{x>0} + weight_minus 1{x<0}) |x|**(-alpha_eff-1) dx``
    and the drift is taken with respect to the truncation ``x 1{|x| <= 1}``.
    """

    alpha_eff: float
    weight_plus: float
    weight_minus: float
    drift: float
    gaussian: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 < self.alpha_eff < 2.0:
            raise ValueError(f"alpha_eff must lie in (0, 2), got {self.alpha_eff}")
        if self.weight_plus < 0 or self.weight_minus < 0:
            raise ValueError("Levy weights must be nonnegative")
        if self.gaussian < 0:
            raise ValueError("gaussian variance must be nonnegative")

    def levy_density(self, x):
        x = np.asarray(x, dtype=float)
        w = np.where(x > 0, self.weight_plus, self.weight_minus)
        with np.errstate(divide="ignore"):
            return np.where(x == 0, 0.0, self.alpha_eff * w * np.abs(x) ** (-self.alpha_eff - 1))

    def to_dict(self) -> dict:
        return {
            "gaussian": self.gaussian,
            "levy": {
                "family": "stable",
                "alpha_eff": self.alpha_eff,
                "weight_plus": self.weight_plus,
                "weight_minus": self.weight_minus,
            },
            "drift": self.drift,
            "meta": dict(self.meta),
        }


def triple_V(theta: float, alpha: float, p: float, q: float, cc: ClusterConstants) -> CharTriple:
    """Triple of ``V``: weights ``theta c_+``, ``theta c_-`` and drift
    ``alpha/(alpha-1) (p - q - theta (c_+ - c_-))``, or ``-theta E[log term]`` at ``alpha = 1``.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if alpha == 1.0:
        if cc.log_term is None:
            raise ValueError("alpha = 1 needs the cluster log term")
        drift = -theta * cc.log_term
        se = theta * cc.std_errors.get("log_term", 0.0)
    else:
        drift = alpha / (alpha - 1.0) * (p - q - theta * (cc.c_plus - cc.c_minus))
        se = abs(alpha / (alpha - 1.0)) * theta * math.hypot(
            cc.std_errors.get("c_plus", 0.0), cc.std_errors.get("c_minus", 0.0))
    return CharTriple(alpha, theta * cc.c_plus, theta * cc.c_minus, drift, meta={"drift_stderr": se})


def triple_W(theta: float, alpha: float, m2: float) -> CharTriple:
    """One-sided ``alpha/2``-stable triple with weight ``theta m2`` and drift ``theta alpha m2/(2-alpha)``."""
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if m2 < 0:
        raise ValueError("m2 must be nonnegative")
    return CharTriple(alpha / 2.0, theta * m2, 0.0, theta * alpha * m2 / (2.0 - alpha))


def _half_line_integral(a: float, z: float) -> tuple[complex, float]:
    """``int_0^inf (exp(izx) - 1 - izx 1{x<=1}) x**(-a-1) dx`` for ``z > 0``.

    Near zero a Taylor expansion is integrated exactly; the rest of ``[0, 1]``
    is split at ``1/z``; ``[1, inf)`` uses Fourier-weighted quadrature for the
    oscillating part and ``1/a`` for the constant.
    """
    delta = min(1.0, 0.05 / z)
    # terms of cos(zx) - 1 and sin(zx) - zx integrated on [0, delta]
    re = sum((-1) ** k * z ** (2 * k) * delta ** (2 * k - a) / (math.factorial(2 * k) * (2 * k - a))
             for k in range(1, 6))
    im = sum((-1) ** k * z ** (2 * k + 1) * delta ** (2 * k + 1 - a)
             / (math.factorial(2 * k + 1) * (2 * k + 1 - a)) for k in range(1, 6))
    err = 0.0
    if delta < 1.0:
        pts = [1.0 / z] if delta < 1.0 / z < 1.0 else None
        r, e1 = integrate.quad(lambda x: -2.0 * math.sin(0.5 * z * x) ** 2 * x ** (-a - 1), delta, 1.0,
                               points=pts, epsabs=1e-12, epsrel=1e-12, limit=200)
        i, e2 = integrate.quad(lambda x: (math.sin(z * x) - z * x) * x ** (-a - 1), delta, 1.0,
                               points=pts, epsabs=1e-12, epsrel=1e-12, limit=200)
        re += r
        im += i
        err += e1 + e2
    f = lambda x: x ** (-a - 1)  # noqa: E731
    rc, e3 = integrate.quad(f, 1.0, np.inf, weight="cos", wvar=z, epsabs=1e-12, limlst=200)
    rs, e4 = integrate.quad(f, 1.0, np.inf, weight="sin", wvar=z, epsabs=1e-12, limlst=200)
    re += rc - 1.0 / a
    im += rs
    return complex(re, im), err + e3 + e4


def char_exponent(triple: CharTriple, z, return_error: bool = False):
    """Levy-Khintchine exponent ``log E[exp(izX)]`` evaluated by quadrature."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z_arr.shape, dtype=complex)
    errs = np.zeros(z_arr.shape)
    a = triple.alpha_eff
    cache: dict[float, tuple[complex, float]] = {}
    for k, zk in enumerate(z_arr):
        if zk == 0.0:
            out[k] = 0.0
            continue
        az = abs(zk)
        if az not in cache:
            cache[az] = _half_line_integral(a, az)
        val, err = cache[az]
        if zk < 0:
            val = val.conjugate()
        # negative half line contributes the mirrored integral
        jump = a * (triple.weight_plus * val + triple.weight_minus * val.conjugate())
        out[k] = 1j * triple.drift * zk - 0.5 * triple.gaussian * zk**2 + jump
        errs[k] = a * (triple.weight_plus + triple.weight_minus) * err
    worst = float(errs.max()) if errs.size else 0.0
    if worst > QUAD_TOL:
        warnings.warn(f"characteristic exponent quadrature reached only {worst:.2e}",
                      integrate.IntegrationWarning, stacklevel=2)
    res = out if np.ndim(z) else out[0]
    if return_error:
        return res, worst
    return res


def char_function(triple: CharTriple, z):
    """``E[exp(izX)]`` for the infinitely divisible law with the given triple."""
    return np.exp(char_exponent(triple, z))


def stable_params(triple: CharTriple) -> tuple[float, float, float, float]:
    """Convert a stable triple to ``(alpha, beta, sigma, mu)`` in the S1 parametrization.

    With ``w = weight_plus + weight_minus`` and ``beta = (weight_plus - weight_minus)/w``:
    ``sigma**alpha = Gamma(1-alpha) cos(pi alpha/2) w`` and
    ``mu = drift - alpha (weight_plus - weight_minus)/(1-alpha)`` for ``alpha != 1``;
    ``sigma = pi w / 2`` and ``mu = drift + (1 - euler_gamma)(weight_plus - weight_minus)``
    for ``alpha == 1``.
    """
    if triple.gaussian != 0.0:
        raise ValueError("a Gaussian component is not stable with alpha < 2")
    a = triple.alpha_eff
    w = triple.weight_plus + triple.weight_minus
    d = triple.weight_plus - triple.weight_minus
    if w == 0.0:
        return a, 0.0, 0.0, triple.drift
    beta = d / w
    if a == 1.0:
        return a, beta, math.pi * w / 2.0, triple.drift + (1.0 - np.euler_gamma) * d
    sigma = (math.gamma(1.0 - a) * math.cos(math.pi * a / 2.0) * w) ** (1.0 / a)
    return a, beta, sigma, triple.drift - a * d / (1.0 - a)


def cms_stable_sample(alpha_eff: float, skew: float, scale: float, shift: float,
                      rng: np.random.Generator, size=None):
    """Chambers-Mallows-Stuck draw from ``S_alpha(scale, skew, shift)`` (S1 parametrization)."""
    a, b = alpha_eff, skew
    if not 0.0 < a < 2.0:
        raise ValueError(f"alpha_eff must lie in (0, 2), got {a}")
    if not -1.0 <= b <= 1.0:
        raise ValueError(f"skew must lie in [-1, 1], got {b}")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    v = math.pi * (rng.random(size) - 0.5)
    w = rng.standard_exponential(size)
    if a == 1.0:
        half = math.pi / 2.0
        x = (2.0 / math.pi) * ((half + b * v) * np.tan(v)
                               - b * np.log(half * w * np.cos(v) / (half + b * v)))
        log_s = math.log(scale) if scale > 0 else 0.0
        return scale * x + (2.0 / math.pi) * b * scale * log_s + shift
    t = b * math.tan(math.pi * a / 2.0)
    shift_b = math.atan(t) / a
    s = (1.0 + t * t) ** (1.0 / (2.0 * a))
    x = (s * np.sin(a * (v + shift_b)) / np.cos(v) ** (1.0 / a)
         * (np.cos(v - a * (v + shift_b)) / w) ** ((1.0 - a) / a))
    return scale * x + shift


def sample_triple(triple: CharTriple, rng: np.random.Generator, size=None):
    """Draw from the stable law with the given triple via :func:`cms_stable_sample`."""
    a, beta, sigma, mu = stable_params(triple)
    return cms_stable_sample(a, beta, sigma, mu, rng, size)
