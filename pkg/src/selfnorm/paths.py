"""Cadlag paths on [0, 1] that are piecewise linear between jump times."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

STEP = "step"
LINEAR = "linear"

__all__ = ["STEP", "LINEAR", "CadlagPath", "write_cadlag_csv", "read_cadlag_csv"]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CadlagPath:
    """Right-continuous path with left limits.

    ``knots`` are ``0 = t_0 < ... < t_k <= 1``; ``left[i]`` is ``x(t_i-)`` and
    ``right[i]`` is ``x(t_i)``, each of shape ``(k + 1, dim)``. On
    ``[t_i, t_{i+1})`` the path moves linearly from ``right[i]`` towards
    ``left[i+1]``; after the last knot it stays at ``right[-1]``. A ``step``
    path has ``left[i+1] == right[i]``, i.e. it is constant between knots.
    """

    knots: np.ndarray
    left: np.ndarray
    right: np.ndarray
    kind: str = STEP
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        knots = _frozen(self.knots).reshape(-1)
        left = np.array(self.left, dtype=float)
        right = np.array(self.right, dtype=float)
        if left.ndim == 1:
            left = left[:, None]
        if right.ndim == 1:
            right = right[:, None]
        if knots.size == 0:
            raise ValueError("a path needs at least the knot t = 0")
        if left.shape != right.shape or left.shape[0] != knots.size:
            raise ValueError("left/right values must have one row per knot")
        if knots[0] != 0.0:
            raise ValueError("first knot must be t = 0")
        if knots[-1] > 1.0 or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing within [0, 1]")
        if self.kind not in (STEP, LINEAR):
            raise ValueError(f"kind must be '{STEP}' or '{LINEAR}'")
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise ValueError("path values must be finite")
        left[0] = right[0]
        if self.kind == STEP and not np.array_equal(left[1:], right[:-1]):
            raise ValueError("a step path must be constant between knots")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "left", _frozen(left))
        object.__setattr__(self, "right", _frozen(right))

    # construction

    @classmethod
    def step(cls, times, values, meta=None) -> "CadlagPath":
        """Step path equal to ``values[i]`` on ``[times[i], times[i+1])``."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        left = np.vstack([values[:1], values[:-1]])
        return cls(times, left, values, STEP, dict(meta or {}))

    @classmethod
    def linear(cls, times, values, meta=None) -> "CadlagPath":
        """Continuous path interpolating ``values`` linearly."""
        values = np.asarray(values, dtype=float)
        return cls(times, values, values, LINEAR, dict(meta or {}))

    @classmethod
    def constant(cls, value, dim: int = 1) -> "CadlagPath":
        v = np.broadcast_to(np.asarray(value, dtype=float), (dim,))
        return cls.step([0.0], v[None, :])

    @classmethod
    def from_rows(cls, t, v, kind: str = STEP) -> "CadlagPath":
        """Build from a row listing; a repeated time encodes a jump (left row first)."""
        t = np.asarray(t, dtype=float)
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if np.any(np.diff(t) < 0):
            raise ValueError("row times must be nondecreasing")
        if kind == STEP:
            keep = np.append(t[1:] != t[:-1], True)
            return cls.step(t[keep], v[keep])
        starts = np.flatnonzero(np.append(True, t[1:] != t[:-1]))
        ends = np.append(starts[1:] - 1, t.size - 1)
        if np.any(ends - starts > 1):
            raise ValueError("at most two rows may share a time")
        return cls(t[starts], v[starts], v[ends], LINEAR)

    # evaluation

    @property
    def dim(self) -> int:
        return self.right.shape[1]

    def __call__(self, t):
        """Path value ``x(t)``; shape ``t.shape + (dim,)``, squeezed when ``dim == 1``."""
        t = np.asarray(t, dtype=float)
        tt = t.reshape(-1)
        k = self.knots
        i = np.clip(np.searchsorted(k, tt, side="right") - 1, 0, k.size - 1)
        out = np.array(self.right[i])
        inner = i < k.size - 1
        if np.any(inner):
            ii = i[inner]
            frac = (tt[inner] - k[ii]) / (k[ii + 1] - k[ii])
            out[inner] = self.right[ii] + frac[:, None] * (self.left[ii + 1] - self.right[ii])
        return self._shape(out, t.shape)

    def left_limit(self, t):
        """``x(t-)``; at ``t = 0`` this is ``x(0)``."""
        t = np.asarray(t, dtype=float)
        tt = t.reshape(-1)
        out = self._flat(self(tt))
        j = np.searchsorted(self.knots, tt, side="left")
        jc = np.minimum(j, self.knots.size - 1)
        at_knot = (j < self.knots.size) & (self.knots[jc] == tt)
        out[at_knot] = self.left[jc[at_knot]]
        return self._shape(out, t.shape)

    def _flat(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float).reshape(-1, self.dim).copy()

    def _shape(self, out, shape):
        out = out.reshape(tuple(shape) + (self.dim,))
        return out[..., 0] if self.dim == 1 else out

    @property
    def terminal(self) -> np.ndarray:
        """``x(1)`` as a vector of length ``dim``."""
        return np.array(self.right[-1])

    def component(self, j: int) -> "CadlagPath":
        return CadlagPath(self.knots, self.left[:, j], self.right[:, j], self.kind, dict(self.meta))

    # structural predicates

    @property
    def jump_sizes(self) -> np.ndarray:
        return np.asarray(self.right - self.left)

    def is_continuous(self) -> bool:
        return bool(np.all(self.left == self.right))

    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self._trace(), axis=0) >= 0))

    def is_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self._trace(), axis=0) <= 0))

    def is_monotone(self) -> bool:
        return self.is_nondecreasing() or self.is_nonincreasing()

    def _trace(self) -> np.ndarray:
        # left/right values in time order; monotonicity of a piecewise-linear
        # path is decided on this sequence
        return np.stack([self.left, self.right], axis=1).reshape(-1, self.dim)

    def rows(self):
        """``(t, values)`` rows; a jump of a linear path yields two rows with equal ``t``."""
        if self.kind == STEP:
            for t, v in zip(self.knots, self.right):
                yield float(t), v
            return
        for i, t in enumerate(self.knots):
            if i > 0 and np.any(self.left[i] != self.right[i]):
                yield float(t), self.left[i]
            yield float(t), self.right[i]
        if self.knots[-1] < 1.0:
            yield 1.0, self.right[-1]

    def __repr__(self) -> str:
        return f"CadlagPath(kind={self.kind!r}, dim={self.dim}, knots={self.knots.size})"


def write_cadlag_csv(path, x: CadlagPath) -> None:
    """Write ``x`` as CSV: a ``kind`` row, a header row, then ``t,value...`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", x.kind])
        w.writerow(["t"] + (["value"] if x.dim == 1 else [f"value_{j}" for j in range(x.dim)]))
        for t, v in x.rows():
            w.writerow([repr(t)] + [repr(float(c)) for c in v])


def read_cadlag_csv(path) -> CadlagPath:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 3 or rows[0][0] != "kind":
        raise ValueError(f"{path}: expected a 'kind' row, a header row and at least one data row")
    kind = rows[0][1].strip()
    data = np.array([[float(c) for c in r] for r in rows[2:]])
    return CadlagPath.from_rows(data[:, 0], data[:, 1:], kind)
