"""Uniform grids on [0,1]: piecewise-linear functions and node measures."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_N = 1024
RANGE_TOL = 1e-12
EPS_POS = 1e-300
MASS_TOL = 1e-12


def check_n(n: int) -> int:
    if int(n) != n or n < 2 or n % 2:
        raise ValueError(f"grid size n must be an even integer >= 2, got {n!r}")
    return int(n)


def nodes(n: int) -> np.ndarray:
    return np.arange(check_n(n) + 1) / n


def clamp_unit(x, tol: float = RANGE_TOL):
    """Clamp values within ``tol`` of [0,1]; anything further out is an error."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -tol) or np.any(arr > 1 + tol) or np.any(np.isnan(arr)):
        bad = arr[(arr < -tol) | (arr > 1 + tol) | np.isnan(arr)]
        raise ValueError(f"point {float(bad.flat[0])!r} outside [0, 1]")
    out = np.clip(arr, 0.0, 1.0)
    return float(out) if np.ndim(x) == 0 else out


def locate(x, n: int):
    """Left node index and fractional offset of points in [0,1].

    Points that sit on a node up to rounding get offset exactly 0 there, so
    interpolation is exact at nodes.
    """
    t = np.asarray(clamp_unit(x), dtype=float) * n
    r = np.rint(t)
    t = np.where(np.abs(t - r) <= 8 * np.finfo(float).eps * np.maximum(t, 1.0), r, t)
    j = np.minimum(np.floor(t), n - 1).astype(np.int64)
    theta = t - j
    return j, theta


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Node values of a continuous piecewise-linear function, x_j = j/n."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        check_n(self.n)
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} node values, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, fn, n: int = DEFAULT_N) -> "GridFunction":
        return cls(n, np.asarray(fn(nodes(n)), dtype=float) * np.ones(n + 1))

    @classmethod
    def constant(cls, c: float, n: int = DEFAULT_N) -> "GridFunction":
        return cls(n, np.full(n + 1, float(c)))

    @property
    def x(self) -> np.ndarray:
        return nodes(self.n)

    def is_positive(self, eps: float = EPS_POS) -> bool:
        return bool(np.all(self.values >= eps))

    def __call__(self, x):
        return interp_eval(self, x)

    def to_csv(self, path, column: str = "value") -> None:
        write_csv(path, ("x", column), zip(self.x, self.values))


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Probability weights on the nodes of a uniform grid."""

    n: int
    weights: np.ndarray

    def __post_init__(self):
        check_n(self.n)
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} node weights, got shape {w.shape}")
        if np.any(w < 0):
            raise ValueError("measure weights must be nonnegative")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"measure weights sum to {w.sum()!r}, not 1")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, n: int, weights) -> "GridMeasure":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(n, w / w.sum())

    @classmethod
    def uniform(cls, n: int = DEFAULT_N) -> "GridMeasure":
        return cls(n, np.full(n + 1, 1.0 / (n + 1)))

    @classmethod
    def delta(cls, j: int, n: int = DEFAULT_N) -> "GridMeasure":
        w = np.zeros(n + 1)
        w[j] = 1.0
        return cls(n, w)

    @property
    def x(self) -> np.ndarray:
        return nodes(self.n)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def to_csv(self, path, column: str = "weight") -> None:
        write_csv(path, ("x", column), zip(self.x, self.weights))


def interp_eval(f: GridFunction, x):
    """Piecewise-linear interpolation of ``f``; scalar in, scalar out."""
    j, theta = locate(x, f.n)
    v = f.values
    out = (1.0 - theta) * v[j] + theta * v[np.minimum(j + 1, f.n)]
    return float(out) if np.ndim(x) == 0 else out


def integrate(f: GridFunction, m: GridMeasure) -> float:
    if f.n != m.n:
        raise ValueError(f"grid mismatch: function n={f.n}, measure n={m.n}")
    return float(np.dot(m.weights, f.values))


def pushforward_node_split(x, mass, n: int):
    """Split point masses at ``x`` between their two neighbouring nodes.

    Returns ``(left, right, left_mass, right_mass)``; the transpose of
    linear interpolation.
    """
    j, theta = locate(x, n)
    mass = np.asarray(mass, dtype=float)
    if np.any(mass < 0):
        raise ValueError("mass must be nonnegative")
    return j, np.minimum(j + 1, n), mass * (1.0 - theta), mass * theta


def pushforward(points, masses, n: int) -> np.ndarray:
    """Accumulate point masses onto node weights (no normalization)."""
    left, right, ml, mr = pushforward_node_split(np.ravel(points), np.ravel(masses), n)
    out = np.zeros(n + 1)
    np.add.at(out, left, ml)
    np.add.at(out, right, mr)
    return out


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".15g")
