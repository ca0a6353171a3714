"""Holonomic probabilities on [0,1] x Sigma.

Two concrete kinds are supported:

* :class:`OrbitMeasure` -- uniform atoms along a cycle of the skew map
  (x, w) -> (tau_{w_1}(x), sigma(w)) whose x-coordinates return to the start.
  The words need not return, which is what makes these measures holonomic
  without being invariant.
* :class:`LiftedMeasure` -- a stationary node measure of a Markov system
  together with the path measures it induces.  On the grid the path after
  branch i from node x_j continues from a node drawn with the system's
  splitting kernel, so integrals of f(tau_i(x)) use that kernel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .expr import ExprAst, as_ast, evaluate_array
from .grid import GridFunction, GridMeasure, interp_eval
from .transfer import MARKOV_TOL, WeightedSystem, _power_left, check_markov

ATOM_TOL = 1e-9
ORBIT_TOL = 1e-12
INVARIANCE_TOL = 1e-8

TestFunction = Union[GridFunction, ExprAst, str, Callable]


class HolonomicError(ValueError):
    pass


class OrbitError(HolonomicError):
    def __init__(self, defect: float):
        self.defect = defect
        super().__init__(f"orbit does not return: |Z_n(x0, w) - x0| = {defect:.3g}")


# --- words -----------------------------------------------------------------


def _digits(s) -> tuple[int, ...]:
    if isinstance(s, str):
        return tuple(int(c) for c in s if not c.isspace())
    return tuple(int(c) for c in s)


@dataclass(frozen=True)
class Word:
    """Eventually periodic point ``preperiod + period period ...`` of Sigma."""

    preperiod: tuple = ()
    period: tuple = (0,)

    def __post_init__(self):
        pre, per = _digits(self.preperiod), _digits(self.period)
        if not per:
            raise ValueError("period must be nonempty")
        if any(c < 0 for c in pre + per):
            raise ValueError("digits must be nonnegative")
        object.__setattr__(self, "preperiod", pre)
        object.__setattr__(self, "period", per)

    @classmethod
    def parse(cls, period, preperiod="") -> "Word":
        return cls(_digits(preperiod), _digits(period))

    def digit(self, k: int) -> int:
        """X_k(w), 1-based."""
        if k < 1:
            raise IndexError("digits are indexed from 1")
        if k <= len(self.preperiod):
            return self.preperiod[k - 1]
        return self.period[(k - 1 - len(self.preperiod)) % len(self.period)]

    @property
    def head(self) -> int:
        return self.digit(1)

    def prefix(self, n: int) -> tuple:
        return tuple(self.digit(k) for k in range(1, n + 1))

    def shift(self, times: int = 1) -> "Word":
        w = self
        for _ in range(times):
            if w.preperiod:
                w = Word(w.preperiod[1:], w.period)
            else:
                w = Word((), w.period[1:] + w.period[:1])
        return w

    def max_digit(self) -> int:
        return max(self.preperiod + self.period)

    def canonical(self) -> "Word":
        """Shortest representation of the same sequence."""
        per = self.period
        for k in range(1, len(per) + 1):
            if len(per) % k == 0 and per[:k] * (len(per) // k) == per:
                per = per[:k]
                break
        pre = self.preperiod
        while pre and pre[-1] == per[-1]:
            pre = pre[:-1]
            per = per[-1:] + per[:-1]
        return Word(pre, per)

    def same_sequence(self, other: "Word") -> bool:
        return self.canonical() == other.canonical()

    def starts_with(self, cylinder: Sequence[int]) -> bool:
        return all(self.digit(k + 1) == c for k, c in enumerate(cylinder))

    def __str__(self):
        pre = "".join(map(str, self.preperiod))
        return f"{pre}({''.join(map(str, self.period))})"


# --- measures --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrbitMeasure:
    system: WeightedSystem
    atoms: tuple  # ((x, Word), ...)

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def weight(self) -> float:
        return 1.0 / len(self.atoms)

    @property
    def xs(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def words(self) -> list:
        return [a[1] for a in self.atoms]

    def to_json(self) -> dict:
        return {
            "kind": "orbit",
            "atoms": [
                {"x": x, "preperiod": "".join(map(str, w.preperiod)), "period": "".join(map(str, w.period))}
                for x, w in self.atoms
            ],
            "weight": self.weight,
        }


@dataclass(frozen=True, eq=False)
class LiftedMeasure:
    system: WeightedSystem
    base: GridMeasure

    @property
    def n(self) -> int:
        return self.base.n

    def to_json(self, measure_csv: str | None = None) -> dict:
        return {"kind": "lifted", "system": self.system.describe(), "measure_csv": measure_csv}


HolonomicMeasure = Union[OrbitMeasure, LiftedMeasure]


def measure_to_json(m: HolonomicMeasure) -> str:
    return json.dumps(m.to_json(), sort_keys=True)


# --- construction ----------------------------------------------------------


def branch(sys: WeightedSystem, x0: float, w: Word, n: int) -> float:
    """Z_n(x0, w) = tau_{w_n} o ... o tau_{w_1}(x0)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = float(x0)
    for k in range(1, n + 1):
        x = sys.map_at(_check_digit(sys, w.digit(k)), x)
    return x


def _check_digit(sys, i):
    if not 0 <= i < sys.d:
        raise HolonomicError(f"digit {i} out of range for a system with {sys.d} maps")
    return i


def make_orbit_measure(sys: WeightedSystem, x0: float, w: Word, n: int) -> OrbitMeasure:
    """Uniform measure on (Z_j(x0, w), sigma^j w), j = 0..n-1."""
    if n < 1:
        raise ValueError("orbit length must be >= 1")
    if w.max_digit() >= sys.d:
        raise HolonomicError(f"word {w} uses digits >= d = {sys.d}")
    atoms = []
    x, word = float(x0), w
    for _ in range(n):
        atoms.append((x, word))
        x = sys.map_at(word.head, x)
        word = word.shift()
    defect = abs(x - x0)
    if defect > ORBIT_TOL:
        raise OrbitError(defect)
    return OrbitMeasure(sys, tuple(atoms))


def find_periodic_point(sys: WeightedSystem, digits: Sequence[int]) -> float:
    """A point with Z_n(x, digits...) = x, found by bracketing on [0,1]."""
    w = Word((), _digits(digits))
    n = len(w.period)

    def gap(x):
        return branch(sys, x, w, n) - x

    lo, hi = gap(0.0), gap(1.0)
    if lo == 0.0:
        return 0.0
    if hi == 0.0:
        return 1.0
    return brentq(gap, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def lift(system: WeightedSystem, base: GridMeasure | None = None, n: int | None = None,
         tol: float = 1e-12, max_iter: int = 100_000) -> LiftedMeasure:
    """Holonomic lifting of a stationary measure of a Markov system.

    Without ``base`` the stationary measure is computed by power iteration.
    """
    n = system.resolve_n(base.n if base is not None else n)
    defect = check_markov(system, n)
    if defect > MARKOV_TOL:
        raise HolonomicError(f"system is not Markov (defect {defect:.3g})")
    if base is None:
        nu, _, _, _, _ = _power_left(system.discretize(n).matrix_t, tol, max_iter)
        base = GridMeasure.normalized(n, nu)
    m = LiftedMeasure(system, base)
    inv = stationarity_defect(m)
    if inv > INVARIANCE_TOL:
        raise HolonomicError(f"base measure is not stationary (defect {inv:.3g})")
    return m


def stationarity_defect(m: LiftedMeasure) -> float:
    """sup-norm of P_v* nu - nu on the nodes."""
    mt = m.system.discretize(m.n).matrix_t
    return float(np.max(np.abs(mt @ m.base.weights - m.base.weights)))


# --- evaluation helpers ----------------------------------------------------


def evaluate_function(f: TestFunction, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if isinstance(f, GridFunction):
        return np.asarray(interp_eval(f, xs), dtype=float)
    if callable(f):
        return np.asarray(f(xs), dtype=float) * np.ones_like(xs)
    return evaluate_array(as_ast(f), xs)


def _node_values(f: TestFunction, n: int) -> np.ndarray:
    if isinstance(f, GridFunction):
        if f.n != n:
            raise ValueError(f"test function on n={f.n}, measure on n={n}")
        return np.asarray(f.values)
    return evaluate_function(f, np.arange(n + 1) / n)


def _after_branch(m: LiftedMeasure, i: int, fvals: np.ndarray) -> np.ndarray:
    """Expected f at the successor node given branch i, for every node."""
    return m.system.discretize(m.n).kernels[i] @ fvals


# --- operations ------------------------------------------------------------


def integrate_holonomic(m: HolonomicMeasure, f: TestFunction) -> float:
    """Integral of f(x) against the measure."""
    if isinstance(m, OrbitMeasure):
        return float(np.mean(evaluate_function(f, m.xs)))
    return float(np.dot(m.base.weights, _node_values(f, m.n)))


def holonomy_defect(m: HolonomicMeasure, tests: Sequence[TestFunction]) -> float:
    """max over tests of |int f(tau_{X_1(w)}(x)) dm - int f dm|."""
    if not tests:
        raise ValueError("need at least one test function")
    worst = 0.0
    for f in tests:
        if isinstance(m, OrbitMeasure):
            moved = np.array([m.system.map_at(w.head, x) for x, w in m.atoms])
            val = np.mean(evaluate_function(f, moved)) - np.mean(evaluate_function(f, m.xs))
        else:
            fv = _node_values(f, m.n)
            br = m.system.discretize(m.n).branch
            pushed = sum(br[i] * _after_branch(m, i, fv) for i in range(m.system.d))
            val = np.dot(m.base.weights, pushed - fv)
        worst = max(worst, abs(float(val)))
    return worst


def cylinder_vector(m: LiftedMeasure, cylinder: Sequence[int]) -> np.ndarray:
    """Path probability of the cylinder [c_1 ... c_k] started at each node."""
    disc = m.system.discretize(m.n)
    p = np.ones(m.n + 1)
    for c in reversed(tuple(cylinder)):
        p = disc.branch[_check_digit(m.system, c)] * (disc.kernels[c] @ p)
    return p


def sigma_invariance_defect(m: HolonomicMeasure, f: TestFunction | None = None,
                            cylinder: Sequence[int] = ()) -> float:
    """|int g o sigma_hat - int g| for g(x, w) = f(x) * 1[w starts with cylinder]."""
    cylinder = tuple(cylinder)
    if isinstance(m, OrbitMeasure):
        xs = m.xs
        moved = np.array([m.system.map_at(w.head, x) for x, w in m.atoms])
        ind = np.array([w.starts_with(cylinder) for w in m.words], dtype=float)
        ind_moved = np.array([w.shift().starts_with(cylinder) for w in m.words], dtype=float)
        fx = np.ones_like(xs) if f is None else evaluate_function(f, xs)
        fm = np.ones_like(xs) if f is None else evaluate_function(f, moved)
        return abs(float(np.mean(fm * ind_moved) - np.mean(fx * ind)))
    fv = np.ones(m.n + 1) if f is None else _node_values(f, m.n)
    g = fv * cylinder_vector(m, cylinder)
    br = m.system.discretize(m.n).branch
    moved = sum(br[i] * _after_branch(m, i, g) for i in range(m.system.d))
    return abs(float(np.dot(m.base.weights, moved - g)))


@dataclass(frozen=True, eq=False)
class Disintegration:
    points: np.ndarray  # support points y
    marginal: np.ndarray  # mass at each y
    weights: np.ndarray  # (d, len(points)) branch weights u_i(y)
    measure: GridMeasure | None = None  # node measure for lifted inputs

    def weight_sums(self) -> np.ndarray:
        return self.weights.sum(axis=0)


def _group(xs: np.ndarray, tol: float = ATOM_TOL):
    """Cluster labels for points closer than ``tol`` (single linkage on sorted x)."""
    order = np.argsort(xs, kind="stable")
    labels = np.empty(len(xs), dtype=int)
    reps = []
    for idx in order:
        if reps and xs[idx] - xs[reps[-1][-1]] <= tol:
            reps[-1].append(idx)
        else:
            reps.append([idx])
        labels[idx] = len(reps) - 1
    centers = np.array([xs[r[0]] for r in reps])
    return labels, centers


def disintegrate(m: HolonomicMeasure) -> Disintegration:
    """Marginal on [0,1] and branch weights u_i(y) = mass(first symbol i | x = y)."""
    if isinstance(m, LiftedMeasure):
        br = m.system.discretize(m.n).branch
        return Disintegration(m.base.x, np.asarray(m.base.weights), np.array(br), m.base)
    labels, centers = _group(m.xs)
    d = m.system.d
    mass = np.zeros(len(centers))
    by_symbol = np.zeros((d, len(centers)))
    for (x, w), lab in zip(m.atoms, labels):
        mass[lab] += m.weight
        by_symbol[w.head, lab] += m.weight
    return Disintegration(centers, mass, by_symbol / mass)


def push_atoms(points: np.ndarray, masses: np.ndarray, weights: np.ndarray,
               sys: WeightedSystem) -> tuple[np.ndarray, np.ndarray]:
    """Image of an atomic measure under P* for branch weights ``weights[i, k]``."""
    out_x, out_m = [], []
    for k, (y, mass) in enumerate(zip(points, masses)):
        for i in range(sys.d):
            if weights[i, k] > 0:
                out_x.append(sys.map_at(i, y))
                out_m.append(mass * weights[i, k])
    return np.array(out_x), np.array(out_m)


def atomic_l1(xa, ma, xb, mb, tol: float = ATOM_TOL) -> float:
    """L1 distance between two atomic measures, merging points within ``tol``."""
    xs = np.concatenate([xa, xb])
    ms = np.concatenate([ma, -np.asarray(mb)])
    labels, centers = _group(xs, tol)
    acc = np.zeros(len(centers))
    np.add.at(acc, labels, ms)
    return float(np.abs(acc).sum())


def marginal_pushforward_defect(m: HolonomicMeasure) -> float:
    """L1 distance between the marginal and its image under its own disintegration."""
    dis = disintegrate(m)
    if isinstance(m, LiftedMeasure):
        mt = m.system.discretize(m.n).matrix_t
        return float(np.abs(mt @ dis.marginal - dis.marginal).sum())
    px, pm = push_atoms(dis.points, dis.marginal, dis.weights, m.system)
    return atomic_l1(px, pm, dis.points, dis.marginal)


def holonomic_inequality_defect(m: HolonomicMeasure, f: TestFunction) -> float:
    """sum_i int f(tau_i(x)) dm - int f dm; nonnegative for holonomic m and f >= 0."""
    if isinstance(m, OrbitMeasure):
        xs = m.xs
        fx = evaluate_function(f, xs)
        if np.any(fx < 0):
            raise ValueError("f must be nonnegative")
        images = sum(evaluate_function(f, [m.system.map_at(i, x) for x in xs]) for i in range(m.system.d))
        return float(np.mean(images) - np.mean(fx))
    fv = _node_values(f, m.n)
    if np.any(fv < 0):
        raise ValueError("f must be nonnegative")
    images = sum(_after_branch(m, i, fv) for i in range(m.system.d))
    return float(np.dot(m.base.weights, images - fv))


def orbit_from_spec(sys: WeightedSystem, spec: dict) -> OrbitMeasure:
    """Build an orbit measure from ``{x0?, preperiod?, period, n?}``.

    Without x0 the fixed point of the first n digits is located numerically;
    the default n is the preperiod length, or the period length when there is
    no preperiod.
    """
    w = Word.parse(spec["period"], spec.get("preperiod", ""))
    n = int(spec.get("n") or (len(w.preperiod) or len(w.period)))
    x0 = spec.get("x0")
    if x0 is None:
        x0 = find_periodic_point(sys, w.prefix(n))
    if not math.isfinite(float(x0)):
        raise ValueError("x0 must be finite")
    return make_orbit_measure(sys, float(x0), w, n)
