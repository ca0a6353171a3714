"""Monte Carlo realization of the Markov chain of a weighted IFS."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import depends_on_x, evaluate_array
from .grid import GridFunction, GridMeasure, write_csv
from .holonomic import TestFunction, evaluate_function
from .transfer import MARKOV_TOL, WeightedSystem, check_markov, scalar_functions

LIPSCHITZ_SAMPLES = 1024


class SimulationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    """x_0 .. x_N and the symbols i_0 .. i_{N-1} with x_{t+1} = tau_{i_t}(x_t).

    Generated by numpy's PCG64 seeded with ``seed``.
    """

    seed: int
    x0: float
    states: np.ndarray
    symbols: np.ndarray
    warnings: tuple = ()

    @property
    def length(self) -> int:
        return len(self.symbols)

    def to_csv(self, path, thin: int = 1) -> None:
        if thin < 1:
            raise ValueError("thin must be >= 1")
        t = np.arange(0, self.length, thin)
        write_csv(path, ("t", "x", "i"), zip(t, self.states[t], self.symbols[t]))


def _hypothesis_notes(sys: WeightedSystem, n: int | None) -> list[str]:
    notes = []
    xs = np.arange(LIPSCHITZ_SAMPLES + 1) / LIPSCHITZ_SAMPLES
    for i, m in enumerate(sys.maps):
        lip = float(np.max(np.abs(np.diff(evaluate_array(m, xs)))) * LIPSCHITZ_SAMPLES)
        if lip >= 1.0:
            notes.append(f"map {i} is not a contraction (sampled Lipschitz constant {lip:.3g})")
    low = float(sys.discretize(n).branch.min())
    if low <= 0.0:
        notes.append(f"branch weights are not bounded away from 0 (minimum {low:.3g})")
    return notes


def _constant_weights(sys: WeightedSystem):
    if sys.weights is None or sys.conjugator is not None:
        return None
    if any(isinstance(w, GridFunction) or depends_on_x(w) for w in sys.weights):
        return None
    return sys.scale * np.array([float(evaluate_array(w, 0.0)) for w in sys.weights])


def chaos_game(sys: WeightedSystem, x0: float, N: int, seed: int, n: int | None = None,
               check: bool = True) -> Trajectory:
    """Sample N steps of the chain started at x0.

    Each step draws one uniform u and takes the first symbol whose cumulative
    weight exceeds u (inverse CDF).
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    if not 0.0 <= x0 <= 1.0:
        raise SimulationError(f"x0={x0!r} outside [0, 1]")
    notes = []
    if check:
        defect = check_markov(sys, n)
        if defect > MARKOV_TOL:
            raise SimulationError(f"system is not Markov (defect {defect:.3g})")
        notes = _hypothesis_notes(sys, n)
        for note in notes:
            warnings.warn(note, RuntimeWarning, stacklevel=2)

    rng = np.random.default_rng(seed)
    u = rng.random(N)
    maps, weights = scalar_functions(sys, n)
    d = sys.d
    const = _constant_weights(sys)
    states = [float(x0)]
    x = float(x0)
    if const is not None:
        if np.any(const < 0):
            raise SimulationError("negative branch weight")
        cdf = np.cumsum(const)
        symbols = np.minimum(np.searchsorted(cdf, u, side="right"), d - 1)
        append = states.append
        for i in symbols.tolist():
            x = min(1.0, max(0.0, maps[i](x)))
            append(x)
    else:
        out = []
        for ut in u.tolist():
            w = weights(x)
            if min(w) < 0:
                raise SimulationError(f"negative branch weight {min(w)!r} at x={x!r}")
            acc = 0.0
            i = d - 1
            for k, wk in enumerate(w):
                acc += wk
                if ut < acc:
                    i = k
                    break
            out.append(i)
            x = min(1.0, max(0.0, maps[i](x)))
            states.append(x)
        symbols = np.array(out, dtype=np.int64)
    return Trajectory(
        seed=int(seed),
        x0=float(x0),
        states=np.array(states),
        symbols=np.asarray(symbols, dtype=np.int64),
        warnings=tuple(notes),
    )


def run_trajectories(sys: WeightedSystem, x0: float, N: int, base_seed: int, count: int,
                     n: int | None = None) -> list[Trajectory]:
    """Independent trajectories with seeds base_seed + k."""
    check = True
    out = []
    for k in range(count):
        out.append(chaos_game(sys, x0, N, base_seed + k, n, check=check))
        check = False
    return out


def birkhoff_average(traj: Trajectory, f: TestFunction, burn_in: int | None = None) -> float:
    """Mean of f(x_t) for burn_in <= t < N; default burn_in is N // 100."""
    N = traj.length
    if burn_in is None:
        burn_in = N // 100
    if not 0 <= burn_in < N:
        raise ValueError(f"burn_in must lie in [0, {N})")
    return float(np.mean(evaluate_function(f, traj.states[burn_in:N])))


def cylinder_probability(sys: WeightedSystem, x: float, prefix: Sequence[int]) -> float:
    """u_{i_1}(x) u_{i_2}(tau_{i_1} x) ... u_{i_n}(tau_{i_{n-1}} ... tau_{i_1} x).

    Each weight is taken at the point the chain occupies when it chooses
    that symbol, so the probabilities of all words of a given length sum to
    one for a Markov system.
    """
    p = 1.0
    y = float(x)
    for i in prefix:
        if not 0 <= i < sys.d:
            raise ValueError(f"digit {i} out of range for d={sys.d}")
        p *= float(sys.weights_at(y)[i])
        y = sys.map_at(i, y)
    return p


@dataclass(frozen=True)
class Histogram:
    masses: np.ndarray  # probability per bin, bins of width 1/len(masses)

    @property
    def bins(self) -> int:
        return len(self.masses)

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.bins + 1) / self.bins


def bin_grid_measure(m: GridMeasure, bins: int) -> Histogram:
    """Bin masses of a node measure read as a piecewise-linear density.

    Interior nodes on a bin edge give half their mass to each side.
    """
    if m.n % bins:
        raise ValueError(f"bins={bins} must divide the grid size n={m.n}")
    per = m.n // bins
    w = m.weights
    out = np.zeros(bins)
    j = np.arange(m.n + 1)
    b = np.minimum(j // per, bins - 1)
    edge = (j % per == 0) & (j > 0) & (j < m.n)
    np.add.at(out, b[~edge], w[~edge])
    np.add.at(out, b[edge], 0.5 * w[edge])
    np.add.at(out, b[edge] - 1, 0.5 * w[edge])
    return Histogram(out)


def histogram(states: np.ndarray, bins: int) -> Histogram:
    idx = np.minimum((np.asarray(states) * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    return Histogram(counts / counts.sum())


@dataclass(frozen=True)
class EmpiricalReport:
    histogram: Histogram
    l1: float | None


def empirical_measure(traj: Trajectory, bins: int, reference: GridMeasure | Histogram | None = None,
                      burn_in: int = 0) -> EmpiricalReport:
    """Histogram of the visited states and its L1 distance to ``reference``."""
    if bins < 1:
        raise ValueError("bins must be positive")
    h = histogram(traj.states[burn_in:traj.length], bins)
    l1 = None
    if reference is not None:
        ref = reference if isinstance(reference, Histogram) else bin_grid_measure(reference, bins)
        if ref.bins != bins:
            raise ValueError("reference has a different number of bins")
        l1 = float(np.abs(h.masses - ref.masses).sum())
    return EmpiricalReport(h, l1)
