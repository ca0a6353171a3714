"""Weighted IFS on [0,1] and the grid discretization of their transfer operator.

A system has maps tau_i and weights u_i, given either per map or through a
weight function phi with u_i = phi o tau_i.  On a grid of n+1 nodes the
operator (P_u f)(x) = sum_i u_i(x) f(tau_i(x)) becomes a sparse nonnegative
matrix with at most 2d entries per row.

Systems may also carry a positive *conjugator* c and a scalar *scale* s; the
discrete operator is then s * diag(1/c) M diag(c), an exact similarity of
the plain matrix M.  Normalization and conjugation are expressed this way so
that the discrete spectrum, the Markov property and dual invariance carry
over without interpolation error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .expr import ExprAst, as_ast, compile_scalar, evaluate_array, validate_map_range, to_string
from .grid import (
    DEFAULT_N,
    EPS_POS,
    GridFunction,
    GridMeasure,
    check_n,
    interp_eval,
    locate,
    nodes,
)

Weight = Union[ExprAst, GridFunction]

SPECTRAL_TOL = 1e-10
MAX_ITER = 100_000
RAYLEIGH_TOL = 1e-8
CONCENTRATION_RATIO = 1e-6
MARKOV_TOL = 1e-8


class SystemError_(ValueError):
    """Invalid weighted system (bad maps or negative weights)."""


class MapRangeError(SystemError_):
    pass


class SpectralError(ArithmeticError):
    pass


def _weight(w) -> Weight:
    return w if isinstance(w, GridFunction) else as_ast(w)


@dataclass(frozen=True, eq=False)
class WeightedSystem:
    maps: tuple
    weights: tuple | None = None
    phi: Weight | None = None
    conjugator: GridFunction | None = None
    scale: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        maps = tuple(as_ast(m) for m in self.maps)
        if not maps:
            raise SystemError_("a system needs at least one map")
        object.__setattr__(self, "maps", maps)
        if (self.weights is None) == (self.phi is None):
            raise SystemError_("give exactly one of per-map weights or a weight function phi")
        if self.weights is not None:
            ws = tuple(_weight(w) for w in self.weights)
            if len(ws) != len(maps):
                raise SystemError_(f"{len(maps)} maps but {len(ws)} weights")
            object.__setattr__(self, "weights", ws)
        else:
            object.__setattr__(self, "phi", _weight(self.phi))
        if self.conjugator is not None and not np.all(self.conjugator.values > 0):
            raise SystemError_("conjugator must be strictly positive")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise SystemError_("scale must be positive and finite")
        sizes = {g.n for g in self._grid_parts()}
        if len(sizes) > 1:
            raise SystemError_(f"tabulated parts live on different grids: {sorted(sizes)}")

    @classmethod
    def per_map(cls, maps: Sequence, weights: Sequence) -> "WeightedSystem":
        return cls(tuple(maps), weights=tuple(weights))

    @classmethod
    def with_phi(cls, maps: Sequence, phi) -> "WeightedSystem":
        return cls(tuple(maps), phi=phi)

    @property
    def d(self) -> int:
        return len(self.maps)

    @property
    def weight_mode(self) -> str:
        return "per_map" if self.weights is not None else "weight_function"

    def _grid_parts(self):
        parts = list(self.weights or ()) + [self.phi, self.conjugator]
        return [p for p in parts if isinstance(p, GridFunction)]

    @property
    def grid_n(self) -> int | None:
        parts = self._grid_parts()
        return parts[0].n if parts else None

    def resolve_n(self, n: int | None = None) -> int:
        own = self.grid_n
        if n is None:
            return own or DEFAULT_N
        if own is not None and own != n:
            raise SystemError_(f"system is tabulated on n={own}, requested n={n}")
        return check_n(n)

    def describe(self) -> dict:
        out = {"maps": [to_string(m) for m in self.maps], "weight_mode": self.weight_mode}
        if self.weights is not None:
            out["weights"] = [
                "<tabulated>" if isinstance(w, GridFunction) else to_string(w) for w in self.weights
            ]
        else:
            out["phi"] = "<tabulated>" if isinstance(self.phi, GridFunction) else to_string(self.phi)
        out["conjugated"] = self.conjugator is not None
        out["scale"] = self.scale
        return out

    def discretize(self, n: int | None = None) -> "Discretization":
        n = self.resolve_n(n)
        if n not in self._cache:
            self._cache[n] = Discretization.build(self, n)
        return self._cache[n]

    # -- off-grid evaluation (simulation, orbit measures) --

    def map_at(self, i: int, x: float) -> float:
        return float(np.clip(evaluate_array(self.maps[i], x), 0.0, 1.0))

    def raw_weights_at(self, x: float) -> np.ndarray:
        if self.weights is not None:
            return np.array([_eval_weight(w, x) for w in self.weights])
        return np.array([_eval_weight(self.phi, self.map_at(i, x)) for i in range(self.d)])

    def weights_at(self, x: float) -> np.ndarray:
        """Effective branch weights at an arbitrary point (interpolating tables)."""
        u = self.raw_weights_at(x)
        if self.conjugator is not None:
            c = self.conjugator
            cx = interp_eval(c, x)
            u = u * np.array([interp_eval(c, self.map_at(i, x)) for i in range(self.d)]) / cx
        return self.scale * u


def _eval_weight(w: Weight, x):
    if isinstance(w, GridFunction):
        return interp_eval(w, x)
    return evaluate_array(w, x)


@dataclass(frozen=True, eq=False)
class Discretization:
    """Everything the grid operator needs, computed once per (system, n)."""

    n: int
    d: int
    tau: np.ndarray  # (d, n+1) map values at nodes
    left: np.ndarray  # (d, n+1) left interpolation node of tau
    theta: np.ndarray  # (d, n+1) offset from the left node
    branch: np.ndarray  # (d, n+1) effective weights u_i(x_j)
    kernels: tuple  # d sparse row-stochastic splitting matrices
    matrix: sp.csr_matrix

    @classmethod
    def build(cls, sys: WeightedSystem, n: int) -> "Discretization":
        xs = nodes(n)
        tau = np.empty((sys.d, n + 1))
        for i, m in enumerate(sys.maps):
            report = validate_map_range(m, n)
            if not report.ok:
                j, x, v = report.violations[0]
                raise MapRangeError(
                    f"map {i} '{to_string(m)}' leaves [0,1]: value {v!r} at x={x!r}"
                    f" ({len(report.violations)} offending nodes)"
                )
            tau[i] = np.clip(evaluate_array(m, xs), 0.0, 1.0)
        left, theta = locate(tau, n)

        if sys.weights is not None:
            raw = np.array([_tabulate(w, xs, n) for w in sys.weights])
        else:
            raw = np.array([_tabulate(sys.phi, tau[i], n) for i in range(sys.d)])
        raw = raw.reshape(sys.d, n + 1)
        if np.any(raw < 0) or not np.all(np.isfinite(raw)):
            i, j = np.argwhere((raw < 0) | ~np.isfinite(raw))[0]
            raise SystemError_(f"weight {i} is {raw[i, j]!r} at x={xs[j]!r}; weights must be >= 0")

        rows = np.arange(n + 1)
        right = np.minimum(left + 1, n)
        c = sys.conjugator.values if sys.conjugator is not None else None
        kernels = []
        branch = np.empty_like(raw)
        for i in range(sys.d):
            wl, wr = 1.0 - theta[i], theta[i].copy()
            if c is None:
                branch[i] = sys.scale * raw[i]
            else:
                cl, cr = wl * c[left[i]], wr * c[right[i]]
                ctau = cl + cr
                wl, wr = cl / ctau, cr / ctau
                branch[i] = sys.scale * raw[i] * ctau / c
            k = sp.coo_matrix(
                (np.concatenate([wl, wr]), (np.concatenate([rows, rows]), np.concatenate([left[i], right[i]]))),
                shape=(n + 1, n + 1),
            ).tocsr()
            k.eliminate_zeros()
            kernels.append(k)
        matrix = sum(sp.diags(branch[i]) @ kernels[i] for i in range(sys.d)).tocsr()
        return cls(n, sys.d, tau, left, theta, branch, tuple(kernels), matrix)

    @property
    def matrix_t(self) -> sp.csr_matrix:
        mt = self.__dict__.get("_mt")
        if mt is None:
            mt = self.matrix.T.tocsr()
            object.__setattr__(self, "_mt", mt)
        return mt


def _tabulate(w: Weight, pts: np.ndarray, n: int) -> np.ndarray:
    if isinstance(w, GridFunction):
        if w.n != n:
            raise SystemError_(f"tabulated weight on n={w.n}, grid n={n}")
        return np.asarray(interp_eval(w, pts))
    return evaluate_array(w, pts)


# --- operations ------------------------------------------------------------


def assemble_matrix(sys: WeightedSystem, n: int | None = None) -> sp.csr_matrix:
    """M[j,k] = sum_i u_i(x_j) * (interpolation weight of node k at tau_i(x_j))."""
    return sys.discretize(n).matrix


def apply_transfer(sys: WeightedSystem, f: GridFunction) -> GridFunction:
    return GridFunction(f.n, sys.discretize(f.n).matrix @ f.values)


def check_markov(sys: WeightedSystem, n: int | None = None) -> float:
    """sup over nodes of |P_u 1 - 1|."""
    return float(np.max(np.abs(sys.discretize(n).branch.sum(axis=0) - 1.0)))


@dataclass(frozen=True, eq=False)
class SpectralTriple:
    rho: float
    h: GridFunction
    nu: GridMeasure
    residual_h: float  # sup |M h - rho h| / rho, h with max 1
    residual_nu: float  # sup |M^T nu - rho nu| / (rho max nu)
    iterations_h: int
    iterations_nu: int
    rho_dual: float
    rayleigh: float
    converged: bool
    rho_stable: bool
    warnings: tuple = ()

    def summary(self) -> dict:
        return {
            "rho": self.rho,
            "rho_dual": self.rho_dual,
            "rayleigh": self.rayleigh,
            "residual_h": self.residual_h,
            "residual_nu": self.residual_nu,
            "iterations_h": self.iterations_h,
            "iterations_nu": self.iterations_nu,
            "converged": self.converged,
            "rho_stable": self.rho_stable,
            "h_min_over_max": float(self.h.values.min() / self.h.values.max()),
            "warnings": list(self.warnings),
        }


CHECK_EVERY = 16
FLUSH_BELOW = 1e-250


def _flush(v):
    # subnormal arithmetic is orders of magnitude slower; drop such entries
    v[v < FLUSH_BELOW] = 0.0
    return v


def _power_right(m, tol, max_iter):
    # Full residual checks every CHECK_EVERY steps; in between the iterate
    # is only rescaled by the last radius estimate.
    f = np.ones(m.shape[0])
    inv = 1.0
    rho = rho_prev = res = math.nan
    it = 0
    while it < max_iter:
        y = m @ f
        it += 1
        if it == 1 or it % CHECK_EVERY == 0 or it == max_iter:
            fmax = f.max()
            f = _flush(f / fmax)
            y = _flush(y / fmax)
            rho_prev, rho = rho, float(y.max())
            if not rho > 0:
                raise SpectralError("transfer matrix annihilates the iterate; no positive eigenvalue")
            res = float(np.max(np.abs(y - rho * f))) / rho
            if res <= tol:
                break
            inv = 1.0 / rho
        f = y * inv
    return f / f.max(), rho, res, it, abs(rho - rho_prev)


def _power_left(mt, tol, max_iter):
    nu = np.full(mt.shape[0], 1.0 / mt.shape[0])
    inv = 1.0
    rho = rho_prev = res = math.nan
    it = 0
    while it < max_iter:
        z = mt @ nu
        it += 1
        if it == 1 or it % CHECK_EVERY == 0 or it == max_iter:
            total = nu.sum()
            nu = _flush(nu / total)
            z = _flush(z / total)
            rho_prev, rho = rho, float(z.sum())
            if not rho > 0:
                raise SpectralError("dual iterate vanished; no positive eigenmeasure")
            res = float(np.max(np.abs(z - rho * nu)) / nu.max()) / rho
            if res <= tol:
                break
            inv = 1.0 / rho
        nu = z * inv
    return nu / nu.sum(), rho, res, it, abs(rho - rho_prev)


def spectral_triple(
    sys: WeightedSystem,
    n: int | None = None,
    tol: float = SPECTRAL_TOL,
    max_iter: int = MAX_ITER,
) -> SpectralTriple:
    """Perron data (rho, h, nu) of the discretized operator by power iteration.

    h is normalized to max 1, nu to total mass 1.  Non-convergence does not
    raise: the triple carries residuals above ``tol`` and a warning.
    """
    disc = sys.discretize(n)
    m = disc.matrix
    if not np.any(m.sum(axis=1) > 0):
        raise SpectralError("every row of the transfer matrix is zero")
    h, rho, res_h, it_h, drho_h = _power_right(m, tol, max_iter)
    nu, rho_nu, res_nu, it_nu, _ = _power_left(disc.matrix_t, tol, max_iter)

    notes = []
    converged = res_h <= tol and res_nu <= tol
    if not converged:
        notes.append(
            f"power iteration stopped at residuals h={res_h:.3g}, nu={res_nu:.3g} (tol {tol:g})"
        )
    rho_stable = res_h <= tol or drho_h <= max(tol, 1e-12) * rho
    if not rho_stable:
        notes.append("spectral radius estimate still moving at the last iteration")
    denom = float(nu @ h)
    rayleigh = float(nu @ (m @ h)) / denom if denom > 0 else math.nan
    if not (abs(rayleigh - rho) <= RAYLEIGH_TOL * rho):
        notes.append(
            f"Rayleigh quotient {rayleigh!r} disagrees with sup-norm ratio {rho!r}; "
            "discretization is likely not primitive"
        )
    if h.min() < CONCENTRATION_RATIO * h.max():
        notes.append(
            f"eigenfunction concentrates (min/max = {h.min() / h.max():.3g}); "
            "no positive continuous eigenfunction is resolved"
        )
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    nu = np.clip(nu, 0.0, None)
    return SpectralTriple(
        rho=rho,
        h=GridFunction(disc.n, h),
        nu=GridMeasure(disc.n, nu / nu.sum()),
        residual_h=res_h,
        residual_nu=res_nu,
        iterations_h=it_h,
        iterations_nu=it_nu,
        rho_dual=rho_nu,
        rayleigh=rayleigh,
        converged=converged,
        rho_stable=rho_stable,
        warnings=tuple(notes),
    )


def conjugate_system(sys: WeightedSystem, h: GridFunction, scale: float = 1.0) -> WeightedSystem:
    """Weights u_i(x) h(tau_i(x)) / h(x), optionally rescaled.

    The discrete operator becomes diag(1/h) M diag(h) * scale, so its spectrum
    is that of M times ``scale``.
    """
    if not np.all(h.values > 0) or not np.all(np.isfinite(h.values)):
        raise SystemError_("conjugating function must be strictly positive")
    n = sys.resolve_n(h.n)
    vals = h.values
    if np.all(vals == vals[0]):
        conj = sys.conjugator
    elif sys.conjugator is None:
        conj = h
    else:
        conj = GridFunction(n, sys.conjugator.values * vals)
    return WeightedSystem(
        sys.maps,
        weights=sys.weights,
        phi=sys.phi,
        conjugator=conj,
        scale=sys.scale * scale,
    )


def normalize_system(sys: WeightedSystem, triple: SpectralTriple):
    """Return the Markov system v_i = u_i (h o tau_i) / (rho h) and mu = h nu.

    The result is ``(system, mu)``; tabulated v is available from
    ``system.discretize().branch``.
    """
    h = triple.h
    if not np.all(h.values > EPS_POS) or not np.all(np.isfinite(h.values)):
        raise SpectralError(
            "eigenfunction is not strictly positive on the grid "
            f"(min {h.values.min():.3g}); the system is not rho-weighted at this resolution"
        )
    v = conjugate_system(sys, h, scale=1.0 / triple.rho)
    mu = GridMeasure.normalized(h.n, h.values * triple.nu.weights)
    defect = check_markov(v, h.n)
    if defect > MARKOV_TOL:
        warnings.warn(f"normalized system has Markov defect {defect:.3g}", RuntimeWarning, stacklevel=2)
    return v, mu


def tabulated_system(sys: WeightedSystem, weights: np.ndarray, n: int | None = None) -> WeightedSystem:
    """Plain per-map system on the same maps with node-tabulated weights."""
    n = sys.resolve_n(n) if n is None else n
    return WeightedSystem(sys.maps, weights=tuple(GridFunction(n, w) for w in weights))


def scalar_functions(sys: WeightedSystem, n: int | None = None):
    """Fast scalar callables ``(maps, weights)`` for simulation loops.

    ``weights(x)`` returns the list of effective branch weights at x.
    """
    maps = [compile_scalar(m) for m in sys.maps]
    d = sys.d
    if sys.conjugator is None and not sys._grid_parts():
        if sys.weights is not None:
            ws = [compile_scalar(w) for w in sys.weights]
            s = sys.scale

            def weights(x):
                return [s * w(x) for w in ws]

        else:
            phi = compile_scalar(sys.phi)
            s = sys.scale

            def weights(x):
                return [s * phi(min(1.0, max(0.0, t(x)))) for t in maps]

        return maps, weights

    disc = sys.discretize(n)
    tab = [list(disc.branch[i]) for i in range(d)]
    nn = disc.n

    def weights(x):
        t = x * nn
        j = min(int(t), nn - 1)
        th = t - j
        return [(1.0 - th) * row[j] + th * row[j + 1] for row in tab]

    return maps, weights
