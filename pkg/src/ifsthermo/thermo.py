"""Entropy, pressure and equilibrium states of holonomic probabilities."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .expr import BinOp, ExprAst, Num, as_ast, evaluate_array, to_string
from .grid import GridFunction, GridMeasure, interp_eval, write_csv
from .holonomic import (
    ATOM_TOL,
    HolonomicMeasure,
    LiftedMeasure,
    OrbitMeasure,
    _group,
    atomic_l1,
    disintegrate,
    push_atoms,
)
from .transfer import (
    MAX_ITER,
    SPECTRAL_TOL,
    SpectralTriple,
    WeightedSystem,
    normalize_system,
    spectral_triple,
)

ENTROPY_TOL = 1e-8
ENTROPY_MAX_ITER = 5000
ARMIJO_C = 1e-4
EQUILIBRIUM_TOL = 1e-3
MATCH_TOL = 1e-6


class ThermoError(ValueError):
    pass


@dataclass(frozen=True)
class EntropyReport:
    value: float
    method: str  # "inf_formula" | "alt_formula"
    iterations: int = 0
    final_gradient_norm: float = 0.0
    converged: bool = True
    psi: str | None = None
    warnings: tuple = ()

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "iterations": self.iterations,
            "final_gradient_norm": self.final_gradient_norm,
            "converged": self.converged,
            "psi": self.psi,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class PressureReport:
    value: float
    method: str  # "spectral" | "variational"
    rho: float | None = None
    argmax: int | None = None
    candidate_values: tuple = ()
    converged: bool = True
    warnings: tuple = ()
    entropy_method: str | None = None

    def to_json(self) -> dict:
        out = {"value": self.value, "method": self.method, "converged": self.converged,
               "warnings": list(self.warnings)}
        if self.method == "spectral":
            out["rho"] = self.rho
        else:
            out["argmax"] = self.argmax
            out["candidate_values"] = list(self.candidate_values)
            out["entropy_method"] = self.entropy_method
        return out


# --- inf-formula entropy ---------------------------------------------------


def _psi_values(psi, xs) -> np.ndarray:
    if psi is None:
        return np.ones(len(xs))
    if isinstance(psi, GridFunction):
        vals = np.asarray(interp_eval(psi, np.asarray(xs, dtype=float)), dtype=float)
    else:
        vals = evaluate_array(as_ast(psi), np.asarray(xs, dtype=float))
    return vals


def _psi_label(psi) -> str:
    if psi is None:
        return "1"
    if isinstance(psi, GridFunction):
        return "<tabulated>"
    return to_string(as_ast(psi))


@dataclass
class _Problem:
    """J(g) = sum_r mass_r [ln sum_k A_rk e^{g_k} - ln psi_r - g_{self_r}]."""

    mass: np.ndarray  # (R,)
    self_idx: np.ndarray  # (R,) variable index of the row's own point
    a: sp.csr_matrix  # (R, K) positive coefficients
    log_psi: np.ndarray  # (R,)
    var_mass: np.ndarray = field(init=False)

    def __post_init__(self):
        k = self.a.shape[1]
        self.var_mass = np.bincount(self.self_idx, weights=self.mass, minlength=k)
        self.log_a = np.log(self.a.data)
        self.rows = np.repeat(np.arange(self.a.shape[0]), np.diff(self.a.indptr))
        self.starts = self.a.indptr[:-1]

    def value_grad(self, g: np.ndarray, hessian: bool = False):
        t = self.log_a + g[self.a.indices]
        rmax = np.maximum.reduceat(t, self.starts)
        e = np.exp(t - rmax[self.rows])
        s = np.add.reduceat(e, self.starts)
        lse = np.log(s) + rmax
        j = float(np.dot(self.mass, lse - self.log_psi - g[self.self_idx]))
        p = e / s[self.rows]
        wp = self.mass[self.rows] * p
        grad = np.bincount(self.a.indices, weights=wp, minlength=g.size) - self.var_mass
        if not hessian:
            return j, grad
        # Hessian of sum_r mass_r lse_r: diag(sum mass p) - B^T diag(mass) B
        b = sp.csr_matrix((p, self.a.indices, self.a.indptr), shape=self.a.shape)
        diag = np.bincount(self.a.indices, weights=wp, minlength=g.size)
        hess = sp.diags(diag) - b.T @ sp.diags(self.mass) @ b
        return j, grad, hess.tocsc()


def _orbit_problem(m: OrbitMeasure, psi) -> tuple[_Problem, np.ndarray]:
    dis = disintegrate(m)
    pts = dis.points
    rows, cols, vals = [], [], []
    for r, y in enumerate(pts):
        for i in range(m.system.d):
            z = m.system.map_at(i, y)
            k = np.flatnonzero(np.abs(pts - z) <= ATOM_TOL)
            # images off the support only ever lower the objective as f -> 0
            # there, so the infimum drops them
            if k.size:
                rows.append(r)
                cols.append(int(k[0]))
                vals.append(float(_psi_values(psi, [z])[0]))
    if not set(range(len(pts))) <= set(rows):
        raise ThermoError("a support point has no image in the support; measure is not holonomic")
    if np.any(np.array(vals) <= 0):
        raise ThermoError("psi must be positive")
    a = sp.csr_matrix((vals, (rows, cols)), shape=(len(pts), len(pts)))
    a.sum_duplicates()
    log_psi = np.log(_psi_values(psi, pts))
    return _Problem(dis.marginal, np.arange(len(pts)), a, log_psi), pts


def _lifted_problem(m: LiftedMeasure, psi) -> tuple[_Problem, np.ndarray]:
    n = m.n
    xs = m.base.x
    support = np.flatnonzero(m.base.weights > 0)
    psi_nodes = psi.values if isinstance(psi, GridFunction) and psi.n == n else _psi_values(psi, xs)
    if np.any(psi_nodes <= 0):
        raise ThermoError("psi must be positive on every node")
    disc = m.system.discretize(n)
    # P_psi f at x_j = sum_i (K_i (psi f))_j: linear in psi*f, so the
    # substitution f -> (psi1/psi2) f maps the psi1 and psi2 problems exactly
    k = sum(disc.kernels).tocsr() @ sp.diags(psi_nodes)
    a = k[support][:, support].tocsr()
    a.eliminate_zeros()
    if np.any(np.diff(a.indptr) == 0):
        raise ThermoError("a support node has no image in the support; measure is not holonomic")
    log_psi = np.log(psi_nodes[support])
    return _Problem(m.base.weights[support], np.arange(support.size), a, log_psi), xs[support]


def _descent_direction(grad, hess, scale):
    """Damped Newton step; falls back to the mass-scaled gradient."""
    ridge = 1e-12 * float(hess.diagonal().max()) + 1e-300
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            step = spla.spsolve(hess + ridge * sp.identity(hess.shape[0], format="csc"), -grad)
    except (RuntimeError, spla.MatrixRankWarning):
        step = None
    if step is None or not np.all(np.isfinite(step)) or np.dot(step, grad) >= 0:
        return -grad * scale, False
    return step - step.mean(), True


def entropy_inf(m: HolonomicMeasure, psi=None, tol: float = ENTROPY_TOL,
                max_iter: int = ENTROPY_MAX_ITER) -> EntropyReport:
    """inf over positive f of  int ln(P_psi f / (psi f)) dm.

    Parametrized by f = exp(g) the objective is convex in g.  Each step
    moves along the Newton direction (the Hessian is sparse and explicit) or,
    if that is unusable, along the gradient scaled by the inverse marginal
    mass, with Armijo backtracking.  g is recentred to mean 0 after each
    step, which leaves the objective unchanged.
    """
    if isinstance(m, OrbitMeasure):
        prob, pts = _orbit_problem(m, psi)
    else:
        prob, pts = _lifted_problem(m, psi)

    g = -prob.log_psi.copy()  # psi * f == 1, where the objective is ln d
    g -= g.mean()
    j, grad, hess = prob.value_grad(g, hessian=True)
    scale = 1.0 / prob.var_mass
    notes = []
    it = 0
    gnorm = float(np.max(np.abs(grad)))
    converged = gnorm <= tol
    while not converged and it < max_iter:
        it += 1
        direction, newton = _descent_direction(grad, hess, scale)
        slope = float(np.dot(grad, direction))
        t = 1.0
        while True:
            g_new = g + t * direction
            j_new, grad_new, hess_new = prob.value_grad(g_new, hessian=True)
            if j_new <= j + ARMIJO_C * t * slope:
                break
            t *= 0.5
            if t < 1e-16:
                break
        if t < 1e-16:
            notes.append(f"line search stalled at gradient norm {gnorm:.3g}")
            break
        g = g_new - g_new.mean()
        j, grad, hess = j_new, grad_new, hess_new
        gnorm = float(np.max(np.abs(grad)))
        converged = gnorm <= tol
    if not converged and not notes:
        notes.append(f"no convergence in {max_iter} iterations (gradient norm {gnorm:.3g})")
    return EntropyReport(
        value=j + 0.0,
        method="inf_formula",
        iterations=it,
        final_gradient_norm=gnorm,
        converged=converged,
        psi=_psi_label(psi),
        warnings=tuple(notes),
    )


def psi_independence_check(m: HolonomicMeasure, psi1, psi2, **opts) -> float:
    return abs(entropy_inf(m, psi1, **opts).value - entropy_inf(m, psi2, **opts).value)


# --- alternative entropy ---------------------------------------------------


def _xlogx(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v, dtype=float)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def entropy_alt(m: HolonomicMeasure) -> EntropyReport:
    """- int sum_i v_i ln v_i, with v from the disintegration of m."""
    dis = disintegrate(m)
    value = -float(np.dot(dis.marginal, _xlogx(dis.weights).sum(axis=0))) + 0.0
    return EntropyReport(value=value, method="alt_formula")


def entropy(m: HolonomicMeasure, method: str = "inf", psi=None, **opts) -> EntropyReport:
    if method in ("inf", "inf_formula"):
        return entropy_inf(m, psi, **opts)
    if method in ("alt", "alt_formula"):
        return entropy_alt(m)
    raise ValueError(f"unknown entropy method {method!r}")


# --- pressure --------------------------------------------------------------


def log_potential_integral(m: HolonomicMeasure, phi) -> float:
    """int ln(phi) dm; phi evaluated exactly at atoms, at nodes for lifted measures."""
    if isinstance(m, OrbitMeasure):
        xs, w = m.xs, np.full(m.size, m.weight)
    else:
        xs, w = m.base.x, m.base.weights
    vals = _psi_values(phi, xs)
    used = w > 0
    if np.any(vals[used] <= 0):
        raise ThermoError("phi must be positive on the support of the measure")
    return float(np.dot(w[used], np.log(vals[used])))


def pressure_spectral(sys: WeightedSystem, n: int | None = None, tol: float = SPECTRAL_TOL,
                      max_iter: int = MAX_ITER, triple: SpectralTriple | None = None) -> PressureReport:
    """ln of the discrete spectral radius of P_phi."""
    if sys.weight_mode != "weight_function":
        raise ThermoError("spectral pressure needs a system defined by a weight function phi")
    n = sys.resolve_n(n)
    phi_nodes = _psi_values(sys.phi, np.arange(n + 1) / n)
    if np.any(phi_nodes <= 0):
        j = int(np.argmax(phi_nodes <= 0))
        raise ThermoError(f"phi is {phi_nodes[j]!r} at x={j / n!r}; ln(phi) must exist")
    if triple is None:
        triple = spectral_triple(sys, n, tol, max_iter)
    return PressureReport(
        value=math.log(triple.rho),
        method="spectral",
        rho=triple.rho,
        converged=triple.converged,
        warnings=triple.warnings,
    )


def pressure_variational(phi, candidates: Sequence[HolonomicMeasure], entropy_method: str = "inf",
                         psi=None, **opts) -> PressureReport:
    """max over candidates of h(m) + int ln(phi) dm."""
    if not candidates:
        raise ThermoError("candidate list is empty")
    values, notes, ok = [], [], True
    for k, m in enumerate(candidates):
        rep = entropy(m, entropy_method, psi, **opts)
        ok = ok and rep.converged
        notes.extend(f"candidate {k}: {w}" for w in rep.warnings)
        values.append(rep.value + log_potential_integral(m, phi))
    best = int(np.argmax(values))
    return PressureReport(
        value=values[best],
        method="variational",
        argmax=best,
        candidate_values=tuple(values),
        converged=ok,
        warnings=tuple(notes),
        entropy_method=entropy_method,
    )


# --- equilibrium states ----------------------------------------------------


@dataclass(frozen=True)
class EquilibriumReport:
    defect: float
    passed: bool
    value: float  # h + int ln phi
    entropy: float
    integral: float
    invariance_defect: float | None = None  # L1 of P_v* marginal - marginal
    weight_mismatch: float | None = None  # sup |u - v| on the support

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _branch_mismatch(m: HolonomicMeasure, normalized: WeightedSystem):
    dis = disintegrate(m)
    used = dis.marginal > 0
    if isinstance(m, LiftedMeasure):
        v = normalized.discretize(m.n).branch
    else:
        v = np.array([normalized.weights_at(y) for y in dis.points]).T
    return float(np.max(np.abs(dis.weights[:, used] - v[:, used]))), dis, v


def equilibrium_check(m: HolonomicMeasure, phi, pressure: float, entropy_method: str = "alt",
                      tol: float = EQUILIBRIUM_TOL, normalized: WeightedSystem | None = None,
                      psi=None, **opts) -> EquilibriumReport:
    """Distance of h(m) + int ln(phi) dm from the pressure.

    With the normalized system of phi, also reports whether the marginal is
    invariant for it and how far the disintegrated weights are from it.
    """
    h = entropy(m, entropy_method, psi, **opts).value
    integral = log_potential_integral(m, phi)
    value = h + integral
    defect = abs(value - pressure)
    inv = mismatch = None
    if normalized is not None:
        mismatch, dis, v = _branch_mismatch(m, normalized)
        if isinstance(m, LiftedMeasure):
            mt = normalized.discretize(m.n).matrix_t
            inv = float(np.abs(mt @ dis.marginal - dis.marginal).sum())
        else:
            px, pm = push_atoms(dis.points, dis.marginal, v, normalized)
            inv = atomic_l1(px, pm, dis.points, dis.marginal)
    return EquilibriumReport(
        defect=defect,
        passed=defect <= tol,
        value=value,
        entropy=h,
        integral=integral,
        invariance_defect=inv,
        weight_mismatch=mismatch,
    )


def tilt_weights(branch: np.ndarray, amount: float = 0.1) -> np.ndarray:
    """Perturb branch weights by factors 1 +/- amount (alternating), renormalized."""
    signs = np.where(np.arange(branch.shape[0]) % 2 == 0, 1.0, -1.0)[:, None]
    w = branch * (1.0 + amount * signs)
    return w / w.sum(axis=0)


# --- beta sweep ------------------------------------------------------------


@dataclass(frozen=True)
class BetaRow:
    beta: float
    pressure: float
    integral: float
    residual_h: float
    residual_nu: float
    converged: bool
    markov_defect: float


def power_potential(phi, beta: float) -> ExprAst:
    return BinOp("^", as_ast(phi), Num(float(beta)))


def beta_sweep(maps: Sequence, phi, betas: Sequence[float], n: int | None = None,
               tol: float = SPECTRAL_TOL, max_iter: int = MAX_ITER) -> list[BetaRow]:
    """Pressure of phi^beta and int ln(phi) against its lifted equilibrium."""
    phi = as_ast(phi)
    rows = []
    for beta in betas:
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        sys = WeightedSystem.with_phi(maps, power_potential(phi, beta))
        n_ = sys.resolve_n(n)
        triple = spectral_triple(sys, n_, tol, max_iter)
        v, mu = normalize_system(sys, triple)
        from .transfer import check_markov

        lifted = LiftedMeasure(v, mu)
        rows.append(BetaRow(
            beta=float(beta),
            pressure=math.log(triple.rho),
            integral=log_potential_integral(lifted, phi),
            residual_h=triple.residual_h,
            residual_nu=triple.residual_nu,
            converged=triple.converged,
            markov_defect=check_markov(v, n_),
        ))
    return rows


def sweep_to_csv(rows: Sequence[BetaRow], path) -> None:
    write_csv(
        path,
        ("beta", "pressure", "integral_ln_phi", "residual_h", "residual_nu", "converged"),
        ((r.beta, r.pressure, r.integral, r.residual_h, r.residual_nu, str(r.converged).lower())
         for r in rows),
    )
