"""The twelve acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line (shown in the terminal summary) before
asserting.
"""

import math
import time

import numpy as np

from helpers import (
    EXAMPLE3_MAPS,
    EXAMPLE3_PHI,
    HALVES,
    LN2,
    LN3,
    LN6,
    random_equilibrium,
    random_lifted_measure,
    random_markov_phi,
    random_orbit_measure,
    random_positive_psi,
)
from ifsthermo.grid import GridFunction
from ifsthermo.holonomic import (
    LiftedMeasure,
    Word,
    disintegrate,
    holonomic_inequality_defect,
    holonomy_defect,
    lift,
    make_orbit_measure,
    sigma_invariance_defect,
)
from ifsthermo.sim import birkhoff_average, chaos_game, empirical_measure
from ifsthermo.thermo import (
    beta_sweep,
    entropy_alt,
    entropy_inf,
    equilibrium_check,
    log_potential_integral,
    pressure_spectral,
    pressure_variational,
    psi_independence_check,
    tilt_weights,
)
from ifsthermo.transfer import (
    WeightedSystem,
    conjugate_system,
    normalize_system,
    spectral_triple,
    tabulated_system,
)

TESTS = ("x", "x^2", "cos(2*pi*x)", "exp(x)")


def _random_suite(seed: int):
    rng = np.random.default_rng(seed)
    orbits = [random_orbit_measure(rng, 2 + k % 2) for k in range(50)]
    lifted = [random_lifted_measure(rng, 2 + k % 2) for k in range(20)]
    return orbits, lifted


def test_c01_example1_constant_potential(criterion):
    start = time.perf_counter()
    sys = WeightedSystem.with_phi(HALVES, "1")
    p = pressure_spectral(sys, 1024)
    v, mu = normalize_system(sys, spectral_triple(sys, 1024))
    h = entropy_inf(lift(v, mu)).value
    elapsed = time.perf_counter() - start
    ok = abs(p.value - LN2) <= 1e-10 and abs(h - LN2) <= 1e-6 and elapsed < 5
    criterion(1, ok, f"p-ln2={p.value - LN2:.2e} h-ln2={h - LN2:.2e} time={elapsed:.2f}s")
    assert ok


def test_c02_example2_markov_pressure_zero(criterion):
    rng = np.random.default_rng(2024)
    worst_p = worst_eq = 0.0
    decreasing = True
    for _ in range(20):
        phi = random_markov_phi(rng)
        errors = []
        for n in (1024, 2048):
            sys = WeightedSystem.with_phi(HALVES, phi)
            triple = spectral_triple(sys, n)
            p = pressure_spectral(sys, n, triple=triple).value
            v, mu = normalize_system(sys, triple)
            m = lift(v, mu)
            errors.append(abs(entropy_alt(m).value + log_potential_integral(m, phi)))
            if n == 1024:
                worst_p = max(worst_p, abs(p))
        worst_eq = max(worst_eq, errors[0])
        decreasing = decreasing and errors[1] < errors[0]
    ok = worst_p <= 1e-8 and worst_eq <= 1e-3 and decreasing
    criterion(2, ok, f"max|p|={worst_p:.2e} max|h_alt+int ln phi|={worst_eq:.2e} "
                     f"decreasing at n=2048: {decreasing}")
    assert ok


def test_c03_example3(criterion):
    start = time.perf_counter()
    sys = WeightedSystem.with_phi(EXAMPLE3_MAPS, EXAMPLE3_PHI)
    nu0 = make_orbit_measure(sys, 0.0, Word.parse("0", preperiod="11"), 2)
    h = entropy_inf(nu0).value
    integral = log_potential_integral(nu0, EXAMPLE3_PHI)
    uniform = lift(WeightedSystem.per_map(EXAMPLE3_MAPS, ["0.5", "0.5"]), n=1024)
    var = pressure_variational(EXAMPLE3_PHI, [nu0, uniform], "inf")
    rho = spectral_triple(sys, 1024).rho
    sigma = sigma_invariance_defect(nu0, None, (1, 1))
    hol = holonomy_defect(nu0, TESTS)
    elapsed = time.perf_counter() - start
    ok = (abs(h - LN2) <= 1e-6 and abs(integral - LN3) <= 1e-12 and abs(var.value - LN6) <= 1e-6
          and var.argmax == 0 and abs(rho - 6) <= 1e-8 and sigma > 0.1 and hol <= 1e-12 and elapsed < 10)
    criterion(3, ok, f"h-ln2={h - LN2:.1e} int-ln3={integral - LN3:.1e} p_var-ln6={var.value - LN6:.1e} "
                     f"argmax={var.argmax} rho-6={rho - 6:.1e} sigma={sigma:.2f} hol={hol:.1e} "
                     f"time={elapsed:.2f}s")
    assert ok


def test_c04_constant_weight_law(criterion):
    worst = 0.0
    for d, maps in ((2, HALVES), (3, ("x/3", "(x+1)/3", "(x+2)/3"))):
        for k in (0.5, 1.0, 2.0):
            for sys in (WeightedSystem.with_phi(maps, repr(k)),
                        WeightedSystem.per_map(maps, [repr(k)] * d)):
                worst = max(worst, abs(spectral_triple(sys, 1024).rho - d * k))
    ok = worst <= 1e-9
    criterion(4, ok, f"max|rho-dk|={worst:.2e}")
    assert ok


def test_c05_entropy_bounds(criterion):
    orbits, lifted = _random_suite(5)
    lo, hi = math.inf, -math.inf
    ok = True
    for m in orbits + lifted:
        ln_d = math.log(m.system.d)
        for h in (entropy_inf(m).value, entropy_alt(m).value):
            lo, hi = min(lo, h), max(hi, h - ln_d)
            ok = ok and -1e-6 <= h <= ln_d + 1e-6
    criterion(5, ok, f"{len(orbits)} orbit + {len(lifted)} lifted: min h={lo:.2e}, max(h-ln d)={hi:.2e}")
    assert ok


def test_c06_psi_independence(criterion):
    rng = np.random.default_rng(6)
    worst = 0.0
    for k in range(10):
        d = 2 + k % 2
        m = random_orbit_measure(rng, d) if k % 2 else random_lifted_measure(rng, d)
        worst = max(worst, psi_independence_check(m, random_positive_psi(rng), random_positive_psi(rng)))
    ok = worst <= 1e-5
    criterion(6, ok, f"max|h_psi1-h_psi2|={worst:.2e}")
    assert ok


def test_c07_disintegration_round_trip(criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for k in range(10):
        _, v, mu, _ = random_equilibrium(rng, 2 + k % 2, 512)
        dis = disintegrate(lift(v, mu))
        supp = dis.marginal > 0
        worst = max(worst, float(np.max(np.abs(dis.weights[:, supp] - v.discretize(512).branch[:, supp]))))
    ok = worst <= 1e-8
    criterion(7, ok, f"max|u-v| on supp={worst:.2e}")
    assert ok


def test_c08_alt_variational_iff(criterion):
    rng = np.random.default_rng(8)
    eq_defect = eq_gap = 0.0
    tilt_defect = math.inf
    tilt_gap = math.inf
    for _ in range(5):
        sys, v, mu, triple = random_equilibrium(rng, 2, 1024)
        p = math.log(triple.rho)
        eq = equilibrium_check(lift(v, mu), sys.phi, p, "alt", normalized=v)
        tilted = tabulated_system(v, tilt_weights(v.discretize(1024).branch, 0.1), 1024)
        bad = equilibrium_check(lift(tilted, n=1024), sys.phi, p, "alt", normalized=v)
        eq_defect = max(eq_defect, eq.defect)
        eq_gap = max(eq_gap, eq.weight_mismatch)
        tilt_defect = min(tilt_defect, bad.defect)
        tilt_gap = min(tilt_gap, bad.weight_mismatch)
    ok = eq_defect <= 1e-3 and eq_gap <= 1e-6 and tilt_defect >= 1e-3 and tilt_gap > 1e-6
    criterion(8, ok, f"equilibrium defect<={eq_defect:.1e} |u-v|<={eq_gap:.1e}; "
                     f"tilted defect>={tilt_defect:.1e} |u-v|>={tilt_gap:.1e}")
    assert ok


def test_c09_holonomic_inequality(criterion):
    orbits, lifted = _random_suite(9)
    rng = np.random.default_rng(90)
    worst = math.inf
    for m in orbits + lifted:
        for _ in range(3):
            f = random_positive_psi(rng)
            worst = min(worst, holonomic_inequality_defect(m, f))
    ok = worst >= -1e-10
    criterion(9, ok, f"min defect={worst:.3e} over {len(orbits) + len(lifted)} measures")
    assert ok


def test_c10_birkhoff_sampling(criterion):
    start = time.perf_counter()
    sys = WeightedSystem.per_map(HALVES, ["0.5", "0.5"])
    ref = lift(sys, n=1024)
    traj = chaos_game(sys, 0.3, 10**6, 20240101)
    errs = []
    for f in ("x", "x^2"):
        oracle = float(np.dot(ref.base.weights, ref.base.x ** (1 if f == "x" else 2)))
        errs.append(abs(birkhoff_average(traj, f, 1000) - oracle))
    l1 = empirical_measure(traj, 256, ref.base).l1
    elapsed = time.perf_counter() - start
    ok = max(errs) <= 5e-3 and l1 <= 0.02 and elapsed < 10
    criterion(10, ok, f"|avg x|={errs[0]:.1e} |avg x^2|={errs[1]:.1e} L1={l1:.4f} time={elapsed:.2f}s")
    assert ok


def test_c11_conjugation_invariance(criterion):
    rng = np.random.default_rng(11)
    worst = 0.0
    for k in range(10):
        sys, _, _, triple = random_equilibrium(rng, 2 + k % 2, 512)
        c = rng.uniform(-1, 1, size=3)
        h = GridFunction.from_callable(
            lambda x: np.exp(c[0] * np.sin(2 * np.pi * x) + c[1] * x + c[2] * x**2), 512)
        worst = max(worst, abs(spectral_triple(conjugate_system(sys, h), 512).rho - triple.rho))
    ok = worst <= 1e-9
    criterion(11, ok, f"max|rho-rho'|={worst:.2e}")
    assert ok


def test_c12_beta_sweep_monotone(criterion):
    rows = beta_sweep(HALVES, EXAMPLE3_PHI, [1, 2, 4, 8, 16], 1024)
    integrals = [r.integral for r in rows]
    steps = np.diff(integrals)
    ok = bool(np.all(steps >= -1e-8))
    criterion(12, ok, "int ln phi = " + ", ".join(f"{v:.10f}" for v in integrals))
    assert ok
