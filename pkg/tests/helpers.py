"""Random systems and measures shared by the test modules."""

from __future__ import annotations

import math

import numpy as np

from ifsthermo.holonomic import Word, find_periodic_point, lift, make_orbit_measure
from ifsthermo.transfer import WeightedSystem, normalize_system, spectral_triple

LN2, LN3, LN6 = math.log(2), math.log(3), math.log(6)

HALVES = ("x/2", "(x+1)/2")
THIRDS = ("x/3", "(x+1)/3", "(x+2)/3")
EXAMPLE3_MAPS = ("x", "1-x")
EXAMPLE3_PHI = "2+cos(2*pi*x)"


def num(v: float) -> str:
    return repr(float(v))


def random_markov_phi(rng: np.random.Generator, harmonics: int = 3) -> str:
    """phi with phi(x/2) + phi((x+1)/2) = 1: 1/2 plus odd harmonics, phi >= 0.1."""
    amps = rng.uniform(-1, 1, size=(harmonics, 2))
    amps *= 0.4 / np.abs(amps).sum()
    terms = [num(0.5)]
    for m, (a, b) in enumerate(amps):
        k = 2 * m + 1
        terms.append(f"{num(a)}*sin({2 * k}*pi*x)")
        terms.append(f"{num(b)}*cos({2 * k}*pi*x)")
    return " + ".join(terms)


def random_positive_phi(rng: np.random.Generator) -> str:
    c = rng.uniform(1.5, 3.0)
    a, b = rng.uniform(-0.6, 0.6, size=2)
    return f"{num(c)} + {num(a)}*cos(2*pi*x) + {num(b)}*sin(4*pi*x)"


def random_affine_maps(rng: np.random.Generator, d: int) -> tuple:
    """d contractions of [0,1] into itself: x -> a x + b with 0 < a <= 0.6."""
    maps = []
    for _ in range(d):
        a = rng.uniform(0.1, 0.6)
        b = rng.uniform(0.0, 1.0 - a)
        if rng.random() < 0.5:
            maps.append(f"{num(a)}*x + {num(b)}")
        else:
            maps.append(f"{num(a + b)} - {num(a)}*x")
    return tuple(maps)


def random_markov_system(rng: np.random.Generator, d: int) -> WeightedSystem:
    """Per-map weights (c_i + a_i cos 2 pi x) / sum_j (...), which sum to 1 at every x."""
    maps = random_affine_maps(rng, d)
    c = rng.uniform(0.5, 1.5, size=d)
    a = rng.uniform(-0.4, 0.4, size=d)
    den = f"({num(c.sum())} + {num(a.sum())}*cos(2*pi*x))"
    weights = [f"({num(ci)} + {num(ai)}*cos(2*pi*x)) / {den}" for ci, ai in zip(c, a)]
    return WeightedSystem.per_map(maps, weights)


def random_orbit_measure(rng: np.random.Generator, d: int):
    """Orbit measure of a random periodic x-cycle with an arbitrary word tail.

    The first n digits fix the cycle; the rest of the word is random, so the
    measure is holonomic but usually not sigma-hat invariant.
    """
    sys = random_markov_system(rng, d)
    n = int(rng.integers(1, 5))
    cycle = tuple(int(v) for v in rng.integers(0, d, size=n))
    x0 = find_periodic_point(sys, cycle)
    tail = tuple(int(v) for v in rng.integers(0, d, size=int(rng.integers(0, 3))))
    period = tuple(int(v) for v in rng.integers(0, d, size=int(rng.integers(1, 3))))
    return make_orbit_measure(sys, x0, Word(cycle + tail, period), n)


def random_lifted_measure(rng: np.random.Generator, d: int, n: int = 256):
    return lift(random_markov_system(rng, d), n=n)


def random_equilibrium(rng: np.random.Generator, d: int = 2, n: int = 256):
    """(system, normalized system, stationary mu, triple) for a random positive phi."""
    sys = WeightedSystem.with_phi(random_affine_maps(rng, d), random_positive_phi(rng))
    triple = spectral_triple(sys, n)
    v, mu = normalize_system(sys, triple)
    return sys, v, mu, triple


def random_positive_psi(rng: np.random.Generator) -> str:
    c = rng.uniform(1.2, 4.0)
    a = rng.uniform(-1.0, 1.0)
    k = int(rng.integers(1, 4))
    return f"{num(c)} + {num(a)}*cos({2 * k}*pi*x) + {num(rng.uniform(0, 1))}*x"
