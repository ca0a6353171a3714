import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import (
    EXAMPLE3_MAPS,
    EXAMPLE3_PHI,
    HALVES,
    random_equilibrium,
    random_lifted_measure,
    random_markov_system,
    random_orbit_measure,
)
from ifsthermo.grid import GridMeasure
from ifsthermo.holonomic import (
    HolonomicError,
    OrbitError,
    Word,
    branch,
    cylinder_vector,
    disintegrate,
    find_periodic_point,
    holonomic_inequality_defect,
    holonomy_defect,
    integrate_holonomic,
    lift,
    make_orbit_measure,
    marginal_pushforward_defect,
    measure_to_json,
    orbit_from_spec,
    sigma_invariance_defect,
    stationarity_defect,
)
from ifsthermo.transfer import WeightedSystem

TESTS = ("x", "x^2", "cos(2*pi*x)")


@pytest.fixture
def example3():
    return WeightedSystem.with_phi(EXAMPLE3_MAPS, EXAMPLE3_PHI)


# --- words ------------------------------------------------------------------


def test_word_digits_and_shift():
    w = Word.parse("01", preperiod="2")
    assert w.prefix(6) == (2, 0, 1, 0, 1, 0)
    assert w.shift().prefix(3) == (0, 1, 0)
    assert w.shift(3).prefix(3) == (0, 1, 0)
    assert str(w) == "2(01)"
    with pytest.raises(IndexError):
        w.digit(0)


def test_word_canonical_form():
    assert Word.parse("0101", preperiod="1").canonical() == Word((), (1, 0))
    assert Word.parse("0", preperiod="21").canonical() == Word((2, 1), (0,))
    assert Word.parse("1", preperiod="11").canonical() == Word((), (1,))
    assert Word.parse("01", preperiod="01").same_sequence(Word.parse("01"))
    assert not Word.parse("0").same_sequence(Word.parse("1"))
    with pytest.raises(ValueError):
        Word.parse("")


@given(st.lists(st.integers(0, 2), max_size=4), st.lists(st.integers(0, 2), min_size=1, max_size=4))
def test_canonical_keeps_the_sequence(pre, per):
    w = Word(tuple(pre), tuple(per))
    assert w.canonical().prefix(20) == w.prefix(20)


# --- orbit measures -----------------------------------------------------------


def test_example3_measure(example3):
    m = make_orbit_measure(example3, 0.0, Word.parse("0", preperiod="11"), 2)
    assert [(x, str(w)) for x, w in m.atoms] == [(0.0, "11(0)"), (1.0, "1(0)")]
    assert holonomy_defect(m, TESTS) == 0.0
    assert sigma_invariance_defect(m, None, (1, 1)) == pytest.approx(0.5, abs=1e-15)
    assert integrate_holonomic(m, "ln(2+cos(2*pi*x))") == pytest.approx(np.log(3), abs=1e-15)
    dis = disintegrate(m)
    assert list(dis.points) == [0.0, 1.0]
    assert np.array_equal(dis.weights, [[0.0, 0.0], [1.0, 1.0]])


def test_invariant_two_cycle_has_no_sigma_defect(example3):
    m = orbit_from_spec(example3, {"x0": 0, "period": "11"})
    assert m.size == 2
    for cyl in [(1,), (1, 1), (0,)]:
        assert sigma_invariance_defect(m, "x", cyl) == 0.0
    assert marginal_pushforward_defect(m) == 0.0


def test_non_returning_orbit_is_rejected(example3):
    with pytest.raises(OrbitError) as info:
        make_orbit_measure(example3, 0.25, Word.parse("1"), 1)
    assert info.value.defect == pytest.approx(0.5)
    with pytest.raises(HolonomicError):
        make_orbit_measure(example3, 0.0, Word.parse("2"), 1)


def test_branch_composes_maps():
    sys = WeightedSystem.per_map(HALVES, ("0.5", "0.5"))
    assert branch(sys, 0.0, Word.parse("1"), 3) == pytest.approx(0.875)
    assert branch(sys, 0.3, Word.parse("0"), 0) == 0.3


def test_find_periodic_point():
    sys = WeightedSystem.per_map(HALVES, ("0.5", "0.5"))
    # tau_1 o tau_0 (x) = (x/2 + 1)/2 has fixed point 2/3
    x = find_periodic_point(sys, (0, 1))
    assert x == pytest.approx(2 / 3, abs=1e-14)
    m = orbit_from_spec(sys, {"period": "01"})
    assert m.xs == pytest.approx([2 / 3, 1 / 3])


@pytest.mark.parametrize("seed", range(10))
def test_random_orbit_measures_are_holonomic(seed):
    m = random_orbit_measure(np.random.default_rng(seed), 2 + seed % 2)
    assert holonomy_defect(m, TESTS) <= 1e-12
    assert marginal_pushforward_defect(m) <= 1e-12
    dis = disintegrate(m)
    assert dis.weight_sums() == pytest.approx(1.0)
    assert dis.marginal.sum() == pytest.approx(1.0)


# --- lifted measures ------------------------------------------------------------


def test_lift_requires_markov_and_stationary():
    with pytest.raises(HolonomicError, match="not Markov"):
        lift(WeightedSystem.with_phi(HALVES, "1"), n=16)
    sys = WeightedSystem.per_map(HALVES, ("0.5", "0.5"))
    with pytest.raises(HolonomicError, match="not stationary"):
        lift(sys, GridMeasure.delta(0, 16))


def test_lifted_measure_of_halves_is_uniform():
    m = lift(WeightedSystem.per_map(HALVES, ("0.5", "0.5")), n=64)
    w = m.base.weights
    assert w[1:-1] == pytest.approx(1 / 64, rel=1e-9)
    assert w[0] == pytest.approx(1 / 128, rel=1e-9)
    assert stationarity_defect(m) < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_lifted_measures_are_sigma_invariant(seed):
    m = random_lifted_measure(np.random.default_rng(seed), 2 + seed % 2, 128)
    assert holonomy_defect(m, TESTS) <= 1e-10
    for cyl in [(0,), (1, 0), (0, 1, 1)]:
        assert sigma_invariance_defect(m, "cos(2*pi*x)", cyl) <= 1e-8


def test_cylinder_vector_additivity():
    m = random_lifted_measure(np.random.default_rng(1), 3, 64)
    total = sum(cylinder_vector(m, c) for c in itertools.product(range(3), repeat=3))
    assert total == pytest.approx(np.ones(65), abs=1e-12)
    prefix = (2, 0)
    parts = sum(cylinder_vector(m, prefix + (i,)) for i in range(3))
    assert parts == pytest.approx(cylinder_vector(m, prefix), abs=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_disintegration_recovers_normalized_weights(seed):
    _, v, mu, _ = random_equilibrium(np.random.default_rng(seed), 2, 128)
    dis = disintegrate(lift(v, mu))
    assert np.max(np.abs(dis.weights - v.discretize(128).branch)) <= 1e-8
    assert marginal_pushforward_defect(lift(v, mu)) <= 1e-8


def test_holonomic_inequality_requires_nonnegative_f():
    m = random_lifted_measure(np.random.default_rng(2), 2, 32)
    assert holonomic_inequality_defect(m, "1") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        holonomic_inequality_defect(m, "x - 0.5")


def test_measure_json():
    sys = random_markov_system(np.random.default_rng(0), 2)
    doc = json.loads(measure_to_json(make_orbit_measure(sys, find_periodic_point(sys, (0,)), Word.parse("0"), 1)))
    assert doc["kind"] == "orbit" and doc["weight"] == 1.0 and doc["atoms"][0]["period"] == "0"
