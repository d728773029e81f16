import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cmlprng import DegenerateOrbitError, DomainError, LocalMap, MapKind, derivative, eval_map, local_le

LOG4 = LocalMap.logistic(4.0)
TENT2 = LocalMap.tent(2.0)
PLM = LocalMap.plm(4.0, 64)


def plm_oracle(x: Fraction, mu: Fraction, n: int) -> Fraction:
    # global-coordinate form: odd segment j is a hump on ((j-1)/N, j/N), even segment an inverted hump
    j = math.ceil(x * n)
    lo, hi = Fraction(j - 1, n), Fraction(j, n)
    hump = mu * n * n * (x - lo) * (hi - x)
    return hump if j % 2 == 1 else 1 - hump


# ---- examples -------------------------------------------------------------

def test_logistic_vertex():
    assert eval_map(LOG4, 0.5) == 1.0


def test_tent_left_branch():
    assert eval_map(TENT2, 0.25) == 0.5


def test_plm_first_segment_midpoint():
    x = 1 / 128
    assert eval_map(PLM, x) == float(plm_oracle(Fraction(1, 128), Fraction(4), 64)) == 1.0


def test_derivative_examples():
    assert derivative(LOG4, 0.5) == 0.0
    assert derivative(TENT2, 0.25) == 2.0
    assert derivative(LOG4, 0.25) == 2.0
    assert derivative(TENT2, 0.75) == -2.0


def test_tent_half_is_second_branch():
    t = LocalMap.tent(1.5)
    assert eval_map(t, 0.5) == 1.5 * (1 - 0.5)


@pytest.mark.parametrize("x", [0.0, 1.0, -0.1, 1.2])
def test_eval_domain(x):
    with pytest.raises(DomainError):
        eval_map(LOG4, x)


@pytest.mark.parametrize("kind,mu,seg", [("logistic", 4.1, 64), ("logistic", 0.0, 64),
                                         ("tent", 2.5, 64), ("plm", 4.5, 64), ("plm", 4.0, 1)])
def test_parameter_domain(kind, mu, seg):
    with pytest.raises(DomainError):
        LocalMap(kind, mu, seg)


def test_non_differentiable_points():
    with pytest.raises(DomainError):
        derivative(TENT2, 0.5)
    with pytest.raises(DomainError):
        derivative(PLM, 3 / 64)


def test_plm_boundary_nudged():
    x = 5 / 64
    assert eval_map(PLM, x) == eval_map(PLM, np.nextafter(x, 1.0))


def test_array_evaluation_matches_scalar():
    xs = np.linspace(0.01, 0.99, 37).reshape(37, 1)
    out = eval_map(LOG4, xs)
    assert out.shape == xs.shape
    assert out[3, 0] == eval_map(LOG4, float(xs[3, 0]))


def test_describe_and_kind():
    assert LocalMap.default("plm").describe() == "plm(mu=4.0, segments=64)"
    assert LocalMap("tent", 2).kind is MapKind.TENT
    assert LocalMap.logistic().nseg == 1


# ---- exact-rational oracle for the PLM ----------------------------------

@given(st.integers(1, 2**20 - 1), st.sampled_from([1.0, 2.5, 3.75, 4.0]), st.sampled_from([2, 3, 8, 64]))
def test_plm_matches_rational_oracle(k, mu, n):
    x = Fraction(k, 2**20)
    if (x * n).denominator == 1:
        return
    got = eval_map(LocalMap.plm(mu, n), float(x))
    want = float(plm_oracle(x, Fraction(mu), n))
    assert got == pytest.approx(want, abs=1e-12)


# ---- invariants ----------------------------------------------------------

@pytest.mark.parametrize("fmap", [LOG4, TENT2, PLM, LocalMap.logistic(3.3), LocalMap.plm(2.0, 7)])
def test_range_closure(fmap):
    rng = np.random.default_rng(11)
    x = rng.uniform(np.nextafter(0.0, 1.0), 1.0, 10**5)
    x = x[(x > 0) & (x < 1)]
    y = eval_map(fmap, x)
    assert np.all((y >= 0.0) & (y <= 1.0))


@pytest.mark.parametrize("fmap", [LOG4, TENT2, PLM, LocalMap.plm(3.1, 5)])
def test_derivative_matches_finite_difference(fmap):
    rng = np.random.default_rng(5)
    h = 1e-7
    x = rng.uniform(0.001, 0.999, 4000)
    # keep away from branch boundaries
    n = fmap.nseg if fmap.kind is MapKind.PLM else 2
    frac = (x * n) % 1.0
    x = x[(frac > 1e-4) & (frac < 1 - 1e-4)][:1000]
    assert x.size == 1000
    fd = (eval_map(fmap, x + h) - eval_map(fmap, x - h)) / (2 * h)
    d = derivative(fmap, x)
    big = np.abs(d) > 1e-2
    assert np.allclose(fd[big], d[big], rtol=1e-6, atol=0)
    assert np.allclose(fd[~big], d[~big], atol=1e-6)


@given(st.floats(1e-6, 1 - 1e-6))
def test_logistic_symmetry(x):
    assert eval_map(LOG4, x) == pytest.approx(eval_map(LOG4, 1 - x), abs=1e-15)


# ---- Lyapunov exponent of the local map -------------------------------

@pytest.mark.parametrize("mu", [1.2, 1.5, 1.9, 2.0])
def test_tent_le_is_log_mu(mu):
    assert abs(local_le(LocalMap.tent(mu)) - math.log(mu)) <= 0.01


def test_logistic_le_ln2_over_seeds():
    # time average from 10 random starting points
    rng = np.random.default_rng(2024)
    les = [local_le(LOG4, float(x0)) for x0 in rng.uniform(0.05, 0.95, 10)]
    assert abs(np.mean(les) - math.log(2)) <= 0.01
    assert max(abs(v - math.log(2)) for v in les) <= 0.01


def test_plm_le_positive_and_stable():
    a = local_le(PLM, 0.3)
    b = local_le(PLM, 0.71)
    assert a > math.log(2)
    assert abs(a - b) < 0.02


def test_local_le_validation():
    with pytest.raises(ValueError):
        local_le(LOG4, n_iter=100)
    with pytest.raises(DomainError):
        local_le(LOG4, x0=1.0)


def test_degenerate_orbit_detected():
    # logistic below 1: orbit dies at the fixed point 0 (clamped to 2**-52)
    with pytest.raises(DegenerateOrbitError):
        local_le(LocalMap.logistic(0.5), n_iter=10**4)
    with pytest.raises(DegenerateOrbitError):
        local_le(LocalMap.logistic(2.0), n_iter=10**4)
