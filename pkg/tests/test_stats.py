import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from cmlprng import LatticeConfig, LocalMap, correlated_pair, extract_stream, new_lattice, orbit
from cmlprng.errors import DomainError
from cmlprng import stats as S

E100 = ("11001001000011111101101010100010001000010110100011"
        "00001000110100110001001100011001100010100010111000")


def b(s):
    return np.array([int(c) for c in s], dtype=np.uint8)


# ---- worked examples --------------------------------------------------------------------------

def test_frequency_examples():
    assert S._monobit_stat(b("1011010101"))[1] == pytest.approx(0.527089, abs=1e-6)
    r = S.monobit_test(b(E100))
    assert r.p_value == pytest.approx(0.109599, abs=1e-6) and r.passed


def test_block_frequency_examples():
    assert S._block_frequency_stat(b("0110011010"), 3)[1] == pytest.approx(0.801252, abs=1e-6)
    assert S.block_frequency_test(b(E100), 10).p_value == pytest.approx(0.706438, abs=1e-6)


def test_runs_examples():
    stat, p = S._runs_stat(b("1001101011"))
    assert stat == 7 and p == pytest.approx(0.147232, abs=1e-6)
    assert S.runs_test(b(E100)).p_value == pytest.approx(0.500798, abs=1e-6)


def test_serial_example():
    _, p1, _, p2 = S._serial_stat(b("0011011101"), 3)
    assert p1 == pytest.approx(0.808792, abs=1e-6)
    assert p2 == pytest.approx(0.670320, abs=1e-6)


def test_serial_reports_both_values():
    first, second = S.serial_test(b(E100 * 3), 2)
    r = S.serial2_test(b(E100 * 3))
    assert r.p_value == first.p_value
    assert r.details["p_value2"] == second.p_value


def test_monobit_degenerate_inputs():
    r = S.monobit_test(b("01" * 50))
    assert r.statistic == 0 and r.p_value == 1.0 and r.passed
    r = S.monobit_test(np.ones(100, np.uint8))
    assert r.p_value < 1e-20 and not r.passed


def test_runs_prerequisite():
    r = S.runs_test(np.ones(200, np.uint8))
    assert r.p_value == 0.0 and not r.passed


@pytest.mark.parametrize("fn", [S.monobit_test, S.runs_test, S.serial2_test,
                                lambda x: S.block_frequency_test(x, 128)])
def test_short_sequences_rejected(fn):
    with pytest.raises(S.SequenceTooShort):
        fn(np.zeros(99, np.uint8))


def test_battery_skips_with_warning():
    with pytest.warns(UserWarning, match="BlockFrequency"):
        reports = S.run_battery(b(E100), block_len=128)
    assert [r.name for r in reports] == ["Frequency", "Runs", "Serial"]


# ---- special functions (scipy) against high precision ------------------------------------------

def test_special_functions_accuracy():
    mpmath.mp.dps = 40
    for x in np.linspace(0.01, 6.0, 60):
        assert special.erfc(x) == pytest.approx(float(mpmath.erfc(x)), rel=1e-10)
    for a in (0.5, 1.5, 4.5, 64.0):
        for x in np.linspace(0.1, 4 * a + 20, 40):
            want = float(mpmath.gammainc(a, x, mpmath.inf, regularized=True))
            assert special.gammaincc(a, x) == pytest.approx(want, rel=1e-10, abs=1e-300)


# ---- invariants --------------------------------------------------------------------------------

@given(st.binary(min_size=160, max_size=600))
def test_p_values_in_range_and_flags_consistent(data):
    bits = np.unpackbits(np.frombuffer(data, np.uint8))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports = S.run_battery(bits, alpha=0.01)
    for r in reports:
        assert 0.0 <= r.p_value <= 1.0
        assert r.passed == (r.p_value >= r.alpha)


def test_bit_bias_examples():
    assert S.bit_bias(b("0101")) == 0
    assert S.bit_bias(b("1111")) == 1
    with pytest.raises(DomainError):
        S.bit_bias(np.array([], np.uint8))


def test_extractor_bias_within_binomial_band():
    bits = extract_stream(correlated_pair(LatticeConfig(), 2024), 10**6)
    assert S.bit_bias(bits) <= 3.3 / np.sqrt(10**6)


# ---- two-level procedure ----------------------------------------------------------------------------

def test_chi_square_examples():
    even = np.repeat((np.arange(10) + 0.5) / 10, 100)
    assert S.chi_square_uniformity(even) == pytest.approx(1.0)
    lumped = np.full(1000, 0.05)
    assert S.chi_square_uniformity(lumped) < 1e-100
    with pytest.raises(S.SequenceTooShort):
        S.chi_square_uniformity(np.full(49, 0.5))


def test_chi_square_uniform_input_mostly_accepted():
    rng = np.random.default_rng(8)
    ok = sum(S.chi_square_uniformity(rng.random(1000)) >= 1e-4 for _ in range(100))
    assert ok >= 99


def test_chi_square_last_bin_closed():
    p = np.concatenate([np.repeat((np.arange(9) + 0.5) / 10, 100), np.full(100, 1.0)])
    assert S.chi_square_uniformity(p) == pytest.approx(1.0)


def test_threshold_values():
    assert round(S.pass_rate_threshold(0.01, 1000), 5) == 0.98056
    assert round(S.pass_rate_threshold(0.01, 100), 5) == 0.96015


def _reports(ps, alpha=0.01):
    return [S.TestReport("Frequency", 0.0, float(p), alpha) for p in ps]


def test_two_level_all_pass():
    ps = (np.arange(1000) + 0.5) / 1000 * 0.99 + 0.01
    rep = S.two_level_evaluate(_reports(ps), 0.01, 1000)
    assert rep.pass_rate == 1.0 and rep.uniform and rep.passed
    assert rep.pass_rate_threshold == pytest.approx(0.98056, abs=5e-6)


def test_two_level_low_pass_rate_flags():
    ps = np.linspace(0.0, 1.0, 1000)
    ps[:25] = 0.001
    rep = S.two_level_evaluate(_reports(ps), 0.01)
    assert rep.pass_rate == pytest.approx(0.975)
    assert not rep.proportion_ok and not rep.passed


def test_two_level_requires_enough_sequences():
    with pytest.raises(S.SequenceTooShort):
        S.two_level_evaluate(_reports(np.full(99, 0.5)), 0.01)
    with pytest.raises(DomainError):
        S.two_level_evaluate(_reports(np.full(100, 0.5)), 0.01, n_sequences=120)


def test_csv_exports():
    reps = _reports(np.linspace(0.02, 1, 100))
    lines = S.reports_to_csv(reps[:2]).splitlines()
    assert lines[0] == "test,statistic,p_value,pass"
    assert lines[1].endswith(",true")
    summ = S.two_level_to_csv([S.two_level_evaluate(reps, 0.01)]).splitlines()
    assert summ[0] == "sub_test,p_value,pass_rate,pass_rate_threshold,p_value_T,pass"
    assert summ[1].startswith("Frequency,0.0200,1.0000,0.96015,")


# ---- orbit analysis --------------------------------------------------------------------------------

def test_histogram_examples():
    assert list(S.orbit_histogram([0.1, 0.9], 2)) == [1, 1]
    c = S.orbit_histogram(np.full(50, 0.37), 10)
    assert np.count_nonzero(c) == 1
    assert S.orbit_histogram([1.0, 0.0], 4).tolist() == [1, 0, 0, 1]
    with pytest.raises(DomainError):
        S.orbit_histogram([], 10)
    with pytest.raises(DomainError):
        S.orbit_histogram([0.5], 1)
    with pytest.raises(DomainError):
        S.orbit_histogram([1.5], 3)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=300), st.integers(2, 50))
def test_histogram_mass_conserved(vals, bins):
    assert S.orbit_histogram(vals, bins).sum() == len(vals)


def test_tent_lattice_histogram_not_uniform():
    cfg = LatticeConfig(8, 8, 0.1, LocalMap.tent(2.0))
    c = S.orbit_histogram(orbit(new_lattice(cfg, 0), cfg, (1, 1), 10**6), 20)
    expected = 10**6 / 20
    assert np.sum((c - expected) ** 2 / expected) > 1000


def test_bifurcation_size_and_fill():
    rows = S.bifurcation_scan("logistic", (2.5, 4.0), 300, points_per_mu=3, discard=50)
    assert rows.shape == (900, 2)
    full = S.bifurcation_scan("logistic", (4.0, 4.0), 1, points_per_mu=10**4)
    occupied = np.count_nonzero(np.histogram(full[:, 1], 50, (0, 1))[0])
    assert occupied >= 0.95 * 50


def test_bifurcation_fixed_point_slice():
    cfg = LatticeConfig(8, 8, 1e-9, LocalMap.logistic())
    rows = S.bifurcation_scan("logistic", (2.0, 2.0), 1, cfg, points_per_mu=20)
    assert np.allclose(rows[:, 1], 0.5, atol=1e-6)


def test_bifurcation_tent_support_widens():
    rows = S.bifurcation_scan("tent", (1.2, 1.9), 2, points_per_mu=2000)
    lo, hi = rows[rows[:, 0] == 1.2, 1], rows[rows[:, 0] == 1.9, 1]
    assert np.ptp(hi) > np.ptp(lo)


def test_bifurcation_domain():
    with pytest.raises(DomainError):
        S.bifurcation_scan("tent", (1.0, 2.5), 4)
    with pytest.raises(DomainError):
        S.bifurcation_scan("logistic", (2.0, 3.0), 0)
