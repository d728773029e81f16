"""Randomness tests, two-level evaluation and orbit analysis.

Four sub-tests of the NIST SP 800-22 battery are implemented in-process
(frequency, block frequency, runs, serial).  The remaining ones are meant to
be run by the external suites on exported ASCII/raw streams.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .lattice import LatticeConfig, new_lattice, orbit
from .local_maps import LocalMap, MapKind

__all__ = [
    "TestReport", "TwoLevelReport", "SequenceTooShort", "bit_bias",
    "monobit_test", "block_frequency_test", "runs_test", "serial2_test",
    "serial_test", "run_battery", "chi_square_uniformity",
    "pass_rate_threshold", "two_level_evaluate", "bifurcation_scan",
    "orbit_histogram", "reports_to_csv", "two_level_to_csv",
    "BATTERY",
]

MIN_LENGTH = 100
UNIFORMITY_CUTOFF = 1e-4


class SequenceTooShort(DomainError):
    pass


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    name: str
    statistic: float
    p_value: float
    alpha: float = 0.01
    details: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return self.p_value >= self.alpha


@dataclass(frozen=True)
class TwoLevelReport:
    name: str
    per_sequence: tuple[TestReport, ...]
    pass_rate: float
    pass_rate_threshold: float
    p_value_T: float

    @property
    def uniform(self) -> bool:
        return self.p_value_T >= UNIFORMITY_CUTOFF

    @property
    def proportion_ok(self) -> bool:
        return self.pass_rate >= self.pass_rate_threshold

    @property
    def passed(self) -> bool:
        return self.uniform and self.proportion_ok


def _bits(bits) -> np.ndarray:
    arr = np.asarray(getattr(bits, "bits", bits), dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise DomainError("bits must be 0 or 1")
    return arr


def _require(arr: np.ndarray, n: int, test: str) -> None:
    if arr.size < n:
        raise SequenceTooShort(f"{test} needs at least {n} bits, got {arr.size}")


def bit_bias(bits) -> float:
    """``|#zeros - #ones| / n``."""
    arr = _bits(bits)
    if arr.size == 0:
        raise DomainError("empty bit stream")
    ones = int(arr.sum(dtype=np.int64))
    return abs(arr.size - 2 * ones) / arr.size


# --------------------------------------------------------------------------
# sub-tests; the _*_stat helpers skip the minimum-length policy so the short
# worked examples from the NIST document can be checked as well
# --------------------------------------------------------------------------

def _monobit_stat(arr):
    s = 2 * int(arr.sum(dtype=np.int64)) - arr.size
    s_obs = abs(s) / math.sqrt(arr.size)
    return s_obs, float(special.erfc(s_obs / math.sqrt(2)))


def monobit_test(bits, alpha: float = 0.01) -> TestReport:
    arr = _bits(bits)
    _require(arr, MIN_LENGTH, "frequency test")
    stat, p = _monobit_stat(arr)
    return TestReport("Frequency", stat, p, alpha)


def _block_frequency_stat(arr, M):
    N = arr.size // M
    blocks = arr[: N * M].reshape(N, M)
    pi = blocks.sum(axis=1, dtype=np.int64) / M
    chi2 = 4.0 * M * float(np.sum((pi - 0.5) ** 2))
    return chi2, float(special.gammaincc(N / 2.0, chi2 / 2.0))


def block_frequency_test(bits, block_len: int = 128, alpha: float = 0.01) -> TestReport:
    arr = _bits(bits)
    _require(arr, max(MIN_LENGTH, block_len), "block frequency test")
    stat, p = _block_frequency_stat(arr, block_len)
    return TestReport("BlockFrequency", stat, p, alpha, {"block_len": block_len})


def _runs_stat(arr):
    n = arr.size
    pi = float(arr.sum(dtype=np.int64)) / n
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        # frequency prerequisite failed; the runs test is not applicable
        return math.nan, 0.0
    v = 1 + int(np.count_nonzero(np.diff(arr)))
    num = abs(v - 2.0 * n * pi * (1 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1 - pi)
    return float(v), float(special.erfc(num / den))


def runs_test(bits, alpha: float = 0.01) -> TestReport:
    arr = _bits(bits)
    _require(arr, MIN_LENGTH, "runs test")
    stat, p = _runs_stat(arr)
    return TestReport("Runs", stat, p, alpha)


def _psi2(arr, m):
    if m <= 0:
        return 0.0
    n = arr.size
    ext = np.concatenate([arr, arr[: m - 1]]).astype(np.int64)
    codes = np.zeros(n, dtype=np.int64)
    for j in range(m):
        codes = (codes << 1) | ext[j: j + n]
    counts = np.bincount(codes, minlength=1 << m)
    return float((1 << m) / n * np.sum(counts.astype(np.float64) ** 2) - n)


def _serial_stat(arr, m):
    p0, p1, p2 = _psi2(arr, m), _psi2(arr, m - 1), _psi2(arr, m - 2)
    d1 = p0 - p1
    d2 = p0 - 2 * p1 + p2
    pv1 = float(special.gammaincc(2 ** (m - 2), d1 / 2.0))
    pv2 = float(special.gammaincc(2 ** (m - 3), d2 / 2.0))
    return d1, pv1, d2, pv2


def serial_test(bits, m: int = 2, alpha: float = 0.01) -> tuple[TestReport, TestReport]:
    """Both serial-test P-values for pattern length ``m``."""
    arr = _bits(bits)
    _require(arr, MIN_LENGTH, "serial test")
    if m < 2 or m >= int(math.log2(arr.size)) - 2:
        raise SequenceTooShort(f"serial test with m={m} is not applicable to {arr.size} bits")
    d1, pv1, d2, pv2 = _serial_stat(arr, m)
    return (TestReport("Serial", d1, pv1, alpha, {"m": m}),
            TestReport("Serial-2", d2, pv2, alpha, {"m": m}))


def serial2_test(bits, alpha: float = 0.01, m: int = 2) -> TestReport:
    """Serial test; the report carries the first P-value, the second is in ``details``."""
    first, second = serial_test(bits, m, alpha)
    return TestReport("Serial", first.statistic, first.p_value, alpha,
                      {"m": m, "statistic2": second.statistic, "p_value2": second.p_value})


BATTERY = ("Frequency", "BlockFrequency", "Runs", "Serial")


def run_battery(bits, alpha: float = 0.01, block_len: int = 128, serial_m: int = 2) -> list[TestReport]:
    """The four internal sub-tests; inapplicable ones are skipped with a warning."""
    arr = _bits(bits)
    calls = (
        lambda: monobit_test(arr, alpha),
        lambda: block_frequency_test(arr, block_len, alpha),
        lambda: runs_test(arr, alpha),
        lambda: serial2_test(arr, alpha, serial_m),
    )
    out = []
    for name, call in zip(BATTERY, calls):
        try:
            out.append(call())
        except SequenceTooShort as exc:
            warnings.warn(f"skipping {name}: {exc}", stacklevel=2)
    return out


# --------------------------------------------------------------------------
# two-level procedure
# --------------------------------------------------------------------------

def chi_square_uniformity(p_values: Sequence[float], bins: int = 10) -> float:
    """P-value of a chi-square goodness-of-fit test of the P-values against U(0, 1)."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size < 50:
        raise SequenceTooShort(f"need at least 50 P-values, got {p.size}")
    if np.any((p < 0) | (p > 1)):
        raise DomainError("P-values must lie in [0, 1]")
    # half-open bins, the last one closed
    counts, _ = np.histogram(p, bins=bins, range=(0.0, 1.0))
    expected = p.size / bins
    chi2 = float(np.sum((counts - expected) ** 2) / expected)
    return float(special.gammaincc((bins - 1) / 2.0, chi2 / 2.0))


def pass_rate_threshold(alpha: float, n_sequences: int) -> float:
    """Lower edge of the 3-sigma normal-approximation interval for the pass rate."""
    p = 1.0 - alpha
    return p - 3.0 * math.sqrt(p * alpha / n_sequences)


def two_level_evaluate(reports: Sequence[TestReport], alpha: float | None = None,
                       n_sequences: int | None = None) -> TwoLevelReport:
    reports = tuple(reports)
    if not reports:
        raise SequenceTooShort("no reports to evaluate")
    alpha = reports[0].alpha if alpha is None else alpha
    n = len(reports) if n_sequences is None else n_sequences
    if n != len(reports):
        raise DomainError(f"n_sequences={n} but {len(reports)} reports were given")
    if n < 1.0 / alpha:
        raise SequenceTooShort(f"need at least 1/alpha = {math.ceil(1 / alpha)} sequences, got {n}")
    passed = sum(r.p_value >= alpha for r in reports)
    return TwoLevelReport(
        name=reports[0].name,
        per_sequence=reports,
        pass_rate=passed / n,
        pass_rate_threshold=pass_rate_threshold(alpha, n),
        p_value_T=chi_square_uniformity([r.p_value for r in reports]),
    )


def reports_to_csv(reports: Sequence[TestReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["test", "statistic", "p_value", "pass"])
    for r in reports:
        w.writerow([r.name, repr(r.statistic), repr(r.p_value), str(r.passed).lower()])
    return buf.getvalue()


def two_level_to_csv(summary: Sequence[TwoLevelReport]) -> str:
    """Table I layout: one row per sub-test with a representative P-value."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sub_test", "p_value", "pass_rate", "pass_rate_threshold", "p_value_T", "pass"])
    for s in summary:
        w.writerow([s.name, f"{s.per_sequence[0].p_value:.4f}", f"{s.pass_rate:.4f}",
                    f"{s.pass_rate_threshold:.5f}", f"{s.p_value_T:.4f}", str(s.passed).lower()])
    return buf.getvalue()


# --------------------------------------------------------------------------
# orbit analysis
# --------------------------------------------------------------------------

def bifurcation_scan(
    map_kind: MapKind | str,
    mu_range: tuple[float, float],
    mu_steps: int,
    config: LatticeConfig | None = None,
    node: tuple[int, int] = (1, 1),
    points_per_mu: int = 100,
    discard: int = 1000,
    seed: int = 0,
    segments: int = 64,
) -> np.ndarray:
    """``(mu, value)`` rows: the post-transient orbit of ``node`` for each of
    ``mu_steps`` equally spaced parameters, each from a freshly seeded lattice."""
    config = config or LatticeConfig()
    kind = MapKind(map_kind)
    lo, hi = mu_range
    if mu_steps < 1:
        raise DomainError("mu_steps must be >= 1")
    mus = np.linspace(lo, hi, mu_steps) if mu_steps > 1 else np.array([float(lo)])
    out = np.empty((mu_steps * points_per_mu, 2))
    for i, mu in enumerate(mus):
        cfg = LatticeConfig(config.rows, config.cols, config.epsilon,
                            LocalMap(kind, float(mu), segments), config.arithmetic)
        st = new_lattice(cfg, seed)
        rows = slice(i * points_per_mu, (i + 1) * points_per_mu)
        out[rows, 0] = mu
        out[rows, 1] = orbit(st, cfg, node, points_per_mu, discard)
    return out


def orbit_histogram(values: Sequence[float], bins: int = 100) -> np.ndarray:
    """Counts over ``bins`` equal-width bins of [0, 1] (the last bin closed)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("empty orbit")
    if bins < 2:
        raise DomainError("bins must be >= 2")
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise DomainError("orbit values must lie in [0, 1]")
    counts, _ = np.histogram(arr, bins=bins, range=(0.0, 1.0))
    return counts
