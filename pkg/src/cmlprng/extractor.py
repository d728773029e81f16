"""Bit extraction from two lattice instances.

Each emitted block pairs the ``z``-bit fixed-point values ``x`` and ``y`` of
the tap nodes of two lattices as ``w_i = x_i XOR y_{z+1-i}``: the most
significant (most biased) bits of one value are matched with the least
significant (least biased) bits of the other.  Emission only starts once a
window of ``K`` orbit samples from both instances passes an independence
test; the window doubles as the transient discard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np
from scipy import special

from . import _kernels as K
from .errors import DegenerateOrbitError, DomainError, IndependenceError
from .lattice import LatticeConfig, LatticeState, _node_index, new_lattice, orbit, perturbed
from .local_maps import le_of
from .lyapunov import le_spectrum

__all__ = [
    "mod_add", "mod_add_raw", "xor_combine", "combined_bias", "pearson",
    "fisher_test", "pearson_fisher_gate", "Instance", "InstancePair",
    "BitStream", "extract_stream", "generate_bytes", "correlated_pair",
]

IndependenceTest = Callable[[np.ndarray, np.ndarray, float], bool]


# --------------------------------------------------------------------------
# combinators
# --------------------------------------------------------------------------

def mod_add(x: Sequence[int], y: Sequence[int]) -> np.ndarray:
    """``w_i = x_i XOR y_{z+1-i}`` on two equal-length bit sequences."""
    xa = np.asarray(x, dtype=np.uint8)
    ya = np.asarray(y, dtype=np.uint8)
    if xa.ndim != 1 or xa.shape != ya.shape:
        raise DomainError(f"bit sequences must have equal length, got {xa.shape} and {ya.shape}")
    return xa ^ ya[::-1]


def mod_add_raw(x: int, y: int, z: int) -> int:
    """:func:`mod_add` on ``z``-bit integers (bit ``w_1`` is the MSB)."""
    if not 1 <= z <= 64:
        raise DomainError(f"z must be in [1, 64], got {z}")
    rev = int(K.rev64(np.uint64(y))) >> (64 - z)
    return x ^ rev


def xor_combine(bits: Sequence[int]) -> int:
    """Parity of the input bits."""
    if len(bits) == 0:
        raise DomainError("xor_combine needs at least one bit")
    return reduce(lambda a, b: a ^ b, (int(b) & 1 for b in bits))


def combined_bias(biases: Sequence[float]) -> float:
    """Bias ``|P(0) - P(1)|`` of the parity of independent bits with the given biases."""
    if len(biases) == 0:
        raise DomainError("combined_bias needs at least one bias")
    return float(np.prod(np.abs(np.asarray(biases, dtype=np.float64))))


# --------------------------------------------------------------------------
# independence test
# --------------------------------------------------------------------------

def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation coefficient of two samples of equal length ``K >= 4``."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("samples must be 1-d and of equal length")
    n = x.size
    if n < 4:
        raise DomainError(f"need at least 4 observations, got {n}")
    xm = x.mean()
    ym = y.mean()
    sxy = np.dot(x, y) - n * xm * ym
    sxx = np.dot(x, x) - n * xm * xm
    syy = np.dot(y, y) - n * ym * ym
    if sxx <= 0.0 or syy <= 0.0:
        # the uncentred form can cancel to ~0; confirm on centred data
        sxx = float(np.sum((x - xm) ** 2))
        syy = float(np.sum((y - ym) ** 2))
        if sxx == 0.0 or syy == 0.0:
            raise DomainError("zero-variance sample")
        sxy = float(np.sum((x - xm) * (y - ym)))
    return float(np.clip(sxy / math.sqrt(sxx * syy), -1.0, 1.0))


def fisher_test(k_xy: float, K: int, alpha: float) -> tuple[float, bool]:
    """Fisher z statistic ``D = sqrt(K-3)/2 ln|(1+k)/(1-k)|`` and whether it
    falls inside the two-sided acceptance interval at level ``alpha``.

    ``|k_xy| = 1`` gives an infinite statistic and a failed test.
    """
    if K < 4:
        raise DomainError(f"K must be >= 4, got {K}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if abs(k_xy) >= 1.0:
        return math.inf, False
    D = math.sqrt(K - 3) / 2.0 * math.log(abs((1.0 + k_xy) / (1.0 - k_xy)))
    bound = -float(special.ndtri(alpha / 2.0))
    return D, -bound < D < bound


def pearson_fisher_gate(xs: np.ndarray, ys: np.ndarray, alpha: float) -> bool:
    try:
        k = pearson(xs, ys)
    except DomainError:
        return False
    return fisher_test(k, len(xs), alpha)[1]


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------

@dataclass
class Instance:
    config: LatticeConfig
    state: LatticeState
    seed: int | None = None
    perturbation: float | None = None

    @classmethod
    def seeded(cls, config: LatticeConfig, seed: int) -> Instance:
        return cls(config, new_lattice(config, seed), seed)


def _max_le(config: LatticeConfig) -> float:
    try:
        le_f = le_of(config.map)
    except DegenerateOrbitError:
        return -math.inf
    return le_spectrum(le_f, config.epsilon, config.rows, config.cols).max


@dataclass
class InstancePair:
    """Two lattice instances plus the extraction settings.

    The pair owns its lattice states and advances them as bits are drawn,
    so it must not be shared between concurrent consumers.
    """

    a: Instance
    b: Instance
    tap_a: tuple[int, int] = (1, 1)
    tap_b: tuple[int, int] = (1, 1)
    z: int = 64
    k_window: int = 1000
    alpha: float = 0.05
    max_windows: int = 16
    retest_interval: int | None = None
    all_nodes: bool = False
    independence_test: IndependenceTest = pearson_fisher_gate
    windows_used: int = field(default=0, init=False)
    steps_discarded: int = field(default=0, init=False)
    blocks_emitted: int = field(default=0, init=False)
    _gated: bool = field(default=False, init=False, repr=False)

    def __post_init__(self):
        for name, inst in (("a", self.a), ("b", self.b)):
            if not 1 <= self.z <= inst.config.precision:
                raise DomainError(
                    f"z={self.z} exceeds the {inst.config.precision}-bit precision of instance {name}")
            if _max_le(inst.config) <= 0.0:
                raise DomainError(f"instance {name} is not chaotic (maximum LE <= 0)")
        _node_index(self.a.config.shape, self.tap_a)
        _node_index(self.b.config.shape, self.tap_b)
        if self.a.config.is_fixed != self.b.config.is_fixed:
            raise DomainError("both instances must use the same arithmetic mode")
        if self.all_nodes and self.a.config.shape != self.b.config.shape:
            raise DomainError("all-nodes mode needs lattices of equal shape")
        if self.k_window < 4:
            raise DomainError("k_window must be >= 4")
        if self.max_windows < 1:
            raise DomainError("max_windows must be >= 1")

    @property
    def bits_per_step(self) -> int:
        return self.z * (self.a.config.rows * self.a.config.cols if self.all_nodes else 1)

    def gate(self) -> int:
        """Run independence windows until one passes; returns windows used."""
        for w in range(1, self.max_windows + 1):
            xs = orbit(self.a.state, self.a.config, self.tap_a, self.k_window)
            ys = orbit(self.b.state, self.b.config, self.tap_b, self.k_window)
            self.windows_used += 1
            self.steps_discarded += self.k_window
            if self.independence_test(xs, ys, self.alpha):
                self._gated = True
                return w
        raise IndependenceError(
            f"orbits failed the independence test in {self.max_windows} consecutive windows")

    def _emit_words(self, n_words: int) -> np.ndarray:
        a, b = self.a, self.b
        ca, cb = a.config, b.config
        ta = (self.tap_a[0] - 1) * ca.cols + self.tap_a[1] - 1
        tb = (self.tap_b[0] - 1) * cb.cols + self.tap_b[1] - 1
        out = np.empty(n_words, dtype=np.uint64)
        if ca.is_fixed:
            K.extract_fixed(a.state.grid, a.state.scratch(), ca.fixed_params(), ta,
                            b.state.grid, b.state.scratch(), cb.fixed_params(), tb,
                            self.z, self.all_nodes, out)
        else:
            K.extract_float(a.state.grid, a.state.scratch(), ca.float_params(), ta,
                            b.state.grid, b.state.scratch(), cb.float_params(), tb,
                            self.z, self.all_nodes, out)
        per_step = self.bits_per_step // self.z
        steps = -(-n_words // per_step)
        a.state.time += steps
        b.state.time += steps
        self.blocks_emitted += n_words
        return out

    def words(self, n_words: int) -> np.ndarray:
        """Next ``n_words`` extracted ``z``-bit blocks (gating first if needed).

        In all-nodes mode a partially consumed step is not resumed: every
        call starts on a fresh step.
        """
        chunks = []
        remaining = n_words
        while remaining > 0:
            if not self._gated:
                self.gate()
            take = remaining
            if self.retest_interval:
                take = min(take, self.retest_interval)
            chunks.append(self._emit_words(take))
            remaining -= take
            if self.retest_interval and remaining > 0:
                self._gated = False
        if not chunks:
            return np.empty(0, dtype=np.uint64)
        return np.concatenate(chunks)

    def provenance(self) -> dict[str, str]:
        rec: dict[str, str] = {}
        for name, inst in (("a", self.a), ("b", self.b)):
            c = inst.config
            rec[f"{name}.map"] = c.map.kind.value
            rec[f"{name}.mu"] = repr(c.map.mu)
            rec[f"{name}.segments"] = str(c.map.segments)
            rec[f"{name}.rows"] = str(c.rows)
            rec[f"{name}.cols"] = str(c.cols)
            rec[f"{name}.epsilon"] = repr(c.epsilon)
            rec[f"{name}.arithmetic"] = f"fixed{c.precision}" if c.is_fixed else "float64"
            rec[f"{name}.seed"] = "" if inst.seed is None else str(inst.seed)
            if inst.perturbation is not None:
                rec[f"{name}.perturb"] = repr(inst.perturbation)
        rec["tap_a"] = f"{self.tap_a[0]},{self.tap_a[1]}"
        rec["tap_b"] = f"{self.tap_b[0]},{self.tap_b[1]}"
        rec["z"] = str(self.z)
        rec["K"] = str(self.k_window)
        rec["alpha"] = repr(self.alpha)
        rec["all_nodes"] = str(self.all_nodes).lower()
        rec["windows_used"] = str(self.windows_used)
        rec["discard_steps"] = str(self.steps_discarded)
        return rec


def correlated_pair(config: LatticeConfig, seed: int, delta: float = 1e-3,
                    config_b: LatticeConfig | None = None, **kwargs) -> InstancePair:
    """Instance B is instance A's seeded grid shifted by ``delta`` (mod 1) on every node.

    This is the worst case for the extractor: two strongly correlated starts.
    ``config_b`` may select a different map for B (its grid shape must match).
    """
    a = Instance.seeded(config, seed)
    cb = config_b or config
    if cb.shape != config.shape or cb.is_fixed != config.is_fixed or cb.precision != config.precision:
        raise DomainError("config_b must share shape and arithmetic with config")
    grid_b = perturbed(a.state, delta).grid
    b = Instance(cb, LatticeState(grid_b, 0, cb), seed, delta)
    return InstancePair(a, b, **kwargs)


# --------------------------------------------------------------------------
# bit streams
# --------------------------------------------------------------------------

def _words_to_bits(words: np.ndarray, z: int) -> np.ndarray:
    bits = np.unpackbits(words.astype(">u8").view(np.uint8)).reshape(-1, 64)
    return np.ascontiguousarray(bits[:, 64 - z:]).ravel()


@dataclass
class BitStream:
    bits: np.ndarray
    origin: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.size and self.bits.max() > 1:
            raise DomainError("bits must be 0 or 1")

    def __len__(self) -> int:
        return int(self.bits.size)

    def to_bytes(self) -> bytes:
        """MSB-first packing; a trailing partial byte is zero-padded."""
        return np.packbits(self.bits).tobytes()

    def to_ascii(self) -> str:
        """One '0'/'1' character per bit, no separators."""
        return (self.bits + ord("0")).tobytes().decode("ascii")

    @classmethod
    def from_bytes(cls, data: bytes, n_bits: int | None = None) -> BitStream:
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        return cls(bits if n_bits is None else bits[:n_bits])

    @classmethod
    def from_ascii(cls, text: str) -> BitStream:
        raw = np.frombuffer(text.strip().encode("ascii"), dtype=np.uint8)
        if raw.size and (raw.min() < ord("0") or raw.max() > ord("1")):
            raise DomainError("ASCII bit streams may only contain '0' and '1'")
        return cls(raw - ord("0"))

    def provenance_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.origin.items())

    def write(self, path, fmt: str = "raw") -> None:
        if fmt == "raw":
            with open(path, "wb") as fh:
                fh.write(self.to_bytes())
        elif fmt == "ascii":
            with open(path, "w", encoding="ascii", newline="") as fh:
                fh.write(self.to_ascii())
        else:
            raise ValueError(f"unknown format {fmt!r}")

    def write_provenance(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.provenance_text())


def extract_stream(pair: InstancePair, n_bits: int) -> BitStream:
    """Draw ``n_bits`` bits from ``pair``; the last block is truncated."""
    if n_bits < 0:
        raise ValueError("n_bits must be non-negative")
    n_words = -(-n_bits // pair.z)
    words = pair.words(n_words)
    bits = _words_to_bits(words, pair.z)[:n_bits]
    origin = pair.provenance()
    origin["n_bits"] = str(n_bits)
    return BitStream(bits, origin)


def generate_bytes(pair: InstancePair, n_bytes: int) -> bytes:
    """``n_bytes`` of MSB-first packed output; the fast path used for benchmarks."""
    if pair.z == 64:
        words = pair.words(-(-n_bytes // 8))
        return words.astype(">u8").tobytes()[:n_bytes]
    return extract_stream(pair, 8 * n_bytes).to_bytes()
