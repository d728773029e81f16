"""Two-dimensional coupled map lattice on a torus.

Each step updates every node simultaneously::

    x[u, v] <- (1 - eps) F(x[u, v])
               + eps/4 * (F(x[u-1, v]) + F(x[u+1, v]) + F(x[u, v-1]) + F(x[u, v+1]))

with indices taken modulo the grid shape.  Two arithmetic modes are
available, :class:`Float64` and :class:`Fixed` (Q0.z).

Fixed-point grids are stored as ``uint64`` arrays holding the value
left-aligned in 64 fractional bits (the low ``64 - z`` bits are always zero).
Use :meth:`LatticeState.values` for floats and :meth:`LatticeState.fixed`
for a right-aligned :class:`FixedPointValue`.

Node coordinates in the public API are 1-based, ``1 <= u <= R`` and
``1 <= v <= L``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from . import _kernels as K
from .errors import DomainError
from .local_maps import FLOAT_BITS, FLOAT_HI, FLOAT_LO, LocalMap

__all__ = [
    "Float64", "Fixed", "LatticeConfig", "LatticeState", "FixedPointValue",
    "quantize", "bits_of", "new_lattice", "step", "orbit", "perturbed",
    "grid_to_csv",
]


@dataclass(frozen=True)
class Float64:
    """IEEE double arithmetic; 52 usable fractional bits for extraction."""

    @property
    def bits(self) -> int:
        return FLOAT_BITS


@dataclass(frozen=True)
class Fixed:
    """Q0.z fixed-point arithmetic with truncation after every operation."""

    z: int = 64

    def __post_init__(self):
        if not 1 <= int(self.z) <= 64:
            raise DomainError(f"fixed-point precision must be in [1, 64], got {self.z}")
        object.__setattr__(self, "z", int(self.z))

    @property
    def bits(self) -> int:
        return self.z


Arithmetic = Union[Float64, Fixed]


@dataclass(frozen=True)
class FixedPointValue:
    """``raw / 2**z`` with ``0 <= raw < 2**z``."""

    raw: int
    z: int

    def __post_init__(self):
        if not 1 <= self.z <= 64:
            raise DomainError(f"z must be in [1, 64], got {self.z}")
        if not 0 <= self.raw < (1 << self.z):
            raise DomainError(f"raw={self.raw} does not fit in {self.z} bits")

    def __float__(self) -> float:
        return math.ldexp(self.raw, -self.z)


def quantize(x: float, z: int) -> FixedPointValue:
    """Truncate ``x`` in [0, 1) to ``z`` fractional bits: ``raw = floor(x 2**z)``."""
    if not 1 <= z <= 64:
        raise DomainError(f"z must be in [1, 64], got {z}")
    if not 0.0 <= x < 1.0:
        raise DomainError(f"x must lie in [0, 1), got {x!r}")
    # ldexp is exact for binary floats, so int() performs the floor exactly
    return FixedPointValue(int(math.ldexp(x, z)), z)


def bits_of(v: FixedPointValue) -> np.ndarray:
    """Fractional bits ``w_1 .. w_z`` (most significant first) as uint8."""
    return np.array([(v.raw >> (v.z - 1 - i)) & 1 for i in range(v.z)], dtype=np.uint8)


@dataclass(frozen=True)
class LatticeConfig:
    rows: int = 8
    cols: int = 8
    epsilon: float = 0.1
    map: LocalMap = field(default_factory=LocalMap.logistic)
    arithmetic: Arithmetic = field(default_factory=Fixed)

    def __post_init__(self):
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise DomainError("rows and cols must be >= 1")
        if not 0.0 < float(self.epsilon) < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def is_fixed(self) -> bool:
        return isinstance(self.arithmetic, Fixed)

    @property
    def precision(self) -> int:
        return self.arithmetic.bits

    def float_params(self) -> np.ndarray:
        fp = np.zeros(K.FP_SIZE)
        fp[K.FP_KIND] = self.map.kind.code
        fp[K.FP_MU] = self.map.mu
        fp[K.FP_NSEG] = self.map.nseg
        fp[K.FP_EPS] = self.epsilon
        fp[K.FP_LO] = FLOAT_LO
        fp[K.FP_HI] = FLOAT_HI
        return fp

    def fixed_params(self) -> np.ndarray:
        z = self.precision
        drop = 64 - z
        mask = ((1 << 64) - 1) ^ ((1 << drop) - 1)
        mu_int = int(math.floor(self.map.mu))
        mu_frac = int(math.ldexp(self.map.mu - mu_int, 64)) & mask
        c_nb = int(math.ldexp(self.epsilon / 4.0, 64)) & mask
        # 1 - 4 c_nb keeps the four neighbour weights and the self weight summing to one
        c_self = (1 << 64) - 4 * c_nb
        xp = np.zeros(K.XP_SIZE, dtype=np.uint64)
        xp[K.XP_KIND] = self.map.kind.code
        xp[K.XP_MU_INT] = mu_int
        xp[K.XP_MU_FRAC] = mu_frac
        xp[K.XP_NSEG] = self.map.nseg
        xp[K.XP_C_SELF] = c_self & ((1 << 64) - 1)
        xp[K.XP_C_NB] = c_nb
        xp[K.XP_SELF_ONE] = 1 if c_nb == 0 else 0
        xp[K.XP_MASK] = mask
        xp[K.XP_LSB] = 1 << drop
        return xp


@dataclass
class LatticeState:
    grid: np.ndarray
    time: int = 0
    config: LatticeConfig | None = None
    # scratch for the map outputs; doubles as the step's second buffer
    _fbuf: np.ndarray | None = field(default=None, repr=False, compare=False)

    def copy(self) -> LatticeState:
        return LatticeState(self.grid.copy(), self.time, self.config)

    def values(self) -> np.ndarray:
        """Node values as float64."""
        if self.grid.dtype == np.uint64:
            return _raw_to_float(self.grid)
        return self.grid.copy()

    def fixed(self, u: int, v: int) -> FixedPointValue:
        """The node value at 1-based ``(u, v)`` as a Q0.z number."""
        i, j = _node_index(self.grid.shape, (u, v))
        if self.grid.dtype == np.uint64:
            z = self.config.precision if self.config else 64
            return FixedPointValue(int(self.grid[i, j]) >> (64 - z), z)
        return quantize(float(self.grid[i, j]), FLOAT_BITS)

    def scratch(self) -> np.ndarray:
        shape = ((2,) if self.grid.dtype == np.uint64 else ()) + self.grid.shape
        if self._fbuf is None or self._fbuf.shape != shape or self._fbuf.dtype != self.grid.dtype:
            self._fbuf = np.empty(shape, dtype=self.grid.dtype)
        return self._fbuf


def _raw_to_float(raw: np.ndarray) -> np.ndarray:
    # raws within 2**-53 of 1 would round to 1.0
    return np.minimum(np.ldexp(raw.astype(np.float64), -64), np.nextafter(1.0, 0.0))


def _node_index(shape: tuple[int, int], node: tuple[int, int]) -> tuple[int, int]:
    u, v = node
    R, L = shape
    if not (1 <= u <= R and 1 <= v <= L):
        raise IndexError(f"node {node} outside the {R}x{L} lattice (indices are 1-based)")
    return u - 1, v - 1


def _seeded_raw(shape: tuple[int, int], seed: int) -> np.ndarray:
    # Philox is counter based: node k of seed s is a pure function of (s, k)
    gen = np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1)))
    return gen.integers(0, 2**64, size=shape, dtype=np.uint64, endpoint=False)


def _encode(values: np.ndarray, config: LatticeConfig) -> np.ndarray:
    if config.is_fixed:
        z = config.precision
        raw = np.array([[quantize(float(x), z).raw << (64 - z) for x in row] for row in values],
                       dtype=np.uint64)
        if np.any(raw == 0):
            raise DomainError(f"an initial value truncates to 0 at z={z}")
        return raw
    return values.astype(np.float64, copy=True)


def new_lattice(config: LatticeConfig, init: int | Iterable | np.ndarray = 0) -> LatticeState:
    """Create a lattice at time 0.

    ``init`` is either an ``R x L`` array of values in (0, 1) or an integer
    seed.  Seeded grids are expanded from the 64-bit seed with the
    counter-based Philox generator and are reproducible from the seed alone.
    """
    if isinstance(init, (int, np.integer)):
        raw = _seeded_raw(config.shape, int(init))
        if config.is_fixed:
            drop = np.uint64(64 - config.precision)
            raw = (raw >> drop) << drop
            raw[raw == 0] = np.uint64(1) << drop
            grid = raw
        else:
            # 52 random bits, never 0
            grid = np.ldexp((raw >> np.uint64(12)).astype(np.float64), -52)
            grid[grid == 0.0] = FLOAT_LO
    else:
        values = np.asarray(init, dtype=np.float64)
        if values.shape != config.shape:
            raise DomainError(f"init has shape {values.shape}, expected {config.shape}")
        if not np.all((values > 0.0) & (values < 1.0)):
            raise DomainError("initial values must lie in the open interval (0, 1)")
        grid = _encode(values, config)
    return LatticeState(grid=grid, time=0, config=config)


def perturbed(state: LatticeState, delta: float = 1e-3) -> LatticeState:
    """A copy of ``state`` with ``delta`` added to every node, modulo 1."""
    config = state.config
    if config is None:
        raise ValueError("state carries no config")
    if state.grid.dtype == np.uint64:
        z = config.precision
        step_raw = np.uint64(quantize(delta % 1.0, z).raw << (64 - z))
        grid = state.grid + step_raw  # wraps modulo 2**64, i.e. modulo 1
        grid[grid == 0] = np.uint64(1) << np.uint64(64 - z)
    else:
        grid = np.mod(state.grid + delta, 1.0)
        grid[grid <= 0.0] = FLOAT_LO
    return LatticeState(grid=grid, time=state.time, config=config)


def _check(state: LatticeState, config: LatticeConfig) -> None:
    if state.grid.shape != config.shape:
        raise DomainError(f"state shape {state.grid.shape} does not match config {config.shape}")
    want = np.uint64 if config.is_fixed else np.float64
    if state.grid.dtype != want:
        raise DomainError("state arithmetic does not match config arithmetic")


def step(state: LatticeState, config: LatticeConfig | None = None) -> LatticeState:
    """Advance one synchronous step. Returns a new state; ``state`` is untouched."""
    config = config or state.config
    _check(state, config)
    out = LatticeState(state.grid.copy(), state.time, config)
    advance(out, config, 1)
    return out


def advance(state: LatticeState, config: LatticeConfig | None = None, n_steps: int = 1) -> LatticeState:
    """Advance ``state`` in place by ``n_steps`` and return it."""
    config = config or state.config
    _check(state, config)
    orbit_raw(state, config, (1, 1), 0, n_steps)
    return state


def orbit_raw(state: LatticeState, config: LatticeConfig, node: tuple[int, int],
              n_points: int, n_discard: int = 0) -> np.ndarray:
    """Like :func:`orbit` but fixed-point orbits stay as left-aligned uint64 raws."""
    _check(state, config)
    if n_points < 0 or n_discard < 0:
        raise ValueError("n_points and n_discard must be non-negative")
    i, j = _node_index(config.shape, node)
    tap = i * config.cols + j
    if config.is_fixed:
        out = K.orbit_fixed(state.grid, state.scratch(), config.fixed_params(), tap, n_discard, n_points)
    else:
        out = K.orbit_float(state.grid, state.scratch(), config.float_params(), tap, n_discard, n_points)
    state.time += n_discard + n_points
    state.config = config
    return out


def orbit(state: LatticeState, config: LatticeConfig | None, node: tuple[int, int],
          n_points: int, n_discard: int = 0) -> np.ndarray:
    """Advance ``n_discard + n_points`` steps in place, returning the values
    of ``node`` (1-based) after each of the last ``n_points`` steps."""
    config = config or state.config
    out = orbit_raw(state, config, node, n_points, n_discard)
    if out.dtype == np.uint64:
        return _raw_to_float(out)
    return out


def grid_to_csv(state: LatticeState, fh: io.TextIOBase | None = None) -> str:
    """Row-major snapshot with header ``u,v,value`` (1-based indices)."""
    buf = io.StringIO()
    buf.write("u,v,value\n")
    vals = state.values()
    for i in range(vals.shape[0]):
        for j in range(vals.shape[1]):
            buf.write(f"{i + 1},{j + 1},{float(vals[i, j])!r}\n")
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text
