"""Local chaotic maps used at every lattice node.

Three maps are supported: Logistic ``mu x (1 - x)``, Tent, and the
piecewise Logistic map (PLM) with ``N`` segments.  The PLM is evaluated in
local segment coordinates: with ``i = ceil(x N)`` and ``s = x N - (i - 1)``,
odd segments return ``mu s (1 - s)`` and even segments ``1 - mu s (1 - s)``.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .errors import DegenerateOrbitError, DomainError

__all__ = ["MapKind", "LocalMap", "eval_map", "derivative", "local_le", "le_of"]

# float64 absorbing-state replacements: 2**-52 and 1 - 2**-52
FLOAT_BITS = 52
FLOAT_LO = 2.0 ** -FLOAT_BITS
FLOAT_HI = 1.0 - 2.0 ** -FLOAT_BITS

DEFAULT_N_ITER = 10**6
DEFAULT_N_DISCARD = 10**3


class MapKind(str, enum.Enum):
    LOGISTIC = "logistic"
    TENT = "tent"
    PLM = "plm"

    @property
    def code(self) -> int:
        return {"logistic": K.LOGISTIC, "tent": K.TENT, "plm": K.PLM}[self.value]


_MU_MAX = {MapKind.LOGISTIC: 4.0, MapKind.TENT: 2.0, MapKind.PLM: 4.0}
_MU_DEFAULT = {MapKind.LOGISTIC: 4.0, MapKind.TENT: 2.0, MapKind.PLM: 4.0}


@dataclass(frozen=True)
class LocalMap:
    """A local map ``F`` with its parameters.

    ``segments`` is only meaningful for the PLM and is ignored otherwise.
    """

    kind: MapKind
    mu: float
    segments: int = 64

    def __post_init__(self):
        object.__setattr__(self, "kind", MapKind(self.kind))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "segments", int(self.segments))
        hi = _MU_MAX[self.kind]
        if not (0.0 < self.mu <= hi):
            raise DomainError(f"{self.kind.value}: mu must lie in (0, {hi:g}], got {self.mu!r}")
        if self.kind is MapKind.PLM and self.segments < 2:
            raise DomainError(f"plm: segments must be >= 2, got {self.segments}")

    @classmethod
    def logistic(cls, mu: float = 4.0) -> LocalMap:
        return cls(MapKind.LOGISTIC, mu)

    @classmethod
    def tent(cls, mu: float = 2.0) -> LocalMap:
        return cls(MapKind.TENT, mu)

    @classmethod
    def plm(cls, mu: float = 4.0, segments: int = 64) -> LocalMap:
        return cls(MapKind.PLM, mu, segments)

    @classmethod
    def default(cls, kind: MapKind | str) -> LocalMap:
        kind = MapKind(kind)
        return cls(kind, _MU_DEFAULT[kind])

    @property
    def nseg(self) -> int:
        return self.segments if self.kind is MapKind.PLM else 1

    def __call__(self, x):
        return eval_map(self, x)

    def derivative(self, x):
        return derivative(self, x)

    def describe(self) -> str:
        if self.kind is MapKind.PLM:
            return f"plm(mu={self.mu!r}, segments={self.segments})"
        return f"{self.kind.value}(mu={self.mu!r})"


@njit(cache=True)
def _eval_array(xs, kind, mu, nseg):
    out = np.empty_like(xs)
    for i in range(xs.size):
        out.flat[i] = K.f_float(xs.flat[i], kind, mu, nseg)
    return out


@njit(cache=True)
def _deriv_array(xs, kind, mu, nseg):
    out = np.empty_like(xs)
    for i in range(xs.size):
        out.flat[i] = _deriv_strict(xs.flat[i], kind, mu, nseg)
    return out


@njit(cache=True)
def _deriv_strict(x, kind, mu, nseg):
    # nan marks a non-differentiable point
    if kind == K.LOGISTIC:
        return mu * (1.0 - 2.0 * x)
    if kind == K.TENT:
        if x == 0.5:
            return np.nan
        return mu if x < 0.5 else -mu
    t = x * nseg
    k = np.floor(t)
    s = t - k
    if s == 0.0:
        return np.nan
    d = mu * nseg * (1.0 - 2.0 * s)
    return -d if int(k) % 2 == 1 else d


def _check_open_unit(x: np.ndarray) -> None:
    if not np.all((x > 0.0) & (x < 1.0)):
        raise DomainError("x must lie in the open interval (0, 1)")


def eval_map(fmap: LocalMap, x):
    """Evaluate ``F(x)`` for a scalar or array ``x`` in (0, 1)."""
    arr = np.asarray(x, dtype=np.float64)
    _check_open_unit(arr)
    out = _eval_array(np.atleast_1d(arr), fmap.kind.code, fmap.mu, float(fmap.nseg))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def derivative(fmap: LocalMap, x):
    """``F'(x)`` of the active branch.

    Raises :class:`DomainError` at the Tent peak and at PLM segment
    boundaries, where ``F`` is not differentiable.
    """
    arr = np.asarray(x, dtype=np.float64)
    _check_open_unit(arr)
    out = _deriv_array(np.atleast_1d(arr), fmap.kind.code, fmap.mu, float(fmap.nseg))
    if np.isnan(out).any():
        raise DomainError(f"{fmap.describe()} is not differentiable at the given point")
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def local_le(
    fmap: LocalMap,
    x0: float = 0.3141592653589793,
    n_iter: int = DEFAULT_N_ITER,
    n_discard: int = DEFAULT_N_DISCARD,
) -> float:
    """Lyapunov exponent of the uncoupled map, in nats per iteration.

    The orbit average of ``ln|F'(x_m)|`` over ``n_iter`` points, after
    dropping ``n_discard`` transients.  Points where ``F'`` is undefined or
    zero are nudged by one ulp; absorbing values 0 and 1 are replaced by
    ``2**-52`` and ``1 - 2**-52`` exactly as the lattice does.
    """
    if n_iter < 10**4:
        raise ValueError("n_iter must be at least 10**4")
    if n_discard < 0:
        raise ValueError("n_discard must be non-negative")
    if not 0.0 < x0 < 1.0:
        raise DomainError("x0 must lie in (0, 1)")
    le, spread, level = K.local_le_float(
        fmap.kind.code, fmap.mu, float(fmap.nseg), float(x0), int(n_iter), int(n_discard),
        FLOAT_LO, FLOAT_HI,
    )
    if spread <= 1e-12 and level < 1.0:
        raise DegenerateOrbitError(
            f"{fmap.describe()}: orbit from x0={x0!r} collapsed to a fixed point"
        )
    return float(le)


@functools.lru_cache(maxsize=64)
def le_of(fmap: LocalMap) -> float:
    """Cached :func:`local_le` with default settings."""
    return local_le(fmap)
