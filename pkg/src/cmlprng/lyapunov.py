"""Lyapunov spectrum of the 2D coupled map lattice.

Along a synchronized trajectory the tangent dynamics factor as
``J_n = F'(x_n) K`` with ``K`` the block-circulant coupling matrix, so every
exponent is ``LE_F + ln|lambda|`` for an eigenvalue ``lambda`` of ``K``.
The eigenvalues are known in closed form (discrete Fourier modes ``r, l``):

    lambda_{r,l} = 1 - eps + eps/2 (cos 2 pi r / R + cos 2 pi l / L)

This module provides the closed form, the dense matrix ``K`` for brute-force
checks, and a numeric QR (Wolf-style) estimator to cross-validate both.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DegenerateOrbitError, DomainError
from .lattice import Float64, LatticeConfig, new_lattice
from .local_maps import FLOAT_LO

__all__ = [
    "SpectrumEntry", "LeSpectrum", "eigenvalues", "coupling_matrix",
    "le_spectrum", "wolf_le", "numeric_to_csv",
]

DIVERGENT = -np.inf
_MAX_DENSE = 4096


def _check_eps(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")


def _check_size(R: int, L: int) -> None:
    if R < 1 or L < 1:
        raise DomainError("R and L must be >= 1")


def eigenvalues(epsilon: float, R: int, L: int) -> np.ndarray:
    """Eigenvalues of the coupling matrix as an ``R x L`` array indexed by ``(r, l)``.

    Computed in complex form from the roots of unity; the imaginary parts
    cancel and a residual above 1e-12 signals an indexing error.
    """
    _check_eps(epsilon)
    _check_size(R, L)
    omega = np.exp(2j * np.pi * np.arange(R) / R)[:, None]
    nu = np.exp(2j * np.pi * np.arange(L) / L)[None, :]
    lam = (1 - epsilon) + epsilon / 4 * (omega + omega ** (R - 1)) + epsilon / 4 * (nu + nu ** (L - 1))
    if np.max(np.abs(lam.imag)) > 1e-12:
        raise AssertionError("eigenvalues acquired an imaginary part")
    return lam.real


def coupling_matrix(epsilon: float, R: int, L: int) -> np.ndarray:
    """Dense ``(R L) x (R L)`` coupling matrix, nodes ordered row-major.

    Only meant as an oracle; refuses sizes above 4096 nodes.
    """
    _check_eps(epsilon)
    _check_size(R, L)
    n = R * L
    if n > _MAX_DENSE:
        raise DomainError(f"coupling_matrix is limited to {_MAX_DENSE} nodes, got {n}")
    Kmat = np.zeros((n, n))
    for u in range(R):
        for v in range(L):
            i = u * L + v
            Kmat[i, i] += 1 - epsilon
            # += so that coinciding neighbours on tiny lattices accumulate
            for du, dv in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                Kmat[i, ((u + du) % R) * L + (v + dv) % L] += epsilon / 4
    return Kmat


@dataclass(frozen=True)
class SpectrumEntry:
    r: int
    l: int
    lambda_modulus: float
    le: float

    @property
    def divergent(self) -> bool:
        return self.le == DIVERGENT


@dataclass(frozen=True)
class LeSpectrum:
    entries: tuple[SpectrumEntry, ...]
    le_f: float

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.le for e in self.entries])

    @property
    def max(self) -> float:
        return self.entries[0].le

    def by_mode(self) -> dict[tuple[int, int], float]:
        return {(e.r, e.l): e.le for e in self.entries}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "l", "lambda", "le"])
        for e in self.entries:
            w.writerow([e.r, e.l, repr(e.lambda_modulus), repr(e.le)])
        return buf.getvalue()


def le_spectrum(le_f: float, epsilon: float, R: int, L: int) -> LeSpectrum:
    """All ``R L`` exponents ``le_f + ln|lambda_{r,l}|``, sorted descending.

    Modes with ``|lambda| < 1e-12`` are reported with ``le = -inf``.
    """
    lam = eigenvalues(epsilon, R, L)
    entries = []
    for r in range(R):
        for l in range(L):
            mod = abs(float(lam[r, l]))
            le = DIVERGENT if mod < 1e-12 else le_f + float(np.log(mod))
            entries.append(SpectrumEntry(r, l, mod, le))
    # stable sort keeps (0, 0) first among ties with le_f
    entries.sort(key=lambda e: -e.le)
    return LeSpectrum(tuple(entries), float(le_f))


def wolf_le(
    config: LatticeConfig,
    n_iter: int = 10**5,
    n_discard: int = 10**3,
    n_exponents: int | None = None,
    *,
    synchronized: bool = True,
    seed: int = 0,
    period: int = 10,
) -> np.ndarray:
    """Numeric Lyapunov exponents by tangent-space QR re-orthonormalization.

    The lattice is iterated in float64 whatever ``config.arithmetic`` says.
    With ``synchronized=True`` (default) every node starts from the same
    seeded value, which the dynamics keep exactly synchronized; this is the
    trajectory on which the closed-form spectrum holds.  With
    ``synchronized=False`` the grid is seeded node by node, giving the
    spectrum of a generic orbit, which differs from the closed form.

    Returns the top ``n_exponents`` estimates, descending.
    """
    n_nodes = config.rows * config.cols
    if n_exponents is None:
        n_exponents = n_nodes
    if not 1 <= n_exponents <= n_nodes:
        raise DomainError(f"n_exponents must be in [1, {n_nodes}]")
    if n_iter < 10**4:
        raise ValueError("n_iter must be at least 10**4")
    if period < 1:
        raise ValueError("period must be >= 1")
    fcfg = LatticeConfig(config.rows, config.cols, config.epsilon, config.map, Float64())
    state = new_lattice(fcfg, seed)
    if synchronized:
        state.grid[:, :] = max(float(state.grid.flat[0]), FLOAT_LO)
    q = np.ascontiguousarray(np.eye(n_nodes)[:, :n_exponents])
    sums, spread, level = K.wolf_float(
        state.grid, state.scratch(), fcfg.float_params(), q, int(n_discard), int(n_iter), int(period)
    )
    if spread <= 1e-12 and level < 1.0:
        raise DegenerateOrbitError("lattice orbit collapsed to a fixed point")
    return np.sort(sums / n_iter)[::-1]


def numeric_to_csv(values: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "le_numeric"])
    for i, v in enumerate(values, start=1):
        w.writerow([i, repr(float(v))])
    return buf.getvalue()
