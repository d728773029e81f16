"""Compiled inner loops shared by the lattice, extractor and Lyapunov code.

Two arithmetic back ends live here:

* float64 -- node values are ordinary doubles in (0, 1).
* Q0.64 fixed point -- node values are ``uint64`` raws read as ``raw / 2**64``.
  A precision of ``z < 64`` bits is emulated by masking off the low
  ``64 - z`` bits after every multiply/add chain, so the same kernels serve
  every ``1 <= z <= 64``.

Map kinds are passed as small integers (see ``LOGISTIC``/``TENT``/``PLM``).
Parameter vectors are packed into flat arrays so the kernels keep short,
monomorphic signatures; the layouts are given by the ``FP_*`` / ``XP_*``
index constants below and assembled in :mod:`cmlprng.lattice`.
"""

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.extending import intrinsic

LOGISTIC = 0
TENT = 1
PLM = 2

# float64 parameter vector layout
FP_KIND, FP_MU, FP_NSEG, FP_EPS, FP_LO, FP_HI = range(6)
FP_SIZE = 6

# uint64 parameter vector layout
(XP_KIND, XP_MU_INT, XP_MU_FRAC, XP_NSEG, XP_C_SELF, XP_C_NB, XP_SELF_ONE,
 XP_MASK, XP_LSB) = range(9)
XP_SIZE = 9

_U0 = np.uint64(0)
_U1 = np.uint64(1)
_U32 = np.uint64(32)
_HALF = np.uint64(1 << 63)

_DEGENERACY_WINDOW = 100


# --------------------------------------------------------------------------
# Q0.64 helpers
# --------------------------------------------------------------------------

@intrinsic
def _mulhi128(typingctx, a, b):
    sig = types.uint64(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        i128 = ir.IntType(128)
        prod = builder.mul(builder.zext(args[0], i128), builder.zext(args[1], i128))
        return builder.trunc(builder.lshr(prod, ir.Constant(i128, 64)), ir.IntType(64))

    return sig, codegen


@njit(cache=True, inline="always")
def mulhi(a, b):
    """floor(a * b / 2**64) for uint64 operands (one native 128-bit multiply)."""
    return _mulhi128(a, b)


@njit(cache=True, inline="always")
def rev64(v):
    v = ((v >> np.uint64(1)) & np.uint64(0x5555555555555555)) | ((v & np.uint64(0x5555555555555555)) << np.uint64(1))
    v = ((v >> np.uint64(2)) & np.uint64(0x3333333333333333)) | ((v & np.uint64(0x3333333333333333)) << np.uint64(2))
    v = ((v >> np.uint64(4)) & np.uint64(0x0F0F0F0F0F0F0F0F)) | ((v & np.uint64(0x0F0F0F0F0F0F0F0F)) << np.uint64(4))
    v = ((v >> np.uint64(8)) & np.uint64(0x00FF00FF00FF00FF)) | ((v & np.uint64(0x00FF00FF00FF00FF)) << np.uint64(8))
    v = ((v >> np.uint64(16)) & np.uint64(0x0000FFFF0000FFFF)) | ((v & np.uint64(0x0000FFFF0000FFFF)) << np.uint64(16))
    return (v >> _U32) | (v << _U32)


@njit(cache=True, inline="always")
def _scale_mu(mu_int, mu_frac, p):
    # mu * p where the exact product never exceeds 2**64; reaching it wraps to 0
    v = mu_int * p + mulhi(mu_frac, p)
    return v, (v == _U0 and p != _U0)


@njit(cache=True, inline="always")
def f_fixed(x, kind, mu_int, mu_frac, nseg, lsb):
    """Local map on a Q0.64 raw. Returns ``(raw, is_one)``; ``is_one`` flags
    an exact result of 1.0, which has no Q0.64 encoding."""
    if kind == LOGISTIC:
        return _scale_mu(mu_int, mu_frac, mulhi(x, _U0 - x))
    if kind == TENT:
        p = x if x < _HALF else _U0 - x
        return _scale_mu(mu_int, mu_frac, p)
    s = x * nseg
    if s == _U0:
        x = x + lsb
        s = x * nseg
    k = mulhi(x, nseg)
    h, one = _scale_mu(mu_int, mu_frac, mulhi(s, _U0 - s))
    if k & _U1:
        if one:
            return _U0, False
        if h == _U0:
            return _U0, True
        return _U0 - h, False
    return h, one


@njit(cache=True, inline="always")
def _f_fixed_clamped(x, xp):
    lsb = xp[XP_LSB]
    v, one = f_fixed(x, xp[XP_KIND], xp[XP_MU_INT], xp[XP_MU_FRAC], xp[XP_NSEG], lsb)
    if one:
        return _U0 - lsb
    v = v & xp[XP_MASK]
    if v == _U0:
        return lsb
    return v


@njit(cache=True)
def step_fixed(grid, fbuf, xp):
    """Advance a Q0.64 lattice one step in place.

    ``fbuf`` is a ``(2, R, L)`` scratch array receiving the self-weighted and
    neighbour-weighted map outputs.  Every product is truncated on its own, so
    the weighted sum never exceeds the largest map output and cannot wrap.
    """
    R, L = grid.shape
    c_self = xp[XP_C_SELF]
    c_nb = xp[XP_C_NB]
    self_one = xp[XP_SELF_ONE] != _U0
    mask = xp[XP_MASK]
    lsb = xp[XP_LSB]
    for u in range(R):
        for v in range(L):
            f = _f_fixed_clamped(grid[u, v], xp)
            fbuf[0, u, v] = f if self_one else mulhi(c_self, f)
            fbuf[1, u, v] = mulhi(c_nb, f)
    for u in range(R):
        up = u - 1 if u > 0 else R - 1
        dn = u + 1 if u < R - 1 else 0
        for v in range(L):
            lf = v - 1 if v > 0 else L - 1
            rt = v + 1 if v < L - 1 else 0
            out = (fbuf[0, u, v] + fbuf[1, up, v] + fbuf[1, dn, v]
                   + fbuf[1, u, lf] + fbuf[1, u, rt]) & mask
            if out == _U0:
                out = lsb
            grid[u, v] = out


# --------------------------------------------------------------------------
# float64 helpers
# --------------------------------------------------------------------------

@njit(cache=True, inline="always")
def f_float(x, kind, mu, nseg):
    if kind == LOGISTIC:
        return mu * x * (1.0 - x)
    if kind == TENT:
        if x < 0.5:
            return mu * x
        return mu * (1.0 - x)
    t = x * nseg
    k = np.floor(t)
    s = t - k
    if s == 0.0:
        x = np.nextafter(x, 2.0)
        t = x * nseg
        k = np.floor(t)
        s = t - k
    if k > nseg - 1.0:
        k = nseg - 1.0
    h = mu * s * (1.0 - s)
    if int(k) % 2 == 1:
        return 1.0 - h
    return h


@njit(cache=True)
def df_float(x, kind, mu, nseg):
    """Derivative of the active branch; non-differentiable points and exact
    zeros of the derivative are nudged one ulp to the right."""
    for _ in range(4):
        if kind == LOGISTIC:
            d = mu * (1.0 - 2.0 * x)
        elif kind == TENT:
            if x == 0.5:
                x = np.nextafter(x, 2.0)
            d = mu if x < 0.5 else -mu
        else:
            t = x * nseg
            k = np.floor(t)
            s = t - k
            if s == 0.0:
                x = np.nextafter(x, 2.0)
                continue
            if k > nseg - 1.0:
                k = nseg - 1.0
            d = mu * nseg * (1.0 - 2.0 * s)
            if int(k) % 2 == 1:
                d = -d
        if d != 0.0:
            return d
        x = np.nextafter(x, 2.0)
    return d


@njit(cache=True, inline="always")
def _f_float_clamped(x, fp):
    y = f_float(x, int(fp[FP_KIND]), fp[FP_MU], fp[FP_NSEG])
    if y <= 0.0:
        return fp[FP_LO]
    if y >= 1.0:
        return fp[FP_HI]
    return y


@njit(cache=True)
def step_float(grid, fbuf, fp):
    """Advance a float64 lattice one step in place (``fbuf`` is scratch)."""
    R, L = grid.shape
    for u in range(R):
        for v in range(L):
            fbuf[u, v] = _f_float_clamped(grid[u, v], fp)
    eps = fp[FP_EPS]
    c_self = 1.0 - eps
    c_nb = eps / 4.0
    lo = fp[FP_LO]
    hi = fp[FP_HI]
    for u in range(R):
        up = u - 1 if u > 0 else R - 1
        dn = u + 1 if u < R - 1 else 0
        for v in range(L):
            lf = v - 1 if v > 0 else L - 1
            rt = v + 1 if v < L - 1 else 0
            nb = fbuf[up, v] + fbuf[dn, v] + fbuf[u, lf] + fbuf[u, rt]
            out = c_self * fbuf[u, v] + c_nb * nb
            if out <= 0.0:
                out = lo
            elif out >= 1.0:
                out = hi
            grid[u, v] = out


# --------------------------------------------------------------------------
# orbit collection
# --------------------------------------------------------------------------

@njit(cache=True)
def orbit_float(grid, fbuf, fp, tap, n_discard, n_points):
    L = grid.shape[1]
    tu, tv = tap // L, tap % L
    for _ in range(n_discard):
        step_float(grid, fbuf, fp)
    out = np.empty(n_points, dtype=np.float64)
    for i in range(n_points):
        step_float(grid, fbuf, fp)
        out[i] = grid[tu, tv]
    return out


@njit(cache=True)
def orbit_fixed(grid, fbuf, xp, tap, n_discard, n_points):
    L = grid.shape[1]
    tu, tv = tap // L, tap % L
    for _ in range(n_discard):
        step_fixed(grid, fbuf, xp)
    out = np.empty(n_points, dtype=np.uint64)
    for i in range(n_points):
        step_fixed(grid, fbuf, xp)
        out[i] = grid[tu, tv]
    return out


# --------------------------------------------------------------------------
# extraction: w = x XOR bitreverse_z(y), one z-bit word per emitted block
# --------------------------------------------------------------------------

@njit(cache=True)
def extract_fixed(ga, fa, xpa, tap_a, gb, fb, xpb, tap_b, z, all_nodes, out):
    shift = np.uint64(64 - z)
    La = ga.shape[1]
    Lb = gb.shape[1]
    n_nodes = ga.shape[0] * La
    per_step = n_nodes if all_nodes else 1
    n = out.shape[0]
    i = 0
    while i < n:
        step_fixed(ga, fa, xpa)
        step_fixed(gb, fb, xpb)
        for j in range(per_step):
            if i >= n:
                break
            if all_nodes:
                ia, ib = j, j
            else:
                ia, ib = tap_a, tap_b
            x = ga[ia // La, ia % La] >> shift
            y = gb[ib // Lb, ib % Lb] >> shift
            out[i] = x ^ (rev64(y) >> shift)
            i += 1


@njit(cache=True)
def extract_float(ga, fa, fpa, tap_a, gb, fb, fpb, tap_b, z, all_nodes, out):
    scale = 2.0 ** z
    shift = np.uint64(64 - z)
    La = ga.shape[1]
    Lb = gb.shape[1]
    n_nodes = ga.shape[0] * La
    per_step = n_nodes if all_nodes else 1
    n = out.shape[0]
    i = 0
    while i < n:
        step_float(ga, fa, fpa)
        step_float(gb, fb, fpb)
        for j in range(per_step):
            if i >= n:
                break
            if all_nodes:
                ia, ib = j, j
            else:
                ia, ib = tap_a, tap_b
            x = np.uint64(ga[ia // La, ia % La] * scale)
            y = np.uint64(gb[ib // Lb, ib % Lb] * scale)
            out[i] = x ^ (rev64(y) >> shift)
            i += 1


# --------------------------------------------------------------------------
# Lyapunov exponents
# --------------------------------------------------------------------------

@njit(cache=True)
def local_le_float(kind, mu, nseg, x0, n_iter, n_discard, lo, hi):
    """Time average of ln|F'| along a scalar orbit.

    Returns ``(le, spread, level)`` where ``spread``/``level`` are the range
    and maximum of |F'| over the last iterations (degeneracy diagnostics).
    """
    x = x0
    for _ in range(n_discard):
        x = f_float(x, kind, mu, nseg)
        if x <= 0.0:
            x = lo
        elif x >= 1.0:
            x = hi
    acc = 0.0
    w_lo = np.inf
    w_hi = 0.0
    tail = n_iter - _DEGENERACY_WINDOW
    for m in range(n_iter):
        d = abs(df_float(x, kind, mu, nseg))
        acc += np.log(d)
        if m >= tail:
            w_lo = min(w_lo, d)
            w_hi = max(w_hi, d)
        x = f_float(x, kind, mu, nseg)
        if x <= 0.0:
            x = lo
        elif x >= 1.0:
            x = hi
    return acc / n_iter, w_hi - w_lo, w_hi


@njit(cache=True)
def wolf_float(grid, fbuf, fp, q, n_discard, n_iter, period):
    """Tangent-space propagation with periodic QR re-orthonormalization.

    ``q`` (n_nodes x k) holds the initial orthonormal frame. Returns the
    accumulated ``sum ln|diag R|`` per direction and the degeneracy
    diagnostics of :func:`local_le_float` (applied to the lattice mean |F'|).
    """
    R, L = grid.shape
    n_nodes = R * L
    k = q.shape[1]
    kind = int(fp[FP_KIND])
    mu = fp[FP_MU]
    nseg = fp[FP_NSEG]
    eps = fp[FP_EPS]
    c_self = 1.0 - eps
    c_nb = eps / 4.0
    for _ in range(n_discard):
        step_float(grid, fbuf, fp)
    d = np.empty((R, L))
    tmp = np.empty((R, L))
    qn = np.empty((n_nodes, k))
    sums = np.zeros(k)
    w_lo = np.inf
    w_hi = 0.0
    tail = n_iter - _DEGENERACY_WINDOW
    for it in range(n_iter):
        dmean = 0.0
        for u in range(R):
            for v in range(L):
                d[u, v] = df_float(grid[u, v], kind, mu, nseg)
                dmean += abs(d[u, v])
        dmean /= n_nodes
        if it >= tail:
            w_lo = min(w_lo, dmean)
            w_hi = max(w_hi, dmean)
        for j in range(k):
            for u in range(R):
                for v in range(L):
                    tmp[u, v] = d[u, v] * q[u * L + v, j]
            for u in range(R):
                up = u - 1 if u > 0 else R - 1
                dn = u + 1 if u < R - 1 else 0
                for v in range(L):
                    lf = v - 1 if v > 0 else L - 1
                    rt = v + 1 if v < L - 1 else 0
                    qn[u * L + v, j] = c_self * tmp[u, v] + c_nb * (
                        tmp[up, v] + tmp[dn, v] + tmp[u, lf] + tmp[u, rt])
        step_float(grid, fbuf, fp)
        if (it + 1) % period == 0 or it == n_iter - 1:
            qq, rr = np.linalg.qr(qn)
            for j in range(k):
                sums[j] += np.log(abs(rr[j, j]))
            q[:, :] = qq
        else:
            q[:, :] = qn
    return sums, w_hi - w_lo, w_hi
