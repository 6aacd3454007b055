"""Hashing and Gaussian kernels, each with a numba and a numpy implementation.

Digest of a coordinate ``(seed, a, b, c)``::

    h = mix64(seed + GOLDEN)
    h = mix64((h ^ a) + GOLDEN)
    h = mix64((h ^ b) + GOLDEN)
    h = mix64((h ^ c) + GOLDEN)

where ``mix64`` is the SplitMix64 finalizer::

    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

All arithmetic is modulo 2**64. The digest is turned into a normal deviate by
Box-Muller on its two 32-bit halves (first output only)::

    u1 = (hi32 + 0.5) / 2**32,  u2 = (lo32 + 0.5) / 2**32
    z  = sqrt(-2 ln u1) * cos(2 pi u2)

Trial streams (Monte Carlo) are plain SplitMix64 generators seeded with a
digest; normals are drawn with the Marsaglia polar method, consuming one
64-bit output per candidate pair and using both members of an accepted pair.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit, prange

GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1
INV_2_32 = 1.0 / 4294967296.0
TWO_PI = 2.0 * math.pi

_G = np.uint64(GOLDEN)
_M1 = np.uint64(MIX1)
_M2 = np.uint64(MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_LO = np.uint64(0xFFFFFFFF)


# -- pure-python reference (scalar API, used for single lookups) --------------

def mix64_int(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def digest_int(seed, a, b, c):
    h = mix64_int(seed + GOLDEN)
    h = mix64_int((h ^ a) + GOLDEN)
    h = mix64_int((h ^ b) + GOLDEN)
    return mix64_int((h ^ c) + GOLDEN)


def gaussian_from_digest_int(h):
    u1 = ((h >> 32) + 0.5) * INV_2_32
    u2 = ((h & 0xFFFFFFFF) + 0.5) * INV_2_32
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)


# -- numpy ------------------------------------------------------------------

def _mix64_np(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def digest_np(seed, a, b, c):
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    c = np.asarray(c, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64_np(np.asarray(np.uint64(seed)) + _G)
    h = _mix64_np((h ^ a) + _G)
    h = _mix64_np((h ^ b) + _G)
    return _mix64_np((h ^ c) + _G)


def gaussian_np(h):
    u1 = ((h >> _S32).astype(np.float64) + 0.5) * INV_2_32
    u2 = ((h & _LO).astype(np.float64) + 0.5) * INV_2_32
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)


def field_block_np(seed, y0, x0, h, w, channels):
    ys = np.arange(y0, y0 + h, dtype=np.uint64)[:, None, None]
    xs = np.arange(x0, x0 + w, dtype=np.uint64)[None, :, None]
    ds = np.arange(channels, dtype=np.uint64)[None, None, :]
    return gaussian_np(digest_np(seed, ys, xs, ds))


def gaussians_at_np(seed, ys, xs, ds):
    return gaussian_np(digest_np(seed, ys, xs, ds))


# -- numba ------------------------------------------------------------------

@njit(inline="always")
def _mix64_nb(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def _digest_nb(seed, a, b, c):
    g = np.uint64(0x9E3779B97F4A7C15)
    h = _mix64_nb(seed + g)
    h = _mix64_nb((h ^ a) + g)
    h = _mix64_nb((h ^ b) + g)
    return _mix64_nb((h ^ c) + g)


@njit(inline="always")
def _gaussian_nb(h):
    u1 = (np.float64(h >> np.uint64(32)) + 0.5) * 2.3283064365386963e-10
    u2 = (np.float64(h & np.uint64(0xFFFFFFFF)) + 0.5) * 2.3283064365386963e-10
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(6.283185307179586 * u2)


@njit
def _field_block_nb(seed, y0, x0, h, w, channels):
    out = np.empty((h, w, channels))
    s = np.uint64(seed)
    for i in range(h):
        for j in range(w):
            for k in range(channels):
                out[i, j, k] = _gaussian_nb(
                    _digest_nb(s, np.uint64(y0 + i), np.uint64(x0 + j), np.uint64(k))
                )
    return out


@njit
def _gaussians_at_nb(seed, ys, xs, ds):
    n = ys.shape[0]
    out = np.empty(n)
    s = np.uint64(seed)
    for i in range(n):
        out[i] = _gaussian_nb(_digest_nb(s, ys[i], xs[i], ds[i]))
    return out


def field_block(seed, y0, x0, h, w, channels):
    """Unit-Gaussian field values on the rectangle ``[y0, y0+h) x [x0, x0+w)``."""
    if USE_NUMBA:
        return _field_block_nb(seed, y0, x0, h, w, channels)
    return field_block_np(seed, y0, x0, h, w, channels)


def gaussians_at(seed, ys, xs, ds):
    """Field values at an explicit list of coordinates (1-d arrays)."""
    ys = np.ascontiguousarray(ys, dtype=np.uint64).ravel()
    xs = np.ascontiguousarray(xs, dtype=np.uint64).ravel()
    ds = np.ascontiguousarray(ds, dtype=np.uint64).ravel()
    if USE_NUMBA:
        return _gaussians_at_nb(np.uint64(seed), ys, xs, ds)
    return gaussians_at_np(seed, ys, xs, ds)


# -- Monte Carlo trial streams ------------------------------------------------

@njit(parallel=True)
def _transition_errors_nb(trial_seeds, d, t_s, t_e, beta, alpha_u, alpha_i):
    n = trial_seeds.shape[0]
    err_u = np.empty(n)
    err_i = np.empty(n)
    for t in prange(n):
        state = trial_seeds[t]
        acc_u = 0.0
        acc_i = 0.0
        have = False
        spare = 0.0
        vals = np.empty(3)
        for j in range(d):
            for m in range(3):
                if have:
                    vals[m] = spare
                    have = False
                else:
                    while True:
                        state = state + np.uint64(0x9E3779B97F4A7C15)
                        r = _mix64_nb(state)
                        u = (np.float64(r >> np.uint64(32)) + 0.5) * 4.656612873077393e-10 - 1.0
                        v = (np.float64(r & np.uint64(0xFFFFFFFF)) + 0.5) * 4.656612873077393e-10 - 1.0
                        q = u * u + v * v
                        if q < 1.0:
                            break
                    f = np.sqrt(-2.0 * np.log(q) / q)
                    vals[m] = u * f
                    spare = v * f
                    have = True
            x0 = vals[0]
            eps = vals[1]
            eps_new = vals[2]
            x_s = (1.0 - t_s) * x0 + t_s * eps
            target = (1.0 - t_e) * x0 + t_e * eps
            du = beta * x_s + alpha_u * eps - target
            di = beta * x_s + alpha_i * eps_new - target
            acc_u += du * du
            acc_i += di * di
        err_u[t] = acc_u
        err_i[t] = acc_i
    return err_u, err_i


def _polar_normals_np(states, count):
    """``count`` polar-method normals per trial, lockstep across trials.

    Consumes each trial's SplitMix64 stream in exactly the order the numba
    kernel does, so both backends see the same deviates.
    """
    n = states.shape[0]
    states = states.copy()
    out = np.empty((n, count + 1))
    filled = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        todo = rows[filled < count]
        if todo.size == 0:
            break
        with np.errstate(over="ignore"):
            states[todo] += _G
        r = _mix64_np(states[todo])
        u = ((r >> _S32).astype(np.float64) + 0.5) * 4.656612873077393e-10 - 1.0
        v = ((r & _LO).astype(np.float64) + 0.5) * 4.656612873077393e-10 - 1.0
        q = u * u + v * v
        ok = q < 1.0
        todo, u, v, q = todo[ok], u[ok], v[ok], q[ok]
        f = np.sqrt(-2.0 * np.log(q) / q)
        pos = filled[todo]
        out[todo, pos] = u * f
        out[todo, pos + 1] = v * f
        filled[todo] += 2
    return out[:, :count]


def _transition_errors_np(trial_seeds, d, t_s, t_e, beta, alpha_u, alpha_i, chunk=512):
    n = trial_seeds.shape[0]
    err_u = np.empty(n)
    err_i = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        z = _polar_normals_np(trial_seeds[lo:hi], 3 * d).reshape(hi - lo, d, 3)
        x0, eps, eps_new = z[..., 0], z[..., 1], z[..., 2]
        x_s = (1.0 - t_s) * x0 + t_s * eps
        target = (1.0 - t_e) * x0 + t_e * eps
        du = beta * x_s + alpha_u * eps - target
        di = beta * x_s + alpha_i * eps_new - target
        err_u[lo:hi] = np.einsum("ij,ij->i", du, du)
        err_i[lo:hi] = np.einsum("ij,ij->i", di, di)
    return err_u, err_i


def transition_errors(trial_seeds, d, t_s, t_e, beta, alpha_u, alpha_i, use_numba=None):
    """Per-trial squared errors of the unified and independent re-noise updates.

    Each trial draws ``(x0_j, eps_j, eps'_j)`` for ``j < d`` from its own
    stream, so results do not depend on how trials are split across threads.
    """
    trial_seeds = np.ascontiguousarray(trial_seeds, dtype=np.uint64)
    if use_numba is None:
        use_numba = USE_NUMBA
    args = (trial_seeds, int(d), float(t_s), float(t_e), float(beta), float(alpha_u), float(alpha_i))
    if use_numba:
        return _transition_errors_nb(*args)
    return _transition_errors_np(*args)
