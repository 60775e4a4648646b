"""Counter-based Gaussian streams.

Every normal variate is a pure function of ``(master_seed, stream_id,
step_index)``.  Uniform bits come from the Philox4x32-10 block cipher
(Salmon et al., "Parallel random numbers: as easy as 1, 2, 3"), and are
mapped to normals through Acklam's rational approximation of the inverse
normal CDF.  Because each call consumes a fixed number of uniforms, any path
can be regenerated in isolation, which is what makes Monte Carlo results
independent of how paths are scheduled across workers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint32(0x9E3779B9)
_PHILOX_W1 = np.uint32(0xBB67AE85)

# counter word 1 carries the draw domain; the scheme pair and the auxiliary
# bridge normal never collide
DOMAIN_PAIR = 0
DOMAIN_AUX = 1


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finaliser, used to derive child seeds."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, *labels: int) -> int:
    """Mix integer labels into a master seed, e.g. ``derive_seed(seed, N)``."""
    h = splitmix64(int(master_seed) & _MASK64)
    for label in labels:
        h = splitmix64(h ^ (int(label) & _MASK64))
    return h


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    prod = np.uint64(a) * np.uint64(b)
    return np.uint32(prod >> np.uint64(32)), np.uint32(prod & np.uint64(0xFFFFFFFF))


@nb.njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds; all arguments are uint32 words."""
    c0 = np.uint32(c0)
    c1 = np.uint32(c1)
    c2 = np.uint32(c2)
    c3 = np.uint32(c3)
    k0 = np.uint32(k0)
    k1 = np.uint32(k1)
    for _ in range(10):
        hi0, lo0 = _mulhilo(_PHILOX_M0, c0)
        hi1, lo1 = _mulhilo(_PHILOX_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + _PHILOX_W0)
        k1 = np.uint32(k1 + _PHILOX_W1)
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def _to_open_unit(hi, lo):
    # 53 bits, shifted by half an ulp so that 0 and 1 are never produced
    bits = (np.uint64(hi) << np.uint64(21)) ^ (np.uint64(lo) >> np.uint64(11))
    return (np.float64(bits) + 0.5) * (1.0 / 9007199254740992.0)


# Acklam's coefficients, relative error below 1.15e-9 on (0, 1)
_A1, _A2, _A3 = -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02
_A4, _A5, _A6 = 1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00
_B1, _B2, _B3 = -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02
_B4, _B5 = 6.680131188771972e01, -1.328068155288572e01
_C1, _C2, _C3 = -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00
_C4, _C5, _C6 = -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00
_D1, _D2, _D3 = 7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00
_D4 = 3.754408661907416e00
_P_LOW = 0.02425


@nb.njit(cache=True)
def inverse_normal_cdf(p):
    if p < _P_LOW:
        q = np.sqrt(-2.0 * np.log(p))
        return (((((_C1 * q + _C2) * q + _C3) * q + _C4) * q + _C5) * q + _C6) / (
            (((_D1 * q + _D2) * q + _D3) * q + _D4) * q + 1.0
        )
    if p > 1.0 - _P_LOW:
        q = np.sqrt(-2.0 * np.log1p(-p))
        return -(((((_C1 * q + _C2) * q + _C3) * q + _C4) * q + _C5) * q + _C6) / (
            (((_D1 * q + _D2) * q + _D3) * q + _D4) * q + 1.0
        )
    q = p - 0.5
    r = q * q
    return (((((_A1 * r + _A2) * r + _A3) * r + _A4) * r + _A5) * r + _A6) * q / (
        ((((_B1 * r + _B2) * r + _B3) * r + _B4) * r + _B5) * r + 1.0
    )


@nb.njit(cache=True)
def normal_pair(k0, k1, stream_id, step_index, domain):
    """Two independent N(0,1) variates addressed by (key, stream, step, domain)."""
    sid = np.uint64(stream_id)
    r0, r1, r2, r3 = philox4x32(
        np.uint32(np.uint64(step_index) & np.uint64(0xFFFFFFFF)),
        np.uint32(domain),
        np.uint32(sid & np.uint64(0xFFFFFFFF)),
        np.uint32(sid >> np.uint64(32)),
        k0,
        k1,
    )
    return inverse_normal_cdf(_to_open_unit(r0, r1)), inverse_normal_cdf(_to_open_unit(r2, r3))


def seed_key(master_seed: int) -> tuple[int, int]:
    """Split a 64-bit master seed into the two Philox key words."""
    master_seed = int(master_seed) & _MASK64
    return master_seed & _MASK32, master_seed >> 32


def gaussian_pair(seed: SeedSpec, step_index: int) -> tuple[float, float]:
    """Return the pair ``(xi_W, xi_B)`` for one path and one time step.

    The first variate drives the variance Brownian motion, the second the
    independent price Brownian motion.
    """
    if step_index < 0 or step_index > _MASK32:
        raise ValueError(f"step_index must lie in [0, 2**32), got {step_index}")
    k0, k1 = seed_key(seed.master_seed)
    return normal_pair(k0, k1, seed.stream_id, step_index, DOMAIN_PAIR)


@nb.njit(cache=True)
def _fill_normals(k0, k1, stream_id, n_steps, out):
    for k in range(n_steps):
        a, b = normal_pair(k0, k1, stream_id, k, 0)
        out[k, 0] = a
        out[k, 1] = b


def gaussian_block(seed: SeedSpec, n_steps: int) -> np.ndarray:
    """All pairs of one stream for steps ``0..n_steps-1`` as an ``(n_steps, 2)`` array."""
    out = np.empty((n_steps, 2))
    k0, k1 = seed_key(seed.master_seed)
    _fill_normals(k0, k1, seed.stream_id, n_steps, out)
    return out
