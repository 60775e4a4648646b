"""Batched path simulators (numba, GIL released).

Path ``j`` always reads stream ``j`` of the master seed, so a batch over
``[start, stop)`` gives the same per-path values however the full range is
split.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

from .model import HestonParams
from .rng import DOMAIN_AUX, DOMAIN_PAIR, normal_pair, seed_key
from .schemes import SchemeKind


def _param_tuple(params: HestonParams):
    return (math.log(params.s0), params.v0, params.kappa, params.theta, params.sigma,
            params.rho, params.r)


@nb.njit(cache=True, nogil=True)
def _terminal_kernel(scheme, x0, v0, kappa, theta, sigma, rho, r, n_steps, dt,
                     k0, k1, start, out_x, out_v):
    sqdt = math.sqrt(dt)
    rho_perp = math.sqrt(max(1.0 - rho * rho, 0.0))
    for i in range(out_x.shape[0]):
        x = x0
        v = v0
        for k in range(n_steps):
            xi_w, xi_b = normal_pair(k0, k1, start + i, k, DOMAIN_PAIR)
            dw = sqdt * xi_w
            sv = math.sqrt(v)
            x += (r - 0.5 * v) * dt + sv * (rho * dw + rho_perp * sqdt * xi_b)
            z = v + kappa * (theta - v) * dt + sigma * sv * dw
            if z < 0.0:
                z = -z if scheme == 0 else 0.0
            v = z
        out_x[i] = x
        out_v[i] = v


def simulate_terminal_batch(kind: SchemeKind, params: HestonParams, n_steps: int,
                            master_seed: int, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    """Terminal ``(x_N, v_N)`` arrays for paths ``start..stop-1``."""
    count = stop - start
    out_x = np.empty(count)
    out_v = np.empty(count)
    k0, k1 = seed_key(master_seed)
    _terminal_kernel(kind.code, *_param_tuple(params), n_steps, params.T / n_steps,
                     k0, k1, start, out_x, out_v)
    return out_x, out_v


@nb.njit(cache=True, nogil=True)
def _stats_kernel(scheme, x0, v0, kappa, theta, sigma, rho, r, n_steps, dt,
                  k0, k1, start, count, dv2, dx2, v4, zneg):
    sqdt = math.sqrt(dt)
    half = 0.5 * dt
    rho_perp = math.sqrt(max(1.0 - rho * rho, 0.0))
    for i in range(count):
        x = x0
        v = v0
        v4[0] += v * v * v * v
        for k in range(n_steps):
            xi_w, xi_b = normal_pair(k0, k1, start + i, k, DOMAIN_PAIR)
            xi_aux, _ = normal_pair(k0, k1, start + i, k, DOMAIN_AUX)
            dw = sqdt * xi_w
            sv = math.sqrt(v)
            # mid-step Brownian value from the bridge conditioned on dw
            w_half = 0.5 * dw + 0.5 * sqdt * xi_aux
            if v + kappa * (theta - v) * half + sigma * sv * w_half <= 0.0:
                zneg[k] += 1
            x_new = x + (r - 0.5 * v) * dt + sv * (rho * dw + rho_perp * sqdt * xi_b)
            z = v + kappa * (theta - v) * dt + sigma * sv * dw
            if z < 0.0:
                z = -z if scheme == 0 else 0.0
            dv2[k] += (z - v) * (z - v)
            dx2[k] += (x_new - x) * (x_new - x)
            v4[k + 1] += z * z * z * z
            x = x_new
            v = z


def path_statistics_batch(kind: SchemeKind, params: HestonParams, n_steps: int,
                          master_seed: int, start: int, stop: int) -> dict[str, np.ndarray]:
    """Per-step sums over paths ``start..stop-1``.

    Returns ``dv2[k] = sum (v_{k+1}-v_k)^2``, ``dx2`` likewise for the
    log-price, ``v4[k] = sum v_k^4`` for ``k=0..N`` and ``zneg[k]``, the
    number of paths whose un-fixed update at ``t_k + dt/2`` is ``<= 0``.
    """
    dv2 = np.zeros(n_steps)
    dx2 = np.zeros(n_steps)
    v4 = np.zeros(n_steps + 1)
    zneg = np.zeros(n_steps, dtype=np.int64)
    k0, k1 = seed_key(master_seed)
    _stats_kernel(kind.code, *_param_tuple(params), n_steps, params.T / n_steps,
                  k0, k1, start, stop - start, dv2, dx2, v4, zneg)
    return {"dv2": dv2, "dx2": dx2, "v4": v4, "zneg": zneg}


@nb.njit(cache=True, nogil=True)
def pairwise_sum(a):
    """Tree summation with a shape fixed by ``len(a)`` alone."""
    n = a.shape[0]
    if n == 0:
        return 0.0
    buf = a.copy()
    while n > 1:
        half = n // 2
        for i in range(half):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if n % 2:
            buf[half] = buf[n - 1]
            n = half + 1
        else:
            n = half
    return buf[0]


@nb.njit(cache=True, nogil=True)
def mean_and_m2(a):
    n = a.shape[0]
    mean = pairwise_sum(a) / n
    dev = np.empty(n)
    for i in range(n):
        d = a[i] - mean
        dev[i] = d * d
    return mean, pairwise_sum(dev)
