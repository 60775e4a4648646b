"""Reproducible Monte Carlo estimation, weak errors and convergence-rate fits.

Paths ``[0, M)`` are cut into fixed-size chunks.  Each chunk is reduced to
``(count, mean, M2)`` with tree summation, and chunk results are merged in a
tree whose shape depends only on the number of chunks.  The worker count
therefore changes wall-clock time but never a single bit of the result.
"""
from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import GridSpec, HestonParams, Payoff, PayoffKind, cir_mean, eval_payoff, logprice_mean
from .paths import mean_and_m2, simulate_terminal_batch
from .reference import (DEFAULT_QUAD, PriceMethod, QuadratureConfig, ReferencePrice, price_call,
                        price_digital, price_put)
from .rng import derive_seed
from .schemes import SchemeKind

DEFAULT_CHUNK = 1 << 16
THREADS_ENV = "HESTON_LAB_THREADS"
FULL_SAMPLES = 20_000_000
DESK_SAMPLES = 4_000_000


class BudgetExceeded(RuntimeError):
    """The path or wall-clock cap was hit; ``partial`` holds estimates over finished chunks."""

    def __init__(self, message: str, partial: dict):
        super().__init__(message)
        self.partial = partial


class ZeroErrorError(ValueError):
    pass


class CoarseGridWarning(UserWarning):
    pass


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    master_seed: int


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def _merge(a, b):
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * (nb / n), qa + qb + delta * delta * (na * nb / n)


def _tree_merge(parts: Sequence):
    parts = list(parts)
    while len(parts) > 1:
        nxt = [_merge(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _to_estimate(stats, seed: int) -> McEstimate:
    n, mean, m2 = stats
    var = m2 / (n - 1) if n > 1 else float("nan")
    return McEstimate(float(mean), math.sqrt(var / n), int(n), int(seed))


def estimate_many(kind: SchemeKind, params: HestonParams, payoffs: Iterable[Payoff], N: int, M: int,
                  master_seed: int, *, threads: int | None = None, chunk_size: int = DEFAULT_CHUNK,
                  max_seconds: float | None = None, max_paths: int | None = None) -> dict[Payoff, McEstimate]:
    """One batch of ``M`` terminal simulations evaluated under several payoffs."""
    payoffs = list(dict.fromkeys(payoffs))
    if M < 2:
        raise ValueError(f"M must be at least 2 for a standard error, got {M}")
    GridSpec(params.T, N)
    threads = resolve_threads(threads)
    bounds = [(s, min(s + chunk_size, M)) for s in range(0, M, chunk_size)]

    def run_chunk(bound):
        start, stop = bound
        x, v = simulate_terminal_batch(kind, params, N, master_seed, start, stop)
        return [(stop - start, *mean_and_m2(np.ascontiguousarray(eval_payoff(p, params, x, v), dtype=float)))
                for p in payoffs]

    results: list = []
    t0 = time.monotonic()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for w in range(0, len(bounds), threads):
            wave = bounds[w:w + threads]
            results.extend(pool.map(run_chunk, wave))
            done = wave[-1][1]
            over_paths = max_paths is not None and done >= max_paths and done < M
            over_time = max_seconds is not None and time.monotonic() - t0 > max_seconds and done < M
            if over_paths or over_time:
                partial = {p: _to_estimate(_tree_merge([r[i] for r in results]), master_seed)
                           for i, p in enumerate(payoffs)}
                raise BudgetExceeded(f"budget exhausted after {done} of {M} paths", partial)
    return {p: _to_estimate(_tree_merge([r[i] for r in results]), master_seed)
            for i, p in enumerate(payoffs)}


def estimate(kind: SchemeKind, params: HestonParams, payoff: Payoff, N: int, M: int, master_seed: int,
             **kwargs) -> McEstimate:
    """Monte Carlo mean of ``payoff`` over ``M`` paths with ``N`` steps."""
    return estimate_many(kind, params, [payoff], N, M, master_seed, **kwargs)[payoff]


def weak_error(est: McEstimate, ref: ReferencePrice) -> float:
    return abs(ref.value - est.mean)


def reference_for(payoff: Payoff, params: HestonParams, cfg: QuadratureConfig = DEFAULT_QUAD) -> ReferencePrice:
    """``p_ref`` for a payoff: Fourier prices for options, exact means for the smooth functionals."""
    if payoff.strike is not None:
        params = params.replace(K=payoff.strike)
    kind = payoff.kind
    if kind is PayoffKind.CALL:
        return price_call(params, cfg=cfg)
    if kind is PayoffKind.PUT:
        return price_put(params, cfg=cfg)
    if kind is PayoffKind.DIGITAL:
        return price_digital(params, cfg=cfg)
    if kind is PayoffKind.SMOOTH_V:
        return ReferencePrice(cir_mean(params, params.T), 1e-15, PriceMethod.CIR_MEAN)
    return ReferencePrice(logprice_mean(params, params.T), 1e-14, PriceMethod.LOGPRICE_MEAN)


@dataclass(frozen=True)
class ConvergenceStudy:
    grid_sizes: list[int]
    errors: list[float]
    rate: float
    intercept: float
    r_squared: float
    estimates: list[McEstimate] = field(default_factory=list)
    reference: ReferencePrice | None = None


def fit_rate(points: Iterable[tuple[int, float]]) -> ConvergenceStudy:
    """Least squares of ``log2 e(N)`` on ``log2 N``; ``rate`` is minus the slope."""
    points = sorted((int(n), float(e)) for n, e in points)
    if len(points) < 3:
        raise ValueError(f"need at least 3 points for a rate fit, got {len(points)}")
    ns = np.array([p[0] for p in points], dtype=float)
    errs = np.array([p[1] for p in points])
    if np.any(errs <= 0):
        bad = [int(n) for n, e in zip(ns, errs) if e <= 0]
        raise ZeroErrorError(f"zero weak error at N={bad}; log2 is undefined, increase the sample count M")
    lx = np.log2(ns)
    ly = np.log2(errs)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ConvergenceStudy([int(n) for n in ns], errs.tolist(), float(-slope), float(intercept), r2)


def study_seed(master_seed: int, N: int) -> int:
    """Seed used at grid size ``N``; different ``N`` get independent streams."""
    return derive_seed(master_seed, N)


def _check_grid_sizes(grid_sizes: Sequence[int]) -> list[int]:
    sizes = [int(n) for n in grid_sizes]
    if any(n < 1 or n & (n - 1) for n in sizes):
        raise ValueError(f"grid sizes must be powers of two, got {list(grid_sizes)}")
    if sizes != sorted(set(sizes)):
        raise ValueError(f"grid sizes must be strictly ascending, got {list(grid_sizes)}")
    return sizes


def run_studies(kind: SchemeKind, params: HestonParams, payoffs: Iterable[Payoff], grid_sizes: Sequence[int],
                M: int, master_seed: int, **kwargs) -> dict[Payoff, ConvergenceStudy]:
    """Convergence studies for several payoffs sharing one simulation per ``N``."""
    sizes = _check_grid_sizes(grid_sizes)
    payoffs = list(dict.fromkeys(payoffs))
    if params.T / sizes[0] >= 1.0 / params.kappa:
        warnings.warn(f"coarsest step dt={params.T / sizes[0]:.4g} is not below 1/kappa={1 / params.kappa:.4g}",
                      CoarseGridWarning, stacklevel=2)
    refs = {p: reference_for(p, params) for p in payoffs}
    per_n = {n: estimate_many(kind, params, payoffs, n, M, study_seed(master_seed, n), **kwargs) for n in sizes}
    out = {}
    for p in payoffs:
        ests = [per_n[n][p] for n in sizes]
        errs = [weak_error(e, refs[p]) for e in ests]
        fit = fit_rate(zip(sizes, errs))
        out[p] = ConvergenceStudy(fit.grid_sizes, fit.errors, fit.rate, fit.intercept, fit.r_squared,
                                  ests, refs[p])
    return out


def run_study(kind: SchemeKind, params: HestonParams, payoff: Payoff, grid_sizes: Sequence[int], M: int,
              master_seed: int, **kwargs) -> ConvergenceStudy:
    return run_studies(kind, params, [payoff], grid_sizes, M, master_seed, **kwargs)[payoff]
