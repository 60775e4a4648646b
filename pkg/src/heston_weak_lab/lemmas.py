"""Checks of the negativity-probability machinery behind the weak error analysis.

Deterministic part: the auxiliary sequence ``c_j`` with its upper bound,
the derived ``a_j >= 0`` and the closed-form constant ``c`` of the bound
``P(Z_t <= 0) <= c (dt/eps)^(nu (1-eps))``.

Monte Carlo part: the per-step frequency of a non-positive un-fixed
update at mid-step times, plus per-step increment and fourth moments used
for the empirical increment-scaling and moment-stability checks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import DEFAULT_CHUNK, fit_rate, resolve_threads
from .model import HestonParams
from .paths import path_statistics_batch
from .schemes import SchemeKind

EPSILON_GRID = tuple(round(0.05 * i, 2) for i in range(1, 11))


class LemmaPreconditionError(ValueError):
    pass


def _check_preconditions(params: HestonParams, N: int, epsilon: float | None = None) -> float:
    if int(N) != N or N < 1:
        raise LemmaPreconditionError(f"N must be a positive integer, got {N!r}")
    dt = params.T / N
    if not dt < 1.0 / params.kappa:
        raise LemmaPreconditionError(
            f"dt = T/N = {dt:.6g} must be below 1/kappa = {1.0 / params.kappa:.6g}; increase N")
    if epsilon is not None and not 0.0 < epsilon <= 0.5:
        raise LemmaPreconditionError(f"epsilon must lie in (0, 1/2], got {epsilon!r}")
    return dt


@dataclass(frozen=True)
class SequenceTrace:
    """``c_j`` and ``a_j`` for ``j = 0..N+1``.

    The recursion is carried one index past ``N`` because the bound on
    ``exp(-v0 a_{k+1})`` is needed for ``k = N``.
    """

    alpha_N: float
    c: np.ndarray
    a: np.ndarray
    epsilon: float
    delta_t: float

    @property
    def N(self) -> int:
        return len(self.c) - 2

    def cj_upper_bound(self) -> np.ndarray:
        """``1 - alpha_N - eps (1-eps) / (1 + eps (j-1))`` for ``j = 1..N``."""
        j = np.arange(1, self.N + 1)
        eps = self.epsilon
        return 1.0 - self.alpha_N - eps * (1.0 - eps) / (1.0 + eps * (j - 1))

    def cj_slack(self) -> np.ndarray:
        return self.cj_upper_bound() - self.c[1:self.N + 1]

    def recursion_residual(self) -> np.ndarray:
        c, al = self.c, self.alpha_N
        return c[2:] - (c[1:-1] ** 2 + (al - al * al))


def build_sequence(params: HestonParams, N: int, epsilon: float) -> SequenceTrace:
    dt = _check_preconditions(params, N, epsilon)
    alpha = (1.0 - params.kappa * dt) / 2.0
    shift = alpha - alpha * alpha
    c = np.empty(N + 2)
    c[0] = alpha
    c[1] = shift
    for j in range(1, N + 1):
        c[j + 1] = c[j] * c[j] + shift
    a = 2.0 * (alpha - c) / (params.sigma**2 * dt)
    return SequenceTrace(alpha, c, a, float(epsilon), dt)


@dataclass(frozen=True)
class BoundConstant:
    value: float


def bound_constant(params: HestonParams) -> BoundConstant:
    """``exp(kappa (nu T + 2 v0 / sigma^2)) * max(1, sigma^2 nu / (v0 e))^nu``."""
    nu = params.feller()
    s2 = params.sigma**2
    first = math.exp(params.kappa * (nu * params.T + 2.0 * params.v0 / s2))
    second = max(1.0, s2 * nu / (params.v0 * math.e)) ** nu
    return BoundConstant(first * second)


def negativity_bound(params: HestonParams, N: int, epsilon: float) -> float:
    dt = _check_preconditions(params, N, epsilon)
    nu = params.feller()
    return bound_constant(params).value * (dt / epsilon) ** (nu * (1.0 - epsilon))


def best_negativity_bound(params: HestonParams, N: int,
                          eps_grid: tuple[float, ...] = EPSILON_GRID) -> tuple[float, float]:
    """Smallest bound over ``eps_grid``, returned as ``(epsilon, bound)``."""
    return min(((e, negativity_bound(params, N, e)) for e in eps_grid), key=lambda t: t[1])


def log_product_bound(params: HestonParams, trace: SequenceTrace) -> np.ndarray:
    """``log`` of ``exp(-kappa theta sum_{j<=k} a_j dt) exp(-v0 a_{k+1})`` for ``k = 1..N``.

    Kept in log form so that extreme parameter sets cannot underflow.
    """
    N = trace.N
    partial = np.cumsum(trace.a[1:N + 1]) * trace.delta_t
    return -params.kappa * params.theta * partial - params.v0 * trace.a[2:N + 2]


@dataclass(frozen=True)
class LemmaRow:
    N: int
    epsilon: float
    alpha_N: float
    max_cj_slack: float
    min_cj_slack: float
    max_c_minus_alpha: float
    min_aj: float
    plugin_bound: float
    max_log_product_margin: float

    @property
    def deterministic_pass(self) -> bool:
        return self.min_cj_slack >= 0.0 and self.max_c_minus_alpha <= 0.0 and self.min_aj >= 0.0 \
            and self.max_log_product_margin <= 0.0


def check_lemmas(params: HestonParams, N: int, epsilon: float) -> LemmaRow:
    """Evaluate every deterministic inequality for one ``(N, epsilon)``."""
    tr = build_sequence(params, N, epsilon)
    slack = tr.cj_slack()
    plug = negativity_bound(params, N, epsilon)
    log_rhs = math.log(bound_constant(params).value) + params.feller() * (1 - epsilon) * math.log(
        tr.delta_t / epsilon)
    margin = log_product_bound(params, tr) - log_rhs
    return LemmaRow(
        N=N,
        epsilon=epsilon,
        alpha_N=tr.alpha_N,
        max_cj_slack=float(slack.max()),
        min_cj_slack=float(slack.min()),
        max_c_minus_alpha=float(np.max(tr.c[:N + 1] - tr.alpha_N)),
        min_aj=float(tr.a[:N + 1].min()),
        plugin_bound=plug,
        max_log_product_margin=float(margin.max()),
    )


def path_moments(kind: SchemeKind, params: HestonParams, N: int, M: int, master_seed: int, *,
                 threads: int | None = None, chunk_size: int = DEFAULT_CHUNK) -> dict[str, np.ndarray]:
    """Per-step Monte Carlo moments over ``M`` paths.

    ``dv2[k] ~ E|v_{k+1}-v_k|^2``, ``dx2[k] ~ E|x_{k+1}-x_k|^2``,
    ``v4[k] ~ E v_k^4`` and ``p_neg[k] ~ P(Z <= 0 at t_k + dt/2)``.
    """
    if M < 2:
        raise ValueError(f"M must be at least 2, got {M}")
    bounds = [(s, min(s + chunk_size, M)) for s in range(0, M, chunk_size)]
    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as pool:
        parts = list(pool.map(
            lambda b: path_statistics_batch(kind, params, N, master_seed, b[0], b[1]), bounds))
    total = {key: np.zeros_like(parts[0][key]) for key in parts[0]}
    for part in parts:  # fixed chunk order
        for key in total:
            total[key] += part[key]
    return {"dv2": total["dv2"] / M, "dx2": total["dx2"] / M, "v4": total["v4"] / M,
            "p_neg": total["zneg"] / M, "zneg": total["zneg"], "M": M}


def estimate_negativity(kind: SchemeKind, params: HestonParams, N: int, M: int, master_seed: int,
                        **kwargs) -> list[tuple[int, float, float]]:
    """``(k, p_hat_k, stderr_k)`` for ``P(Z <= 0)`` at ``t_k + dt/2``, ``k = 0..N-1``."""
    _check_preconditions(params, N)
    p = path_moments(kind, params, N, M, master_seed, **kwargs)["p_neg"]
    se = np.sqrt(p * (1.0 - p) / M)
    return [(k, float(p[k]), float(se[k])) for k in range(N)]


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    r_squared: float
    dts: list[float]
    values: list[float]


def increment_scaling(kind: SchemeKind, params: HestonParams, grid_sizes, M: int, master_seed: int,
                      **kwargs) -> dict[str, ScalingFit]:
    """Slopes of ``log max_k E|increment|^2`` against ``log dt`` for ``v`` and ``x``.

    Also returns, under ``"v4_max"``, the largest ``E v_k^4`` per grid size.
    """
    dv, dx, v4 = [], [], []
    for n in grid_sizes:
        mom = path_moments(kind, params, n, M, master_seed + n, **kwargs)
        dv.append(float(mom["dv2"].max()))
        dx.append(float(mom["dx2"].max()))
        v4.append(float(mom["v4"].max()))
    dts = [params.T / n for n in grid_sizes]
    out = {}
    for name, vals in (("v", dv), ("x", dx)):
        # fit_rate regresses against log2 N = -log2 dt + const, so the slope in dt is the rate
        fit = fit_rate(zip(grid_sizes, vals))
        out[name] = ScalingFit(fit.rate, fit.r_squared, dts, vals)
    out["v4_max"] = ScalingFit(float("nan"), float("nan"), dts, v4)
    return out
