"""Heston parameters, time grids, payoffs and exact CIR moments."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class HestonParams:
    """Log-Heston model with risk-neutral drift ``r`` and strike ``K``.

    ``r`` plays the role of the drift of the log-price and also discounts
    payoffs.
    """

    s0: float
    v0: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    r: float
    T: float
    K: float

    def __post_init__(self):
        for name in ("s0", "v0", "kappa", "theta", "sigma", "T", "K"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho!r}")
        if not math.isfinite(self.r):
            raise ValueError(f"r must be finite, got {self.r!r}")
        nu = self.feller()
        if not (math.isfinite(nu) and nu > 0):
            raise ValueError(f"Feller index is not finite and positive: {nu!r}")

    def feller(self) -> float:
        return 2.0 * self.kappa * self.theta / self.sigma**2

    def replace(self, **changes) -> "HestonParams":
        return replace(self, **changes)


def feller(params: HestonParams) -> float:
    """Feller index ``2 kappa theta / sigma**2`` of the variance process."""
    return params.feller()


PRESETS: dict[str, HestonParams] = {
    "model1": HestonParams(s0=100.0, v0=0.04, kappa=5.0, theta=0.04, sigma=0.61,
                           rho=-0.7, r=0.0319, T=1.0, K=100.0),
    "model2": HestonParams(s0=100.0, v0=0.0457, kappa=5.07, theta=0.0457, sigma=0.48,
                           rho=-0.767, r=0.0, T=2.0, K=100.0),
    "model3": HestonParams(s0=100.0, v0=0.010201, kappa=6.21, theta=0.019, sigma=0.61,
                           rho=-0.7, r=0.0319, T=1.0, K=100.0),
    "model4": HestonParams(s0=100.0, v0=0.09, kappa=2.0, theta=0.09, sigma=1.0,
                           rho=-0.3, r=0.05, T=5.0, K=100.0),
}


def preset(name: str) -> HestonParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown model preset {name!r}; valid presets: {', '.join(PRESETS)}") from None


@dataclass(frozen=True)
class GridSpec:
    """Equidistant grid ``t_k = k * dt`` on ``[0, T]`` with ``N`` steps."""

    T: float
    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")

    @classmethod
    def for_params(cls, params: HestonParams, n_steps: int) -> "GridSpec":
        return cls(params.T, n_steps)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.T
        return t

    def n(self, t: float) -> int:
        """Index of the last grid point not after ``t``."""
        if t < 0 or t > self.T:
            raise ValueError(f"t={t!r} outside [0, {self.T}]")
        k = min(int(math.floor(t / self.dt)), self.n_steps)
        # floor can land one cell off when t is within rounding of a grid point
        if k * self.dt > t:
            k -= 1
        elif k < self.n_steps and (k + 1) * self.dt <= t:
            k += 1
        return k

    def eta(self, t: float) -> float:
        """Grid point ``t_{n(t)}`` at or before ``t``."""
        return self.n(t) * self.dt


class PayoffKind(enum.Enum):
    CALL = "call"
    PUT = "put"
    DIGITAL = "digital"
    SMOOTH_V = "smooth_v"
    SMOOTH_X = "smooth_x"


@dataclass(frozen=True)
class Payoff:
    """Discounted option payoff or a raw state coordinate.

    ``strike`` defaults to ``params.K`` when left unset.
    """

    kind: PayoffKind
    strike: float | None = None

    @classmethod
    def parse(cls, name: str) -> "Payoff":
        return cls(PayoffKind(name))

    @property
    def name(self) -> str:
        return self.kind.value


CALL = Payoff(PayoffKind.CALL)
PUT = Payoff(PayoffKind.PUT)
DIGITAL = Payoff(PayoffKind.DIGITAL)
SMOOTH_V = Payoff(PayoffKind.SMOOTH_V)
SMOOTH_X = Payoff(PayoffKind.SMOOTH_X)


def eval_payoff(p: Payoff, params: HestonParams, terminal_log_price, terminal_variance=None):
    """Evaluate ``p`` at terminal state(s); works on scalars and arrays.

    Call, put and digital are discounted by ``exp(-r T)``.  The digital pays
    on ``S_T <= K``.  ``SMOOTH_X`` returns ``x_N`` and ``SMOOTH_V`` returns
    ``v_N`` undiscounted, the latter requiring ``terminal_variance``.
    """
    x = np.asarray(terminal_log_price, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("terminal log-price must be finite")
    scalar = x.ndim == 0
    kind = p.kind
    if kind is PayoffKind.SMOOTH_X:
        out = x
    elif kind is PayoffKind.SMOOTH_V:
        if terminal_variance is None:
            raise ValueError("SMOOTH_V needs the terminal variance")
        out = np.asarray(terminal_variance, dtype=float)
        if not np.all(np.isfinite(out)):
            raise ValueError("terminal variance must be finite")
    else:
        strike = params.K if p.strike is None else p.strike
        disc = math.exp(-params.r * params.T)
        s = np.exp(x)
        if kind is PayoffKind.CALL:
            out = disc * np.maximum(s - strike, 0.0)
        elif kind is PayoffKind.PUT:
            out = disc * np.maximum(strike - s, 0.0)
        else:
            out = disc * (s <= strike).astype(float)
    return float(out) if scalar else out


def cir_mean(params: HestonParams, t: float) -> float:
    """Exact ``E[V_t] = theta + (v0 - theta) exp(-kappa t)``."""
    return params.theta + (params.v0 - params.theta) * math.exp(-params.kappa * t)


def integrated_cir_mean(params: HestonParams, t: float) -> float:
    """``int_0^t E[V_s] ds`` in closed form."""
    k = params.kappa
    return params.theta * t + (params.v0 - params.theta) * (-math.expm1(-k * t)) / k


def logprice_mean(params: HestonParams, t: float) -> float:
    """Exact ``E[X_t] = log s0 + r t - 0.5 int_0^t E[V_s] ds``."""
    return math.log(params.s0) + params.r * t - 0.5 * integrated_cir_mean(params, t)
