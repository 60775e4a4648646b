"""Symmetrized and absorbed Euler steps for the log-Heston model.

These scalar functions are the readable definition of the schemes.  The
batched simulators in :mod:`heston_weak_lab.paths` re-implement the same
updates inside numba kernels; the test-suite checks the two against each
other path by path.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import GridSpec, HestonParams
from .rng import SeedSpec, gaussian_block


class SchemeKind(enum.Enum):
    SYMMETRIZED = "sym"
    ABSORBED = "abs"

    @property
    def code(self) -> int:
        return 0 if self is SchemeKind.SYMMETRIZED else 1

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        aliases = {"sym": cls.SYMMETRIZED, "se": cls.SYMMETRIZED, "symmetrized": cls.SYMMETRIZED,
                   "abs": cls.ABSORBED, "ae": cls.ABSORBED, "absorbed": cls.ABSORBED}
        try:
            return aliases[name.lower()]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; use 'sym' or 'abs'") from None


@dataclass(frozen=True)
class ZValue:
    """Affine variance update before the positivity fix is applied."""

    z: float

    def fixed(self, kind: SchemeKind) -> float:
        if kind is SchemeKind.SYMMETRIZED:
            return abs(self.z)
        return max(self.z, 0.0)


@dataclass(frozen=True)
class PathState:
    x: float
    v: float
    k: int = 0


def compute_z(v: float, params: HestonParams, dt_partial: float, dW: float) -> ZValue:
    """``v + kappa (theta - v) h + sigma sqrt(v) dW`` for a (partial) step ``h``."""
    if v < 0:
        raise ValueError(f"variance must be nonnegative, got {v!r}")
    if not dt_partial > 0:
        raise ValueError(f"dt_partial must be positive, got {dt_partial!r}")
    return ZValue(v + params.kappa * (params.theta - v) * dt_partial + params.sigma * math.sqrt(v) * dW)


def step_variance(kind: SchemeKind, v: float, params: HestonParams, dt: float, dW: float) -> float:
    return compute_z(v, params, dt, dW).fixed(kind)


def step_logprice(x: float, v_k: float, params: HestonParams, dt: float, dW: float, dB: float) -> float:
    """Euler step of the log-price driven by the variance's ``dW`` and an independent ``dB``."""
    if v_k < 0:
        raise ValueError(f"variance must be nonnegative, got {v_k!r}")
    rho = params.rho
    return x + (params.r - 0.5 * v_k) * dt + math.sqrt(v_k) * (
        rho * dW + math.sqrt(max(1.0 - rho * rho, 0.0)) * dB
    )


def simulate_terminal(kind: SchemeKind, params: HestonParams, grid: GridSpec, seed: SeedSpec,
                      normals: np.ndarray | None = None) -> tuple[float, float]:
    """Simulate one path to ``t_N`` and return ``(x_N, v_N)``.

    ``normals`` optionally overrides the ``(N, 2)`` array of standard normal
    pairs that would otherwise be read from the counter-based stream.
    """
    if normals is None:
        normals = gaussian_block(seed, grid.n_steps)
    normals = np.asarray(normals, dtype=float)
    if normals.shape != (grid.n_steps, 2):
        raise ValueError(f"normals must have shape ({grid.n_steps}, 2), got {normals.shape}")
    sqdt = math.sqrt(grid.dt)
    x, v = math.log(params.s0), params.v0
    for k in range(grid.n_steps):
        dW = sqdt * normals[k, 0]
        dB = sqdt * normals[k, 1]
        # the log-price step uses v_k, so update it before the variance
        x = step_logprice(x, v, params, grid.dt, dW, dB)
        v = step_variance(kind, v, params, grid.dt, dW)
    return x, v
