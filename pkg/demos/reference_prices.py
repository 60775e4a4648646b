"""
Semi-analytic reference prices
==============================

Every weak error in this package is measured against a Fourier price.  This
script prints call, put and digital references for the four presets, checks
them against each other and shows the flat-volatility limit.
"""
import math

from heston_weak_lab import PRESETS, black_scholes_call, reference_set

###############################################################################
# Prices and their internal consistency
# -------------------------------------
# ``parity_residual`` is C - P - (S0 - K e^{-rT}).  The two dual residuals
# compare adaptive Simpson against Gauss-Legendre panels.

print(f"{'model':8s} {'call':>12s} {'put':>12s} {'digital':>10s} {'parity':>10s} {'dual':>10s}")
for name, p in PRESETS.items():
    refs = reference_set(p)
    dual = max(refs["call_dual_residual"], refs["digital_dual_residual"])
    print(f"{name:8s} {refs['call'].value:12.6f} {refs['put'].value:12.6f} {refs['digital'].value:10.6f} "
          f"{refs['parity_residual']:10.1e} {dual:10.1e}")

###############################################################################
# Vanishing vol-of-vol
# --------------------
# With sigma -> 0 and v0 = theta the variance is frozen, so the Heston call
# collapses onto Black-Scholes with volatility sqrt(theta).

for name, p in PRESETS.items():
    flat = p.replace(sigma=1e-8, v0=p.theta)
    heston = reference_set(flat)["call"].value
    bs = black_scholes_call(flat.s0, flat.K, flat.r, flat.T, math.sqrt(flat.theta))
    print(f"{name}: heston={heston:.8f}  black-scholes={bs:.8f}  diff={abs(heston - bs):.1e}")
