"""Seeded stochastic processes for income and savings.

Income follows an arithmetic form I(t) = I0 * (1 + mu * t + sigma_i * W(t))
floored at zero, with W a standard Brownian motion discretized on the step
grid.  Savings follow a geometric Euler step
S <- S * (1 + r * dt + sigma_m * sqrt(dt) * z) plus an end-of-period
contribution.  The two shock streams can be correlated through
``correlated_normal_pair``.

Reproducibility contract
------------------------
Every Monte Carlo trial draws from its own generator derived from
(master_seed, trial_index) through a SplitMix64 finalizer, bit exactly:

    z = (master_seed + (trial_index + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    seed = z XOR (z >> 31)

``derive_stream_seed(m, k)`` equals the (k+1)-th output of the reference
SplitMix64 sequence started at state m.  The derived 64-bit seed feeds
numpy's PCG64 bit generator.  Results are therefore independent of worker
count and of trial completion order as long as aggregation walks trials in
index order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .domain import Money
from .errors import ValidationError

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB

THREADS_ENV_VAR = "THIRDRULE_THREADS"


def derive_stream_seed(master_seed: int, trial_index: int) -> int:
    """Mix (master_seed, trial_index) into a 64-bit stream seed.

    See the module docstring for the exact bit recipe.
    """
    if not 0 <= master_seed < 2**64:
        raise ValidationError("master_seed must fit in 64 bits")
    if trial_index < 0:
        raise ValidationError("trial_index must be nonnegative")
    z = (master_seed + (trial_index + 1) * _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX_1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_2) & _MASK64
    return z ^ (z >> 31)


def derive_trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Per-trial generator: PCG64 seeded with the derived stream seed."""
    return np.random.Generator(np.random.PCG64(derive_stream_seed(master_seed, trial_index)))


def mix_correlated(rho: float, z_first: np.ndarray, z_second: np.ndarray) -> np.ndarray:
    """Combine two independent standard normal draws into one correlated
    with the first at coefficient rho."""
    if not -1.0 <= rho <= 1.0:
        raise ValidationError("rho must lie in [-1, 1]")
    return rho * z_first + math.sqrt(1.0 - rho * rho) * z_second


def correlated_normal_pair(rho: float, rng: np.random.Generator) -> tuple[float, float]:
    """Draw (z1, z2) standard normal with corr(z1, z2) = rho."""
    z = rng.standard_normal(2)
    return float(z[0]), float(mix_correlated(rho, z[0], z[1]))


@dataclass(frozen=True)
class PathConfig:
    """Simulation clock and trial budget.

    horizon_years must be an integer number of dt_years steps.
    """

    horizon_years: float
    dt_years: float = 1.0 / 12.0
    trials: int = 1
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.horizon_years) or self.horizon_years <= 0:
            raise ValidationError("horizon_years must be positive and finite")
        if not math.isfinite(self.dt_years) or self.dt_years <= 0:
            raise ValidationError("dt_years must be positive and finite")
        ratio = self.horizon_years / self.dt_years
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValidationError("horizon_years must be a whole number of dt_years steps")
        if not isinstance(self.trials, int) or isinstance(self.trials, bool) or self.trials < 1:
            raise ValidationError("trials must be a positive integer")
        if not isinstance(self.master_seed, int) or isinstance(self.master_seed, bool):
            raise ValidationError("master_seed must be an integer")
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master_seed must fit in 64 bits")

    @property
    def steps(self) -> int:
        return round(self.horizon_years / self.dt_years)


def income_levels(
    i0_units: float, mu: float, sigma_income: float, dt: float, shocks: np.ndarray
) -> np.ndarray:
    """Income level at each step given the per-step normal shocks.

    Returns an array of len(shocks) + 1 values starting at I0, floored at
    zero.  Shared by the path op and the stress harness so both see the
    same discretization.
    """
    steps = len(shocks)
    t = np.arange(1, steps + 1) * dt
    w = np.cumsum(math.sqrt(dt) * np.asarray(shocks, dtype=float))
    levels = i0_units * (1.0 + mu * t + sigma_income * w)
    out = np.empty(steps + 1)
    out[0] = i0_units
    out[1:] = np.maximum(levels, 0.0)
    return out


@dataclass(frozen=True, eq=False)
class IncomePath:
    """One simulated income trajectory, cent-quantized per step."""

    times: np.ndarray
    cents: np.ndarray
    floored_steps: int = 0

    @property
    def units(self) -> np.ndarray:
        return self.cents / 100.0

    def values(self) -> list[Money]:
        return [Money(int(c)) for c in self.cents]


@dataclass(frozen=True, eq=False)
class SavingsPath:
    """One simulated savings trajectory, cent-quantized per step."""

    times: np.ndarray
    cents: np.ndarray

    @property
    def units(self) -> np.ndarray:
        return self.cents / 100.0

    def values(self) -> list[Money]:
        return [Money(int(c)) for c in self.cents]


def simulate_income_path(
    i0: Money,
    mu: float,
    sigma_income: float,
    cfg: PathConfig,
    rng: np.random.Generator,
) -> IncomePath:
    """Simulate one income path on cfg's step grid.

    Draws cfg.steps standard normals from rng in a single call.
    """
    if sigma_income < 0:
        raise ValidationError("sigma_income must be nonnegative")
    n = cfg.steps
    dt = cfg.dt_years
    z = rng.standard_normal(n)
    t = np.arange(1, n + 1) * dt
    w = np.cumsum(math.sqrt(dt) * z)
    raw = i0.units * (1.0 + mu * t + sigma_income * w)
    floored = int(np.count_nonzero(raw < 0.0))
    levels = np.empty(n + 1)
    levels[0] = i0.units
    levels[1:] = np.maximum(raw, 0.0)
    times = np.arange(n + 1) * dt
    cents = np.rint(levels * 100.0).astype(np.int64)
    return IncomePath(times=times, cents=cents, floored_steps=floored)


def simulate_savings_path(
    s0: Money,
    contribution: Money,
    rate: float,
    sigma_market: float,
    cfg: PathConfig,
    rng: np.random.Generator,
    shocks: np.ndarray | None = None,
) -> SavingsPath:
    """Simulate one savings path with an end-of-period contribution.

    Each step applies the factor (1 + rate * dt + sigma_market * sqrt(dt) * z)
    to the running balance, then adds the contribution.  The factor is
    floored at zero (a total-loss step cannot push the balance negative).
    Pass ``shocks`` to reuse an externally drawn normal stream, for
    example one correlated with an income path.
    """
    if sigma_market < 0:
        raise ValidationError("sigma_market must be nonnegative")
    n = cfg.steps
    dt = cfg.dt_years
    if shocks is None:
        z = rng.standard_normal(n)
    else:
        z = np.asarray(shocks, dtype=float)
        if z.shape != (n,):
            raise ValidationError(f"shocks must have shape ({n},)")
    sqrt_dt = math.sqrt(dt)
    c = contribution.units
    value = s0.units
    values = [value]
    for k in range(n):
        value = value * max(1.0 + rate * dt + sigma_market * sqrt_dt * z[k], 0.0) + c
        values.append(value)
    times = np.arange(n + 1) * dt
    cents = np.rint(np.asarray(values) * 100.0).astype(np.int64)
    return SavingsPath(times=times, cents=cents)


def thread_count() -> int:
    """Worker cap from the THIRDRULE_THREADS env var.  0 or unset = auto."""
    raw = os.environ.get(THREADS_ENV_VAR, "").strip()
    if raw == "":
        requested = 0
    else:
        try:
            requested = int(raw)
        except ValueError as exc:
            raise ValidationError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
    if requested < 0:
        raise ValidationError(f"{THREADS_ENV_VAR} must be nonnegative")
    if requested == 0:
        return min(8, os.cpu_count() or 1)
    return requested
