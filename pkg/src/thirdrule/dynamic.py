"""Finite-horizon allocation planning by backward induction.

States are (income, debt balance, savings balance) on a rectangular grid;
actions are (debt, savings, expenses) fractions on a simplex lattice with
a configurable step (1/30 by default, which contains the equal-thirds
point exactly).  The per-period reward is the Cobb-Douglas utility of the
allocated amounts plus a small state term
state_weight * (log(1 + savings) - log(1 + debt)) that makes carried
savings valuable and carried debt costly.  Income shocks are integrated
with Gauss-Hermite quadrature; continuation values are interpolated
multilinearly, clamping states that leave the grid to its edges.

Ties in the action choice break toward the action closest to the
equal-thirds point in L1 distance (action lists are pre-sorted by that
distance, so the first maximum wins).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .domain import Allocation, Money
from .errors import ValidationError
from .utility_opt import UtilityParams

DEFAULT_ACTION_STEP = Fraction(1, 30)
DEFAULT_GRID_NODES = 11


@dataclass(frozen=True)
class HouseholdState:
    income: Money
    debt: Money
    savings: Money


@dataclass(frozen=True)
class DynamicConfig:
    """Planner inputs: horizon, rates, shock model, grids, and reward."""

    horizon: int
    income_grid: tuple[float, ...]
    debt_grid: tuple[float, ...]
    savings_grid: tuple[float, ...]
    discount: float = 0.95
    debt_apr: float = 0.0
    savings_return: float = 0.0
    income_growth: float = 0.0
    shock_std: float = 0.0
    shock_samples: int = 7
    action_step: Fraction = DEFAULT_ACTION_STEP
    params: UtilityParams = UtilityParams.symmetric()
    state_weight: float = 0.1

    def __post_init__(self) -> None:
        if not isinstance(self.horizon, int) or isinstance(self.horizon, bool) or self.horizon < 1:
            raise ValidationError("horizon must be a positive integer of periods")
        for name in ("income_grid", "debt_grid", "savings_grid"):
            raw = getattr(self, name)
            grid = tuple(float(x) for x in raw)
            if len(grid) < 2:
                raise ValidationError(f"{name} needs at least two nodes")
            if any(not math.isfinite(x) for x in grid):
                raise ValidationError(f"{name} must be finite")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValidationError(f"{name} must be strictly increasing")
            if grid[0] < 0:
                raise ValidationError(f"{name} must be nonnegative")
            object.__setattr__(self, name, grid)
        if not 0.0 < self.discount <= 1.0:
            raise ValidationError("discount must lie in (0, 1]")
        if self.debt_apr < 0 or not math.isfinite(self.debt_apr):
            raise ValidationError("debt_apr must be nonnegative and finite")
        if self.savings_return <= -1.0 or not math.isfinite(self.savings_return):
            raise ValidationError("savings_return must exceed -1")
        if self.income_growth <= -1.0 or not math.isfinite(self.income_growth):
            raise ValidationError("income_growth must exceed -1")
        if self.shock_std < 0 or not math.isfinite(self.shock_std):
            raise ValidationError("shock_std must be nonnegative and finite")
        if (
            not isinstance(self.shock_samples, int)
            or isinstance(self.shock_samples, bool)
            or self.shock_samples < 1
        ):
            raise ValidationError("shock_samples must be a positive integer")
        step = self.action_step
        if not isinstance(step, Fraction) or step <= 0 or step > 1:
            raise ValidationError("action_step must be a Fraction in (0, 1]")
        if (1 / step).denominator != 1:
            raise ValidationError("action_step must divide 1 exactly")
        if self.state_weight < 0 or not math.isfinite(self.state_weight):
            raise ValidationError("state_weight must be nonnegative and finite")


def default_config(initial: HouseholdState, horizon: int, **overrides) -> DynamicConfig:
    """Grids centered on the initial state: income log-spaced over
    [0.25x, 4x] starting income, debt and savings linear over [0, 3x]."""
    i0 = initial.income.units
    if i0 <= 0:
        raise ValidationError("default grids need positive starting income")
    fields = dict(
        horizon=horizon,
        income_grid=tuple(np.geomspace(0.25 * i0, 4.0 * i0, DEFAULT_GRID_NODES)),
        debt_grid=tuple(np.linspace(0.0, 3.0 * i0, DEFAULT_GRID_NODES)),
        savings_grid=tuple(np.linspace(0.0, 3.0 * i0, DEFAULT_GRID_NODES)),
    )
    fields.update(overrides)
    return DynamicConfig(**fields)


def transition(
    state: HouseholdState, action: Allocation, shock: float, cfg: DynamicConfig
) -> HouseholdState:
    """One-period state update for an allocation of the state's income.

    debt' = max(0, debt * (1 + apr) - debt_payment)
    savings' = savings * (1 + return) + savings_deposit
    income' = max(0, income * (1 + growth + shock_std * shock))
    """
    if action.income.cents != state.income.cents:
        raise ValidationError("action must allocate exactly the state's income")
    debt_next = max(0.0, state.debt.units * (1.0 + cfg.debt_apr) - action.debt.units)
    savings_next = state.savings.units * (1.0 + cfg.savings_return) + action.savings.units
    income_next = max(
        0.0, state.income.units * (1.0 + cfg.income_growth + cfg.shock_std * shock)
    )
    return HouseholdState(
        income=Money.of(income_next),
        debt=Money.of(debt_next),
        savings=Money.of(savings_next),
    )


def _simplex_actions(step: Fraction) -> tuple[np.ndarray, int]:
    """All lattice fraction triples, sorted by L1 distance to the
    equal-thirds point (then lexicographically) for deterministic
    tie-breaking."""
    q = int(1 / step)
    triples = []
    for kd in range(q + 1):
        for ks in range(q + 1 - kd):
            ke = q - kd - ks
            dist = abs(3 * kd - q) + abs(3 * ks - q) + abs(3 * ke - q)
            triples.append((dist, kd, ks, ke))
    triples.sort()
    return np.array([(kd, ks, ke) for _, kd, ks, ke in triples], dtype=np.int64), q


def _quad_nodes(cfg: DynamicConfig) -> tuple[np.ndarray, np.ndarray]:
    """Standard normal quadrature nodes and weights."""
    if cfg.shock_std == 0.0:
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.hermite.hermgauss(cfg.shock_samples)
    return x * math.sqrt(2.0), w / math.sqrt(math.pi)


def _bracket(grid: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower index, upper index, and upper weight for linear interpolation
    with clamping at the grid edges."""
    xc = np.clip(x, grid[0], grid[-1])
    hi = np.searchsorted(grid, xc, side="left")
    hi = np.clip(hi, 1, len(grid) - 1)
    lo = hi - 1
    w = (xc - grid[lo]) / (grid[hi] - grid[lo])
    return lo, hi, w


@dataclass(frozen=True, eq=False)
class Policy:
    """Solved plan: per period, the chosen action at every grid node plus
    the value surface."""

    config: DynamicConfig
    initial: HouseholdState
    action_denominator: int
    numerators: np.ndarray  # (horizon, ni, nb, ns, 3) int16
    values: np.ndarray  # (horizon, ni, nb, ns) float64

    def node_fractions(self, t: int, node: tuple[int, int, int]) -> tuple[Fraction, Fraction, Fraction]:
        if not 1 <= t <= self.config.horizon:
            raise ValidationError(f"period must lie in 1..{self.config.horizon}")
        kd, ks, ke = (int(v) for v in self.numerators[t - 1][node])
        q = self.action_denominator
        return (Fraction(kd, q), Fraction(ks, q), Fraction(ke, q))

    def nearest_node(self, state: HouseholdState) -> tuple[int, int, int]:
        cfg = self.config
        picks = []
        for grid, value in (
            (cfg.income_grid, state.income.units),
            (cfg.debt_grid, state.debt.units),
            (cfg.savings_grid, state.savings.units),
        ):
            diffs = np.abs(np.asarray(grid) - value)
            picks.append(int(np.argmin(diffs)))
        return picks[0], picks[1], picks[2]


def solve_plan(initial: HouseholdState, cfg: DynamicConfig) -> Policy:
    """Backward induction over the full grid.  Terminal value is zero."""
    inc_g = np.asarray(cfg.income_grid)
    debt_g = np.asarray(cfg.debt_grid)
    sav_g = np.asarray(cfg.savings_grid)
    ni, nb, ns = len(inc_g), len(debt_g), len(sav_g)
    acts, q = _simplex_actions(cfg.action_step)
    n_a = len(acts)
    frac = acts / q  # (n_a, 3) float
    p = cfg.params
    u_act = frac[:, 0] ** p.alpha * frac[:, 1] ** p.beta * frac[:, 2] ** p.gamma
    reward = inc_g[None, :] * u_act[:, None]  # (n_a, ni)
    state_term = cfg.state_weight * (
        np.log1p(sav_g)[None, :] - np.log1p(debt_g)[:, None]
    )  # (nb, ns)

    z_nodes, z_weights = _quad_nodes(cfg)
    mix = np.zeros((ni, ni))
    for z, wq in zip(z_nodes, z_weights):
        nxt = np.maximum(inc_g * (1.0 + cfg.income_growth + cfg.shock_std * z), 0.0)
        lo, hi, w = _bracket(inc_g, nxt)
        np.add.at(mix, (np.arange(ni), lo), wq * (1.0 - w))
        np.add.at(mix, (np.arange(ni), hi), wq * w)

    debt_next = np.maximum(
        debt_g[None, None, :] * (1.0 + cfg.debt_apr) - frac[:, 0][:, None, None] * inc_g[None, :, None],
        0.0,
    )  # (n_a, ni, nb)
    bi0, bi1, bw = _bracket(debt_g, debt_next)
    sav_next = (
        sav_g[None, None, :] * (1.0 + cfg.savings_return)
        + frac[:, 1][:, None, None] * inc_g[None, :, None]
    )  # (n_a, ni, ns)
    si0, si1, sw = _bracket(sav_g, sav_next)

    ii = np.arange(ni).reshape(1, ni, 1, 1)
    b0 = bi0[:, :, :, None]
    b1 = bi1[:, :, :, None]
    bwx = bw[:, :, :, None]
    s0 = si0[:, :, None, :]
    s1 = si1[:, :, None, :]
    swx = sw[:, :, None, :]

    numerators = np.empty((cfg.horizon, ni, nb, ns, 3), dtype=np.int16)
    values = np.empty((cfg.horizon, ni, nb, ns))
    v_next = np.zeros((ni, nb, ns))
    for t in range(cfg.horizon, 0, -1):
        vbar = (mix @ v_next.reshape(ni, -1)).reshape(ni, nb, ns)
        g00 = vbar[ii, b0, s0]
        g01 = vbar[ii, b0, s1]
        g10 = vbar[ii, b1, s0]
        g11 = vbar[ii, b1, s1]
        cont = (1.0 - bwx) * ((1.0 - swx) * g00 + swx * g01) + bwx * (
            (1.0 - swx) * g10 + swx * g11
        )
        total = reward[:, :, None, None] + state_term[None, None, :, :] + cfg.discount * cont
        best = np.argmax(total, axis=0)
        v_next = np.take_along_axis(total, best[None, :, :, :], axis=0)[0]
        numerators[t - 1] = acts.astype(np.int16)[best]
        values[t - 1] = v_next
    return Policy(
        config=cfg,
        initial=initial,
        action_denominator=q,
        numerators=numerators,
        values=values,
    )


def replay_node_value(policy: Policy, t: int, node: tuple[int, int, int]) -> float:
    """Recompute the stored value at one node with scalar arithmetic.

    Used to cross-check the vectorized sweep: reward of the stored action
    plus the discounted quadrature expectation of the next period's
    interpolated value.
    """
    cfg = policy.config
    if not 1 <= t <= cfg.horizon:
        raise ValidationError(f"period must lie in 1..{cfg.horizon}")
    i, b, s = node
    inc = cfg.income_grid[i]
    debt = cfg.debt_grid[b]
    sav = cfg.savings_grid[s]
    fd, fs, fe = (float(f) for f in policy.node_fractions(t, node))
    p = cfg.params
    reward = inc * (fd**p.alpha * fs**p.beta * fe**p.gamma)
    reward += cfg.state_weight * (math.log1p(sav) - math.log1p(debt))
    if t == cfg.horizon:
        return reward
    v_next = policy.values[t]
    inc_g = np.asarray(cfg.income_grid)
    debt_g = np.asarray(cfg.debt_grid)
    sav_g = np.asarray(cfg.savings_grid)
    debt_nxt = max(0.0, debt * (1.0 + cfg.debt_apr) - fd * inc)
    sav_nxt = sav * (1.0 + cfg.savings_return) + fs * inc
    blo, bhi, bw = _bracket(debt_g, np.asarray([debt_nxt]))
    slo, shi, sw = _bracket(sav_g, np.asarray([sav_nxt]))
    z_nodes, z_weights = _quad_nodes(cfg)
    expected = 0.0
    for z, wq in zip(z_nodes, z_weights):
        inc_nxt = max(0.0, inc * (1.0 + cfg.income_growth + cfg.shock_std * z))
        ilo, ihi, iw = _bracket(inc_g, np.asarray([inc_nxt]))
        acc = 0.0
        for idx, w_i in ((ilo[0], 1.0 - iw[0]), (ihi[0], iw[0])):
            for bdx, w_b in ((blo[0], 1.0 - bw[0]), (bhi[0], bw[0])):
                for sdx, w_s in ((slo[0], 1.0 - sw[0]), (shi[0], sw[0])):
                    acc += w_i * w_b * w_s * v_next[idx, bdx, sdx]
        expected += wq * acc
    return reward + cfg.discount * expected


def policy_adjustments(
    policy: Policy, t: int, state: HouseholdState
) -> tuple[Fraction, Fraction, Fraction]:
    """Deviation of the planned action from equal thirds at the grid node
    nearest the state, as exact rationals (debt, savings, expenses).

    The signed combination -debt + savings - expenses is zero exactly
    because the fractions sum to one.
    """
    node = policy.nearest_node(state)
    fd, fs, fe = policy.node_fractions(t, node)
    third = Fraction(1, 3)
    return (third - fd, fs - third, third - fe)
