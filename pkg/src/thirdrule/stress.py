"""Monte Carlo stress testing of allocation rules plus closed-form
debt-clearance and savings projections.

Each trial walks a monthly ledger in integer cents:

1. draw the month's income level (shared discretization with the
   stochastic module), apply the scenario's income shock while active;
2. split the month's income by the rule;
3. expenses due grow with scenario inflation and are paid from the
   expenses bucket, any shortfall from the savings balance;
4. debt accrues the (scenario-scaled) APR monthly; the debt bucket pays
   interest before principal, and interest the bucket cannot cover is
   also drawn from the savings balance;
5. the savings balance takes a market-return shock (correlated with the
   income shock through rho) and then receives the savings bucket plus
   any debt budget left over after full payoff.

A trial defaults in the first month the savings balance would go
negative covering the expense shortfall plus uncovered interest; the
failing month's transactions are not applied.  Households start with a
zero savings balance (the profile schema carries no opening balance).
Unspent expense budget is treated as consumed, not banked.  Every
completed month satisfies the cash identity

    income + savings withdrawals ==
    expenses paid + debt service + savings deposits + residual cash

exactly in cents; the loop asserts it.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .domain import AllocationRule, HouseholdProfile, Money, RuleId, _round_div
from .errors import DebtNeverClearsError, ValidationError
from .risk import DEFAULT_DTI_LIMIT, DEFAULT_SER_FLOOR
from .stochastic import PathConfig, income_levels, mix_correlated, derive_trial_rng, thread_count

_MONTHS_PER_YEAR = 12
_DT = 1.0 / 12.0


@dataclass(frozen=True)
class ScenarioSpec:
    """A named shock window.

    duration_months = 0 means the shock is permanent from its onset.
    """

    name: str
    income_shock: float = 0.0
    apr_multiplier: float = 1.0
    inflation_annual: float = 0.0
    onset_month: int = 1
    duration_months: int = 0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("scenario name must be nonempty")
        for field_name in ("income_shock", "apr_multiplier", "inflation_annual"):
            value = getattr(self, field_name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValidationError(f"{field_name} must be a number")
            if not math.isfinite(value):
                raise ValidationError(f"{field_name} must be finite")
        if self.income_shock < -1.0:
            raise ValidationError("income_shock cannot cut income below zero")
        if self.apr_multiplier <= 0:
            raise ValidationError("apr_multiplier must be positive")
        if self.inflation_annual <= -1.0:
            raise ValidationError("inflation_annual must exceed -1")
        for field_name in ("onset_month", "duration_months"):
            value = getattr(self, field_name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValidationError(f"{field_name} must be an integer")
        if self.onset_month < 1:
            raise ValidationError("onset_month counts from 1")
        if self.duration_months < 0:
            raise ValidationError("duration_months must be nonnegative")

    def active(self, month: int) -> bool:
        if month < self.onset_month:
            return False
        if self.duration_months == 0:
            return True
        return month < self.onset_month + self.duration_months

    def months_active_through(self, month: int) -> int:
        """Whole months of the shock window elapsed up to and including
        the given month.  Freezes once the window closes."""
        if month < self.onset_month:
            return 0
        elapsed = month - self.onset_month + 1
        if self.duration_months == 0:
            return elapsed
        return min(elapsed, self.duration_months)


BASELINE_SCENARIO = ScenarioSpec(name="baseline")


@dataclass(frozen=True)
class TrialOutcome:
    defaulted: bool
    default_month: Optional[int]
    debt_cleared_month: Optional[int]
    final_savings: Money
    min_cash_buffer: float
    dti_series: tuple[float, ...]
    ser_series: tuple[float, ...]


@dataclass(frozen=True)
class StressMetrics:
    profile_id: str
    rule: RuleId
    scenario: str
    trials: int
    default_rate: float
    median_clearance_years: Optional[float]
    mean_final_savings: Money
    months_expense_coverage: Optional[float]
    dti_violation_rate: float
    ser_violation_rate: float


def _expenses_due_cents(
    baseline_monthly_cents: int, scenario: ScenarioSpec, month: int
) -> int:
    factor = (1.0 + scenario.inflation_annual) ** (
        scenario.months_active_through(month) / _MONTHS_PER_YEAR
    )
    return round(baseline_monthly_cents * factor)


def run_trial(
    profile: HouseholdProfile,
    rule: AllocationRule,
    scenario: ScenarioSpec,
    horizon_months: int,
    rng: np.random.Generator,
) -> TrialOutcome:
    """Simulate one household trajectory.  See the module docstring for
    the month loop."""
    if horizon_months < 1:
        raise ValidationError("horizon_months must be positive")
    if scenario.onset_month > horizon_months:
        raise ValidationError("scenario onset lies beyond the simulation horizon")
    f_debt, f_savings, _ = rule.fractions
    fd_num, fd_den = f_debt.numerator, f_debt.denominator
    fs_num, fs_den = f_savings.numerator, f_savings.denominator

    shocks = rng.standard_normal((2, horizon_months))
    z_income = shocks[0]
    z_market = mix_correlated(profile.rho, z_income, shocks[1])
    levels = income_levels(
        profile.income.units, profile.mu, profile.sigma_income, _DT, z_income
    )

    baseline_monthly_c = _round_div(profile.baseline_expenses.cents, _MONTHS_PER_YEAR)
    sqrt_dt = math.sqrt(_DT)
    monthly_rate_base = profile.debt_apr / _MONTHS_PER_YEAR

    debt_c = profile.debt_balance.cents
    savings_c = 0
    cleared: Optional[int] = 0 if debt_c == 0 else None
    min_buffer_c: Optional[int] = None
    dti_series: list[float] = []
    ser_series: list[float] = []

    for month in range(1, horizon_months + 1):
        active = scenario.active(month)
        income_units = levels[month] / _MONTHS_PER_YEAR
        if active:
            income_units *= 1.0 + scenario.income_shock
        income_c = round(income_units * 100.0)

        # rule split, residual cent(s) to expenses
        alloc_debt_c = _round_div(income_c * fd_num, fd_den)
        alloc_savings_c = _round_div(income_c * fs_num, fs_den)
        alloc_expenses_c = income_c - alloc_debt_c - alloc_savings_c
        while alloc_expenses_c < 0:
            if alloc_savings_c > 0:
                alloc_savings_c -= 1
            else:
                alloc_debt_c -= 1
            alloc_expenses_c += 1

        due_c = _expenses_due_cents(baseline_monthly_c, scenario, month)
        paid_from_bucket = min(alloc_expenses_c, due_c)
        shortfall_c = due_c - paid_from_bucket
        residual_c = alloc_expenses_c - paid_from_bucket

        rate = monthly_rate_base * (scenario.apr_multiplier if active else 1.0)
        interest_c = round(debt_c * rate)
        interest_from_bucket = min(alloc_debt_c, interest_c)
        interest_gap_c = interest_c - interest_from_bucket

        needed_c = shortfall_c + interest_gap_c
        buffer_c = savings_c - needed_c
        if min_buffer_c is None or buffer_c < min_buffer_c:
            min_buffer_c = buffer_c
        if buffer_c < 0:
            return TrialOutcome(
                defaulted=True,
                default_month=month,
                debt_cleared_month=cleared,
                final_savings=Money(savings_c),
                min_cash_buffer=buffer_c / 100.0,
                dti_series=tuple(dti_series),
                ser_series=tuple(ser_series),
            )
        savings_c -= needed_c

        principal_c = min(debt_c, max(0, alloc_debt_c - interest_c))
        excess_c = max(0, alloc_debt_c - interest_c - principal_c)
        debt_c -= principal_c
        if debt_c == 0 and cleared is None:
            cleared = month

        growth = max(
            1.0
            + profile.r_savings / _MONTHS_PER_YEAR
            + profile.sigma_market * sqrt_dt * z_market[month - 1],
            0.0,
        )
        deposit_c = alloc_savings_c + excess_c
        savings_c = round(savings_c * growth) + deposit_c

        debt_service_c = interest_c + principal_c
        dti_series.append(debt_service_c / income_c if income_c > 0 else 0.0)
        if due_c > 0:
            ser_series.append(deposit_c / due_c)
        else:
            ser_series.append(float("inf") if deposit_c > 0 else 1.0)

        ledger_in = income_c + needed_c
        ledger_out = due_c + debt_service_c + deposit_c + residual_c
        assert ledger_in == ledger_out, "monthly cash identity violated"

    return TrialOutcome(
        defaulted=False,
        default_month=None,
        debt_cleared_month=cleared,
        final_savings=Money(savings_c),
        min_cash_buffer=(min_buffer_c if min_buffer_c is not None else savings_c) / 100.0,
        dti_series=tuple(dti_series),
        ser_series=tuple(ser_series),
    )


def _aggregate(
    profile: HouseholdProfile,
    rule: AllocationRule,
    scenario: ScenarioSpec,
    horizon_months: int,
    outcomes: Iterable[TrialOutcome],
    trials: int,
) -> StressMetrics:
    defaults = 0
    clearance_months: list[int] = []
    final_cents_total = 0
    months_total = 0
    dti_violations = 0
    ser_violations = 0
    for outcome in outcomes:
        if outcome.defaulted:
            defaults += 1
        if outcome.debt_cleared_month is not None:
            clearance_months.append(outcome.debt_cleared_month)
        final_cents_total += outcome.final_savings.cents
        months_total += len(outcome.dti_series)
        dti_violations += sum(1 for x in outcome.dti_series if x > DEFAULT_DTI_LIMIT)
        ser_violations += sum(1 for x in outcome.ser_series if x < DEFAULT_SER_FLOOR)
    median_years = (
        statistics.median(clearance_months) / _MONTHS_PER_YEAR if clearance_months else None
    )
    mean_final = Money(_round_div(final_cents_total, trials))
    baseline_monthly_c = _round_div(profile.baseline_expenses.cents, _MONTHS_PER_YEAR)
    final_due_c = _expenses_due_cents(baseline_monthly_c, scenario, horizon_months)
    coverage = mean_final.cents / final_due_c if final_due_c > 0 else None
    return StressMetrics(
        profile_id=profile.profile_id,
        rule=rule.rule_id,
        scenario=scenario.name,
        trials=trials,
        default_rate=defaults / trials,
        median_clearance_years=median_years,
        mean_final_savings=mean_final,
        months_expense_coverage=coverage,
        dti_violation_rate=dti_violations / months_total if months_total else 0.0,
        ser_violation_rate=ser_violations / months_total if months_total else 0.0,
    )


def run_stress(
    profiles: Sequence[HouseholdProfile],
    rules: Sequence[AllocationRule],
    scenarios: Sequence[ScenarioSpec],
    cfg: PathConfig,
) -> list[StressMetrics]:
    """Run every (profile, rule, scenario) combination.

    Trial k always draws from the stream derived from
    (cfg.master_seed, k), so all combinations share shocks (common random
    numbers) and results do not depend on worker count or completion
    order.  Output rows are sorted by (profile_id, rule, scenario).
    """
    if not profiles:
        raise ValidationError("at least one profile is required")
    if not rules:
        raise ValidationError("at least one rule is required")
    if not scenarios:
        raise ValidationError("at least one scenario is required")
    if abs(cfg.dt_years * _MONTHS_PER_YEAR - 1.0) > 1e-9:
        raise ValidationError("stress runs use a monthly step; set dt_years to 1/12")
    horizon_months = cfg.steps
    workers = thread_count()
    metrics: list[StressMetrics] = []
    combos = sorted(
        ((p, r, s) for p in profiles for r in rules for s in scenarios),
        key=lambda c: (c[0].profile_id, c[1].rule_id.value, c[2].name),
    )
    for profile, rule, scenario in combos:

        def one(k: int, _p=profile, _r=rule, _s=scenario) -> TrialOutcome:
            return run_trial(_p, _r, _s, horizon_months, derive_trial_rng(cfg.master_seed, k))

        if workers > 1 and cfg.trials > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = pool.map(one, range(cfg.trials), chunksize=64)
                metrics.append(
                    _aggregate(profile, rule, scenario, horizon_months, outcomes, cfg.trials)
                )
        else:
            outcomes = map(one, range(cfg.trials))
            metrics.append(
                _aggregate(profile, rule, scenario, horizon_months, outcomes, cfg.trials)
            )
    return metrics


def debt_clearance_time(balance: Money, annual_payment: Money, apr: float) -> float:
    """Years to amortize a balance at a constant annual payment.

    Zero APR gives balance / payment.  Otherwise
    -ln(1 - balance * apr / payment) / ln(1 + apr), defined only while
    the payment exceeds the annual interest.
    """
    if annual_payment.cents <= 0:
        raise ValidationError("annual payment must be positive")
    if not math.isfinite(apr) or apr < 0:
        raise ValidationError("apr must be nonnegative and finite")
    if balance.cents == 0:
        return 0.0
    b = balance.units
    p = annual_payment.units
    if apr == 0.0:
        return b / p
    ratio = b * apr / p
    if ratio >= 1.0:
        raise DebtNeverClearsError(
            f"annual payment {p:.2f} does not exceed annual interest {b * apr:.2f}"
        )
    return -math.log1p(-ratio) / math.log1p(apr)


class AnnuityTiming(str, Enum):
    ORDINARY_ANNUAL = "ordinary_annual"
    DUE_ANNUAL = "due_annual"
    MONTHLY = "monthly"


def savings_future_value(
    annual_contribution: Money,
    rate: float,
    years: int,
    timing: AnnuityTiming = AnnuityTiming.ORDINARY_ANNUAL,
) -> Money:
    """Future value of level contributions at a constant return.

    ordinary_annual contributes at each year end, due_annual at each
    year start, monthly spreads the contribution over month ends at
    rate / 12.
    """
    timing = AnnuityTiming(timing)
    if not isinstance(years, int) or isinstance(years, bool) or years < 0:
        raise ValidationError("years must be a nonnegative integer")
    if not math.isfinite(rate) or rate <= -1.0:
        raise ValidationError("rate must be a finite return above -1")
    c = annual_contribution.units
    if timing is AnnuityTiming.MONTHLY:
        monthly_rate = rate / _MONTHS_PER_YEAR
        n = years * _MONTHS_PER_YEAR
        if monthly_rate == 0.0:
            return Money.of(c / _MONTHS_PER_YEAR * n)
        factor = ((1.0 + monthly_rate) ** n - 1.0) / monthly_rate
        return Money.of(c / _MONTHS_PER_YEAR * factor)
    if rate == 0.0:
        value = c * years
    else:
        value = c * ((1.0 + rate) ** years - 1.0) / rate
        if timing is AnnuityTiming.DUE_ANNUAL:
            value *= 1.0 + rate
    return Money.of(value)


@dataclass(frozen=True)
class RuleComparison:
    """One rule's standing within a (profile, scenario) cell, ranked by
    default rate, then clearance speed, then expense coverage."""

    profile_id: str
    scenario: str
    rule: RuleId
    rank: int
    default_rate: float
    default_rate_delta: float
    median_clearance_years: Optional[float]
    clearance_delta: Optional[float]
    months_expense_coverage: Optional[float]
    coverage_delta: Optional[float]


def compare_rules(metrics: Sequence[StressMetrics]) -> list[RuleComparison]:
    """Rank rules within each (profile, scenario) cell and report deltas
    against the top-ranked rule.  Every cell must carry the same rule
    set and every profile the same scenario set."""
    if not metrics:
        raise ValidationError("no metrics to compare")
    cells: dict[tuple[str, str], dict[RuleId, StressMetrics]] = {}
    for m in metrics:
        cell = cells.setdefault((m.profile_id, m.scenario), {})
        if m.rule in cell:
            raise ValidationError(
                f"duplicate metrics for {m.profile_id}/{m.rule.value}/{m.scenario}"
            )
        cell[m.rule] = m
    rule_sets = {frozenset(cell) for cell in cells.values()}
    if len(rule_sets) != 1:
        raise ValidationError("metrics do not share a rule axis across cells")
    scenario_sets: dict[str, set[str]] = {}
    for pid, scen in cells:
        scenario_sets.setdefault(pid, set()).add(scen)
    if len({frozenset(s) for s in scenario_sets.values()}) != 1:
        raise ValidationError("metrics do not share a scenario axis across profiles")

    def sort_key(m: StressMetrics) -> tuple:
        clearance = m.median_clearance_years
        coverage = m.months_expense_coverage
        return (
            m.default_rate,
            clearance if clearance is not None else float("inf"),
            -(coverage if coverage is not None else float("-inf")),
            m.rule.value,
        )

    rows: list[RuleComparison] = []
    for (pid, scen), cell in sorted(cells.items()):
        ranked = sorted(cell.values(), key=sort_key)
        best = ranked[0]
        for rank, m in enumerate(ranked, start=1):
            clearance_delta = None
            if m.median_clearance_years is not None and best.median_clearance_years is not None:
                clearance_delta = m.median_clearance_years - best.median_clearance_years
            coverage_delta = None
            if m.months_expense_coverage is not None and best.months_expense_coverage is not None:
                coverage_delta = m.months_expense_coverage - best.months_expense_coverage
            rows.append(
                RuleComparison(
                    profile_id=pid,
                    scenario=scen,
                    rule=m.rule,
                    rank=rank,
                    default_rate=m.default_rate,
                    default_rate_delta=m.default_rate - best.default_rate,
                    median_clearance_years=m.median_clearance_years,
                    clearance_delta=clearance_delta,
                    months_expense_coverage=m.months_expense_coverage,
                    coverage_delta=coverage_delta,
                )
            )
    return rows
