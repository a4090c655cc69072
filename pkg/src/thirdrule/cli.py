"""Command line interface and file formats.

Subcommands: allocate, risk, simulate, stress, shapley, coalition, plan,
adjust, report.  Exit codes: 0 success, 1 validation or usage error,
2 I/O error.

Profile CSV columns, in order:
id, household_type, income_annual, debt_balance, debt_apr,
baseline_expenses_annual, sigma_income, sigma_market, rho, mu, r_savings.
Multiple member incomes in income_annual are joined with ';'.

Scenario files hold one JSON object or an array of them with keys
name, income_shock, apr_multiplier, inflation_annual, onset_month,
duration_months; unknown keys are rejected.

Reports are CSV or JSON with columns profile_id, rule, scenario,
default_rate, median_clearance_years, mean_final_savings,
months_coverage, dti_violation_rate, ser_violation_rate.  Money prints
with two decimals, other numbers with six significant digits, missing
values as empty cells (CSV) or null (JSON).  Output bytes are a pure
function of the inputs and the master seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import statistics
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .adjust import AdjustMode, adjusted_allocation, adjustment_factors, zero_sum_defect
from .domain import (
    Allocation,
    AllocationRule,
    HouseholdProfile,
    HouseholdType,
    Money,
    RuleId,
    rule_allocation,
)
from .dynamic import HouseholdState, default_config, policy_adjustments, solve_plan
from .errors import DomainError, ValidationError
from .game import CoalitionSpec, coalition_value, is_superadditive, shapley_values
from .risk import RiskParams, bankruptcy_probability, classify_stability
from .stochastic import PathConfig, derive_trial_rng, simulate_income_path, simulate_savings_path
from .stress import StressMetrics, ScenarioSpec, compare_rules, run_stress

PROFILE_COLUMNS = (
    "id",
    "household_type",
    "income_annual",
    "debt_balance",
    "debt_apr",
    "baseline_expenses_annual",
    "sigma_income",
    "sigma_market",
    "rho",
    "mu",
    "r_savings",
)

SCENARIO_KEYS = (
    "name",
    "income_shock",
    "apr_multiplier",
    "inflation_annual",
    "onset_month",
    "duration_months",
)

REPORT_COLUMNS = (
    "profile_id",
    "rule",
    "scenario",
    "default_rate",
    "median_clearance_years",
    "mean_final_savings",
    "months_coverage",
    "dti_violation_rate",
    "ser_violation_rate",
)

_MONEY_COLUMNS = {"mean_final_savings"}
_TEXT_COLUMNS = {"profile_id", "rule", "scenario"}


def load_profiles(path: str) -> list[HouseholdProfile]:
    """Parse and validate a profile CSV.  Errors name the row and field."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("profile file is empty") from None
        if tuple(h.strip() for h in header) != PROFILE_COLUMNS:
            raise ValidationError(
                "profile header must be exactly: " + ",".join(PROFILE_COLUMNS)
            )
        profiles: list[HouseholdProfile] = []
        seen: set[str] = set()
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(PROFILE_COLUMNS):
                raise ValidationError(
                    f"row {row_no}: expected {len(PROFILE_COLUMNS)} fields, got {len(row)}"
                )
            record = dict(zip(PROFILE_COLUMNS, (cell.strip() for cell in row)))
            profiles.append(_parse_profile(record, row_no, seen))
    return profiles


def _parse_profile(
    record: dict[str, str], row_no: int, seen: set[str]
) -> HouseholdProfile:
    def fail(field: str, message: str) -> ValidationError:
        return ValidationError(f"row {row_no}, field {field}: {message}")

    profile_id = record["id"]
    if not profile_id:
        raise fail("id", "must be nonempty")
    if profile_id in seen:
        raise fail("id", f"duplicate id {profile_id!r}")
    seen.add(profile_id)
    try:
        household_type = HouseholdType(record["household_type"])
    except ValueError:
        raise fail(
            "household_type",
            f"must be one of {[t.value for t in HouseholdType]}, got {record['household_type']!r}",
        ) from None
    try:
        member_incomes = tuple(
            Money.of(part.strip()) for part in record["income_annual"].split(";")
        )
    except ValidationError as exc:
        raise fail("income_annual", str(exc)) from None

    def parse_money(field: str) -> Money:
        try:
            return Money.of(record[field])
        except ValidationError as exc:
            raise fail(field, str(exc)) from None

    def parse_float(field: str) -> float:
        try:
            value = float(record[field])
        except ValueError:
            raise fail(field, f"cannot parse number {record[field]!r}") from None
        if not math.isfinite(value):
            raise fail(field, "must be finite")
        return value

    kwargs = dict(
        profile_id=profile_id,
        household_type=household_type,
        member_incomes=member_incomes,
        debt_balance=parse_money("debt_balance"),
        debt_apr=parse_float("debt_apr"),
        baseline_expenses=parse_money("baseline_expenses_annual"),
        sigma_income=parse_float("sigma_income"),
        sigma_market=parse_float("sigma_market"),
        rho=parse_float("rho"),
        mu=parse_float("mu"),
        r_savings=parse_float("r_savings"),
    )
    try:
        return HouseholdProfile(**kwargs)
    except ValidationError as exc:
        raise ValidationError(f"row {row_no}: {exc}") from None


def load_scenarios(path: str) -> list[ScenarioSpec]:
    """Parse a scenario JSON file (single object or array).  Unknown keys
    are rejected with their JSON path."""
    with open(path) as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"scenario file is not valid JSON: {exc}") from None
    if isinstance(data, dict):
        items = [(data, "$")]
    elif isinstance(data, list):
        items = [(obj, f"$[{idx}]") for idx, obj in enumerate(data)]
    else:
        raise ValidationError("scenario file must hold a JSON object or array")
    scenarios: list[ScenarioSpec] = []
    names: set[str] = set()
    for obj, where in items:
        if not isinstance(obj, dict):
            raise ValidationError(f"{where}: scenario must be a JSON object")
        unknown = set(obj) - set(SCENARIO_KEYS)
        if unknown:
            key = sorted(unknown)[0]
            raise ValidationError(f"{where}.{key}: unknown key")
        if "name" not in obj:
            raise ValidationError(f"{where}.name: required")
        if not isinstance(obj["name"], str):
            raise ValidationError(f"{where}.name: must be a string")
        for key in ("income_shock", "apr_multiplier", "inflation_annual"):
            if key in obj and (isinstance(obj[key], bool) or not isinstance(obj[key], (int, float))):
                raise ValidationError(f"{where}.{key}: must be a number")
        for key in ("onset_month", "duration_months"):
            if key in obj and (isinstance(obj[key], bool) or not isinstance(obj[key], int)):
                raise ValidationError(f"{where}.{key}: must be an integer")
        try:
            scenario = ScenarioSpec(**obj)
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
        if scenario.name in names:
            raise ValidationError(f"{where}.name: duplicate scenario {scenario.name!r}")
        names.add(scenario.name)
        scenarios.append(scenario)
    if not scenarios:
        raise ValidationError("scenario file holds no scenarios")
    return scenarios


def _sig6(value: float) -> float:
    return float(f"{value:.6g}")


def metrics_rows(metrics: Sequence[StressMetrics]) -> list[dict]:
    rows = []
    for m in metrics:
        rows.append(
            {
                "profile_id": m.profile_id,
                "rule": m.rule.value,
                "scenario": m.scenario,
                "default_rate": m.default_rate,
                "median_clearance_years": m.median_clearance_years,
                "mean_final_savings": m.mean_final_savings,
                "months_coverage": m.months_expense_coverage,
                "dti_violation_rate": m.dti_violation_rate,
                "ser_violation_rate": m.ser_violation_rate,
            }
        )
    return rows


def _csv_cell(column: str, value) -> str:
    if value is None:
        return ""
    if column in _TEXT_COLUMNS:
        return str(value)
    if column in _MONEY_COLUMNS:
        return str(value) if isinstance(value, Money) else f"{float(value):.2f}"
    return f"{float(value):.6g}"


def _json_cell(column: str, value):
    if value is None or column in _TEXT_COLUMNS:
        return value
    if column in _MONEY_COLUMNS:
        return float(str(value)) if isinstance(value, Money) else float(f"{float(value):.2f}")
    return _sig6(float(value))


def render_report(rows: Sequence[dict], fmt: str) -> str:
    """Render report rows as CSV or JSON text (deterministic bytes)."""
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(col, row[col]) for col in REPORT_COLUMNS])
        return buffer.getvalue()
    if fmt == "json":
        payload = [
            {col: _json_cell(col, row[col]) for col in REPORT_COLUMNS} for row in rows
        ]
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    raise ValidationError(f"unknown report format {fmt!r}")


def load_report_json(path: str) -> list[dict]:
    with open(path) as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"report file is not valid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ValidationError("report JSON must be an array of rows")
    rows = []
    for idx, obj in enumerate(data):
        if not isinstance(obj, dict) or set(obj) != set(REPORT_COLUMNS):
            raise ValidationError(f"$[{idx}]: report rows need exactly the standard columns")
        rows.append(obj)
    return rows


def emit_report(rows: Sequence[dict], fmt: str, path: Optional[str]) -> str:
    text = render_report(rows, fmt)
    if path:
        with open(path, "w", newline="") as handle:
            handle.write(text)
    return text


def _parse_money_arg(text: str) -> Money:
    return Money.of(text)


def _parse_fraction_arg(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"cannot parse fraction {text!r}") from None


def _parse_money_list(text: str) -> list[Money]:
    return [Money.of(part.strip()) for part in text.split(",") if part.strip()]


def _rule_from_args(args: argparse.Namespace) -> AllocationRule:
    rule_id = RuleId(args.rule)
    if rule_id is RuleId.CUSTOM:
        if not args.fractions:
            raise ValidationError("--fractions is required with --rule custom")
        return AllocationRule.custom([p.strip() for p in args.fractions.split(",")])
    if args.fractions:
        raise ValidationError("--fractions only applies to --rule custom")
    return AllocationRule.named(rule_id)


def _risk_params_from_args(args: argparse.Namespace) -> RiskParams:
    return RiskParams(
        beta_dti=args.beta_dti,
        beta_ser=args.beta_ser,
        beta_sigma_income=args.beta_sigma_income,
        beta_sigma_market=args.beta_sigma_market,
        dti_limit=args.dti_limit,
        ser_floor=args.ser_floor,
    )


def _add_risk_param_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beta-dti", type=float, default=2.0)
    parser.add_argument("--beta-ser", type=float, default=-1.0)
    parser.add_argument("--beta-sigma-income", type=float, default=1.0)
    parser.add_argument("--beta-sigma-market", type=float, default=0.5)
    parser.add_argument("--dti-limit", type=float, default=0.36)
    parser.add_argument("--ser-floor", type=float, default=1.0)


def _print_allocation(allocation: Allocation) -> None:
    print(f"income {allocation.income}")
    print(f"debt {allocation.debt}")
    print(f"savings {allocation.savings}")
    print(f"expenses {allocation.expenses}")


def _cmd_allocate(args: argparse.Namespace) -> int:
    rule = _rule_from_args(args)
    _print_allocation(rule_allocation(rule, args.income))
    return 0


def _cmd_risk(args: argparse.Namespace) -> int:
    params = _risk_params_from_args(args)
    probability = bankruptcy_probability(
        params, args.dti, args.ser, args.sigma_income, args.sigma_market
    )
    flags = classify_stability(params, args.dti, args.ser)
    print(f"bankruptcy_probability {probability:.6g}")
    print(f"dti_ok {flags.dti_ok}")
    print(f"ser_ok {flags.ser_ok}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = PathConfig(
        horizon_years=args.horizon_years,
        dt_years=args.dt_years,
        trials=args.trials,
        master_seed=args.seed,
    )
    finals = []
    floored = 0
    for k in range(cfg.trials):
        rng = derive_trial_rng(cfg.master_seed, k)
        if args.kind == "income":
            path = simulate_income_path(args.start, args.mu, args.sigma_income, cfg, rng)
            floored += path.floored_steps
        else:
            path = simulate_savings_path(
                args.start, args.contribution, args.rate, args.sigma_market, cfg, rng
            )
        finals.append(path.units[-1])
    mean = statistics.fmean(finals)
    std = statistics.pstdev(finals) if len(finals) > 1 else 0.0
    print(f"trials {cfg.trials}")
    print(f"final_mean {mean:.6g}")
    print(f"final_std {std:.6g}")
    if args.kind == "income":
        print(f"floored_step_rate {floored / (cfg.trials * cfg.steps):.6g}")
    return 0


def _cmd_stress(args: argparse.Namespace) -> int:
    profiles = load_profiles(args.profiles)
    scenarios = load_scenarios(args.scenarios)
    rule_names = [part.strip() for part in args.rules.split(",") if part.strip()]
    if not rule_names:
        raise ValidationError("at least one rule name is required")
    rules = [AllocationRule.named(name) for name in rule_names]
    cfg = PathConfig(
        horizon_years=args.horizon_years,
        dt_years=1.0 / 12.0,
        trials=args.trials,
        master_seed=args.seed,
    )
    metrics = run_stress(profiles, rules, scenarios, cfg)
    text = emit_report(metrics_rows(metrics), args.format, args.output)
    if args.output:
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    if args.compare and len(rules) > 1:
        for row in compare_rules(metrics):
            delta = f" (+{row.default_rate_delta:.6g} default rate)" if row.rank > 1 else ""
            print(
                f"compare {row.profile_id}/{row.scenario}: "
                f"rank {row.rank} {row.rule.value} default_rate {row.default_rate:.6g}{delta}"
            )
    return 0


def _cmd_shapley(args: argparse.Namespace) -> int:
    incomes = _parse_money_list(args.incomes)
    spec = CoalitionSpec(
        member_incomes=tuple(incomes),
        scale_benefit=_parse_size_table(args.scale_benefit, len(incomes), "--scale-benefit"),
        coordination_cost=_parse_size_table(
            args.coordination_cost, len(incomes), "--coordination-cost"
        ),
    )
    result = shapley_values(spec)
    for idx, value in enumerate(result.values):
        print(f"member {idx} {value}")
    print(f"total {result.total}")
    return 0


def _parse_size_table(text: Optional[str], n: int, flag: str) -> dict[int, Money]:
    if not text:
        return {}
    amounts = _parse_money_list(text)
    if len(amounts) > n:
        raise ValidationError(f"{flag} lists more sizes than members")
    return {size: amount for size, amount in enumerate(amounts, start=1)}


def _cmd_coalition(args: argparse.Namespace) -> int:
    incomes = _parse_money_list(args.incomes)
    spec = CoalitionSpec(
        member_incomes=tuple(incomes),
        scale_benefit=_parse_size_table(args.scale_benefit, len(incomes), "--scale-benefit"),
        coordination_cost=_parse_size_table(
            args.coordination_cost, len(incomes), "--coordination-cost"
        ),
    )
    members = [int(part) for part in args.members.split(",") if part.strip() != ""]
    print(f"value {coalition_value(spec, members)}")
    if args.check_superadditive:
        print(f"superadditive {is_superadditive(spec)}")
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    initial = HouseholdState(income=args.income, debt=args.debt, savings=args.savings)
    cfg = default_config(
        initial,
        args.horizon,
        discount=args.discount,
        debt_apr=args.debt_apr,
        savings_return=args.savings_return,
        income_growth=args.income_growth,
        shock_std=args.shock_std,
        shock_samples=args.shock_samples,
        state_weight=args.state_weight,
    )
    policy = solve_plan(initial, cfg)
    node = policy.nearest_node(initial)
    for t in range(1, cfg.horizon + 1):
        fd, fs, fe = policy.node_fractions(t, node)
        ad, as_, ae = policy_adjustments(policy, t, initial)
        print(
            f"period {t} debt {fd} savings {fs} expenses {fe} "
            f"shifts ({ad}, {as_}, {ae})"
        )
    return 0


def _cmd_adjust(args: argparse.Namespace) -> int:
    params = _risk_params_from_args(args)
    factors = adjustment_factors(params, args.sigma_income, args.sigma_market)
    print(f"debt_shift {factors.debt_shift:.6g}")
    print(f"savings_shift {factors.savings_shift:.6g}")
    print(f"expenses_shift {factors.expenses_shift:.6g}")
    print(f"clamped {factors.clamped}")
    print(f"zero_sum_defect {zero_sum_defect(factors):.6g}")
    allocation = adjusted_allocation(args.income, factors, AdjustMode(args.mode))
    _print_allocation(allocation)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows = load_report_json(args.input)
    text = emit_report(rows, args.format, args.output)
    if args.output:
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return 0


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="thirdrule", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="split an income by a rule")
    p.add_argument("--income", type=_parse_money_arg, required=True)
    p.add_argument("--rule", default="one_third", choices=[r.value for r in RuleId])
    p.add_argument("--fractions", help="comma list like 1/3,1/3,1/3 for --rule custom")
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("risk", help="bankruptcy probability and stability flags")
    p.add_argument("--dti", type=float, required=True)
    p.add_argument("--ser", type=float, required=True)
    p.add_argument("--sigma-income", type=float, default=0.0)
    p.add_argument("--sigma-market", type=float, default=0.0)
    _add_risk_param_flags(p)
    p.set_defaults(func=_cmd_risk)

    p = sub.add_parser("simulate", help="simulate income or savings paths")
    p.add_argument("--kind", choices=["income", "savings"], default="income")
    p.add_argument("--start", type=_parse_money_arg, required=True)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma-income", type=float, default=0.0)
    p.add_argument("--contribution", type=_parse_money_arg, default=Money.zero())
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--sigma-market", type=float, default=0.0)
    p.add_argument("--horizon-years", type=_parse_fraction_arg, required=True)
    p.add_argument("--dt-years", type=_parse_fraction_arg, default=1.0 / 12.0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("stress", help="Monte Carlo stress test from profile and scenario files")
    p.add_argument("--profiles", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--rules", default="one_third", help="comma list of rule names")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--horizon-years", type=_parse_fraction_arg, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--output")
    p.add_argument("--compare", action="store_true")
    p.set_defaults(func=_cmd_stress)

    p = sub.add_parser("shapley", help="fair split of pooled household value")
    p.add_argument("--incomes", required=True, help="comma list of member incomes")
    p.add_argument("--scale-benefit", help="comma list by coalition size, starting at size 1")
    p.add_argument("--coordination-cost", help="comma list by coalition size, starting at size 1")
    p.set_defaults(func=_cmd_shapley)

    p = sub.add_parser("coalition", help="value of one coalition")
    p.add_argument("--incomes", required=True)
    p.add_argument("--scale-benefit")
    p.add_argument("--coordination-cost")
    p.add_argument("--members", required=True, help="comma list of member indices")
    p.add_argument("--check-superadditive", action="store_true")
    p.set_defaults(func=_cmd_coalition)

    p = sub.add_parser("plan", help="multi-period allocation plan")
    p.add_argument("--income", type=_parse_money_arg, required=True)
    p.add_argument("--debt", type=_parse_money_arg, default=Money.zero())
    p.add_argument("--savings", type=_parse_money_arg, default=Money.zero())
    p.add_argument("--horizon", type=int, default=5)
    p.add_argument("--discount", type=float, default=0.95)
    p.add_argument("--debt-apr", type=float, default=0.0)
    p.add_argument("--savings-return", type=float, default=0.0)
    p.add_argument("--income-growth", type=float, default=0.0)
    p.add_argument("--shock-std", type=float, default=0.0)
    p.add_argument("--shock-samples", type=int, default=7)
    p.add_argument("--state-weight", type=float, default=0.1)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("adjust", help="volatility-adjusted allocation")
    p.add_argument("--income", type=_parse_money_arg, required=True)
    p.add_argument("--sigma-income", type=float, required=True)
    p.add_argument("--sigma-market", type=float, required=True)
    p.add_argument("--mode", choices=[m.value for m in AdjustMode], default="residual_expenses")
    _add_risk_param_flags(p)
    p.set_defaults(func=_cmd_adjust)

    p = sub.add_parser("report", help="re-emit a JSON report as CSV or JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        code = exc.code
        return int(code) if isinstance(code, int) else 0
    try:
        return args.func(args)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
