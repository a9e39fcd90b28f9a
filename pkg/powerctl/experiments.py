"""
Deterministic experiment grids emitted as tables.

- Gain sweep: link 1 degrades while the other links keep a fixed gain;
  records optimal time shares and powers per gain gap.
- Model comparison: supply-power savings of the optimal allocation over
  a no-power-control baseline, per load-dependence factor and user rate.

Grid points are independent. With ``workers > 1`` they are evaluated on a
thread pool; ``Executor.map`` keeps rows in grid order.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from powerctl.allocator import (
    BASELINES,
    Allocation,
    AllocationError,
    ConvergenceError,
    OverloadedError,
    SolverOptions,
    solve_general,
    solve_supply,
)
from powerctl.link_model import (
    DEFAULT_GAIN_DB,
    ExponentGuardError,
    LinkSpec,
    NoiseConfig,
    Scenario,
    db_to_linear,
    dbm_to_watts,
    watts_to_dbm,
)
from powerctl.power_model import (
    PRESETS,
    PowerModel,
    avg_supply_power,
    get_preset,
    model_from_load_dependence,
)
from powerctl.validators import (
    ValidationError,
    validate_fraction,
    validate_int_range,
    validate_non_negative,
    validate_positive,
)

logger = logging.getLogger(__name__)

STATUS_OK = 'ok'
STATUS_OVERLOADED = 'overloaded'
STATUS_BASELINE_OVERLOADED = 'baseline-overloaded'
STATUS_NO_CONVERGENCE = 'no-convergence'
STATUS_EXPONENT_GUARD = 'exponent-guard'

MACRO_P_MAX_DBM = 46.0
DEFAULT_COMPARISON_RATES = (1e5, 5e5, 1e6, 2e6, 5e6)


@dataclass
class SweepResult:
    """Rows of one experiment grid, in grid order."""

    columns: Tuple[str, ...]
    rows: List[Dict[str, Any]]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def flagged(self) -> List[Dict[str, Any]]:
        return [row for row in self.rows if row.get('status') != STATUS_OK]

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(self.columns))

    def to_csv(self) -> str:
        """Header plus rows, 9 significant digits, comma separated."""
        return self.to_frame().to_csv(index=False, float_format='%.9g', lineterminator='\n')

    def to_records(self) -> List[Dict[str, Any]]:
        """Rows with NaN replaced by None, ready for JSON."""
        records = []
        for row in self.rows:
            records.append({
                key: (None if isinstance(value, float) and math.isnan(value) else value)
                for key, value in row.items()
            })
        return records


@dataclass(frozen=True)
class GainSweepSpec:
    """Gain gap sweep: link 1 at fixed_gain_db - delta, others at fixed_gain_db."""

    fixed_gain_db: float = DEFAULT_GAIN_DB
    sweep_range_db: Tuple[float, float] = (0.0, 40.0)
    step_db: float = 1.0
    rate_bps: float = 1e7
    noise: NoiseConfig = field(default_factory=NoiseConfig.reference)
    p_max_w: float = float(dbm_to_watts(MACRO_P_MAX_DBM))
    n_links: int = 2
    model: Optional[PowerModel] = None

    def __post_init__(self):
        lo, hi = self.sweep_range_db
        if lo > hi:
            raise ValidationError(f"Sweep range lower bound exceeds upper bound: {lo}:{hi}")
        validate_positive(self.step_db, 'step_db')
        validate_positive(self.rate_bps, 'rate_bps')
        validate_positive(self.p_max_w, 'p_max_w', allow_inf=True)
        validate_int_range(self.n_links, 'n_links', minimum=2)

    def grid(self) -> np.ndarray:
        lo, hi = self.sweep_range_db
        count = int(math.floor((hi - lo) / self.step_db + 1e-9)) + 1
        return lo + self.step_db * np.arange(count)

    def scenario_at(self, delta_db: float) -> Scenario:
        links = [LinkSpec.from_db(self.fixed_gain_db - delta_db, self.rate_bps)]
        links += [LinkSpec.from_db(self.fixed_gain_db, self.rate_bps)] * (self.n_links - 1)
        return Scenario(noise=self.noise, links=tuple(links), p_max_w=self.p_max_w)

    def columns(self) -> Tuple[str, ...]:
        n = range(1, self.n_links + 1)
        cols = ['delta_g_db', 'gain_1_db', 'gain_fixed_db']
        cols += [f'mu_{i}' for i in n]
        cols += [f'p_{i}_w' for i in n]
        cols += [f'p_{i}_dbm' for i in n]
        cols += ['delta_p_db', 'p_sys_w']
        if self.model is not None:
            cols.append('p_supply_w')
        cols.append('status')
        return tuple(cols)


def default_comparison_scenario(users: int = 10, gain_spread_db: float = 20.0,
                                fixed_gain_db: float = DEFAULT_GAIN_DB,
                                p_max_dbm: float = MACRO_P_MAX_DBM,
                                noise: Optional[NoiseConfig] = None,
                                rate_bps: float = 1e6) -> Scenario:
    """
    Users with gains evenly spaced from fixed_gain_db down by gain_spread_db.

    A spread of 0 gives the symmetric (equal-gain) cell.
    """
    validate_int_range(users, 'users', minimum=1)
    validate_non_negative(gain_spread_db, 'gain_spread_db')
    gains_db = np.linspace(fixed_gain_db, fixed_gain_db - gain_spread_db, users)
    links = tuple(LinkSpec(float(db_to_linear(g)), rate_bps) for g in gains_db)
    return Scenario(
        noise=noise or NoiseConfig.reference(),
        links=links,
        p_max_w=float(dbm_to_watts(p_max_dbm)),
    )


@dataclass(frozen=True)
class ModelComparisonSpec:
    """Savings of optimal allocation over a baseline across eta_ld and rates."""

    scenario: Scenario = field(default_factory=default_comparison_scenario)
    eta_grid: Tuple[float, ...] = tuple(p.eta_ld for p in PRESETS.values())
    rate_grid: Tuple[float, ...] = DEFAULT_COMPARISON_RATES
    baseline: str = 'equal-time'
    labels: Tuple[str, ...] = ()
    load_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'eta_grid', tuple(float(e) for e in self.eta_grid))
        object.__setattr__(self, 'rate_grid', tuple(float(r) for r in self.rate_grid))
        object.__setattr__(self, 'labels', tuple(self.labels))
        if not self.eta_grid:
            raise ValidationError("eta_grid is empty")
        for eta in self.eta_grid:
            validate_fraction(eta, 'eta_ld')
        if not self.rate_grid:
            raise ValidationError("rate_grid is empty")
        for rate in self.rate_grid:
            validate_positive(rate, 'rate_bps')
        if self.baseline not in BASELINES:
            raise ValidationError(
                f"Invalid baseline: {self.baseline}. Allowed: {', '.join(BASELINES)}"
            )
        if self.labels and len(self.labels) != len(self.eta_grid):
            raise ValidationError("labels must match eta_grid in length")
        if not self.scenario.is_bounded:
            raise ValidationError("Model comparison needs a finite P_max")
        validate_positive(self.load_factor, 'load_factor')

    @classmethod
    def from_presets(cls, names: Sequence[str] = tuple(PRESETS), **kwargs) -> 'ModelComparisonSpec':
        """One comparison entry per BS preset, labelled by preset name."""
        presets = [get_preset(name) for name in names]
        return cls(
            eta_grid=tuple(p.eta_ld for p in presets),
            labels=tuple(p.name for p in presets),
            **kwargs,
        )

    def label_for(self, index: int) -> str:
        if self.labels:
            return self.labels[index]
        return f"eta={self.eta_grid[index]:g}"


COMPARISON_COLUMNS = (
    'label', 'eta_ld', 'rate_bps', 'p0_w',
    'p_sys_opt_w', 'p_sys_base_w', 'p_supply_opt_w', 'p_supply_base_w',
    'tx_savings', 'savings', 'status',
)


def run_gain_sweep(spec: GainSweepSpec, opts: Optional[SolverOptions] = None,
                   workers: int = 1) -> SweepResult:
    """
    Solve the allocation at every gain gap of the sweep.

    Infeasible grid points become flagged rows rather than errors.
    """
    opts = opts or SolverOptions()
    grid = [float(v) for v in spec.grid()]
    rows = _map(lambda delta: _sweep_row(spec, opts, delta), grid, workers)
    result = SweepResult(columns=spec.columns(), rows=rows)
    logger.info(
        f"Gain sweep finished: {len(result)} rows, {len(result.flagged)} flagged"
    )
    return result


def run_model_comparison(spec: ModelComparisonSpec, opts: Optional[SolverOptions] = None,
                         workers: int = 1) -> SweepResult:
    """
    Compare supply power of optimal and baseline allocations.

    Each eta_ld gives a power model at the scenario's P_max with
    P_0 = l * P_max * (1 - eta) / eta; savings are
    (supply_base - supply_opt) / supply_base.
    """
    opts = opts or SolverOptions()
    baseline = BASELINES[spec.baseline]

    def solve_rate(rate: float):
        scenario = spec.scenario.with_rates([rate] * spec.scenario.n_links)
        try:
            optimal = solve_general(scenario, opts)
        except (AllocationError, ExponentGuardError) as exc:
            logger.warning(f"Optimal allocation failed at rate {rate:g} bps: {exc}")
            return None, None, _status_for(exc)
        try:
            base = baseline(scenario)
        except (AllocationError, ExponentGuardError) as exc:
            logger.warning(f"Baseline {spec.baseline} infeasible at rate {rate:g} bps: {exc}")
            return optimal, None, STATUS_BASELINE_OVERLOADED
        return optimal, base, STATUS_OK

    solved = _map(solve_rate, list(spec.rate_grid), workers)

    rows = []
    for index, eta in enumerate(spec.eta_grid):
        model = model_from_load_dependence(eta, spec.scenario.p_max_w, spec.load_factor)
        for rate, (optimal, base, status) in zip(spec.rate_grid, solved):
            rows.append(_comparison_row(spec.label_for(index), eta, rate, model, optimal, base, status))

    result = SweepResult(columns=COMPARISON_COLUMNS, rows=rows)
    logger.info(
        f"Model comparison finished: {len(result)} rows, {len(result.flagged)} flagged"
    )
    return result


def energy(avg_power_w: float, duration_s: float) -> float:
    """Energy in joules drawn at an average power over a duration."""
    validate_non_negative(duration_s, 'duration_s')
    return avg_power_w * duration_s


def _sweep_row(spec: GainSweepSpec, opts: SolverOptions, delta_db: float) -> Dict[str, Any]:
    row: Dict[str, Any] = {name: math.nan for name in spec.columns()}
    row.update({
        'delta_g_db': delta_db,
        'gain_1_db': spec.fixed_gain_db - delta_db,
        'gain_fixed_db': spec.fixed_gain_db,
    })
    try:
        scenario = spec.scenario_at(delta_db)
        if spec.model is None:
            alloc = solve_general(scenario, opts)
        else:
            alloc = solve_supply(scenario, spec.model, opts)
    except (AllocationError, ExponentGuardError) as exc:
        logger.warning(f"Grid point delta={delta_db:g} dB flagged: {exc}")
        row['status'] = _status_for(exc)
        return row

    p_dbm = watts_to_dbm(np.asarray(alloc.p_tx_w))
    for i in range(spec.n_links):
        row[f'mu_{i + 1}'] = alloc.mu[i]
        row[f'p_{i + 1}_w'] = alloc.p_tx_w[i]
        row[f'p_{i + 1}_dbm'] = float(p_dbm[i])
    row['delta_p_db'] = float(p_dbm[0] - p_dbm[1])
    row['p_sys_w'] = alloc.p_sys_w
    if spec.model is not None:
        row['p_supply_w'] = alloc.p_supply_w
    row['status'] = STATUS_OK
    return row


def _comparison_row(label: str, eta: float, rate: float, model: PowerModel,
                    optimal: Optional[Allocation], base: Optional[Allocation],
                    status: str) -> Dict[str, Any]:
    row: Dict[str, Any] = {name: math.nan for name in COMPARISON_COLUMNS}
    row.update({'label': label, 'eta_ld': eta, 'rate_bps': rate, 'p0_w': model.p0_w,
                'status': status})
    if optimal is not None:
        row['p_sys_opt_w'] = optimal.p_sys_w
        row['p_supply_opt_w'] = avg_supply_power(optimal, model)
    if base is None:
        return row

    row['p_sys_base_w'] = base.p_sys_w
    row['p_supply_base_w'] = avg_supply_power(base, model)
    row['tx_savings'] = _savings(base.p_sys_w, optimal.p_sys_w)
    row['savings'] = _savings(row['p_supply_base_w'], row['p_supply_opt_w'])
    return row


def _savings(baseline: float, optimal: float) -> float:
    if baseline <= 0:
        return 0.0
    return (baseline - optimal) / baseline


def _status_for(exc: Exception) -> str:
    if isinstance(exc, OverloadedError):
        return STATUS_OVERLOADED
    if isinstance(exc, ConvergenceError):
        return STATUS_NO_CONVERGENCE
    if isinstance(exc, ExponentGuardError):
        return STATUS_EXPONENT_GUARD
    return STATUS_NO_CONVERGENCE


def _map(func: Callable, items: Sequence, workers: int) -> List:
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix='grid') as pool:
        return list(pool.map(func, items))
