"""
Energy-optimal time shares and transmit powers for orthogonal downlink links.

Minimises P_sys = sum_i mu_i * P_tx,i(R_i, mu_i) over sum_i mu_i = 1 with an
optional per-link cap P_max. Equal-gain cells have the closed form
mu_i = R_i / sum_j R_j; everything else goes through a dual bisection:

- outer loop: geometric bisection on the multiplier lambda > 0
- inner loop: per-link bisection of marginal_cost_i(mu_i) = -lambda,
  vectorised over links and clamped at mu_i^min where P_max binds

The marginal cost is monotone in mu_i, so each inner root is unique.
A brute-force grid oracle and a KKT residual are provided for checking.
"""

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from powerctl.link_model import (
    EXPONENT_LIMIT,
    ExponentGuardError,
    LinkSpec,
    NoiseConfig,
    Scenario,
    noise_power,
    required_tx_power,
    spectral_exponent,
)
from powerctl.power_model import CAP_TOLERANCE, PowerModel, avg_supply_power
from powerctl.validators import (
    DegenerateTimeShareError,
    DimensionError,
    ValidationError,
    ZeroDemandError,
    validate_int_range,
    validate_positive,
)

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

# Sums of minimum time shares within OVERLOAD_MARGIN of 1 are the feasible
# boundary (mu = mu_min); anything larger is overloaded. The band is symmetric:
# is_overloaded and solve_general both treat 1 + OVERLOAD_MARGIN as the limit.
OVERLOAD_MARGIN = 1e-12

ORACLE_MAX_LINKS = 4
ORACLE_MAX_STEP = 0.1

METHOD_CLOSED_FORM = 'closed-form'
METHOD_BISECTION = 'dual-bisection'
METHOD_BOUNDARY = 'boundary'
METHOD_ORACLE = 'oracle'
METHOD_BASELINE = 'baseline'


class AllocationError(Exception):
    """Base exception for allocation failures."""

    def __init__(self, message: str, **payload):
        super().__init__(message)
        self.message = message
        self.payload = payload

    def to_dict(self) -> Dict[str, Any]:
        rv = {'error': self.message}
        rv.update(self.payload)
        return rv


class OverloadedError(AllocationError):
    """Target rates cannot be met under P_max."""

    def __init__(self, mu_min_sum: float, message: Optional[str] = None):
        super().__init__(
            message or (
                f"System overloaded: sum of minimum time shares "
                f"{mu_min_sum:.9g} exceeds 1"
            ),
            mu_min_sum=mu_min_sum,
            slack=1.0 - mu_min_sum,
        )
        self.mu_min_sum = mu_min_sum
        self.slack = 1.0 - mu_min_sum


class ConvergenceError(AllocationError):
    """A bisection hit its iteration cap."""

    def __init__(self, stage: str, iterations: int, residual: float):
        super().__init__(
            f"No convergence in {stage} bisection after {iterations} iterations "
            f"(residual {residual:.3g})",
            stage=stage,
            iterations=iterations,
            residual=residual,
        )
        self.stage = stage
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class SolverOptions:
    """
    Tolerances for the dual bisection.

    mu_tolerance bounds the relative width of each inner bracket (so the
    absolute error on any mu <= 1 is below it); lambda_tolerance bounds
    |sum(mu) - 1| at the outer stopping point.
    """

    mu_tolerance: float = 1e-10
    lambda_tolerance: float = 1e-9
    max_iterations: int = 200
    closed_form: bool = True

    def __post_init__(self):
        validate_positive(self.mu_tolerance, 'mu_tolerance')
        validate_positive(self.lambda_tolerance, 'lambda_tolerance')
        validate_int_range(self.max_iterations, 'max_iterations', minimum=1)


@dataclass(frozen=True)
class Allocation:
    """Per-link time shares and transmit powers plus objective values."""

    mu: Tuple[float, ...]
    p_tx_w: Tuple[float, ...]
    p_sys_w: float
    converged: bool = True
    kkt_residual: float = 0.0
    capped: Tuple[bool, ...] = ()
    multiplier: float = 0.0
    iterations: int = 0
    method: str = METHOD_BISECTION
    p_supply_w: Optional[float] = None

    @property
    def objective(self) -> float:
        return self.p_sys_w

    @property
    def n_links(self) -> int:
        return len(self.mu)

    def to_dict(self) -> Dict[str, Any]:
        rv = {
            'mu': list(self.mu),
            'p_tx_w': list(self.p_tx_w),
            'p_sys_w': self.p_sys_w,
            'converged': self.converged,
            'kkt_residual': self.kkt_residual,
            'capped': list(self.capped),
            'multiplier': self.multiplier,
            'iterations': self.iterations,
            'method': self.method,
        }
        if self.p_supply_w is not None:
            rv['p_supply_w'] = self.p_supply_w
        return rv


def marginal_cost(mu_i: float, link: LinkSpec, cfg: NoiseConfig) -> float:
    """
    Partial derivative of P_sys with respect to mu_i.

    Returns (N0 / G) * (2**x * (1 - x ln 2) - 1) with x = R / (W * mu_i);
    always <= 0 and increasing towards 0 in mu_i.

    Raises:
        DegenerateTimeShareError: If mu_i <= 0
    """
    if not mu_i > 0:
        raise DegenerateTimeShareError(f"Time share must be > 0, got {mu_i}")
    x = float(spectral_exponent(link.target_rate_bps, mu_i, cfg))
    return -noise_power(cfg) / link.gain_linear * float(_gap(x * LN2))


def solve_equal_channel(rates: Sequence[float]) -> List[float]:
    """
    Closed-form optimum for equal channel gains: mu_i = R_i / sum_j R_j.

    Raises:
        ZeroDemandError: If no rate is positive
    """
    values = [float(r) for r in rates]
    if any(r < 0 or math.isnan(r) for r in values):
        raise ValidationError("Rates must be >= 0")
    total = math.fsum(values)
    if not total > 0:
        raise ZeroDemandError("At least one link must demand a positive rate")
    return [r / total for r in values]


def min_time_fraction(link: LinkSpec, p_max_w: float, cfg: NoiseConfig) -> float:
    """Smallest mu_i that meets the link's rate without exceeding p_max_w."""
    validate_positive(p_max_w, 'p_max_w', allow_inf=True)
    if link.target_rate_bps == 0 or math.isinf(p_max_w):
        return 0.0
    snr = link.gain_linear * p_max_w / noise_power(cfg)
    return link.target_rate_bps / (cfg.bandwidth_hz * math.log1p(snr) / LN2)


def is_overloaded(scenario: Scenario) -> Tuple[bool, float]:
    """Return (overloaded, slack) with slack = 1 - sum_i mu_i^min."""
    mu_min_sum = math.fsum(_mu_min(scenario))
    return mu_min_sum > 1.0 + OVERLOAD_MARGIN, 1.0 - mu_min_sum


def overload_report(scenario: Scenario) -> Dict[str, Any]:
    """Per-link minimum time shares and the overload verdict."""
    mu_min = _mu_min(scenario)
    mu_min_sum = math.fsum(mu_min)
    return {
        'overloaded': mu_min_sum > 1.0 + OVERLOAD_MARGIN,
        'slack': 1.0 - mu_min_sum,
        'mu_min_sum': mu_min_sum,
        'mu_min': list(mu_min),
    }


def solve_general(scenario: Scenario, opts: Optional[SolverOptions] = None) -> Allocation:
    """
    Minimise the time-weighted transmit power of a scenario.

    Links with zero rate are left out of the time budget (mu_i = 0,
    P_i = 0).

    Args:
        scenario: Links, noise and cap
        opts: Solver tolerances (defaults when omitted)

    Returns:
        Allocation with sum(mu) = 1 within opts.lambda_tolerance

    Raises:
        ZeroDemandError: If every rate is zero
        OverloadedError: If the rates are infeasible under P_max
        ConvergenceError: If a bisection hits max_iterations
        ExponentGuardError: If the optimum needs R / (W mu) above the guard
    """
    opts = opts or SolverOptions()
    active = scenario.active_indices
    if active.size == 0:
        raise ZeroDemandError("At least one link must demand a positive rate")

    cfg = scenario.noise
    rates = scenario.rates[active]
    gains = scenario.gains[active]
    mu_min = np.asarray(_mu_min(scenario))[active]
    mu_min_sum = math.fsum(mu_min)

    if abs(mu_min_sum - 1.0) <= OVERLOAD_MARGIN:
        logger.debug("Scenario sits exactly on the feasibility boundary")
        return _build_allocation(
            scenario, active, mu_min, np.ones(active.size, dtype=bool),
            method=METHOD_BOUNDARY,
        )
    if mu_min_sum > 1.0:
        raise OverloadedError(mu_min_sum)

    mu_floor = np.maximum(mu_min, rates / (cfg.bandwidth_hz * EXPONENT_LIMIT))
    if math.fsum(mu_floor) >= 1.0:
        raise ExponentGuardError(float(np.sum(rates)) / cfg.bandwidth_hz)

    if opts.closed_form and np.all(gains == gains[0]):
        mu = np.asarray(solve_equal_channel(rates), dtype=float)
        return _build_allocation(
            scenario, active, mu, np.zeros(active.size, dtype=bool),
            method=METHOD_CLOSED_FORM,
        )

    mu, capped, multiplier, iterations = _dual_bisection(scenario, active, mu_floor, mu_min, opts)
    return _build_allocation(
        scenario, active, mu, capped,
        method=METHOD_BISECTION, multiplier=multiplier, iterations=iterations,
    )


def cap_to_model(scenario: Scenario, model: PowerModel) -> Scenario:
    """Scenario whose P_max is lowered to the model's P_max where that is smaller."""
    if model.p_max_w >= scenario.p_max_w:
        return scenario
    return replace(scenario, p_max_w=model.p_max_w)


def solve_supply(scenario: Scenario, model: PowerModel,
                 opts: Optional[SolverOptions] = None) -> Allocation:
    """
    Minimise average supply power under an affine power model.

    P_0 and l shift and scale the objective without moving its minimiser,
    so the time shares are those of ``solve_general``; the result also
    carries the supply power P_0 + l * P_sys. The solve runs under the
    tighter of the scenario's and the model's P_max.

    Raises:
        OverloadedError: If the rates are infeasible under that cap
    """
    alloc = solve_general(cap_to_model(scenario, model), opts)
    supply = avg_supply_power(alloc, model)
    logger.debug(f"Supply power {supply:.6g} W at P_sys {alloc.p_sys_w:.6g} W")
    return replace(alloc, p_supply_w=supply)


def brute_force_oracle(scenario: Scenario, grid_step: float) -> Allocation:
    """
    Exhaustive search of the objective over the simplex grid mu_i = k * step.

    Only grid points with mu_i >= mu_i^min are considered; the effective
    step is 1 / round(1 / grid_step).

    Raises:
        DimensionError: For more than ORACLE_MAX_LINKS links
        ValidationError: If grid_step lies outside (0, 0.1]
        OverloadedError: If no grid point is feasible
    """
    if scenario.n_links > ORACLE_MAX_LINKS:
        raise DimensionError(
            f"Oracle supports at most {ORACLE_MAX_LINKS} links, got {scenario.n_links}"
        )
    if not (0 < grid_step <= ORACLE_MAX_STEP):
        raise ValidationError(f"grid_step must lie in (0, {ORACLE_MAX_STEP}], got {grid_step}")

    active = scenario.active_indices
    if active.size == 0:
        raise ZeroDemandError("At least one link must demand a positive rate")

    cfg = scenario.noise
    rates = scenario.rates[active]
    n0g = noise_power(cfg) / scenario.gains[active]
    mu_min = np.asarray(_mu_min(scenario))[active]
    n_steps = int(round(1.0 / grid_step))

    best_value = math.inf
    best_mu = None
    for block in _simplex_grid(n_steps, active.size):
        mu = block / n_steps
        value = _grid_objective(mu, rates, n0g, mu_min, cfg.bandwidth_hz)
        index = int(np.argmin(value))
        if value[index] < best_value:
            best_value = float(value[index])
            best_mu = mu[index].copy()

    if best_mu is None:
        raise OverloadedError(math.fsum(mu_min), "No feasible grid point")

    capped = np.isfinite(scenario.p_max_w) & (best_mu <= mu_min * (1.0 + 1e-12))
    return _build_allocation(scenario, active, best_mu, capped, method=METHOD_ORACLE)


def kkt_residual(alloc: Allocation, scenario: Scenario) -> float:
    """
    Spread of marginal costs across active, uncapped links.

    Returns max_i |marginal_cost_i - median|; zero when fewer than two links
    take part.
    """
    mu = np.asarray(alloc.mu, dtype=float)
    rates = scenario.rates
    if alloc.capped:
        capped = np.asarray(alloc.capped, dtype=bool)
    else:
        mu_min = np.asarray(_mu_min(scenario))
        capped = np.isfinite(scenario.p_max_w) & (mu <= mu_min * (1.0 + 1e-12))

    free = (rates > 0) & (mu > 0) & ~capped
    if np.count_nonzero(free) < 2:
        return 0.0

    cfg = scenario.noise
    x = spectral_exponent(rates[free], mu[free], cfg)
    costs = -noise_power(cfg) / scenario.gains[free] * _gap(x * LN2)
    return float(np.max(np.abs(costs - np.median(costs))))


def equal_time_allocation(scenario: Scenario) -> Allocation:
    """Equal time shares over active links, each at its required power."""
    active = scenario.active_indices
    if active.size == 0:
        raise ZeroDemandError("At least one link must demand a positive rate")
    mu = np.full(active.size, 1.0 / active.size)
    return _baseline(scenario, active, mu)


def rate_proportional_allocation(scenario: Scenario) -> Allocation:
    """Time shares proportional to rates, ignoring channel gains."""
    active = scenario.active_indices
    if active.size == 0:
        raise ZeroDemandError("At least one link must demand a positive rate")
    mu = np.asarray(solve_equal_channel(scenario.rates[active]))
    return _baseline(scenario, active, mu)


BASELINES = {
    'equal-time': equal_time_allocation,
    'rate-proportional': rate_proportional_allocation,
}


# ----------------------------------------------------------------------------
# internals
# ----------------------------------------------------------------------------

def _gap(y):
    """1 - e**y * (1 - y): the negated marginal cost over N0/G, y = x ln 2."""
    y = np.asarray(y, dtype=float)
    clipped = np.minimum(y, 700.0)
    return np.where(y < 700.0, clipped * np.exp(clipped) - np.expm1(clipped), np.inf)


def _mu_min(scenario: Scenario) -> List[float]:
    return [min_time_fraction(link, scenario.p_max_w, scenario.noise) for link in scenario.links]


def _dual_bisection(scenario: Scenario, active: np.ndarray, mu_floor: np.ndarray,
                    mu_min: np.ndarray, opts: SolverOptions):
    cfg = scenario.noise
    bandwidth = cfg.bandwidth_hz
    rates = scenario.rates[active]
    n0g = noise_power(cfg) / scenario.gains[active]
    x_cap = rates / (bandwidth * mu_floor)
    cap_binds = np.isfinite(scenario.p_max_w) & (mu_floor == mu_min)

    def shares(lam: float):
        x, clamped = _solve_exponents(lam / n0g, x_cap, opts)
        return rates / (bandwidth * x), clamped

    # At this multiplier the cheapest link wants the whole frame, so sum(mu) >= 1.
    lam_lo = float(np.min(n0g * _gap(rates / bandwidth * LN2)))
    mu, clamped = shares(lam_lo)
    total = float(np.sum(mu))
    lam = lam_lo
    iterations = 0

    if abs(total - 1.0) > opts.lambda_tolerance:
        lam_hi = 4.0 * lam_lo
        for _ in range(opts.max_iterations):
            mu, clamped = shares(lam_hi)
            total = float(np.sum(mu))
            if total < 1.0 or abs(total - 1.0) <= opts.lambda_tolerance:
                break
            lam_lo, lam_hi = lam_hi, 4.0 * lam_hi
        else:
            raise ConvergenceError('bracket', opts.max_iterations, total - 1.0)
        lam = lam_hi

        while abs(total - 1.0) > opts.lambda_tolerance:
            if iterations >= opts.max_iterations:
                raise ConvergenceError('multiplier', iterations, total - 1.0)
            iterations += 1
            lam = math.sqrt(lam_lo * lam_hi)
            mu, clamped = shares(lam)
            total = float(np.sum(mu))
            if total > 1.0:
                lam_lo = lam
            else:
                lam_hi = lam

    guard_hit = clamped & ~cap_binds
    if np.any(guard_hit):
        raise ExponentGuardError(float(np.max(x_cap[guard_hit])))

    capped = clamped & cap_binds
    mu = np.where(capped, mu_min, mu)
    free = ~capped
    if np.any(free):
        budget = 1.0 - float(np.sum(mu[capped]))
        mu[free] *= budget / float(np.sum(mu[free]))
        mu[free] = np.maximum(mu[free], mu_min[free])

    logger.debug(
        f"Dual bisection: lambda={lam:.6g} after {iterations} iterations, "
        f"sum(mu)-1={float(np.sum(mu)) - 1.0:.3g}, capped={int(np.count_nonzero(capped))}"
    )
    return mu, capped, lam, iterations


def _solve_exponents(c: np.ndarray, x_cap: np.ndarray, opts: SolverOptions):
    """
    Solve _gap(x ln 2) = c per link for x in (0, x_cap].

    Links whose gap at x_cap is still <= c are clamped to x_cap.
    """
    lo = np.zeros_like(x_cap)
    hi = x_cap.copy()
    clamped = _gap(x_cap * LN2) <= c

    for _ in range(opts.max_iterations):
        if np.all(hi - lo <= opts.mu_tolerance * hi):
            break
        mid = 0.5 * (lo + hi)
        below = _gap(mid * LN2) < c
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    else:
        width = float(np.max((hi - lo) / hi))
        raise ConvergenceError('time-share', opts.max_iterations, width)

    x = np.where(clamped, x_cap, 0.5 * (lo + hi))
    return x, clamped


def _build_allocation(scenario: Scenario, active: np.ndarray, mu_active: np.ndarray,
                      capped_active: np.ndarray, method: str, multiplier: float = 0.0,
                      iterations: int = 0) -> Allocation:
    n = scenario.n_links
    mu = np.zeros(n)
    p_tx = np.zeros(n)
    capped = np.zeros(n, dtype=bool)
    mu[active] = mu_active
    capped[active] = capped_active

    p_active = np.asarray(required_tx_power(
        scenario.rates[active], mu_active, scenario.gains[active], scenario.noise
    ), dtype=float)
    p_active = np.where(capped_active, np.minimum(p_active, scenario.p_max_w), p_active)
    p_tx[active] = p_active

    alloc = Allocation(
        mu=tuple(float(v) for v in mu),
        p_tx_w=tuple(float(v) for v in p_tx),
        p_sys_w=float(np.sum(mu * p_tx)),
        converged=True,
        capped=tuple(bool(v) for v in capped),
        multiplier=float(multiplier),
        iterations=int(iterations),
        method=method,
    )
    return replace(alloc, kkt_residual=kkt_residual(alloc, scenario))


def _baseline(scenario: Scenario, active: np.ndarray, mu: np.ndarray) -> Allocation:
    alloc = _build_allocation(
        scenario, active, mu, np.zeros(active.size, dtype=bool), method=METHOD_BASELINE,
    )
    worst = max(alloc.p_tx_w)
    if worst > scenario.p_max_w * (1.0 + CAP_TOLERANCE):
        raise OverloadedError(
            math.fsum(_mu_min(scenario)),
            f"Baseline needs {worst:.6g} W on one link, above P_max {scenario.p_max_w:.6g} W",
        )
    return alloc


def _simplex_grid(n_steps: int, k: int):
    """Yield blocks of integer compositions of n_steps into k positive parts."""
    if k == 1:
        yield np.array([[n_steps]], dtype=float)
        return
    for prefix in itertools.product(range(1, n_steps), repeat=k - 2):
        remaining = n_steps - sum(prefix)
        if remaining < 2:
            continue
        second_last = np.arange(1, remaining, dtype=float)
        block = np.empty((second_last.size, k))
        block[:, :k - 2] = prefix
        block[:, k - 2] = second_last
        block[:, k - 1] = remaining - second_last
        yield block


def _grid_objective(mu: np.ndarray, rates: np.ndarray, n0g: np.ndarray,
                    mu_min: np.ndarray, bandwidth: float) -> np.ndarray:
    x = rates / (bandwidth * mu)
    feasible = np.all((mu >= mu_min) & (x <= EXPONENT_LIMIT), axis=1)
    with np.errstate(over='ignore', invalid='ignore'):
        value = np.sum(mu * n0g * np.expm1(np.minimum(x, EXPONENT_LIMIT) * LN2), axis=1)
    return np.where(feasible, value, np.inf)
