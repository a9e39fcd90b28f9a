"""
powerctl: energy-optimal downlink power control for single-cell OFDMA.

Computes per-link transmit powers and time shares that minimise the
base station's average supply power for given target rates.
"""

__version__ = '1.0.0'

from powerctl.allocator import (  # noqa: E402
    Allocation,
    AllocationError,
    ConvergenceError,
    OverloadedError,
    SolverOptions,
    brute_force_oracle,
    cap_to_model,
    equal_time_allocation,
    kkt_residual,
    marginal_cost,
    min_time_fraction,
    rate_proportional_allocation,
    solve_equal_channel,
    solve_general,
    solve_supply,
)
from powerctl.link_model import (  # noqa: E402
    ExponentGuardError,
    LinkSpec,
    NoiseConfig,
    Scenario,
    noise_power,
    required_tx_power,
    shannon_rate,
)
from powerctl.power_model import PRESETS, PowerModel, avg_supply_power, model_from_preset, supply_power  # noqa: E402
from powerctl.validators import ValidationError  # noqa: E402

__all__ = [
    'Allocation', 'AllocationError', 'ConvergenceError', 'OverloadedError', 'SolverOptions',
    'brute_force_oracle', 'cap_to_model', 'equal_time_allocation', 'kkt_residual', 'marginal_cost',
    'min_time_fraction', 'rate_proportional_allocation', 'solve_equal_channel',
    'solve_general', 'solve_supply',
    'ExponentGuardError', 'LinkSpec', 'NoiseConfig', 'Scenario', 'noise_power',
    'required_tx_power', 'shannon_rate',
    'PRESETS', 'PowerModel', 'avg_supply_power', 'model_from_preset', 'supply_power',
    'ValidationError',
]
