"""Versioned API routes for powerctl."""

import math
from datetime import datetime, timezone

from flask import current_app, request

from ...api_utils import (
    handle_api_errors,
    require_json,
    success_response,
    validate_required_fields,
)
from ...config import DEFAULT_CONFIG, solver_options_from_config
from ...experiments import (
    GainSweepSpec,
    ModelComparisonSpec,
    default_comparison_scenario,
    run_gain_sweep,
    run_model_comparison,
)
from ...allocator import solve_general, solve_supply
from ...link_model import NoiseConfig, dbm_to_watts
from ...power_model import PRESETS, model_from_preset, presets_table
from ...scenario_file import build_report, parse_scenario
from ...validators import (
    DimensionError,
    ValidationError,
    validate_int_range,
    validate_names,
)

MAX_GRID_POINTS = 2001
MAX_USERS = 1000


def _utc_now():
    return datetime.now(timezone.utc).isoformat()


def _config():
    return current_app.config.get('POWERCTL', DEFAULT_CONFIG)


def _number(data, key, default=None):
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"'{key}' must be a number")
    if not math.isfinite(value):
        raise ValidationError(f"'{key}' must be finite")
    return float(value)


def _number_list(data, key, default=None):
    values = data.get(key, default)
    if not isinstance(values, list) or not values:
        raise ValidationError(f"'{key}' must be a non-empty list of numbers")
    return [_number({key: v}, key) for v in values]


def _noise(data, scen_cfg):
    return NoiseConfig.explicit_dbm(
        _number(data, 'noise_dbm', scen_cfg['NoiseDbm']),
        _number(data, 'bandwidth_hz', scen_cfg['BandwidthHz']),
    )


def register_routes(bp):
    @bp.route('/health', methods=['GET'])
    @handle_api_errors
    def health():
        return success_response({'ok': True, 'checked_at': _utc_now()})

    @bp.route('/presets', methods=['GET'])
    @handle_api_errors
    def presets():
        load_factor = request.args.get('load_factor', 1.0, type=float)
        return success_response(presets_table(load_factor))

    @bp.route('/solve', methods=['POST'])
    @require_json
    @handle_api_errors
    def solve():
        scenario, model = parse_scenario(request.get_json(silent=True))
        opts = solver_options_from_config(_config())
        if model is not None:
            alloc = solve_supply(scenario, model, opts)
        else:
            alloc = solve_general(scenario, opts)
        return success_response(build_report(scenario, alloc, model))

    @bp.route('/sweep', methods=['POST'])
    @require_json
    @validate_required_fields(['range_db'])
    @handle_api_errors
    def sweep():
        data = request.get_json(silent=True)
        config = _config()
        scen_cfg, exp_cfg = config['Scenario'], config['Experiments']

        range_db = _number_list(data, 'range_db')
        if len(range_db) != 2:
            raise ValidationError("'range_db' must be [lo, hi]")
        p_max_dbm = data.get('p_max_dbm', scen_cfg['PMaxDbm'])
        preset = data.get('preset')

        spec = GainSweepSpec(
            fixed_gain_db=_number(data, 'fixed_gain_db', scen_cfg['GainDb']),
            sweep_range_db=(range_db[0], range_db[1]),
            step_db=_number(data, 'step_db', exp_cfg['StepDb']),
            rate_bps=_number(data, 'rate_bps', exp_cfg['RateBps']),
            noise=_noise(data, scen_cfg),
            p_max_w=math.inf if p_max_dbm is None else float(dbm_to_watts(_number(data, 'p_max_dbm', p_max_dbm))),
            n_links=validate_int_range(data.get('links', 2), 'links', minimum=2, maximum=64),
            model=model_from_preset(preset) if preset else None,
        )
        if len(spec.grid()) > MAX_GRID_POINTS:
            raise DimensionError(f"Sweep grid too large (max {MAX_GRID_POINTS} points)")

        result = run_gain_sweep(spec, solver_options_from_config(config), workers=exp_cfg['Workers'])
        return success_response(result.to_records(), columns=list(result.columns))

    @bp.route('/compare-models', methods=['POST'])
    @require_json
    @validate_required_fields(['rates'])
    @handle_api_errors
    def compare_models():
        data = request.get_json(silent=True)
        config = _config()
        scen_cfg, exp_cfg = config['Scenario'], config['Experiments']

        if 'presets' in data and 'eta' in data:
            raise ValidationError("Use either 'presets' or 'eta', not both")

        scenario = default_comparison_scenario(
            users=validate_int_range(data.get('users', exp_cfg['Users']), 'users', maximum=MAX_USERS),
            gain_spread_db=_number(data, 'gain_spread_db', exp_cfg['GainSpreadDb']),
            fixed_gain_db=_number(data, 'fixed_gain_db', scen_cfg['GainDb']),
            p_max_dbm=_number(data, 'p_max_dbm', scen_cfg['PMaxDbm']),
            noise=_noise(data, scen_cfg),
        )
        common = dict(
            scenario=scenario,
            rate_grid=tuple(_number_list(data, 'rates')),
            baseline=data.get('baseline', 'equal-time'),
            load_factor=_number(data, 'load_factor', exp_cfg['LoadFactor']),
        )
        if 'eta' in data:
            spec = ModelComparisonSpec(eta_grid=tuple(_number_list(data, 'eta')), **common)
        else:
            names = data.get('presets', exp_cfg['Presets'])
            if not isinstance(names, list):
                raise ValidationError("'presets' must be a list of names")
            names = validate_names([str(n) for n in names], tuple(PRESETS), 'preset')
            spec = ModelComparisonSpec.from_presets(names, **common)

        result = run_model_comparison(spec, solver_options_from_config(config), workers=exp_cfg['Workers'])
        return success_response(result.to_records(), columns=list(result.columns))
