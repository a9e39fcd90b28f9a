"""
Command-line entry point for powerctl.

Usage:
    python -m powerctl solve scenario.json [--format text|json|csv]
    python -m powerctl sweep --fixed-gain-db -100 --range-db 0:40 --step-db 1 --rate-bps 1e7
    python -m powerctl compare-models --presets macro,femto --rates 1e5,1e6 --users 10
    python -m powerctl serve --port 5050

Results go to stdout, logs to stderr.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from powerctl import __version__
from powerctl.allocator import (
    BASELINES,
    ConvergenceError,
    OverloadedError,
    cap_to_model,
    overload_report,
    solve_general,
    solve_supply,
)
from powerctl.config import configure_logging, load_config, solver_options_from_config
from powerctl.experiments import (
    GainSweepSpec,
    ModelComparisonSpec,
    SweepResult,
    default_comparison_scenario,
    run_gain_sweep,
    run_model_comparison,
)
from powerctl.link_model import ExponentGuardError, NoiseConfig, dbm_to_watts, linear_to_db, watts_to_dbm
from powerctl.power_model import PRESETS, model_from_preset
from powerctl.scenario_file import build_report, load_scenario
from powerctl.validators import (
    ValidationError,
    parse_float_list,
    parse_optional_number,
    parse_range_db,
    validate_int_range,
    validate_names,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_OVERLOADED = 3
EXIT_NO_CONVERGENCE = 4
EXIT_EXPONENT_GUARD = 5

FORMATS = ('text', 'json', 'csv')

SOLVE_COLUMNS = ('link', 'gain_db', 'rate_bps', 'mu', 'p_tx_w', 'p_tx_dbm', 'capped')

EPILOG = """\
exit codes:
  0  success
  2  invalid scenario file or flags
  3  overloaded: rates infeasible under P_max (message gives sum of mu_min)
  4  solver did not converge
  5  exponent guard tripped (R / (W mu) above 1024)

CSV columns:
  solve           link, gain_db, rate_bps, mu, p_tx_w, p_tx_dbm, capped
  sweep           delta_g_db, gain_1_db, gain_fixed_db, mu_1..mu_N, p_1_w..p_N_w,
                  p_1_dbm..p_N_dbm, delta_p_db, p_sys_w, [p_supply_w], status
  compare-models  label, eta_ld, rate_bps, p0_w, p_sys_opt_w, p_sys_base_w,
                  p_supply_opt_w, p_supply_base_w, tx_savings, savings, status

Floats are printed with 9 significant digits; flagged rows (status other
than ok) leave result cells empty. No environment variables are read.
"""


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Sub-parsers use SUPPRESS so a flag given before the sub-command survives.
    default = argparse.SUPPRESS if suppress else None
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group('global options')
    group.add_argument('--config', default=default, help='config.json to read (default: repository config.json)')
    group.add_argument('--log-level', default=default, help='DEBUG, INFO, WARNING or ERROR')
    group.add_argument('--format', choices=FORMATS, default=default,
                       help='output format (solve: text, sweep/compare-models: csv)')
    group.add_argument('--tolerance', type=float, default=default,
                       help='tolerance on sum(mu) = 1; mu tolerance is a tenth of it')
    group.add_argument('--max-iterations', type=int, default=default, help='bisection iteration cap')
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='powerctl',
        description='Energy-optimal downlink transmit power and time-share allocation.',
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[_global_flags(suppress=False)],
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True
    common = [_global_flags(suppress=True)]

    solve = sub.add_parser('solve', parents=common, help='solve one scenario file',
                           epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    solve.add_argument('scenario', help='scenario JSON file')
    solve.set_defaults(handler=cmd_solve)

    sweep = sub.add_parser('sweep', parents=common, help='gain-gap sweep (CSV)',
                           epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sweep.add_argument('--fixed-gain-db', type=float, help='gain of the unchanged link(s) in dB')
    sweep.add_argument('--range-db', help='gain gap range lo:hi in dB')
    sweep.add_argument('--step-db', type=float, help='gain gap step in dB')
    sweep.add_argument('--rate-bps', type=float, help='target rate of every link')
    sweep.add_argument('--p-max-dbm', help="per-link transmit cap in dBm, or 'none'")
    sweep.add_argument('--links', type=int, help='number of links (default 2)')
    sweep.add_argument('--noise-dbm', type=float, help='noise power in dBm')
    sweep.add_argument('--bandwidth-hz', type=float, help='system bandwidth in Hz')
    sweep.add_argument('--preset', help='add a p_supply_w column for this BS preset')
    sweep.add_argument('--workers', type=int, help='grid points solved in parallel')
    sweep.set_defaults(handler=cmd_sweep)

    compare = sub.add_parser('compare-models', parents=common, help='savings per BS power model (CSV)',
                             epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    compare.add_argument('--presets', help=f"comma list of {', '.join(PRESETS)}")
    compare.add_argument('--eta', help='comma list of load dependences instead of presets')
    compare.add_argument('--rates', help='comma list of per-user target rates in bit/s')
    compare.add_argument('--users', type=int, help='number of users (default 10)')
    compare.add_argument('--gain-spread-db', type=float,
                         help='user gains spaced from --fixed-gain-db down by this much; 0 is symmetric')
    compare.add_argument('--fixed-gain-db', type=float, help='gain of the strongest user in dB')
    compare.add_argument('--p-max-dbm', type=float, help='per-link transmit cap in dBm')
    compare.add_argument('--noise-dbm', type=float, help='noise power in dBm')
    compare.add_argument('--bandwidth-hz', type=float, help='system bandwidth in Hz')
    compare.add_argument('--load-factor', type=float, help='power model slope l')
    compare.add_argument('--baseline', choices=tuple(BASELINES), help='allocation compared against')
    compare.add_argument('--workers', type=int, help='rates solved in parallel')
    compare.set_defaults(handler=cmd_compare_models)

    serve = sub.add_parser('serve', parents=common, help='run the HTTP API')
    serve.add_argument('--host', help='bind address')
    serve.add_argument('--port', type=int, help='listen port')
    serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = load_config(args.config)
        configure_logging(args.log_level, config)
        output = args.handler(args, config)
    except OverloadedError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_OVERLOADED
    except ConvergenceError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except ExponentGuardError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EXPONENT_GUARD
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    if output:
        sys.stdout.write(output)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace, config: Dict[str, Any]) -> str:
    """Solve one scenario file and render the allocation."""
    scenario, model = load_scenario(args.scenario)
    opts = solver_options_from_config(config, args.tolerance, args.max_iterations)

    report = overload_report(cap_to_model(scenario, model) if model is not None else scenario)
    if report['overloaded']:
        shares = ', '.join(f"{m:.6g}" for m in report['mu_min'])
        raise OverloadedError(
            report['mu_min_sum'],
            f"System overloaded: sum of minimum time shares {report['mu_min_sum']:.9g} > 1 "
            f"(per link: {shares})",
        )

    alloc = solve_supply(scenario, model, opts) if model is not None else solve_general(scenario, opts)
    logger.info(f"Solved {scenario.n_links} links with {alloc.method}: P_sys {alloc.p_sys_w:.6g} W")

    fmt = args.format or 'text'
    if fmt == 'json':
        return json.dumps(build_report(scenario, alloc, model), indent=2) + '\n'

    gains_db = linear_to_db(scenario.gains)
    p_dbm = watts_to_dbm(list(alloc.p_tx_w))
    rows = [
        {
            'link': i + 1,
            'gain_db': float(gains_db[i]),
            'rate_bps': link.target_rate_bps,
            'mu': alloc.mu[i],
            'p_tx_w': alloc.p_tx_w[i],
            'p_tx_dbm': float(p_dbm[i]) if alloc.p_tx_w[i] > 0 else float('nan'),
            'capped': alloc.capped[i] if alloc.capped else False,
        }
        for i, link in enumerate(scenario.links)
    ]
    if fmt == 'csv':
        return SweepResult(columns=SOLVE_COLUMNS, rows=rows).to_csv()

    lines = [f"{'link':>4}  {'gain [dB]':>10}  {'rate [bit/s]':>13}  {'mu':>12}  "
             f"{'P_tx [dBm]':>11}  {'P_tx [W]':>13}"]
    for row in rows:
        flag = '  (capped)' if row['capped'] else ''
        lines.append(
            f"{row['link']:>4}  {row['gain_db']:>10.3f}  {row['rate_bps']:>13.6g}  "
            f"{row['mu']:>12.9f}  {row['p_tx_dbm']:>11.4f}  {row['p_tx_w']:>13.6g}{flag}"
        )
    lines.append(f"P_sys     = {alloc.p_sys_w:.9g} W ({alloc.method})")
    if model is not None:
        lines.append(f"P_supply  = {alloc.p_supply_w:.9g} W")
        lines.append(f"eta_ld    = {model.eta_ld:.6g}")
    return '\n'.join(lines) + '\n'


def cmd_sweep(args: argparse.Namespace, config: Dict[str, Any]) -> str:
    """Gain-gap sweep over a two (or more) link cell."""
    scen_cfg = config['Scenario']
    exp_cfg = config['Experiments']
    opts = solver_options_from_config(config, args.tolerance, args.max_iterations)

    range_text = args.range_db if args.range_db is not None else exp_cfg['SweepRangeDb']
    if args.p_max_dbm is not None:
        p_max_dbm = parse_optional_number(args.p_max_dbm, '--p-max-dbm')
    else:
        p_max_dbm = scen_cfg['PMaxDbm']
    model = model_from_preset(args.preset) if args.preset else None

    spec = GainSweepSpec(
        fixed_gain_db=_pick(args.fixed_gain_db, scen_cfg['GainDb']),
        sweep_range_db=parse_range_db(range_text),
        step_db=_pick(args.step_db, exp_cfg['StepDb']),
        rate_bps=_pick(args.rate_bps, exp_cfg['RateBps']),
        noise=_noise(args, scen_cfg),
        p_max_w=float('inf') if p_max_dbm is None else float(dbm_to_watts(p_max_dbm)),
        n_links=validate_int_range(_pick(args.links, 2), '--links', minimum=2, maximum=64),
        model=model,
    )
    workers = validate_int_range(_pick(args.workers, exp_cfg['Workers']), '--workers', maximum=64)
    result = run_gain_sweep(spec, opts, workers=workers)
    return _render_table(result, args.format)


def cmd_compare_models(args: argparse.Namespace, config: Dict[str, Any]) -> str:
    """Savings of optimal allocation per BS power model and rate."""
    scen_cfg = config['Scenario']
    exp_cfg = config['Experiments']
    opts = solver_options_from_config(config, args.tolerance, args.max_iterations)

    if args.presets is not None and args.eta is not None:
        raise ValidationError("Use either --presets or --eta, not both")
    rates = parse_float_list(args.rates, '--rates') if args.rates is not None else list(exp_cfg['Rates'])

    scenario = default_comparison_scenario(
        users=validate_int_range(_pick(args.users, exp_cfg['Users']), '--users', maximum=1000),
        gain_spread_db=_pick(args.gain_spread_db, exp_cfg['GainSpreadDb']),
        fixed_gain_db=_pick(args.fixed_gain_db, scen_cfg['GainDb']),
        p_max_dbm=_pick(args.p_max_dbm, scen_cfg['PMaxDbm']),
        noise=_noise(args, scen_cfg),
    )
    common = dict(
        scenario=scenario,
        rate_grid=tuple(rates),
        baseline=args.baseline or 'equal-time',
        load_factor=_pick(args.load_factor, exp_cfg['LoadFactor']),
    )
    if args.eta is not None:
        spec = ModelComparisonSpec(eta_grid=tuple(parse_float_list(args.eta, '--eta')), **common)
    else:
        names = args.presets.split(',') if args.presets is not None else list(exp_cfg['Presets'])
        names = validate_names([n for n in names if n.strip()], tuple(PRESETS), 'preset')
        spec = ModelComparisonSpec.from_presets(names, **common)

    workers = validate_int_range(_pick(args.workers, exp_cfg['Workers']), '--workers', maximum=64)
    result = run_model_comparison(spec, opts, workers=workers)
    return _render_table(result, args.format)


def cmd_serve(args: argparse.Namespace, config: Dict[str, Any]) -> str:
    """Run the Flask service until interrupted."""
    from powerctl.server import create_app

    api_cfg = config['Api']
    host = args.host or api_cfg['Host']
    port = validate_int_range(_pick(args.port, api_cfg['Port']), '--port', minimum=1, maximum=65535)
    app = create_app(config)
    logger.info(f"Serving powerctl API on http://{host}:{port}/api/v1")
    app.run(host=host, port=port)
    return ''


def _render_table(result: SweepResult, fmt: Optional[str]) -> str:
    fmt = fmt or 'csv'
    if fmt == 'json':
        return json.dumps(result.to_records(), indent=2) + '\n'
    if fmt == 'text':
        return result.to_frame().to_string(index=False) + '\n'
    return result.to_csv()


def _noise(args: argparse.Namespace, scen_cfg: Dict[str, Any]) -> NoiseConfig:
    return NoiseConfig.explicit_dbm(
        _pick(args.noise_dbm, scen_cfg['NoiseDbm']),
        _pick(args.bandwidth_hz, scen_cfg['BandwidthHz']),
    )


def _pick(value, fallback):
    return fallback if value is None else value
