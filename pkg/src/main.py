"""
Main Module

Command-line front-end of the toolkit. Subcommands:

  rate           key rate for given transmissivities and attack / noise parameters
  threshold      maximum distance of Bob versus the relay radius
  scan           correlation-plane or transmissivity-plane grids
  simulate       Monte Carlo simulation of the protocol and its post-processing
  attack-region  classification of the correlation plane for given thermal noise

Settings are resolved as flag > environment variable > INI file > built-in default, and the
resolved values are echoed into every output.
"""

import os
import sys
import argparse
import logging
from typing import List, Optional

import numpy as np

from . import __version__
from .config import Config
from .errors import ConfigError, DomainError
from .attack.model import AttackParams, phi_bound, scan_correlation_plane
from .montecarlo.estimation import optimize_r, run_estimation
from .montecarlo.simulation import RelaySettings, SimConfig
from .output import resolve_output_path, write_frame, write_json
from .rates.engine import (noise_budget, rate_from_epsilon, rate_general, rate_min_fixed_chi,
                           rate_min_fixed_thermal, rate_plane)
from .thresholds.solver import (direct_reconciliation_threshold, max_symmetric_distance, parse_length,
                                rate_surface, symmetric_threshold, threshold_curves)
from .utils.logging_utils import get_logger, log_exception, setup_logging

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2

logger = get_logger('main')


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in str(text).split(',') if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command line arguments.

    Returns:
        argparse.Namespace: Parsed arguments
    """
    parser = argparse.ArgumentParser(prog='cvmdi-qkd',
                                     description='Key rates, thresholds and simulations for CV-MDI-QKD')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--config', help='Path to configuration file', default=None)
    parser.add_argument('--env-file', help='Path to .env file', default=None)
    parser.add_argument('--log-level', help='Logging level',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'], default=None)
    parser.add_argument('--log-file', help='Path to log file', default=None)
    parser.add_argument('--json-logs', help='Emit JSON log records', action='store_true', default=None)
    parser.add_argument('--format', dest='fmt', choices=['csv', 'json'], default=None,
                        help='Output format for tables (rate and simulate always write JSON)')
    parser.add_argument('--output', '-o', default=None, help="Output file ('-' for stdout)")

    sub = parser.add_subparsers(dest='command', required=True)

    rate = sub.add_parser('rate', help='Key rate for one parameter set')
    rate.add_argument('--tau-a', default=None, help="Alice's link: transmissivity, 'NdB' or 'Nkm'")
    rate.add_argument('--tau-b', default=None, help="Bob's link: transmissivity, 'NdB' or 'Nkm'")
    rate.add_argument('--omega-a', type=float, default=None)
    rate.add_argument('--omega-b', type=float, default=None)
    rate.add_argument('--g', type=float, default=None)
    rate.add_argument('--g-prime', type=float, default=None)
    rate.add_argument('--chi', type=float, default=None, help='Equivalent noise')
    rate.add_argument('--epsilon', type=float, default=None, help='Excess noise')
    rate.add_argument('--xi', type=float, default=None, help='Reconciliation efficiency')
    rate.add_argument('--mu', type=float, default=None, help='Total variance (default phi + 1)')
    rate.add_argument('--finite', action='store_true', default=None,
                      help='Evaluate at finite modulation (needs explicit attack parameters)')

    threshold = sub.add_parser('threshold', help="Maximum distance of Bob versus the relay radius")
    threshold.add_argument('--r', default=None, help='Comma-separated relay radii in km')
    threshold.add_argument('--r-min', type=float, default=None)
    threshold.add_argument('--r-max', type=float, default=None)
    threshold.add_argument('--r-steps', type=int, default=None)
    threshold.add_argument('--epsilon', default=None, help='Comma-separated excess noises')
    threshold.add_argument('--xi', type=float, default=None)

    scan = sub.add_parser('scan', help='Correlation-plane or transmissivity-plane grid')
    scan.add_argument('--plane', choices=['correlation', 'transmissivity'], default=None)
    scan.add_argument('--tau-a', default=None)
    scan.add_argument('--tau-b', default=None)
    scan.add_argument('--omega-a', type=float, default=None)
    scan.add_argument('--omega-b', type=float, default=None)
    scan.add_argument('--grid-n', type=int, default=None)
    scan.add_argument('--tau-min', type=float, default=None)
    scan.add_argument('--tau-max', type=float, default=None)
    scan.add_argument('--steps', type=int, default=None)
    scan.add_argument('--epsilon', type=float, default=None)

    simulate = sub.add_parser('simulate', help='Monte Carlo simulation and estimation')
    simulate.add_argument('--phi', type=float, default=None)
    simulate.add_argument('--tau-a', default=None, help="Alice's link: transmissivity, 'NdB' or 'Nkm'")
    simulate.add_argument('--tau-b', default=None, help="Bob's link: transmissivity, 'NdB' or 'Nkm'")
    simulate.add_argument('--n-rounds', type=int, default=None)
    simulate.add_argument('--batch-size', type=int, default=None)
    simulate.add_argument('--seed', type=int, default=None)
    simulate.add_argument('--xi', type=float, default=None)
    simulate.add_argument('--epsilon', type=float, default=None)
    simulate.add_argument('--r', type=float, default=None)
    simulate.add_argument('--detection-noise-variance', type=float, default=None)
    simulate.add_argument('--detector-imbalance', type=float, default=None)
    simulate.add_argument('--attenuation', choices=['modulation', 'beam_splitter'], default=None)
    simulate.add_argument('--optimize-r', action='store_true', default=None)
    simulate.add_argument('--checkpoints', default=None, help='Comma-separated sample counts')
    simulate.add_argument('--dump-samples', default=None, help='CSV file receiving the samples')

    region = sub.add_parser('attack-region', help='Classify the correlation plane')
    region.add_argument('--omega-a', type=float, default=None)
    region.add_argument('--omega-b', type=float, default=None)
    region.add_argument('--grid-n', type=int, default=None)

    return parser.parse_args(argv)


def _apply_flags(config: Config, section: str, args: argparse.Namespace, names: List[str]):
    """Store the flags that were given on the command line as config overrides."""
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            config.set(section, name, value)


def _tau(config: Config, section: str, key: str, default: float) -> float:
    value = config.get_str(section, key)
    loss_rate = config.get_float('protocol', 'loss_rate', 0.2)
    return default if value is None else parse_length(value, loss_rate)


def cmd_rate(args: argparse.Namespace, config: Config) -> int:
    _apply_flags(config, 'rate', args, ['tau_a', 'tau_b', 'omega_a', 'omega_b', 'g', 'g_prime',
                                        'chi', 'epsilon', 'mu', 'finite'])
    _apply_flags(config, 'protocol', args, ['xi'])

    tau_A = _tau(config, 'rate', 'tau_a', 1.0)
    tau_B = _tau(config, 'rate', 'tau_b', 1.0)
    xi = config.get_float('protocol', 'xi', 0.97)
    mu = config.get_float('rate', 'mu', config.get_float('protocol', 'phi', 65.0) + 1.0)
    omega_A = config.get_float('rate', 'omega_a')
    omega_B = config.get_float('rate', 'omega_b')
    g = config.get_float('rate', 'g')
    g_prime = config.get_float('rate', 'g_prime')
    chi = config.get_float('rate', 'chi')
    epsilon = config.get_float('rate', 'epsilon')
    finite = config.get_bool('rate', 'finite', False)
    has_correlations = g is not None or g_prime is not None

    if finite and not has_correlations:
        if args.finite:
            raise DomainError("--finite needs explicit attack parameters (--g and/or --g-prime)")
        logger.warning("config[rate][finite] is ignored without g or g_prime")
    if chi is not None or has_correlations or omega_A is not None or omega_B is not None:
        if args.epsilon is not None:
            raise DomainError("--epsilon cannot be combined with --chi, --omega-a/--omega-b or --g/--g-prime")
        if epsilon:
            logger.warning(f"config[rate][epsilon] = {epsilon} is ignored when the attack is given explicitly")

    if chi is not None:
        mode, result = 'fixed_chi', rate_min_fixed_chi(tau_A, tau_B, chi, xi, mu)
    elif has_correlations:
        params = AttackParams(tau_A, tau_B, omega_A or 1.0, omega_B or 1.0, g or 0.0, g_prime or 0.0)
        mode = 'finite_mu' if finite else 'general'
        result = rate_general(params, mu, xi, finite=finite)
    elif omega_A is not None or omega_B is not None:
        mode, result = 'fixed_thermal', rate_min_fixed_thermal(tau_A, tau_B, omega_A or 1.0, omega_B or 1.0, xi, mu)
    else:
        mode, result = 'excess_noise', rate_from_epsilon(tau_A, tau_B, epsilon or 0.0, xi, mu)

    payload = {'mode': mode, 'tau_A': tau_A, 'tau_B': tau_B, 'mu': mu, 'result': result.as_dict()}
    if mode in ('general', 'finite_mu'):
        budget = noise_budget(params)
        payload['noise_budget'] = {'chi': budget.chi, 'chi_loss': budget.chi_loss, 'epsilon': budget.epsilon}
    write_json('rate', config.resolved('protocol', 'rate'), payload, args.output)
    return EXIT_OK


def cmd_threshold(args: argparse.Namespace, config: Config) -> int:
    _apply_flags(config, 'threshold', args, ['r', 'r_min', 'r_max', 'r_steps', 'epsilon', 'xi'])

    r_text = config.get_str('threshold', 'r')
    if r_text:
        r_values = _float_list(r_text)
    else:
        r_values = np.linspace(config.get_float('threshold', 'r_min', 0.0),
                               config.get_float('threshold', 'r_max', 4.0),
                               config.get_int('threshold', 'r_steps', 41)).tolist()
    epsilons = _float_list(config.get_str('threshold', 'epsilon', '0'))
    loss_rate = config.get_float('protocol', 'loss_rate', 0.2)
    xi = config.get_float('threshold', 'xi', 1.0)

    frame = threshold_curves(r_values, epsilons, loss_rate, xi)
    extra = {'symmetric_threshold_tau': symmetric_threshold(),
             'symmetric_threshold_km': max_symmetric_distance(loss_rate),
             'direct_reconciliation_threshold_tau': direct_reconciliation_threshold(),
             'loss_rate_db_per_km': loss_rate}
    write_frame('threshold', config.resolved('protocol', 'threshold'), frame, args.output,
                args.fmt or config.get_str('general', 'format', 'csv'), extra)
    return EXIT_OK


def cmd_scan(args: argparse.Namespace, config: Config) -> int:
    _apply_flags(config, 'scan', args, ['plane', 'tau_a', 'tau_b', 'omega_a', 'omega_b', 'grid_n',
                                        'tau_min', 'tau_max', 'steps', 'epsilon'])
    plane = config.get_str('scan', 'plane', 'correlation')

    if plane == 'correlation':
        frame = rate_plane(_tau(config, 'scan', 'tau_a', 0.9), _tau(config, 'scan', 'tau_b', 0.9),
                           config.get_float('scan', 'omega_a', 5.0), config.get_float('scan', 'omega_b', 2.0),
                           config.get_int('scan', 'grid_n', 101))
    elif plane == 'transmissivity':
        grid = np.linspace(config.get_float('scan', 'tau_min', 0.5), config.get_float('scan', 'tau_max', 1.0),
                           config.get_int('scan', 'steps', 51))
        frame = rate_surface(grid, grid, config.get_float('scan', 'epsilon', 0.0),
                             config.get_float('scan', 'xi', 1.0))
    else:
        raise ConfigError(f"config[scan][plane] = {plane!r} must be 'correlation' or 'transmissivity'")

    write_frame('scan', config.resolved('protocol', 'scan'), frame, args.output,
                args.fmt or config.get_str('general', 'format', 'csv'), {'plane': plane})
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, config: Config) -> int:
    _apply_flags(config, 'simulate', args, ['tau_a', 'tau_b', 'n_rounds', 'batch_size', 'seed', 'epsilon', 'r',
                                            'detection_noise_variance', 'detector_imbalance', 'attenuation',
                                            'optimize_r', 'checkpoints'])
    _apply_flags(config, 'protocol', args, ['phi', 'xi'])

    sim = SimConfig(phi=config.get_float('protocol', 'phi', 65.0),
                    tau_B=_tau(config, 'simulate', 'tau_b', 1.0),
                    tau_A=_tau(config, 'simulate', 'tau_a', 1.0),
                    n_rounds=config.get_int('simulate', 'n_rounds', 1_000_000),
                    seed=config.get_int('simulate', 'seed', 0),
                    xi=config.get_float('protocol', 'xi', 0.97),
                    epsilon=config.get_float('simulate', 'epsilon', 0.0),
                    batch_size=config.get_int('simulate', 'batch_size', 100_000),
                    attenuation=config.get_str('simulate', 'attenuation', 'modulation'))
    relay = RelaySettings(r=config.get_float('simulate', 'r', 1.0),
                          detection_noise_variance=config.get_float('simulate', 'detection_noise_variance', 1.0),
                          detector_imbalance=config.get_float('simulate', 'detector_imbalance', 1.0))

    r_opt = None
    if config.get_bool('simulate', 'optimize_r', False):
        r_opt, _ = optimize_r(sim, relay)
        relay = RelaySettings(r_opt, relay.detection_noise_variance, relay.detector_imbalance)

    checkpoints = [int(c) for c in _float_list(config.get_str('simulate', 'checkpoints', '1000,10000,100000,1000000'))]
    report = run_estimation(sim, relay, checkpoints, dump_path=resolve_output_path(args.dump_samples))
    payload = {'report': report.as_dict(), 'r_opt': r_opt}
    write_json('simulate', config.resolved('protocol', 'simulate'), payload, args.output)
    return EXIT_OK


def cmd_attack_region(args: argparse.Namespace, config: Config) -> int:
    _apply_flags(config, 'attack_region', args, ['omega_a', 'omega_b', 'grid_n'])
    omega_A = config.get_float('attack_region', 'omega_a', 5.0)
    omega_B = config.get_float('attack_region', 'omega_b', 2.0)
    frame = scan_correlation_plane(omega_A, omega_B, config.get_int('attack_region', 'grid_n', 201))
    write_frame('attack-region', config.resolved('attack_region'), frame, args.output,
                args.fmt or config.get_str('general', 'format', 'csv'),
                {'phi_bound': phi_bound(omega_A, omega_B), 'g_max': float(np.sqrt(omega_A * omega_B))})
    return EXIT_OK


COMMANDS = {
    'rate': cmd_rate,
    'threshold': cmd_threshold,
    'scan': cmd_scan,
    'simulate': cmd_simulate,
    'attack-region': cmd_attack_region,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point.

    Returns:
        int: 0 on success, 2 for invalid or infeasible parameters, 1 for internal errors
    """
    args = parse_args(argv)

    env_file = args.env_file or os.path.join(os.getcwd(), '.env')
    if env_file and os.path.exists(env_file):
        from dotenv import load_dotenv
        load_dotenv(env_file)

    log_level = getattr(logging, args.log_level) if args.log_level else None
    logger = setup_logging(log_level=log_level, log_file=args.log_file, json_logs=args.json_logs)

    try:
        config = Config(args.config)
        logger = setup_logging(log_level=log_level, log_file=args.log_file, config=config.get_all(),
                               json_logs=args.json_logs)
        logger.info(f"Running {args.command} (cvmdi-qkd {__version__})")
        return COMMANDS[args.command](args, config)

    except (DomainError, ConfigError) as e:
        logger.error(f"Invalid parameters for {args.command}: {str(e)}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INVALID

    except Exception as e:
        log_exception(logger, e, f"Error in {args.command}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
