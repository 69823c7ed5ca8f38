"""
Command-line front end.

Subcommands: simulate, posterior, limit, hitting, clt, consistency, fisher,
compare. Every run echoes its resolved configuration in the output. Exit
codes: 0 on success, 1 on usage or parameter errors, 2 on numerical failures.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

from dotenv import load_dotenv

from .branching import path_stats, simulate_path
from .config_loader import config_loader
from .exceptions import BranchBayesError, NumericalError, UsageError
from .hitting import eta_dist, eta_mean_bounds, eta_mean_exact
from .input_reader import read_path_file
from .kernel import rho, rho_inverse
from .montecarlo import (
    CLT_KINDS,
    ExperimentReport,
    clt_experiment,
    fisher_info_experiment,
    posterior_consistency_experiment,
)
from .output_formatter import format_csv, format_json, format_json_lines, write_output
from .posterior import joint_posterior, limit_moments, limit_mode, limit_posterior, naive_ratio

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "posterior", "limit", "hitting", "clt", "consistency", "fisher", "compare")
REPORT_COLUMNS = ("name", "statistic", "threshold", "n_samples", "seed", "passed", "note")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


@dataclass
class RunConfig:
    """Fully resolved configuration of one CLI run."""
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    output_format: str = "json"
    output_path: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'params': dict(self.params),
            'seed': self.seed,
            'output_format': self.output_format,
            'output_path': self.output_path,
        }


@dataclass
class CommandOutput:
    """What a command produced, ready for either output format."""
    result: Optional[Dict[str, Any]] = None
    reports: Optional[List[ExperimentReport]] = None
    columns: Sequence[str] = ()
    rows: List[Sequence[Any]] = field(default_factory=list)
    # result fields echoed above the CSV rows, read back by the path reader
    csv_echo: Dict[str, Any] = field(default_factory=dict)


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def parse_real(text: str) -> Union[Fraction, float]:
    """Parse '0.5', '1/3', '1e-3' as an exact Fraction; 'inf' as float infinity."""
    if text.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a real number: {text!r}") from None


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def setup_logging(log_dir: Optional[str] = None) -> None:
    """Configure the root logger: a per-run file log plus warnings on stderr."""
    settings = config_loader.get_logging_config()
    log_dir = log_dir or settings.get('log_dir', 'logs')
    log_file = settings.get('log_file', 'system.log')
    level = getattr(logging, str(settings.get('level', 'INFO')).upper(), logging.INFO)

    os.makedirs(log_dir, exist_ok=True)
    file_handler = logging.FileHandler(os.path.join(log_dir, log_file), mode='w', encoding='utf-8')
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(logging.WARNING)
    logging.basicConfig(level=level,
                        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        handlers=[file_handler, stream_handler],
                        force=True)
    logging.info(f"Root logging configured. System logs in {os.path.join(log_dir, log_file)}")


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('Run Options')
    group.add_argument('--seed', type=int, default=0, help='Seed of every stochastic output (default 0)')
    group.add_argument('--format', dest='output_format', choices=['json', 'csv'], default='json',
                       help='Output format')
    group.add_argument('--output', dest='output_path', default=None, help='Write output to this file')
    group.add_argument('--config', dest='config_path', default=None, help='Alternative YAML configuration')
    group.add_argument('--log-dir', default=None, help='Directory for system.log')


def _add_parameter_arguments(parser: argparse.ArgumentParser, required: bool = True) -> None:
    group = parser.add_argument_group('Offspring Parameter').add_mutually_exclusive_group(required=required)
    group.add_argument('--u', type=parse_real, help='Probability of two offspring, in [0, 1] (e.g. 0.5 or 1/3)')
    group.add_argument('--r', type=parse_real, help='Renormalized index r = (1-u)^2/(4u), bypassing u')


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(prog='branch-bayes',
                               description='Bayesian and hitting-time estimation for binary branching processes.')
    commands = parser.add_subparsers(dest='command', required=True)

    simulate = commands.add_parser('simulate', help='Simulate a seeded branching path')
    simulate.add_argument('--x0', type=int, required=True, help='Initial population')
    simulate.add_argument('--n', type=int, required=True, help='Number of generations')
    _add_parameter_arguments(simulate)

    posterior = commands.add_parser('posterior', help='Finite-n joint posterior of (X0, U) for a path file')
    posterior.add_argument('--path-file', required=True, help='Path file (text lines or JSON)')
    posterior.add_argument('--drop-origin', action='store_true',
                           help='Treat the first value of the file as the hidden origin x_0')

    limit = commands.add_parser('limit', help='Limit posterior mu(r, x)')
    limit.add_argument('--x', type=int, required=True, help='First-generation size x_1')
    _add_parameter_arguments(limit)

    hitting = commands.add_parser('hitting', help='Hitting-time law of eta_x')
    hitting.add_argument('--x', type=int, required=True, help='Target population')
    _add_parameter_arguments(hitting)

    clt = commands.add_parser('clt', help='Gaussian-limit experiment')
    clt.add_argument('--kind', choices=list(CLT_KINDS), default='xi', help='Estimator to sample')
    clt.add_argument('--x', type=int, default=4096, help='Population size (>= 64)')
    clt.add_argument('--samples', type=int, default=100000, help='Number of samples')
    _add_parameter_arguments(clt)

    consistency = commands.add_parser('consistency', help='Posterior consistency along one simulated path')
    consistency.add_argument('--x0', type=int, default=5, help='Initial population')
    consistency.add_argument('--n-list', type=parse_int_list, default=[10, 20, 30],
                             help='Comma-separated observation counts (each >= 5)')
    _add_parameter_arguments(consistency)

    fisher = commands.add_parser('fisher', help='Monte Carlo Jeffreys-prior identity')
    fisher.add_argument('--n', type=int, default=5, help='Number of generations')
    fisher.add_argument('--lambda0', type=float, default=3.0, help='Poisson mean of X0')
    fisher.add_argument('--samples', dest='m', type=int, default=100000, help='Number of simulated paths')
    _add_parameter_arguments(fisher)

    compare = commands.add_parser('compare', help='Bayesian, hitting-time and naive estimators side by side')
    compare.add_argument('--x-max', type=int, default=10, help='Largest population in the table')
    _add_parameter_arguments(compare)

    for subparser in commands.choices.values():
        _add_common_arguments(subparser)
    return parser


def _resolve_u(args: argparse.Namespace):
    """u from --u, or from --r through the inverse of rho."""
    if getattr(args, 'u', None) is not None:
        return args.u
    return rho_inverse(args.r)


def _resolve_r(args: argparse.Namespace):
    if getattr(args, 'r', None) is not None:
        return args.r
    return rho(args.u)


def _resolve_params(args: argparse.Namespace) -> Dict[str, Any]:
    ignored = {'command', 'seed', 'output_format', 'output_path', 'config_path', 'log_dir'}
    params = {key: value for key, value in vars(args).items() if key not in ignored and value is not None}
    if hasattr(args, 'u'):
        params['u'] = _resolve_u(args)
        params['r'] = _resolve_r(args)
    return params


def _run_simulate(config: RunConfig) -> CommandOutput:
    p = config.params
    path = simulate_path(p['x0'], p['u'], p['n'], config.seed)
    result = path.to_dict()
    if len(path.observed) >= 2:
        result['stats'] = path_stats(path).to_dict()
    return CommandOutput(result=result, columns=("x",), rows=[(value,) for value in path.values],
                         csv_echo={'result': {'origin_included': path.origin_included}})


def _run_posterior(config: RunConfig) -> CommandOutput:
    p = config.params
    path = read_path_file(p['path_file'], p.get('drop_origin', False))
    posterior = joint_posterior(path)
    stats = path_stats(path)
    result = posterior.to_dict()
    result['path_stats'] = stats.to_dict()
    result['limit_reference'] = limit_posterior(stats.exact[1], stats.x1).to_dict()
    rows = [(x0, prob) for x0, prob in zip(posterior.x0_support, posterior.x0_weights)]
    return CommandOutput(result=result, columns=("x0", "prob"), rows=rows)


def _run_limit(config: RunConfig) -> CommandOutput:
    p = config.params
    r, x = p['r'], p['x']
    dist = limit_posterior(r, x)
    result = dist.to_dict()
    if dist.is_exact:
        result['exact_probs'] = [str(prob) for prob in dist.exact_probs()]
    if 0 < r < math.inf:
        result['mean'], result['variance'] = limit_moments(r, x)
        result['mode'] = limit_mode(r, x)
    rows = [(y, prob, weight) for y, prob, weight in zip(dist.support, dist.probs, dist.log_weights)]
    return CommandOutput(result=result, columns=("y", "prob", "log_weight"), rows=rows)


def _run_hitting(config: RunConfig) -> CommandOutput:
    p = config.params
    u, x = p['u'], p['x']
    law = eta_dist(x, u)
    lower, upper, parity_ok = eta_mean_bounds(x, float(u))
    result = law.to_dict()
    result.update({'mean': eta_mean_exact(x, float(u)), 'mean_lower': lower, 'mean_upper': upper,
                   'parity_bound_ok': parity_ok})
    rows = [(y, prob, weight, law.hitting_prob)
            for y, prob, weight in zip(law.support, law.probs, law.dist.log_weights)]
    return CommandOutput(result=result, columns=("y", "prob", "log_weight", "hitting_prob"), rows=rows)


def _run_clt(config: RunConfig) -> CommandOutput:
    p = config.params
    return CommandOutput(reports=[clt_experiment(p['kind'], float(p['u']), p['x'], p['samples'], config.seed)])


def _run_consistency(config: RunConfig) -> CommandOutput:
    p = config.params
    return CommandOutput(reports=posterior_consistency_experiment(p['u'], p['x0'], p['n_list'], config.seed))


def _run_fisher(config: RunConfig) -> CommandOutput:
    p = config.params
    return CommandOutput(reports=[fisher_info_experiment(float(p['u']), p['n'], p['lambda0'], p['m'], config.seed)])


def _run_compare(config: RunConfig) -> CommandOutput:
    p = config.params
    u, x_max = p['u'], p['x_max']
    if x_max < 1:
        raise UsageError(f"--x-max must be >= 1, got {x_max}")
    rows = []
    for x in range(1, x_max + 1):
        bayes_mean, _ = limit_moments(rho(u), x)
        rows.append((x, bayes_mean, eta_mean_exact(x, float(u)), x / (1.0 + float(u))))
    result = {
        'rows': [dict(zip(("x", "bayes_mean", "hitting_mean", "naive_mean"), row)) for row in rows],
        'naive_ratio_x2': naive_ratio(u),
    }
    return CommandOutput(result=result, columns=("x", "bayes_mean", "hitting_mean", "naive_mean"), rows=rows)


HANDLERS: Dict[str, Callable[[RunConfig], CommandOutput]] = {
    'simulate': _run_simulate,
    'posterior': _run_posterior,
    'limit': _run_limit,
    'hitting': _run_hitting,
    'clt': _run_clt,
    'consistency': _run_consistency,
    'fisher': _run_fisher,
    'compare': _run_compare,
}


def render(config: RunConfig, output: CommandOutput) -> str:
    """Serialize a command's output in the configured format."""
    echo = config.to_dict()
    if output.reports is not None:
        if config.output_format == 'csv':
            rows = [[getattr(report, column) for column in REPORT_COLUMNS] for report in output.reports]
            return format_csv(REPORT_COLUMNS, rows, echo)
        return format_json_lines([{'command': config.command, 'config': echo}]
                                 + [report.to_dict() for report in output.reports])
    if config.output_format == 'csv':
        return format_csv(output.columns, output.rows, {**echo, **output.csv_echo})
    return format_json({'command': config.command, 'config': echo, 'result': output.result})


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse argv, dispatch to the command and write its output.

    Returns:
        Exit code: 0 on success, 1 on usage/parameter errors, 2 on numerical failures.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        if args.config_path:
            config_loader.load(args.config_path)
    except (OSError, BranchBayesError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(args.log_dir)
    load_dotenv()

    try:
        config = RunConfig(
            command=args.command,
            params=_resolve_params(args),
            seed=args.seed,
            output_format=args.output_format,
            output_path=args.output_path,
        )
        logger.info(f"Running {config.command} with {config.to_dict()}")
        output = HANDLERS[config.command](config)
        write_output(render(config, output), config.output_path)
    except NumericalError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"Numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (BranchBayesError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logger.info(f"{args.command} finished")
    return EXIT_OK


def main() -> None:
    sys.exit(run(sys.argv[1:]))
