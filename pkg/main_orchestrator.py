#!/usr/bin/env python3
"""
Main Orchestrator for the Sampling Approximation Toolkit
========================================================

Command-line entry point.  Coordinates the kernel checks, operator sweeps,
figure reproduction, Orlicz-space utilities and assumption reports.

Usage:
    python main_orchestrator.py kernels check --kernel combined-m --grid regular --w 5,10,20
    python main_orchestrator.py approx run --operator t2 --signal fig2 --w 5,10,20,40 --out data/output
    python main_orchestrator.py figure fig3 --out data/output
    python main_orchestrator.py orlicz norm --signal tent --phi power:p=2
    python main_orchestrator.py orlicz delta2 --phi exp:alpha=1
    python main_orchestrator.py assumptions check --operator t3 --psi fejer --signal fig3 --phi zygmund:alpha=1,beta=1
    python main_orchestrator.py --config run.cfg approx run

Exit codes: 0 success, 1 input error, 2 finished with uncertified results.
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import fields
from typing import Any, Dict, List, Optional, Tuple

from harness import (Config, SweepConfig, SweepRunner, config_from_settings, read_settings_file,
                     setup_logging)
from kernels import check_chi_assumptions, get_kernel
from operators import parse_grid
from orlicz import (NotInOrliczSpaceError, delta2_classify, luxemburg_literal, luxemburg_norm,
                    modular, parse_phi, phi_spec)
from quadrature import IntegrationDomain
from signals import DEFAULT_WINDOWS, parse_signal

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_UNCERTIFIED = 2

# defaults for flags that may also come from the --config file
FLAG_DEFAULTS = {
    'operator': 't2',
    'kernel': 'combined-m',
    'psi': None,
    'signal': 'fig2',
    'w': '5,10,20,40',
    'grid': 'regular',
    'eval_grid': None,
    'phi': 'power:p=1',
    'lambdas': '1',
    'out': None,
    'window': None,
    't7_approx_prefactor': False,
    'epsilon': '1e-3',
}
FLAG_ALIASES = {'lambda': 'lambdas'}
# approx run reads 'grid' as the evaluation grid lo,hi,step
APPROX_KEYS = {'grid': 'eval_grid', 'sampling_grid': 'grid'}


def parse_float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in str(text).split(',') if v.strip()]
    except ValueError:
        raise ValueError(f"Expected a comma-separated list of numbers, got '{text}'")
    if not values:
        raise ValueError("Empty list")
    return values


def parse_pair(text: str) -> Tuple[float, float]:
    values = parse_float_list(text)
    if len(values) != 2:
        raise ValueError(f"Expected lo,hi, got '{text}'")
    return values[0], values[1]


class ApproximationOrchestrator:
    """Main orchestrator for the sampling approximation toolkit"""

    def __init__(self, config_file: str = None):
        self.flag_settings: Dict[str, str] = {}
        self.config = self._load_config(config_file)
        self.logger = self._setup_logging()
        self.runner = SweepRunner(self.config)
        self.logger.info("Sampling approximation toolkit initialized")

    def _load_config(self, config_file: str = None) -> Config:
        """Load configuration from file or use defaults"""
        if not config_file:
            return Config()
        settings = read_settings_file(config_file)
        config_keys = {f.name for f in fields(Config)}
        config_settings = {}
        for key, value in settings.items():
            key = FLAG_ALIASES.get(key, key)
            if key in config_keys:
                config_settings[key] = value
            elif key in FLAG_DEFAULTS or key == 'sampling_grid':
                self.flag_settings[key] = value
            else:
                raise ValueError(f"Unknown config key '{key}' in {config_file}")
        return config_from_settings(config_settings)

    def _setup_logging(self) -> logging.Logger:
        """Setup logging configuration"""
        return setup_logging(self.config)

    def resolve(self, args: argparse.Namespace) -> argparse.Namespace:
        """Fill flags left unset on the command line from the config file, then defaults."""
        settings = dict(self.flag_settings)
        if args.command == 'approx':
            settings = {APPROX_KEYS.get(k, k): v for k, v in settings.items()}
        else:
            # lo,hi,step in 'grid' is an evaluation grid; only approx run takes one
            if ',' in str(settings.get('grid', '')):
                settings.pop('grid')
            if 'sampling_grid' in settings:
                settings['grid'] = settings.pop('sampling_grid')
        for key, default in FLAG_DEFAULTS.items():
            if getattr(args, key, None) is None:
                value = settings.get(key, default)
                if key == 't7_approx_prefactor' and isinstance(value, str):
                    value = value.strip().lower() in ('true', '1', 'yes')
                setattr(args, key, value)
        return args

    def kernels_check(self, kernel: str, grid: str, w_list: List[float]) -> Dict[str, Any]:
        report = check_chi_assumptions(get_kernel(kernel), parse_grid(grid), w_list,
                                       seed=self.config.seed,
                                       sum_tail_tol=self.config.sum_tail_tol)
        for message in report.warnings:
            self.logger.warning("Kernel %s: %s", kernel, message)
        return report.to_dict()

    def approx_run(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], bool]:
        sweep = SweepConfig(
            operator=args.operator,
            kernel='mellin' if args.operator.lower() in ('t6', 't7') else args.kernel,
            signal=args.signal,
            w_list=parse_float_list(args.w),
            eval_grid=tuple(parse_float_list(args.eval_grid)) if args.eval_grid else None,
            phi=args.phi,
            lambda_list=parse_float_list(args.lambdas),
            breakpoint_exclusion_radius=self.config.exclusion_radius,
            output_path=args.out or self.config.output_dir,
            psi=args.psi,
            grid=args.grid,
            t7_approx_prefactor=bool(args.t7_approx_prefactor))
        report = self.runner.run_sweep(sweep)
        return self.runner.generate_summary_report(report), report.all_certified

    def figure(self, fig_id: str, out: Optional[str]) -> Tuple[List[str], bool]:
        self.runner.reports.clear()
        files = self.runner.reproduce_figure(fig_id, out or self.config.output_dir)
        return files, all(r.all_certified for r in self.runner.reports)

    def orlicz_norm(self, signal: str, phi: str,
                    window: Optional[Tuple[float, float]] = None) -> Tuple[Dict[str, Any], bool]:
        f = parse_signal(signal)
        phi_function = parse_phi(phi)
        support = f.support_bound
        if window is None:
            window = support or DEFAULT_WINDOWS.get(signal)
        if window is None:
            raise ValueError(f"Signal '{signal}' has unbounded support; pass --window lo,hi")
        lo, hi = window
        if f.domain_lo > -math.inf:
            lo = max(lo, f.domain_lo)
        domain = IntegrationDomain.finite(lo, hi)
        config = self.config.quadrature
        result = {'signal': signal, 'phi': phi_spec(phi_function), 'domain': [lo, hi]}
        value = modular(f, phi_function, 1.0, domain, config)
        result['modular_at_1'] = value.value
        try:
            result['luxemburg_norm'] = luxemburg_norm(f, phi_function, domain, config)
            result['literal_threshold'] = luxemburg_literal(f, phi_function, domain, config)
        except NotInOrliczSpaceError as e:
            self.logger.warning("%s is not in the Orlicz space of %s: %s", signal, phi, e)
            result['luxemburg_norm'] = math.inf
            result['error'] = str(e)
        return result, value.certified

    def orlicz_delta2(self, phi: str) -> Dict[str, Any]:
        result = delta2_classify(parse_phi(phi))
        return {'phi': phi, 'satisfied': result.satisfied, 'sup_ratio': result.sup_ratio,
                'analytic': result.analytic, 'needs_review': result.needs_review}

    def assumptions_check(self, args: argparse.Namespace):
        operator = args.operator.lower()
        return self.runner.check_assumptions(
            operator, 'mellin' if operator in ('t6', 't7') else args.kernel, args.signal,
            args.phi, parse_float_list(args.w), grid=args.grid, psi=args.psi,
            out_dir=args.out or self.config.output_dir, epsilon=float(args.epsilon))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Sampling and convolution operators in Orlicz spaces')
    parser.add_argument('--config', help='JSON or key=value configuration file')
    commands = parser.add_subparsers(dest='command', required=True)

    kernels = commands.add_parser('kernels', help='Kernel assumption checks')
    kernels_actions = kernels.add_subparsers(dest='action', required=True)
    kernels_check = kernels_actions.add_parser('check', help='Check a kernel on a sampling grid')
    kernels_check.add_argument('--kernel', help='fejer, bspline:<n>, combined-m')
    kernels_check.add_argument('--grid', help='regular, irregular:<name>, jitter:<eta>')
    kernels_check.add_argument('--w', help='Comma-separated w values')

    approx = commands.add_parser('approx', help='Operator sweeps')
    approx_actions = approx.add_subparsers(dest='action', required=True)
    run = approx_actions.add_parser('run', help='Run a w-sweep and write CSVs')
    run.add_argument('--operator', help='t1..t7')
    run.add_argument('--kernel', help='Kernel name (ignored by t6/t7)')
    run.add_argument('--psi', help='Durrmeyer kernel for t3')
    run.add_argument('--signal', help='Catalog signal, const:<c>, indicator:<a>,<b>, csv:<path>')
    run.add_argument('--w', help='Comma-separated increasing w values')
    run.add_argument('--grid', dest='eval_grid', help='Evaluation grid lo,hi,step')
    run.add_argument('--sampling-grid', dest='grid', help='regular, irregular:<name>, jitter:<eta>')
    run.add_argument('--phi', help='power:p=<p>, exp:alpha=<a>, zygmund:alpha=<a>,beta=<b>')
    run.add_argument('--lambda', dest='lambdas', help='Comma-separated lambda values')
    run.add_argument('--out', help='Output directory')
    run.add_argument('--t7-approx-prefactor', dest='t7_approx_prefactor', action='store_const',
                     const=True, default=None, help='Use w/2 as the T7 prefactor')

    figure = commands.add_parser('figure', help='Reproduce a reference figure')
    figure.add_argument('fig_id', choices=['fig1', 'fig2', 'fig3', 'fig4'])
    figure.add_argument('--out', help='Output directory')

    orlicz = commands.add_parser('orlicz', help='Orlicz-space utilities')
    orlicz_actions = orlicz.add_subparsers(dest='action', required=True)
    norm = orlicz_actions.add_parser('norm', help='Luxemburg norm of a signal')
    norm.add_argument('--signal')
    norm.add_argument('--phi')
    norm.add_argument('--window', help='lo,hi for signals without compact support')
    delta2 = orlicz_actions.add_parser('delta2', help='Delta_2 classification of phi')
    delta2.add_argument('--phi')

    assumptions = commands.add_parser('assumptions', help='Assumption reports')
    assumptions_actions = assumptions.add_subparsers(dest='action', required=True)
    check = assumptions_actions.add_parser('check', help='Kernel and sample-functional checks')
    check.add_argument('--operator')
    check.add_argument('--kernel')
    check.add_argument('--psi')
    check.add_argument('--signal')
    check.add_argument('--phi')
    check.add_argument('--w')
    check.add_argument('--grid', help='regular, irregular:<name>, jitter:<eta>')
    check.add_argument('--epsilon')
    check.add_argument('--out')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function for command-line usage"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        orchestrator = ApproximationOrchestrator(args.config)
        args = orchestrator.resolve(args)
        certified = True

        if args.command == 'kernels':
            print(json.dumps(orchestrator.kernels_check(args.kernel, args.grid,
                                                        parse_float_list(args.w)), indent=2))

        elif args.command == 'approx':
            summary, certified = orchestrator.approx_run(args)
            print(json.dumps(summary, indent=2, default=str))

        elif args.command == 'figure':
            files, certified = orchestrator.figure(args.fig_id, args.out)
            print(f"Figure {args.fig_id} written:")
            for path in files:
                print(f"  {path}")

        elif args.command == 'orlicz' and args.action == 'norm':
            window = parse_pair(args.window) if args.window else None
            result, certified = orchestrator.orlicz_norm(args.signal, args.phi, window)
            print(json.dumps(result, indent=2))

        elif args.command == 'orlicz' and args.action == 'delta2':
            print(json.dumps(orchestrator.orlicz_delta2(args.phi), indent=2))

        elif args.command == 'assumptions':
            summary = orchestrator.assumptions_check(args)
            print(summary.table.to_string(index=False))
            print(summary.l_report.flag)
            if summary.csv_path:
                print(f"Report saved to {summary.csv_path}")

        if not certified:
            logging.warning("Finished with uncertified results")
            print("Warning: some results are uncertified")
            return EXIT_UNCERTIFIED
        return EXIT_OK

    except (ValueError, KeyError, FileNotFoundError) as e:
        logging.error(f"Input error: {str(e)}")
        print(f"Error: {str(e)}")
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
