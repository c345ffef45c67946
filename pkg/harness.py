#!/usr/bin/env python3
"""
Experiment Harness
==================

Runs w-sweeps of the sampling/convolution operators against catalog signals,
computes error metrics (sup error away from breakpoints, L^1 grid error,
modular errors per lambda, Luxemburg error), writes one CSV per w and a JSON
summary, reproduces the reference figures and aggregates the kernel and
sample-functional assumption checks into a pass/warn matrix.

Usage:
    from harness import Config, SweepConfig, SweepRunner
    runner = SweepRunner(Config())
    report = runner.run_sweep(SweepConfig(operator='t2', signal='fig2', w_list=[5, 10, 20, 40]))
"""

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from tqdm import tqdm

from kernels import (AssumptionReport, bspline, check_chi_assumptions, combined_m, mellin_kernel,
                     scaled_l1_norm)
from operators import (DISCRETE, MELLIN, LAssumptionReport, OperatorEvaluation, OperatorSpec,
                       build_operator, check_L_assumptions, evaluate_on_grid)
from orlicz import (ModularValue, NotInOrliczSpaceError, luxemburg_norm,
                    modular_convergence_table, parse_phi, phi_spec)
from quadrature import IntegrationDomain, QuadratureConfig
from signals import DEFAULT_WINDOWS, PiecewiseSignal, parse_signal

logger = logging.getLogger(__name__)

MELLIN_MASS_POINTS = (0.5, 1.0, 2.0)


@dataclass
class Config:
    """Configuration settings for sweeps and checks"""
    # Quadrature
    abs_tol: float = 1e-9
    max_subdivisions: int = 2 ** 20

    # Truncation of full-line kernels
    kernel_tail_tol: float = 1e-4
    sum_tail_tol: float = 1e-6

    # Processing settings
    max_workers: int = 4
    seed: int = 12345
    show_progress: bool = True
    exclusion_radius: float = 0.05

    # File paths
    input_dir: str = "data/input"
    output_dir: str = "data/output"

    # Logging
    log_file: str = "sampling_approx.log"
    log_level: str = "INFO"

    def __post_init__(self):
        for name in ('abs_tol', 'kernel_tail_tol', 'sum_tail_tol'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion_radius must be >= 0")
        if int(self.max_workers) < 1:
            raise ValueError("max_workers must be >= 1")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be >= 1")

    @property
    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(abs_tol=self.abs_tol, max_subdivisions=int(self.max_subdivisions))


def _coerce(value: str, kind: type) -> Any:
    if kind is bool:
        lowered = value.strip().lower()
        if lowered not in ('true', 'false', '1', '0', 'yes', 'no'):
            raise ValueError(f"Expected a boolean, got '{value}'")
        return lowered in ('true', '1', 'yes')
    if kind is int:
        return int(float(value)) if 'e' in value.lower() else int(value)
    if kind is float:
        return float(value)
    return value.strip()


def read_settings_file(path: str) -> Dict[str, str]:
    """Read a JSON object or a flat ``key=value`` file (``#`` comments allowed)."""
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Config file {path} not found")
    text = file_path.read_text(encoding='utf-8')
    if file_path.suffix.lower() == '.json' or text.lstrip().startswith('{'):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError(f"Config file {path} must hold a JSON object")
        return {k: v for k, v in data.items()}
    settings = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        if not sep:
            raise ValueError(f"{path}:{number}: expected key=value, got '{raw.strip()}'")
        settings[key.strip().replace('-', '_')] = value.strip()
    return settings


def config_from_settings(settings: Dict[str, Any]) -> Config:
    types = {f.name: type(f.default) for f in fields(Config)}
    unknown = sorted(set(settings) - set(types))
    if unknown:
        raise ValueError(f"Unknown config key(s): {', '.join(unknown)}")
    values = {}
    for key, value in settings.items():
        values[key] = _coerce(value, types[key]) if isinstance(value, str) else value
    return Config(**values)


def load_config(path: Optional[str] = None) -> Config:
    """Load configuration from file or use defaults"""
    if path and os.path.exists(path):
        return config_from_settings(read_settings_file(path))
    return Config()


def setup_logging(config: Config) -> logging.Logger:
    """Setup logging configuration"""
    logging.basicConfig(
        level=getattr(logging, config.log_level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(config.log_file),
            logging.StreamHandler()
        ]
    )
    return logging.getLogger(__name__)


@dataclass
class SweepConfig:
    operator: str = 't2'
    kernel: str = 'combined-m'
    signal: str = 'fig2'
    w_list: List[float] = field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0])
    eval_grid: Optional[Tuple[float, float, float]] = None
    phi: str = 'power:p=1'
    lambda_list: List[float] = field(default_factory=lambda: [1.0])
    breakpoint_exclusion_radius: float = 0.05
    output_path: str = 'data/output'
    psi: Optional[str] = None
    grid: str = 'regular'
    t7_approx_prefactor: bool = False

    def __post_init__(self):
        if self.eval_grid is None:
            lo, hi = DEFAULT_WINDOWS.get(self.signal, (-5.0, 5.0))
            self.eval_grid = (lo, hi, 1e-3)
        lo, hi, step = (float(v) for v in self.eval_grid)
        self.eval_grid = (lo, hi, step)
        if not step > 0:
            raise ValueError(f"Grid step must be positive, got {step}")
        if not lo < hi:
            raise ValueError(f"Grid needs lo < hi, got ({lo}, {hi})")
        self.w_list = [float(w) for w in self.w_list]
        if not self.w_list or any(w <= 0 for w in self.w_list):
            raise ValueError("w_list must hold positive values")
        if any(b <= a for a, b in zip(self.w_list, self.w_list[1:])):
            raise ValueError(f"w_list must be strictly increasing, got {self.w_list}")
        self.lambda_list = [float(v) for v in self.lambda_list]
        if not self.lambda_list or any(v <= 0 for v in self.lambda_list):
            raise ValueError("lambda_list must hold positive values")
        if self.breakpoint_exclusion_radius < 0:
            raise ValueError("breakpoint_exclusion_radius must be >= 0")

    def grid_points(self) -> np.ndarray:
        lo, hi, step = self.eval_grid
        cells = int(math.floor((hi - lo) / step + 1e-9))
        return np.round(np.linspace(lo, lo + cells * step, cells + 1), 12)


@dataclass
class ApproximationRow:
    w: float
    sup_error_continuity: float
    l1_grid_error: float
    sup_error_grid: float
    modular_error: Dict[float, float]
    luxemburg_error: float
    certified: bool
    csv_file: str = ''


@dataclass
class ApproximationReport:
    sweep: SweepConfig
    operator: str
    rows: List[ApproximationRow]
    modular_tags: Dict[float, str] = field(default_factory=dict)
    chi_report: Optional[AssumptionReport] = None
    l_report: Optional[LAssumptionReport] = None
    files: List[str] = field(default_factory=list)
    summary_file: str = ''

    @property
    def l1_strictly_decreasing(self) -> bool:
        values = [r.l1_grid_error for r in self.rows]
        return all(b < a for a, b in zip(values, values[1:]))

    @property
    def sup_nonincreasing(self) -> bool:
        values = [r.sup_error_continuity for r in self.rows]
        return all(b <= a for a, b in zip(values, values[1:]))

    @property
    def all_certified(self) -> bool:
        return all(r.certified for r in self.rows)


def _exclusion_mask(xs: np.ndarray, breakpoints: Sequence[float], radius: float) -> np.ndarray:
    keep = np.ones(xs.size, dtype=bool)
    for b in breakpoints:
        keep &= np.abs(xs - b) > radius
    return keep


def _safe_name(text: str) -> str:
    return ''.join(c if c.isalnum() or c in '-.' else '_' for c in text)


class SweepRunner:
    """Runs operator sweeps, figure reproduction and assumption reports"""

    def __init__(self, config: Optional[Config] = None):
        self.config = config or Config()
        self.logger = logging.getLogger(__name__)
        self.reports: List[ApproximationReport] = []

    def build_spec(self, sweep: SweepConfig) -> OperatorSpec:
        return build_operator(sweep.operator, kernel=sweep.kernel, grid=sweep.grid, psi=sweep.psi,
                              kernel_tail_tol=self.config.kernel_tail_tol,
                              quadrature=self.config.quadrature,
                              approximate_prefactor=sweep.t7_approx_prefactor)

    def write_curve_csv(self, path: Path, header: Dict[str, Any], columns: Dict[str, np.ndarray]):
        """Write '# key=value, ...' then the columns with 17 significant digits."""
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(columns)
        try:
            with open(path, 'w', encoding='utf-8', newline='') as handle:
                handle.write('# ' + ', '.join(f"{k}={v}" for k, v in header.items()) + '\n')
                frame.to_csv(handle, index=False, float_format='%.17g')
        except OSError as e:
            raise OSError(f"Cannot write {path}: {e}") from e

    def _evaluate(self, spec: OperatorSpec, signal: PiecewiseSignal, xs: np.ndarray,
                  w: float) -> OperatorEvaluation:
        self.logger.info("Evaluating %s on %s at w=%g (%d points)", spec.describe(), signal.name,
                         w, xs.size)
        return evaluate_on_grid(spec, w, signal, xs)

    def run_sweep(self, sweep: SweepConfig) -> ApproximationReport:
        """Evaluate T_w f on the grid for every w, write the curves and measure the errors."""
        spec = self.build_spec(sweep)
        signal = parse_signal(sweep.signal)
        phi = parse_phi(sweep.phi)
        xs = sweep.grid_points()
        fx = signal(xs)
        out_dir = Path(sweep.output_path)
        self.logger.info("Starting sweep %s on %s, w=%s", spec.describe(), signal.name, sweep.w_list)

        with ThreadPoolExecutor(max_workers=self.config.max_workers) as executor:
            evaluations = list(tqdm(executor.map(lambda w: self._evaluate(spec, signal, xs, w),
                                                 sweep.w_list),
                                    total=len(sweep.w_list), desc=f"{sweep.operator} sweep",
                                    disable=not self.config.show_progress))

        files = []
        for evaluation in evaluations:
            path = out_dir / (f"{sweep.operator.lower()}_{_safe_name(signal.name)}"
                              f"_w{evaluation.w:g}.csv")
            header = {'operator': sweep.operator.lower(), 'kernel': spec.kernel_name,
                      'w': f"{evaluation.w:g}", 'phi': phi_spec(phi)}
            self.write_curve_csv(path, header, {'x': xs, 'f': fx, 'Tf': evaluation.values})
            files.append(str(path))
        by_w = {e.w: e for e in evaluations}

        lo, hi = float(xs[0]), float(xs[-1])
        domain = IntegrationDomain.finite(lo, hi)
        cells = xs.size - 1
        approximant = lambda w: (lambda x, _v=by_w[w].values: np.interp(x, xs, _v))
        table = modular_convergence_table(approximant, signal, phi, sweep.lambda_list, sweep.w_list,
                                          domain, self.config.quadrature, min_panels=cells,
                                          max_workers=self.config.max_workers)

        keep = _exclusion_mask(xs, signal.breakpoints, sweep.breakpoint_exclusion_radius)
        rows = []
        for path, w in zip(files, sweep.w_list):
            evaluation = by_w[w]
            error = np.abs(evaluation.values - fx)
            difference = lambda x, _v=evaluation.values: np.interp(x, xs, _v) - signal(x)
            try:
                lux = luxemburg_norm(difference, phi, domain, self.config.quadrature,
                                     breakpoints=signal.breakpoints, min_panels=cells)
            except NotInOrliczSpaceError as e:
                self.logger.warning("Luxemburg error at w=%g: %s", w, e)
                lux = math.inf
            cells_w = [table.cells[(lam, w)] for lam in sweep.lambda_list]
            modular_values = {lam: (c.value if isinstance(c, ModularValue) else math.nan)
                              for lam, c in zip(sweep.lambda_list, cells_w)}
            modular_ok = all(isinstance(c, ModularValue) and c.certified for c in cells_w)
            rows.append(ApproximationRow(
                w=w,
                sup_error_continuity=float(np.max(error[keep])) if keep.any() else 0.0,
                l1_grid_error=float(trapezoid(error, xs)),
                sup_error_grid=float(np.max(error)),
                modular_error=modular_values,
                luxemburg_error=float(lux),
                certified=evaluation.all_certified and modular_ok,
                csv_file=path))
            self.logger.info("w=%g: sup(cont)=%.3e l1=%.3e luxemburg=%.3e certified=%s", w,
                             rows[-1].sup_error_continuity, rows[-1].l1_grid_error, lux,
                             rows[-1].certified)

        chi_report, l_report = self._sweep_assumptions(spec, signal, phi, sweep.w_list, (lo, hi))
        report = ApproximationReport(sweep=sweep, operator=spec.describe(), rows=rows,
                                     modular_tags=table.tags, chi_report=chi_report,
                                     l_report=l_report, files=files)
        summary = self.generate_summary_report(report)
        summary_path = out_dir / f"summary_{sweep.operator.lower()}_{_safe_name(signal.name)}.json"
        with open(summary_path, 'w', encoding='utf-8') as f:
            json.dump(summary, f, indent=2, ensure_ascii=False)
        report.summary_file = str(summary_path)
        self.reports.append(report)
        self.logger.info("Sweep finished: %d rows, summary in %s", len(rows), summary_path)
        return report

    def _sweep_assumptions(self, spec: OperatorSpec, signal: PiecewiseSignal, phi,
                           w_list: Sequence[float], window: Tuple[float, float]):
        """Kernel and sample-functional reports over the sweep window; failures are logged."""
        chi_report = None
        try:
            if spec.op_id in DISCRETE:
                chi_report = check_chi_assumptions(spec.kernel, spec.grid, w_list,
                                                   seed=self.config.seed,
                                                   sum_tail_tol=self.config.sum_tail_tol)
            l_report = check_L_assumptions(spec, signal, phi, w_list, window=window)
        except (ValueError, ArithmeticError) as e:
            self.logger.warning("Assumption checks for %s failed: %s", spec.describe(), e)
            return chi_report, None
        self.logger.info("%s on %s: %s", spec.describe(), signal.name, l_report.flag)
        return chi_report, l_report

    def generate_summary_report(self, report: ApproximationReport) -> Dict[str, Any]:
        """Generate a summary report of a sweep"""
        rows = [asdict(r) for r in report.rows]
        for row in rows:
            row['modular_error'] = {str(k): v for k, v in row['modular_error'].items()}
        summary = {
            'operator': report.operator,
            'signal': report.sweep.signal,
            'phi': report.sweep.phi,
            'sweep': asdict(report.sweep),
            'rows': rows,
            'certified_rows': sum(1 for r in report.rows if r.certified),
            'total_rows': len(report.rows),
            'l1_strictly_decreasing': report.l1_strictly_decreasing,
            'sup_nonincreasing': report.sup_nonincreasing,
            'modular_rows': {str(k): v for k, v in report.modular_tags.items()},
            'files': report.files,
        }
        if report.l_report is not None:
            summary['convergence_class'] = report.l_report.convergence_class
            summary['convergence_flag'] = report.l_report.flag
        if report.chi_report is not None:
            summary['kernel_report'] = report.chi_report.to_dict()
        return summary

    def reproduce_figure(self, fig_id: str, out_dir: str) -> List[str]:
        """Emit the curve CSVs of one reference figure."""
        out = Path(out_dir)
        if fig_id == 'fig1':
            xs = np.round(np.linspace(-5.0, 5.0, 10001), 12)
            curves = [('M3', 'bspline:3', bspline(3, xs)), ('M4', 'bspline:4', bspline(4, xs)),
                      ('M', 'combined-m', combined_m(xs))]
            files = []
            for stem, kernel, values in curves:
                path = out / f"{stem}.csv"
                self.write_curve_csv(path, {'operator': 'none', 'kernel': kernel, 'w': 1},
                                     {'x': xs, 'value': values})
                files.append(str(path))
            self.logger.info("Figure fig1 written: %s", files)
            return files

        sweeps = {
            'fig2': SweepConfig(operator='t2', kernel='combined-m', signal='fig2',
                                w_list=[5, 10, 15, 20, 40], eval_grid=(-6.0, 3.0, 1e-3)),
            'fig3': SweepConfig(operator='t3', kernel='combined-m', psi='fejer', signal='fig3',
                                w_list=[5, 10, 20], eval_grid=(-3.0, 4.0, 1e-3)),
            'fig4': SweepConfig(operator='t7', kernel='mellin', signal='fig4',
                                w_list=[5, 20, 30], eval_grid=(0.2, 8.0, 1e-3)),
        }
        if fig_id not in sweeps:
            raise ValueError(f"Unknown figure '{fig_id}'. Use fig1, fig2, fig3 or fig4")
        sweep = sweeps[fig_id]
        sweep.output_path = str(out)
        sweep.breakpoint_exclusion_radius = self.config.exclusion_radius
        report = self.run_sweep(sweep)
        self.logger.info("Figure %s written: %s", fig_id, report.files)
        return report.files

    def uniform_convergence_check(self, spec: OperatorSpec, signal: PiecewiseSignal,
                                  w_list: Sequence[float], window: Tuple[float, float] = (-5.0, 5.0),
                                  step: float = 1e-3) -> Dict[str, Any]:
        """Sup-grid error over the window per w, for a continuous signal."""
        lo, hi = window
        xs = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
        fx = signal(xs)
        rows = []
        for w in w_list:
            evaluation = evaluate_on_grid(spec, w, signal, xs)
            rows.append({'w': float(w), 'sup_error': float(np.max(np.abs(evaluation.values - fx))),
                         'certified': evaluation.all_certified})
        errors = [r['sup_error'] for r in rows]
        result = {'rows': rows,
                  'nonincreasing': all(b <= a for a, b in zip(errors, errors[1:]))}
        self.logger.info("Uniform convergence %s on %s: %s", spec.describe(), signal.name, errors)
        return result

    def check_assumptions(self, operator: str, kernel: str, signal: str, phi: str,
                          w_list: Sequence[float], grid: str = 'regular', psi: Optional[str] = None,
                          out_dir: Optional[str] = None, epsilon: float = 1e-3,
                          probe_count: int = 200) -> 'AssumptionSummary':
        """Run the kernel and sample-functional checks and build the pass/warn matrix."""
        spec = build_operator(operator, kernel=kernel, grid=grid, psi=psi,
                              kernel_tail_tol=self.config.kernel_tail_tol,
                              quadrature=self.config.quadrature)
        f = parse_signal(signal)
        phi_function = parse_phi(phi)
        w_values = [float(w) for w in w_list]
        rows: List[Dict[str, Any]] = []

        def add(check: str, w, value, ok: Optional[bool], note: str = ''):
            status = 'n/a' if ok is None else ('pass' if ok else 'warn')
            rows.append({'check': check, 'w': '' if w is None else f"{w:g}",
                         'value': value, 'status': status, 'note': note})

        chi_report = None
        if spec.op_id in DISCRETE:
            chi_report = check_chi_assumptions(spec.kernel, spec.grid, w_values,
                                               probe_count=probe_count, seed=self.config.seed,
                                               epsilon=epsilon,
                                               sum_tail_tol=self.config.sum_tail_tol)
            add('partition defect', None, chi_report.chi2_partition_defect,
                chi_report.chi2_partition_defect <= 1e-6)
            add('moment M', None, chi_report.chi3_moment_M, math.isfinite(chi_report.chi3_moment_M))
            for w, tail in chi_report.chi4_tail_profile:
                add('kernel tail mass', w, tail, chi_report.chi4_monotone)
            add('compact set C', None, str(chi_report.chi5_compact_set), chi_report.chi5_verified)
            add('L1 bound Gamma', None, chi_report.gamma_l1_bound, chi_report.valid)
        elif spec.op_id in MELLIN:
            for w in w_values:
                kernel = mellin_kernel(w)
                for x in MELLIN_MASS_POINTS:
                    mass = kernel.mass_at(x, self.config.quadrature)
                    add('Mellin normalization', w, mass, abs(mass - 1.0) <= 1e-8, f"x={x:g}")
        else:
            defect = abs(spec.kernel.integral - 1.0)
            add('kernel mass defect', None, defect, defect <= 1e-6 + spec.kernel.truncation_mass)

        if spec.op_id not in MELLIN:
            for w in w_values:
                scaled = w * scaled_l1_norm(spec.kernel, w, self.config.quadrature)
                add('w * ||chi(w.)||_1', w, scaled, abs(scaled - spec.kernel.l1_norm) <= 1e-6 * spec.kernel.l1_norm)

        window = DEFAULT_WINDOWS.get(signal, (-5.0, 5.0))
        l_report = check_L_assumptions(spec, f, phi_function, w_values, epsilon=epsilon,
                                       window=window)
        add('sample bound Upsilon', None, l_report.upsilon_empirical, l_report.upsilon_holds,
            f"declared {l_report.upsilon_bound:g}")
        for w, value in l_report.continuity_sup_by_w.items():
            add('sample continuity', w, value, None, f"radius {l_report.continuity_radius:g}")
        for w, value in l_report.tail_by_w.items():
            add('sample tail', w, value, value == 0.0)
        for w, m in l_report.tail_window_by_w.items():
            beyond = l_report.tail_beyond_window_by_w.get(w, math.nan)
            add('tail window', w, m, beyond < epsilon, f"tail beyond window {beyond:.3e}")
        if l_report.nonlocal_witness is not None:
            wn, k, value = l_report.nonlocal_witness
            add('non-local sample', wn, value, None, f"k={k}")
        for row in l_report.inequality_rows:
            add('modular inequality r_w', row['w'], row['r_w'], row['holds'],
                f"bound {row['bound']:.6g}")
        add('convergence class', None, l_report.convergence_class,
            l_report.convergence_class == 'norm', l_report.flag)
        for message in l_report.errors:
            add('error', None, message, False)

        table = pd.DataFrame(rows, columns=['check', 'w', 'value', 'status', 'note'])
        csv_path = ''
        if out_dir:
            path = Path(out_dir) / f"assumptions_{spec.op_id.lower()}_{_safe_name(signal)}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            table.to_csv(path, index=False)
            csv_path = str(path)
            self.logger.info("Assumption report written to %s", path)
        for row in rows:
            self.logger.info("Assumption %s [w=%s]: %s (%s)", row['check'], row['w'] or '-',
                             row['value'], row['status'])
        return AssumptionSummary(chi_report=chi_report, l_report=l_report, table=table,
                                 csv_path=csv_path)


@dataclass
class AssumptionSummary:
    chi_report: Optional[AssumptionReport]
    l_report: LAssumptionReport
    table: pd.DataFrame
    csv_path: str = ''

    @property
    def warnings(self) -> int:
        return int((self.table['status'] == 'warn').sum())


def run_sweep(sweep: SweepConfig, config: Optional[Config] = None) -> ApproximationReport:
    return SweepRunner(config).run_sweep(sweep)


def reproduce_figure(fig_id: str, out_dir: str, config: Optional[Config] = None) -> List[str]:
    return SweepRunner(config).reproduce_figure(fig_id, out_dir)


def check_assumptions_cmd(operator: str, kernel: str, signal: str, phi: str, w_list: Sequence[float],
                          config: Optional[Config] = None, **options) -> AssumptionSummary:
    summary = SweepRunner(config).check_assumptions(operator, kernel, signal, phi, w_list, **options)
    print(summary.table.to_string(index=False))
    return summary
