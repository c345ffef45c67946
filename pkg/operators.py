#!/usr/bin/env python3
"""
Sampling and Convolution Operators
==================================

Operators of the form

    T_w f(x) = sum or integral over t of  chi_w(x - h_w(t)) * L_t f

in three settings:

    T1  generalized sampling series      sum_k chi(w x - t_k) f(t_k / w)
    T2  Kantorovich sampling series      samples are averages over [t_k/w, t_{k+1}/w]
    T3  Durrmeyer sampling series        samples are w * int psi(w u - t_k) f(u) du
    T4  convolution on R                 int w chi(w (x - t)) f(t) dt
    T5  Kantorovich convolution on R     f(t) replaced by its average over [t - 1/w, t + 1/w]
    T6  Mellin convolution on R+         int M_w(x / t) f(t) dt / t
    T7  Mellin Kantorovich convolution   f(t) replaced by a log-window average

T1-T3 use chi_w(x) = chi(w x); T4/T5 use the mass-preserving w chi(w x);
T6/T7 use the Mellin kernel M_w(u) = w u^w on (0, 1).  Time-jitter variants
of T1-T3 displace the sample location by j_k(w).

Every evaluation is vectorized over the x grid: the samples L_k f are
computed once per w and the series is summed over the kernel's index window.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from kernels import Kernel, MELLIN_CUTOFF, get_kernel, mellin_kernel
from orlicz import PhiFunction, modular, phi_spec
from quadrature import (DEFAULT_QUADRATURE, IntegrandEvaluationError, IntegrationDomain,
                        QuadratureConfig, integrate_batch)
from signals import SignalDomainError

logger = logging.getLogger(__name__)

OPERATOR_IDS = ('T1', 'T2', 'T3', 'T4', 'T5', 'T6', 'T7')
FUNCTIONAL_OF = {
    'T1': 'point', 'T2': 'average', 'T3': 'durrmeyer',
    'T4': 'point', 'T5': 'average',
    'T6': 'mellin_point', 'T7': 'mellin_average',
}
DISCRETE = ('T1', 'T2', 'T3')
CONTINUOUS = ('T4', 'T5')
MELLIN = ('T6', 'T7')

_SERIES_CHUNK = 4_000_000
# discarded full-line kernel tail, relative to ||f||_inf, for a certified value
TRUNCATION_REL_TOL = 1e-8


class SampleEvaluationError(ValueError):
    """A sample functional produced no finite value."""

    def __init__(self, kind: str, k_or_t, w: float, reason: str = ''):
        self.kind = kind
        self.k_or_t = k_or_t
        self.w = w
        message = f"{kind} sample at {k_or_t!r} (w={w:g}) is not finite"
        super().__init__(f"{message}: {reason}" if reason else message)


# irregular node sequences: t(k), delta, Delta
NAMED_GRIDS: Dict[str, Tuple[Callable[[np.ndarray], np.ndarray], float, float]] = {
    'sine': (lambda k: k + 0.25 * np.sin(k), 0.7, 1.3),
    'alternating': (lambda k: k + np.where(np.asarray(k) % 2 == 0, 0.2, -0.2), 0.5, 1.5),
}

_JITTER_FREQUENCY = (1.0 + math.sqrt(5.0)) * math.pi


@dataclass(frozen=True)
class SamplingGrid:
    """Node sequence t_k with gap bounds delta < t_{k+1} - t_k < Delta.

    A jittered grid keeps its base nodes for the kernel and displaces only the
    sampling location, by j_k(w) = eta * s_k / w with a fixed sequence s_k in [-1, 1].
    """
    kind: str
    delta: float = 0.5
    Delta: float = 1.5
    name: str = 'regular'
    node_func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    base: Optional['SamplingGrid'] = None
    eta: float = 0.0

    def __post_init__(self):
        if self.kind not in ('regular', 'irregular', 'jittered'):
            raise ValueError(f"Unknown grid kind '{self.kind}'")
        if self.kind == 'irregular' and self.node_func is None:
            raise ValueError("irregular grid needs a node function")
        if self.kind == 'jittered':
            if self.base is None:
                raise ValueError("jittered grid needs a base grid")
            if self.eta < 0:
                raise ValueError(f"jitter amplitude must be >= 0, got {self.eta}")
        if not 0 < self.delta < self.Delta:
            raise ValueError(f"Gap bounds need 0 < delta < Delta, got {self.delta}, {self.Delta}")
        self.validate()

    @classmethod
    def regular(cls) -> 'SamplingGrid':
        return cls('regular')

    @classmethod
    def irregular(cls, name: str) -> 'SamplingGrid':
        if name not in NAMED_GRIDS:
            raise ValueError(f"Unknown irregular grid '{name}'. Known: {', '.join(NAMED_GRIDS)}")
        func, delta, Delta = NAMED_GRIDS[name]
        return cls('irregular', delta, Delta, f"irregular:{name}", node_func=func)

    @classmethod
    def jittered(cls, base: 'SamplingGrid', eta: float) -> 'SamplingGrid':
        return cls('jittered', base.delta, base.Delta, f"jitter:{eta:g}", base=base, eta=float(eta))

    def nodes(self, k) -> np.ndarray:
        ks = np.asarray(k)
        if self.kind == 'regular':
            return ks.astype(float)
        if self.kind == 'irregular':
            return np.asarray(self.node_func(ks.astype(float)), dtype=float)
        return self.base.nodes(ks)

    def gaps(self, k) -> np.ndarray:
        ks = np.asarray(k)
        return self.nodes(ks + 1) - self.nodes(ks)

    def jitter(self, k, w: float) -> np.ndarray:
        ks = np.asarray(k, dtype=float)
        if self.kind != 'jittered' or self.eta == 0.0:
            return np.zeros_like(ks)
        return self.eta * np.sin(ks * _JITTER_FREQUENCY) / w

    def index_bounds(self, t_min: float, t_max: float) -> Tuple[int, int]:
        """Index range containing every k with t_min <= t_k <= t_max."""
        if self.kind == 'regular' or (self.kind == 'jittered' and self.base.kind == 'regular'):
            return int(math.floor(t_min)), int(math.ceil(t_max))
        t0 = float(self.nodes(0))
        lo = min((t_min - t0) / self.delta, (t_min - t0) / self.Delta)
        hi = max((t_max - t0) / self.delta, (t_max - t0) / self.Delta)
        return int(math.floor(lo)) - 1, int(math.ceil(hi)) + 1

    def validate(self, k_radius: int = 2000, w_probe: Sequence[float] = (1, 5, 10, 20, 40)):
        ks = np.arange(-k_radius, k_radius)
        gaps = self.gaps(ks)
        if np.any(gaps <= 0):
            raise ValueError(f"Grid {self.name} is not strictly increasing")
        if np.any(gaps <= self.delta) or np.any(gaps >= self.Delta):
            raise ValueError(f"Grid {self.name} violates delta < gap < Delta "
                             f"(gaps in [{gaps.min():g}, {gaps.max():g}])")
        if self.kind == 'jittered':
            sups = [float(np.max(np.abs(self.jitter(ks, w)))) for w in w_probe]
            if any(b > a for a, b in zip(sups, sups[1:])):
                raise ValueError(f"Jitter of grid {self.name} does not decay in w")


def parse_grid(spec: str) -> SamplingGrid:
    """"regular", "irregular:<name>" or "jitter:<eta>" (on the regular grid)."""
    head, _, rest = spec.strip().partition(':')
    if head == 'regular' and not rest:
        return SamplingGrid.regular()
    if head == 'irregular' and rest:
        return SamplingGrid.irregular(rest)
    if head == 'jitter' and rest:
        return SamplingGrid.jittered(SamplingGrid.regular(), float(rest))
    raise ValueError(f"Unknown grid spec '{spec}'. Use regular, irregular:<name> or jitter:<eta>")


@dataclass(frozen=True)
class SampleFunctional:
    kind: str
    psi: Optional[Kernel] = None
    approximate_prefactor: bool = False

    def __post_init__(self):
        kinds = ('point', 'average', 'durrmeyer', 'mellin_point', 'mellin_average')
        if self.kind not in kinds:
            raise ValueError(f"Unknown sample functional '{self.kind}'")
        if self.kind == 'durrmeyer':
            if self.psi is None:
                raise ValueError("Durrmeyer samples need a kernel psi")
            if abs(self.psi.integral - 1.0) > 1e-6 + self.psi.truncation_mass:
                raise ValueError(f"Durrmeyer kernel {self.psi.name} must integrate to 1, "
                                 f"got {self.psi.integral!r}")
        elif self.psi is not None:
            raise ValueError(f"Sample functional '{self.kind}' takes no psi")

    @property
    def upsilon_bound(self) -> float:
        return self.psi.l1_norm if self.kind == 'durrmeyer' else 1.0


@dataclass(frozen=True)
class OperatorSpec:
    op_id: str
    functional: SampleFunctional
    kernel: Optional[Kernel] = None
    grid: Optional[SamplingGrid] = None
    kernel_tail_tol: float = 1e-4
    quadrature: QuadratureConfig = DEFAULT_QUADRATURE
    mellin_cutoff: float = MELLIN_CUTOFF

    def __post_init__(self):
        if self.op_id not in OPERATOR_IDS:
            raise ValueError(f"Unknown operator '{self.op_id}'")
        if FUNCTIONAL_OF[self.op_id] != self.functional.kind:
            raise ValueError(f"{self.op_id} requires '{FUNCTIONAL_OF[self.op_id]}' samples, "
                             f"got '{self.functional.kind}'")
        if self.op_id in MELLIN:
            if self.kernel is not None:
                raise ValueError(f"{self.op_id} uses the Mellin kernel family, not {self.kernel.name}")
        elif self.kernel is None:
            raise ValueError(f"{self.op_id} needs a kernel")
        if self.op_id in DISCRETE and self.grid is None:
            raise ValueError(f"{self.op_id} needs a sampling grid")
        if not self.kernel_tail_tol > 0:
            raise ValueError("kernel_tail_tol must be positive")

    @property
    def kernel_name(self) -> str:
        return 'mellin' if self.op_id in MELLIN else self.kernel.name

    def describe(self) -> str:
        parts = [self.op_id.lower(), self.kernel_name]
        if self.functional.psi is not None:
            parts.append(f"psi={self.functional.psi.name}")
        if self.grid is not None and self.grid.kind != 'regular':
            parts.append(self.grid.name)
        return '/'.join(parts)


def build_operator(op_id: str, kernel: str = 'combined-m', grid: str = 'regular',
                   psi: Optional[str] = None, kernel_tail_tol: float = 1e-4,
                   quadrature: Optional[QuadratureConfig] = None,
                   approximate_prefactor: bool = False) -> OperatorSpec:
    """Build an OperatorSpec from CLI-style names ("t2", "combined-m", "regular", "fejer")."""
    key = op_id.strip().upper()
    if key not in OPERATOR_IDS:
        raise ValueError(f"Unknown operator '{op_id}'. Use t1..t7")
    kind = FUNCTIONAL_OF[key]
    if key == 'T3':
        functional = SampleFunctional(kind, psi=get_kernel(psi or 'fejer'))
    else:
        if psi:
            raise ValueError(f"--psi only applies to t3, not {op_id}")
        functional = SampleFunctional(kind, approximate_prefactor=approximate_prefactor and key == 'T7')
    if key in MELLIN:
        if kernel not in (None, 'mellin'):
            raise ValueError(f"{op_id} uses the Mellin kernel; got --kernel {kernel}")
        chi = None
    else:
        chi = get_kernel(kernel)
    return OperatorSpec(key, functional, kernel=chi,
                        grid=parse_grid(grid) if key in DISCRETE else None,
                        kernel_tail_tol=kernel_tail_tol,
                        quadrature=quadrature or DEFAULT_QUADRATURE)


@dataclass(frozen=True)
class OperatorValue:
    value: float
    certified: bool

    def __float__(self) -> float:
        return self.value


@dataclass
class OperatorEvaluation:
    w: float
    xs: np.ndarray
    values: np.ndarray
    certified: np.ndarray

    @property
    def all_certified(self) -> bool:
        return bool(np.all(self.certified))


def _breakpoints(f) -> np.ndarray:
    return np.asarray(getattr(f, 'breakpoints', ()), dtype=float)


def _amplitude(f) -> float:
    sup = getattr(f, 'sup_norm', None)
    if sup is not None and math.isfinite(sup):
        return float(sup)
    probe = np.linspace(-100.0, 100.0, 20001)
    try:
        return float(np.max(np.abs(f(probe))))
    except (ValueError, ArithmeticError):
        return 1.0


def _truncation_certified(kernel: Kernel, a: float, b: float, f, lows, highs,
                          amplitude: float, scale: float = 1.0) -> np.ndarray:
    """True where the kernel mass dropped outside [a, b], weighted by sup |f| over
    the discarded region, stays within TRUNCATION_REL_TOL * amplitude."""
    lows = np.atleast_1d(np.asarray(lows, dtype=float))
    if kernel.is_compact or amplitude == 0.0:
        return np.ones(lows.shape, dtype=bool)
    highs = np.broadcast_to(np.asarray(highs, dtype=float), lows.shape)
    tail = getattr(f, 'sup_outside', None)
    if tail is None:
        sups = np.full(lows.shape, amplitude)
    else:
        sups = np.array([tail(lo, hi) for lo, hi in zip(lows, highs)])
    return kernel.outside_mass(a, b) * scale * sups <= TRUNCATION_REL_TOL * amplitude


def _wrap_sample_error(kind: str, w: float, error: Exception, where=None) -> SampleEvaluationError:
    location = where if where is not None else getattr(error, 'abscissa', None)
    return SampleEvaluationError(kind, location, w, str(error))


def _discrete_samples(spec: OperatorSpec, w: float, f, ks: np.ndarray,
                      jitter: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Samples L_k f for every index in ``ks``; returns (values, certified)."""
    grid = spec.grid
    kind = spec.functional.kind
    t = grid.nodes(ks)
    shift = grid.jitter(ks, w) if jitter else np.zeros(ks.shape)
    bps = _breakpoints(f)
    certified = np.ones(ks.shape, dtype=bool)
    try:
        if kind == 'point':
            values = np.asarray(f(t / w + shift), dtype=float)
        elif kind == 'average':
            gaps = grid.gaps(ks)
            lows = t / w + shift
            result = integrate_batch(f, lows, (t + gaps) / w + shift, spec.quadrature,
                                     breakpoints=bps)
            values, certified = result.values * w / gaps, result.certified
        else:
            psi = spec.functional.psi
            amplitude = _amplitude(f)
            a, b = psi.window(spec.kernel_tail_tol, amplitude)
            centers = t + w * shift
            lows, highs = (centers + a) / w, (centers + b) / w

            def weighted(u, idx):
                return psi(w * u - centers[idx]) * f(u)

            result = integrate_batch(weighted, lows, highs, spec.quadrature, breakpoints=bps,
                                     min_panels=psi.panel_count(a, b), with_owner=True)
            values = w * result.values
            certified = result.certified & _truncation_certified(psi, a, b, f, lows, highs,
                                                                 amplitude)
    except (IntegrandEvaluationError, SignalDomainError) as e:
        raise _wrap_sample_error(kind, w, e)
    values = np.broadcast_to(values, ks.shape).astype(float)
    bad = ~np.isfinite(values)
    if bad.any():
        raise SampleEvaluationError(kind, int(ks[bad][0]), w)
    return values, certified


def _local_average(f, t: np.ndarray, half: float, config: QuadratureConfig,
                   bps: np.ndarray, status: List[bool]) -> np.ndarray:
    result = integrate_batch(f, t - half, t + half, config, breakpoints=bps)
    if not result.all_certified:
        status[0] = False
    return result.values / (2.0 * half)


def _mellin_prefactor(spec: OperatorSpec, w: float) -> Tuple[float, float]:
    half = math.log1p(1.0 / w)
    if spec.functional.approximate_prefactor:
        return half, w / 2.0
    return half, 1.0 / (2.0 * half)


def _log_average(f, v: np.ndarray, spec: OperatorSpec, w: float, log_bps: np.ndarray,
                 status: List[bool]) -> np.ndarray:
    half, prefactor = _mellin_prefactor(spec, w)
    result = integrate_batch(lambda s: f(np.exp(s)), v - half, v + half, spec.quadrature,
                             breakpoints=log_bps)
    if not result.all_certified:
        status[0] = False
    return prefactor * result.values


def _continuous_samples(spec: OperatorSpec, w: float, f, ts: np.ndarray) -> Tuple[np.ndarray, bool]:
    """L_t f at points t for T4-T7."""
    status = [True]
    bps = _breakpoints(f)
    kind = spec.functional.kind
    try:
        if kind in ('point', 'mellin_point'):
            if kind == 'mellin_point' and np.any(ts <= 0):
                raise SampleEvaluationError(kind, float(ts[ts <= 0][0]), w, "t must be > 0")
            values = np.broadcast_to(np.asarray(f(ts), dtype=float), ts.shape)
        elif kind == 'average':
            values = _local_average(f, ts, 1.0 / w, spec.quadrature, bps, status)
        else:
            if np.any(ts <= 0):
                raise SampleEvaluationError(kind, float(ts[ts <= 0][0]), w, "t must be > 0")
            values = _log_average(f, np.log(ts), spec, w, np.log(bps[bps > 0]), status)
    except (IntegrandEvaluationError, SignalDomainError) as e:
        raise _wrap_sample_error(kind, w, e)
    bad = ~np.isfinite(values)
    if bad.any():
        raise SampleEvaluationError(kind, float(ts[bad][0]), w)
    return np.asarray(values, dtype=float), status[0]


def sample_functional_eval(spec: OperatorSpec, w: float, k_or_t, f) -> float:
    """One sample L f: index k for T1-T3, point t for T4-T7."""
    if not w > 0:
        raise ValueError(f"w must be positive, got {w}")
    if spec.op_id in DISCRETE:
        values, _ = _discrete_samples(spec, w, f, np.array([int(k_or_t)]), jitter=False)
    else:
        values, _ = _continuous_samples(spec, w, f, np.array([float(k_or_t)]))
    return float(values[0])


def _series(spec: OperatorSpec, w: float, f, xs: np.ndarray, jitter: bool) -> OperatorEvaluation:
    chi, grid = spec.kernel, spec.grid
    amplitude = _amplitude(f) * spec.functional.upsilon_bound
    a, b = chi.window(spec.kernel_tail_tol * grid.delta, amplitude)
    u = w * xs
    k_lo, k_hi = grid.index_bounds(float(u.min()) - b, float(u.max()) - a)
    ks = np.arange(k_lo, k_hi + 1)
    samples, sample_ok = _discrete_samples(spec, w, f, ks, jitter)
    t = grid.nodes(ks)
    logger.debug("%s w=%g: %d samples over k in [%d, %d]", spec.op_id, w, ks.size, k_lo, k_hi)

    values = np.empty(xs.size)
    certified = np.ones(xs.size, dtype=bool)
    step = max(1, _SERIES_CHUNK // max(ks.size, 1))
    for start in range(0, xs.size, step):
        sl = slice(start, start + step)
        offsets = u[sl, None] - t[None, :]
        weights = np.where((offsets >= a) & (offsets <= b), chi(offsets), 0.0)
        values[sl] = weights @ samples
        if not sample_ok.all():
            certified[sl] = ~np.any(weights[:, ~sample_ok] != 0.0, axis=1)
    if not chi.is_compact:
        # dropped nodes sit outside [x - b/w, x - a/w]; their samples read f at most
        # Delta/w (plus the jitter) further in, and Durrmeyer samples read f anywhere
        moved = (grid.eta if jitter else 0.0) / w
        tail_f = f if spec.functional.kind != 'durrmeyer' else None
        certified &= _truncation_certified(chi, a, b, tail_f, xs - b / w + grid.Delta / w + moved,
                                           xs - a / w - moved, amplitude,
                                           scale=1.0 / grid.delta + 1.0 / b)
    return OperatorEvaluation(w, xs, values, certified)


def _convolution(spec: OperatorSpec, w: float, f, xs: np.ndarray) -> OperatorEvaluation:
    chi = spec.kernel
    amplitude = _amplitude(f)
    a, b = chi.window(spec.kernel_tail_tol, amplitude)
    bps = _breakpoints(f)
    status = [True]
    half = 0.0
    if spec.op_id == 'T4':
        inner = f
        outer_bps = bps
    else:
        half = 1.0 / w
        inner = lambda t: _local_average(f, t, half, spec.quadrature, bps, status)
        outer_bps = np.concatenate([bps - half, bps + half])

    def integrand(t, idx):
        return w * chi(w * (xs[idx] - t)) * inner(t)

    result = integrate_batch(integrand, xs - b / w, xs - a / w, spec.quadrature,
                             breakpoints=outer_bps, min_panels=chi.panel_count(a, b),
                             with_owner=True)
    certified = result.certified & status[0]
    if not chi.is_compact:
        certified &= _truncation_certified(chi, a, b, f, xs - b / w + half, xs - a / w - half,
                                           amplitude)
    return OperatorEvaluation(w, xs, result.values, certified)


def _mellin(spec: OperatorSpec, w: float, f, xs: np.ndarray) -> OperatorEvaluation:
    if np.any(xs <= 0):
        raise ValueError(f"{spec.op_id} is defined for x > 0")
    kernel = mellin_kernel(w)
    log_x = np.log(xs)
    _, length = kernel.log_support(1.0, spec.mellin_cutoff)
    bps = _breakpoints(f)
    log_bps = np.log(bps[bps > 0])
    status = [True]
    if spec.op_id == 'T6':
        inner = lambda v: f(np.exp(v))
        outer_bps = log_bps
    else:
        half, _ = _mellin_prefactor(spec, w)
        inner = lambda v: _log_average(f, v, spec, w, log_bps, status)
        outer_bps = np.concatenate([log_bps - half, log_bps + half])

    def integrand(v, idx):
        return w * np.exp(-w * (v - log_x[idx])) * inner(v)

    result = integrate_batch(integrand, log_x, log_x + length, spec.quadrature,
                             breakpoints=outer_bps,
                             min_panels=max(8, int(math.ceil(w * length / 4.0))),
                             with_owner=True)
    return OperatorEvaluation(w, xs, result.values, result.certified & status[0])


def evaluate_on_grid(spec: OperatorSpec, w: float, f, xs, jitter: bool = False) -> OperatorEvaluation:
    """T_w f on every point of ``xs``."""
    if not w > 0:
        raise ValueError(f"w must be positive, got {w}")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if jitter and spec.op_id not in DISCRETE:
        raise ValueError(f"Time-jitter applies to T1-T3, not {spec.op_id}")
    try:
        if spec.op_id in DISCRETE:
            evaluation = _series(spec, w, f, xs, jitter)
        elif spec.op_id in CONTINUOUS:
            evaluation = _convolution(spec, w, f, xs)
        else:
            evaluation = _mellin(spec, w, f, xs)
    except (IntegrandEvaluationError, SignalDomainError) as e:
        raise _wrap_sample_error(spec.functional.kind, w, e)
    if not evaluation.all_certified:
        logger.warning("%s w=%g: %d of %d points not certified", spec.op_id, w,
                       int((~evaluation.certified).sum()), xs.size)
    return evaluation


def apply_operator(spec: OperatorSpec, w: float, f, x: float) -> OperatorValue:
    evaluation = evaluate_on_grid(spec, w, f, [x])
    return OperatorValue(float(evaluation.values[0]), bool(evaluation.certified[0]))


def jittered_operator(spec: OperatorSpec, w: float, f, x) -> OperatorValue:
    """T1-T3 with samples taken at t_k/w + j_k(w) on a jittered grid."""
    if spec.op_id not in DISCRETE:
        raise ValueError(f"Time-jitter applies to T1-T3, not {spec.op_id}")
    if spec.grid.kind != 'jittered':
        raise ValueError(f"{spec.op_id} needs a jittered grid, got {spec.grid.name}")
    evaluation = evaluate_on_grid(spec, w, f, [x], jitter=True)
    return OperatorValue(float(evaluation.values[0]), bool(evaluation.certified[0]))


def jitter_sensitivity(spec_point: OperatorSpec, spec_average: OperatorSpec, w: float, f,
                       xs) -> Dict[str, float]:
    """sup |jittered - clean| for a point-sample and an average-sample series."""
    out = {}
    for spec in (spec_point, spec_average):
        if spec.grid is None or spec.grid.kind != 'jittered':
            raise ValueError(f"{spec.op_id} needs a jittered grid")
        clean = evaluate_on_grid(spec, w, f, xs).values
        moved = evaluate_on_grid(spec, w, f, xs, jitter=True).values
        out[spec.op_id] = float(np.max(np.abs(moved - clean)))
    logger.info("Jitter sensitivity at w=%g: %s", w, out)
    return out


def boundedness_constant(spec: OperatorSpec, moment: Optional[float] = None) -> float:
    """M * Upsilon, so that |T_w f| <= M * Upsilon * ||f||_inf.

    For T1-T3 ``moment`` is the sup of sum_k |chi(w z - t_k)| from the kernel
    report; for T4/T5 it is ||chi||_1 and for T6/T7 it is 1.
    """
    if spec.op_id in DISCRETE:
        if moment is None:
            raise ValueError("T1-T3 need the kernel moment M")
        m = moment
    elif spec.op_id in CONTINUOUS:
        m = spec.kernel.l1_norm
    else:
        m = 1.0
    return m * spec.functional.upsilon_bound


@dataclass
class LAssumptionReport:
    operator: str
    w_list: List[float]
    upsilon_empirical: float = math.nan
    upsilon_bound: float = math.nan
    upsilon_holds: bool = False
    continuity_radius: float = math.nan
    continuity_sup_by_w: Dict[float, float] = field(default_factory=dict)
    tail_set: Optional[Tuple[float, float]] = None
    tail_by_w: Dict[float, float] = field(default_factory=dict)
    tail_exact_zero: bool = False
    tail_window_by_w: Dict[float, int] = field(default_factory=dict)
    tail_beyond_window_by_w: Dict[float, float] = field(default_factory=dict)
    nonlocal_witness: Optional[Tuple[float, int, float]] = None
    convergence_class: str = 'not-applicable'
    inequality_rows: List[dict] = field(default_factory=list)
    surrogate_note: str = ''
    errors: List[str] = field(default_factory=list)

    @property
    def flag(self) -> str:
        if self.convergence_class == 'modular-only':
            return "modular-only convergence (norm convergence not applicable)"
        if self.convergence_class == 'norm':
            return "norm and modular convergence"
        return "tail check not applicable"

    def to_dict(self) -> dict:
        return {
            'operator': self.operator,
            'w_list': self.w_list,
            'upsilon_empirical': self.upsilon_empirical,
            'upsilon_bound': self.upsilon_bound,
            'upsilon_holds': self.upsilon_holds,
            'continuity_radius': self.continuity_radius,
            'continuity_sup_by_w': {str(k): v for k, v in self.continuity_sup_by_w.items()},
            'tail_set': list(self.tail_set) if self.tail_set else None,
            'tail_by_w': {str(k): v for k, v in self.tail_by_w.items()},
            'tail_exact_zero': self.tail_exact_zero,
            'tail_window_by_w': {str(k): v for k, v in self.tail_window_by_w.items()},
            'tail_beyond_window_by_w': {str(k): v for k, v in
                                        self.tail_beyond_window_by_w.items()},
            'nonlocal_witness': list(self.nonlocal_witness) if self.nonlocal_witness else None,
            'convergence_class': self.convergence_class,
            'flag': self.flag,
            'inequality_rows': self.inequality_rows,
            'surrogate_note': self.surrogate_note,
            'errors': self.errors,
        }


def _continuity_radius(f, epsilon: float, window: Tuple[float, float]) -> float:
    """Largest h = 2^-j with |f(x + h) - f(x)| <= epsilon whenever x and x + h
    share a continuity interval of f inside the window."""
    lo, hi = window
    xs = np.linspace(lo, hi, 4001)
    intervals = getattr(f, 'continuity_intervals', [(-math.inf, math.inf)])
    label = np.searchsorted([b for _, b in intervals], xs, side='right')
    fx = f(xs)
    for j in range(0, 30):
        h = 2.0 ** -j
        shifted = xs + h
        same = (np.searchsorted([b for _, b in intervals], shifted, side='right') == label) \
            & (shifted <= hi)
        if not same.any():
            return h
        if np.max(np.abs(f(shifted[same]) - fx[same])) <= epsilon:
            return h
    return 2.0 ** -30


def _probe_samples(spec: OperatorSpec, w: float, f, window: Tuple[float, float],
                   count: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(positions h_w(t), samples, indices or points) over the window."""
    lo, hi = window
    if spec.op_id in DISCRETE:
        k_lo, k_hi = spec.grid.index_bounds(w * lo, w * hi)
        ks = np.arange(k_lo, k_hi + 1)
        positions = spec.grid.nodes(ks) / w
        keep = (positions >= lo) & (positions <= hi)
        ks, positions = ks[keep], positions[keep]
        values, _ = _discrete_samples(spec, w, f, ks, jitter=False)
        return positions, values, ks
    ts = np.linspace(lo, hi, count)
    values, _ = _continuous_samples(spec, w, f, ts)
    return ts, values, ts


def _tail_set(spec: OperatorSpec, support: Tuple[float, float]) -> Tuple[float, float]:
    lo, hi = support
    if spec.op_id == 'T2':
        return lo - spec.grid.Delta, hi + spec.grid.Delta
    if spec.op_id == 'T5':
        return lo - 2.0, hi + 2.0
    if spec.op_id == 'T7':
        return lo / 2.0, hi * 2.0
    return lo, hi


def check_L_assumptions(spec: OperatorSpec, f, phi: PhiFunction, w_list: Sequence[float],
                        epsilon: float = 1e-3, lam: float = 1.0, probe_count: int = 200,
                        window: Optional[Tuple[float, float]] = None,
                        span: float = 20.0) -> LAssumptionReport:
    """
    Numerical report on the sample-functional assumptions for one operator.

    Boundedness: max |L f| / ||f||_inf against the declared bound.
    Continuity: sup |L_t f - f(z)| over probe pairs closer than a continuity
    radius measured from f.
    Tail: the sum (T1-T3) or integral (T4-T7) of phi(|L f|) outside the
    support of f, enlarged per operator; exactly zero means norm convergence
    is available, a positive tail means modular convergence only.
    Inequality: r_w = ||chi_w||_1 * sum_or_int phi(lam |L f|) against
    c * I(lam beta f).

    A signal without compact support is replaced by its restriction to
    ``window``.  Failures are recorded in ``errors``; nothing is raised.
    """
    w_values = sorted(float(w) for w in w_list)
    report = LAssumptionReport(operator=spec.op_id, w_list=w_values)
    report.upsilon_bound = spec.functional.upsilon_bound

    target = f
    support = getattr(f, 'support_bound', None)
    if support is None or support[1] <= support[0]:
        if window is None:
            report.errors.append("signal has no compact support and no window was given")
            return report
        target = f.restricted(*window)
        support = target.support_bound
        report.surrogate_note = f"compact surrogate: {getattr(f, 'name', 'f')} restricted to " \
                                f"[{window[0]:g}, {window[1]:g})"
    sup_norm = _amplitude(target)
    probe_window = (support[0] - 1.0, support[1] + 1.0)
    if spec.op_id in MELLIN:
        probe_window = (max(support[0] / 2.0, 1e-6), support[1] * 2.0)

    samples_by_w = {}
    try:
        ratio = 0.0
        for w in w_values:
            positions, values, index = _probe_samples(spec, w, target, probe_window, probe_count)
            samples_by_w[w] = (positions, values)
            if sup_norm > 0 and values.size:
                ratio = max(ratio, float(np.max(np.abs(values))) / sup_norm)
        report.upsilon_empirical = ratio
        report.upsilon_holds = ratio <= report.upsilon_bound + 1e-12
    except (ValueError, ArithmeticError) as e:
        report.errors.append(f"boundedness: {e}")

    try:
        radius = _continuity_radius(target, epsilon, probe_window)
        report.continuity_radius = radius
        intervals = target.continuity_intervals
        edges = [b for _, b in intervals]
        offsets = np.linspace(-0.5, 0.5, 5) * radius
        for w, (positions, values) in samples_by_w.items():
            z = positions[:, None] + offsets[None, :]
            if spec.op_id in MELLIN:
                z = np.maximum(z, 1e-12)
            same = np.searchsorted(edges, z, side='right') == \
                np.searchsorted(edges, positions, side='right')[:, None]
            if not same.any():
                continue
            gaps = np.abs(values[:, None] - target(z))
            report.continuity_sup_by_w[w] = float(np.max(np.where(same, gaps, 0.0)))
    except (ValueError, ArithmeticError) as e:
        report.errors.append(f"continuity: {e}")

    try:
        _tail_checks(spec, target, phi, w_values, support, span, epsilon, report)
    except (ValueError, ArithmeticError) as e:
        report.errors.append(f"tail: {e}")

    try:
        report.inequality_rows = _inequality_rows(spec, target, phi, w_values, support, span, lam)
    except (ValueError, ArithmeticError) as e:
        report.errors.append(f"inequality: {e}")

    for message in report.errors:
        logger.warning("%s assumption check: %s", spec.op_id, message)
    logger.info("%s assumption check under %s: %s", spec.op_id, phi_spec(phi), report.flag)
    return report


def _tail_checks(spec: OperatorSpec, f, phi: PhiFunction, w_values: List[float],
                 support: Tuple[float, float], span: float, epsilon: float,
                 report: LAssumptionReport):
    K = _tail_set(spec, support)
    report.tail_set = K
    for w in w_values:
        if spec.op_id in DISCRETE:
            lo, hi = K[0] - span, K[1] + span
            k_lo, k_hi = spec.grid.index_bounds(w * lo, w * hi)
            ks = np.arange(k_lo, k_hi + 1)
            positions = spec.grid.nodes(ks) / w
            outside = (positions < K[0]) | (positions > K[1])
            values, _ = _discrete_samples(spec, w, f, ks[outside], jitter=False)
            contributions = phi(np.abs(values))
            report.tail_by_w[w] = float(np.sum(contributions))

            if spec.op_id == 'T3':
                strict = (positions[outside] < support[0]) | (positions[outside] > support[1])
                big = strict & (np.abs(values) > 1e-4)
                if big.any() and report.nonlocal_witness is None:
                    where = int(np.argmax(np.where(big, np.abs(values), 0.0)))
                    report.nonlocal_witness = (w, int(ks[outside][where]), float(values[where]))
                # smallest M with sum over |k| > M below epsilon
                reach = np.abs(ks[outside])
                order = np.argsort(-reach, kind='stable')
                below = np.cumsum(contributions[order]) < epsilon
                window_k = int(reach[order][np.argmin(below)]) if not below.all() else 0
                report.tail_window_by_w[w] = window_k
                report.tail_beyond_window_by_w[w] = float(np.sum(contributions[reach > window_k]))
        else:
            report.tail_by_w[w] = _continuous_tail(spec, w, f, phi, K, span)
    report.tail_exact_zero = all(v == 0.0 for v in report.tail_by_w.values())
    report.convergence_class = 'norm' if report.tail_exact_zero else 'modular-only'


def _continuous_tail(spec: OperatorSpec, w: float, f, phi: PhiFunction,
                     K: Tuple[float, float], span: float) -> float:
    status = [True]

    def density(t):
        values, ok = _continuous_samples(spec, w, f, t)
        status[0] = status[0] and ok
        return phi(np.abs(values))

    bps = _breakpoints(f)
    if spec.op_id in MELLIN:
        log_k = (math.log(K[0]), math.log(K[1]))
        g = lambda v: density(np.exp(v))
        result = integrate_batch(g, [log_k[0] - math.log1p(span), log_k[1]],
                                 [log_k[0], log_k[1] + math.log1p(span)], spec.quadrature,
                                 breakpoints=np.log(bps[bps > 0]), min_panels=8)
    else:
        extra = np.concatenate([bps - 1.0 / w, bps, bps + 1.0 / w])
        result = integrate_batch(density, [K[0] - span, K[1]], [K[0], K[1] + span],
                                 spec.quadrature, breakpoints=extra, min_panels=8)
    return float(np.sum(result.values))


def _inequality_rows(spec: OperatorSpec, f, phi: PhiFunction, w_values: List[float],
                     support: Tuple[float, float], span: float, lam: float) -> List[dict]:
    lo, hi = support[0] - span, support[1] + span
    declared_c, beta = 1.0, 1.0
    if spec.op_id == 'T3':
        beta = spec.functional.psi.l1_norm
    bps = _breakpoints(f)
    if spec.op_id in MELLIN:
        lo, hi = max(support[0] / 2.0, 1e-6), support[1] * 2.0
        domain = IntegrationDomain.log_half_line(math.log(lo), math.log(hi))
        effective_c = declared_c
    else:
        domain = IntegrationDomain.finite(lo, hi)
        if spec.op_id in DISCRETE:
            effective_c = declared_c * spec.kernel.l1_norm / spec.grid.delta
        else:
            effective_c = declared_c * spec.kernel.l1_norm
    reference = modular(lambda x: beta * f(x), phi, lam, domain, spec.quadrature,
                        breakpoints=bps).value

    rows = []
    for w in w_values:
        if spec.op_id in DISCRETE:
            k_lo, k_hi = spec.grid.index_bounds(w * lo, w * hi)
            ks = np.arange(k_lo, k_hi + 1)
            values, _ = _discrete_samples(spec, w, f, ks, jitter=False)
            lhs = spec.kernel.l1_norm / w * float(np.sum(phi(lam * np.abs(values))))
        else:
            def density(t, _w=w):
                values, _ = _continuous_samples(spec, _w, f, t)
                return phi(lam * np.abs(values))
            if spec.op_id in MELLIN:
                g = lambda v: density(np.exp(v))
                result = integrate_batch(g, [domain.a], [domain.b], spec.quadrature,
                                         breakpoints=np.log(bps[bps > 0]), min_panels=8)
                lhs = float(result.values[0])
            else:
                extra = np.concatenate([bps - 1.0 / w, bps, bps + 1.0 / w])
                result = integrate_batch(density, [lo], [hi], spec.quadrature,
                                         breakpoints=extra, min_panels=8)
                lhs = spec.kernel.l1_norm * float(result.values[0])
        rhs = effective_c * reference
        rows.append({'w': w, 'r_w': lhs, 'c': declared_c, 'beta': beta,
                     'effective_c': effective_c, 'bound': rhs,
                     'holds': lhs <= rhs * 1.05 + 1e-12})
    return rows
