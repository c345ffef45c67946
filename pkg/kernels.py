#!/usr/bin/env python3
"""
Kernel Catalog
==============

Kernels for sampling and convolution operators (sinc, Fejér, central
B-splines, the combined kernel 4*M3 - 3*M4 and the Mellin kernel family),
plus a numerical checker that probes the partition, moment, tail and
compactness assumptions a kernel must satisfy on a given sampling grid.

Kernels are addressed by name strings: "sinc", "fejer", "bspline:<n>",
"combined-m" and "mellin".
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb, factorial

from quadrature import IntegrationDomain, QuadratureConfig, integrate

logger = logging.getLogger(__name__)

FEJER_TAIL_CONSTANT = 2.0 / math.pi ** 2
DEFAULT_L1_RADIUS = 1e4
MELLIN_CUTOFF = 1e-16


class KernelDomainError(ValueError):
    """Raised for invalid kernel parameters or kernels outside L^1."""


def _like_input(value: np.ndarray, x) -> Union[float, np.ndarray]:
    return float(value) if np.ndim(x) == 0 else value


def sinc(x):
    """sin(pi x) / (pi x), with value 1 at the origin."""
    return _like_input(np.sinc(np.asarray(x, dtype=float)), x)


def fejer(x):
    """Fejér kernel F(x) = sinc(x/2)^2 / 2."""
    return _like_input(0.5 * np.sinc(np.asarray(x, dtype=float) / 2.0) ** 2, x)


def bspline(n: int, x):
    """Central B-spline of order n, supported on [-n/2, n/2].

    Evaluated from the truncated-power form with (y)_+^0 = 1 only for y > 0,
    which makes M_1 the half-open indicator of (-1/2, 1/2].
    """
    if int(n) != n or n < 1:
        raise KernelDomainError(f"B-spline order must be a positive integer, got {n}")
    n = int(n)
    xs = np.asarray(x, dtype=float)
    total = np.zeros_like(xs)
    for j in range(n + 1):
        y = n / 2.0 + xs - j
        if n == 1:
            term = (y > 0).astype(float)
        else:
            term = np.where(y > 0, y, 0.0) ** (n - 1)
        total = total + (-1) ** j * comb(n, j, exact=True) * term
    value = total / factorial(n - 1, exact=True)
    inside = (xs > -n / 2.0) & (xs <= n / 2.0)
    value = np.where(inside, np.maximum(value, 0.0), 0.0)
    return _like_input(value, x)


def combined_m(x):
    """M(x) = 4 M_3(x) - 3 M_4(x), supported on [-2, 2]."""
    xs = np.asarray(x, dtype=float)
    return _like_input(4.0 * bspline(3, xs) - 3.0 * bspline(4, xs), x)


@dataclass(frozen=True)
class CompactSupport:
    a: float
    b: float


@dataclass(frozen=True)
class FullLineSupport:
    tail_bound_constant: float


@dataclass(frozen=True)
class Kernel:
    """An L^1 kernel on the real line.

    ``l1_norm`` and the signed ``integral`` are computed once at construction.
    For full-line kernels both are truncated at ``l1_radius`` and
    ``truncation_mass`` bounds what the truncation leaves out.
    """
    name: str
    func: Callable
    support: Union[CompactSupport, FullLineSupport]
    knots: Tuple[float, ...] = ()
    l1_radius: float = DEFAULT_L1_RADIUS
    l1_norm: float = field(init=False)
    integral: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.support, CompactSupport):
            a, b = self.support.a, self.support.b
            if not a < b:
                raise KernelDomainError(f"Kernel '{self.name}': empty support [{a}, {b}]")
            outside = np.concatenate([np.linspace(a - 10.0, a, 200, endpoint=False) - 1e-9,
                                      np.linspace(b, b + 10.0, 200) + 1e-9])
            if np.any(self.func(outside) != 0.0):
                raise KernelDomainError(f"Kernel '{self.name}' is nonzero outside [{a}, {b}]")
            domain = IntegrationDomain.finite(a, b)
            panels = self.panel_count()
        else:
            constant = self.support.tail_bound_constant
            if not constant > 0:
                raise KernelDomainError(f"Kernel '{self.name}': tail constant must be positive")
            probe = np.concatenate([np.linspace(1.0, 1e3, 4001), -np.linspace(1.0, 1e3, 4001)])
            if np.any(np.abs(self.func(probe)) > constant / probe ** 2 * (1 + 1e-12)):
                raise KernelDomainError(f"Kernel '{self.name}' violates its tail bound C/x^2")
            domain = IntegrationDomain.real_line(self.l1_radius)
            panels = int(math.ceil(self.l1_radius))

        l1 = integrate(lambda t: np.abs(self.func(t)), domain,
                       breakpoints=self.knots, min_panels=panels).value
        signed = integrate(self.func, domain, breakpoints=self.knots, min_panels=panels).value
        if not (np.isfinite(l1) and l1 > 0):
            raise KernelDomainError(f"Kernel '{self.name}' has no finite positive L^1 norm")
        object.__setattr__(self, 'l1_norm', float(l1))
        object.__setattr__(self, 'integral', float(signed))
        logger.debug("Kernel %s: l1_norm=%.12g integral=%.12g", self.name, l1, signed)

    def __call__(self, x):
        return self.func(x)

    @property
    def is_compact(self) -> bool:
        return isinstance(self.support, CompactSupport)

    @property
    def truncation_mass(self) -> float:
        if self.is_compact:
            return 0.0
        return 2.0 * self.support.tail_bound_constant / self.l1_radius

    def truncation_radius(self, tol: float, amplitude: float = 1.0) -> float:
        """Radius R past which the discarded two-sided mass times ``amplitude``
        stays below ``tol`` (2*C*amplitude/R <= tol for full-line kernels)."""
        if self.is_compact:
            return max(abs(self.support.a), abs(self.support.b))
        if not tol > 0:
            raise ValueError("Truncation tolerance must be positive")
        return max(1.0, 2.0 * self.support.tail_bound_constant * max(amplitude, 0.0) / tol)

    def window(self, tol: float, amplitude: float = 1.0) -> Tuple[float, float]:
        if self.is_compact:
            return self.support.a, self.support.b
        radius = self.truncation_radius(tol, amplitude)
        return -radius, radius

    def panel_count(self, lo: Optional[float] = None, hi: Optional[float] = None) -> int:
        """Uniform panels over [lo, hi] (default: the support) whose edges hit every knot."""
        if not self.is_compact:
            lo = -self.l1_radius if lo is None else lo
            hi = self.l1_radius if hi is None else hi
            return max(1, int(math.ceil((hi - lo) / 2.0)))
        lo = self.support.a if lo is None else lo
        hi = self.support.b if hi is None else hi
        if len(self.knots) < 2:
            return 8
        spacing = float(np.min(np.diff(np.unique(self.knots))))
        offsets = (np.asarray(self.knots) - lo) / spacing
        if np.allclose(offsets, np.round(offsets), atol=1e-9):
            return max(1, int(round((hi - lo) / spacing)))
        return max(8, len(self.knots))

    def outside_mass(self, lo: float, hi: float) -> float:
        """Mass of |kernel| outside [lo, hi]; a tail bound for full-line kernels."""
        if self.is_compact:
            a, b = self.support.a, self.support.b
            mass = 0.0
            for left, right in ((a, min(b, lo)), (max(a, hi), b)):
                if right > left:
                    mass += integrate(lambda t: np.abs(self.func(t)),
                                      IntegrationDomain.finite(left, right),
                                      breakpoints=self.knots).value
            return mass
        constant = self.support.tail_bound_constant
        if lo >= -1.0 or hi <= 1.0:
            return self.l1_norm
        return constant / -lo + constant / hi


def _bspline_kernel(n: int) -> Kernel:
    knots = tuple(-n / 2.0 + j for j in range(n + 1))
    return Kernel(name=f"bspline:{n}", func=lambda x, _n=n: bspline(_n, x),
                  support=CompactSupport(-n / 2.0, n / 2.0), knots=knots)


@lru_cache(maxsize=None)
def get_kernel(name: str) -> Kernel:
    """Look up an L^1 kernel by name."""
    key = name.strip().lower()
    if key == 'fejer':
        return Kernel(name='fejer', func=fejer, support=FullLineSupport(FEJER_TAIL_CONSTANT))
    if key == 'combined-m':
        knots = tuple(np.arange(-2.0, 2.01, 0.5))
        return Kernel(name='combined-m', func=combined_m, support=CompactSupport(-2.0, 2.0),
                      knots=knots)
    if key.startswith('bspline:'):
        try:
            order = int(key.split(':', 1)[1])
        except ValueError:
            raise KernelDomainError(f"Invalid B-spline order in '{name}'")
        if order < 1:
            raise KernelDomainError(f"B-spline order must be >= 1, got {order}")
        return _bspline_kernel(order)
    if key == 'sinc':
        raise KernelDomainError("sinc is not in L^1(R) and cannot be used as a sampling kernel")
    if key == 'mellin':
        raise KernelDomainError("'mellin' is a w-indexed family; use mellin_kernel(w)")
    raise KernelDomainError(f"Unknown kernel '{name}'. Known: {', '.join(kernel_names())}")


def kernel_names() -> List[str]:
    return ['sinc', 'fejer', 'bspline:<n>', 'combined-m', 'mellin']


def scaled_l1_norm(kernel: Kernel, w: float, config: Optional[QuadratureConfig] = None) -> float:
    """L^1 norm of x -> kernel(w x), by quadrature."""
    if not w > 0:
        raise ValueError(f"w must be positive, got {w}")
    integrand = lambda t: np.abs(kernel(w * t))
    if kernel.is_compact:
        domain = IntegrationDomain.finite(kernel.support.a / w, kernel.support.b / w)
        return integrate(integrand, domain, config, breakpoints=np.asarray(kernel.knots) / w,
                         min_panels=kernel.panel_count()).value
    domain = IntegrationDomain.real_line(kernel.l1_radius / w)
    return integrate(integrand, domain, config, min_panels=kernel.panel_count()).value


@dataclass(frozen=True)
class MellinKernel:
    """The Mellin kernel u -> w u^w on (0, 1), zero elsewhere."""
    w: float

    def __post_init__(self):
        if not self.w > 0:
            raise KernelDomainError(f"Mellin kernel needs w > 0, got {self.w}")
        lo, hi = self.log_support(1.0)
        mass = integrate(self, IntegrationDomain.log_half_line(-hi, 0.0),
                         min_panels=max(8, int(math.ceil(self.w * hi / 4)))).value
        if abs(mass - 1.0) > 1e-8:
            raise KernelDomainError(f"Mellin kernel w={self.w} not normalized: mass {mass!r}")

    @property
    def name(self) -> str:
        return 'mellin'

    def __call__(self, u):
        us = np.asarray(u, dtype=float)
        inside = (us > 0) & (us < 1)
        value = np.where(inside, self.w * np.where(inside, us, 0.5) ** self.w, 0.0)
        return _like_input(value, u)

    def log_support(self, x: float, cutoff: float = MELLIN_CUTOFF) -> Tuple[float, float]:
        """Interval of v = log t on which kernel(x/t) >= cutoff."""
        if not x > 0:
            raise KernelDomainError(f"Mellin evaluation point must be positive, got {x}")
        start = math.log(x)
        return start, start + math.log(self.w / cutoff) / self.w

    def mass_at(self, x: float, config: Optional[QuadratureConfig] = None) -> float:
        """integral of kernel(x / t) dt / t over the log support at x."""
        lo, hi = self.log_support(x)
        return integrate(lambda t: self(x / t), IntegrationDomain.log_half_line(lo, hi), config,
                         min_panels=max(8, int(math.ceil(self.w * (hi - lo) / 4)))).value


@lru_cache(maxsize=64)
def mellin_kernel(w: float) -> MellinKernel:
    return MellinKernel(float(w))


@dataclass
class AssumptionReport:
    kernel_name: str
    w_list: List[float]
    chi2_partition_defect: float
    chi3_moment_M: float
    chi4_tail_profile: List[Tuple[float, float]]
    chi4_monotone: bool
    chi5_verified: bool
    chi5_compact_set: Optional[Tuple[float, float]]
    gamma_l1_bound: float
    summation_radius: float
    probe_count: int
    valid: bool = True
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'kernel': self.kernel_name,
            'w_list': list(self.w_list),
            'chi2_partition_defect': self.chi2_partition_defect,
            'chi3_moment_M': self.chi3_moment_M,
            'chi4_tail_profile': [list(p) for p in self.chi4_tail_profile],
            'chi4_monotone': self.chi4_monotone,
            'chi5_verified': self.chi5_verified,
            'chi5_compact_set': list(self.chi5_compact_set) if self.chi5_compact_set else None,
            'gamma_l1_bound': self.gamma_l1_bound,
            'summation_radius': self.summation_radius,
            'valid': self.valid,
            'warnings': list(self.warnings),
        }


def _probe_points(count: int, interval: Tuple[float, float], seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = interval
    return np.concatenate([rng.uniform(lo, hi, count), np.linspace(lo, hi, count)])


def check_chi_assumptions(kernel: Kernel, grid, w_list: Sequence[float], probe_count: int = 200,
                          probe_interval: Tuple[float, float] = (-5.0, 5.0), seed: int = 12345,
                          neighborhood_radius: float = 0.5,
                          compact_set: Tuple[float, float] = (-1.0, 1.0),
                          epsilon: float = 1e-3, sum_tail_tol: float = 1e-6,
                          radius_cap: float = 1e3) -> AssumptionReport:
    """
    Probe the kernel assumptions on a sampling grid.

    Partition defect and moment are sup-over-probes of the sums over k of
    kernel(w z - t_k) and |kernel(w z - t_k)|.  The tail profile is, per w,
    the sup of the absolute sum restricted to |z - t_k/w| > neighborhood_radius.
    The compactness search looks for C = [-R, R] with
    #{k : t_k/w in K} * (outside mass)/w < epsilon at the largest w.

    ``grid`` needs ``nodes(k)`` and ``index_bounds(t_min, t_max)``.
    Numerical trouble marks the report invalid instead of raising.
    """
    if not w_list:
        raise ValueError("w_list must not be empty")
    w_values = [float(w) for w in w_list]
    probes = _probe_points(int(probe_count), probe_interval, seed)
    warnings: List[str] = []
    valid = True

    if kernel.is_compact:
        a, b = kernel.support.a, kernel.support.b
        radius = max(abs(a), abs(b))
    else:
        radius = float(math.ceil(2.0 * kernel.support.tail_bound_constant / sum_tail_tol))
        a, b = -radius, radius

    defect, moment = 0.0, 0.0
    tails: List[Tuple[float, float]] = []
    chunk = max(1, int(4_000_000 // (2 * radius + 4)))
    for w in w_values:
        tail_sup = 0.0
        for start in range(0, probes.size, chunk):
            z = probes[start:start + chunk]
            u = w * z
            k_lo, k_hi = grid.index_bounds(float(u.min()) - b, float(u.max()) - a)
            ks = np.arange(k_lo, k_hi + 1)
            t = np.asarray(grid.nodes(ks), dtype=float)
            offsets = u[:, None] - t[None, :]
            values = np.where((offsets >= a) & (offsets <= b), kernel(offsets), 0.0)
            sums = values.sum(axis=1)
            absolute = np.abs(values)
            abs_sums = absolute.sum(axis=1)
            far = np.abs(z[:, None] - t[None, :] / w) > neighborhood_radius
            tail_sup = max(tail_sup, float(np.max((absolute * far).sum(axis=1))))
            if not (np.all(np.isfinite(sums)) and np.all(np.isfinite(abs_sums))):
                valid = False
                warnings.append(f"divergent partial sums at w={w:g}")
                continue
            defect = max(defect, float(np.max(np.abs(sums - 1.0))))
            moment = max(moment, float(np.max(abs_sums)))
        tails.append((w, tail_sup))

    monotone = all(later <= earlier + 1e-15 for (_, earlier), (_, later) in zip(tails, tails[1:]))
    if not monotone:
        warnings.append("tail mass not monotone in w on the probe set")
        logger.warning("Kernel %s: tail profile not monotone: %s", kernel.name, tails)
    if defect > 1e-6:
        warnings.append(f"partition-of-unity defect {defect:.3e}")
        logger.warning("Kernel %s: partition defect %.3e on grid %s", kernel.name, defect,
                       getattr(grid, 'name', grid))

    chi5_verified, chi5_set = False, None
    try:
        w_top = max(w_values)
        k_lo, k_hi = grid.index_bounds(w_top * compact_set[0], w_top * compact_set[1])
        ks = np.arange(k_lo, k_hi + 1)
        t = np.asarray(grid.nodes(ks), dtype=float)
        inside = t[(t / w_top >= compact_set[0]) & (t / w_top <= compact_set[1])]
        count = inside.size
        R = 1.0
        while R <= radius_cap and count:
            worst = max(kernel.outside_mass(-w_top * R - tk, w_top * R - tk) for tk in inside)
            if count * worst / w_top < epsilon:
                chi5_verified, chi5_set = True, (-R, R)
                break
            R *= 2.0
        if count == 0:
            chi5_verified, chi5_set = True, (compact_set[0], compact_set[1])
    except (ValueError, ArithmeticError) as e:
        warnings.append(f"compact-set search failed: {e}")
        logger.error("Compact-set search failed for %s: %s", kernel.name, e)

    gamma = max(kernel.l1_norm / w for w in w_values)
    report = AssumptionReport(
        kernel_name=kernel.name, w_list=w_values, chi2_partition_defect=defect,
        chi3_moment_M=moment, chi4_tail_profile=tails, chi4_monotone=monotone,
        chi5_verified=chi5_verified, chi5_compact_set=chi5_set, gamma_l1_bound=gamma,
        summation_radius=radius, probe_count=int(probes.size), valid=valid, warnings=warnings)
    logger.info("Kernel %s: defect=%.3e M=%.6g chi5=%s", kernel.name, defect, moment, chi5_verified)
    return report
