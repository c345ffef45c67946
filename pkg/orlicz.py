#!/usr/bin/env python3
"""
Orlicz Space Layer
==================

phi-functions (power, exponential, Zygmund), the modular functional
I(f) = integral of phi(|f|), the Luxemburg norm, a Delta_2 classifier and
modular-convergence tables over (lambda, w).

phi spec strings: "power:p=2", "exp:alpha=1", "zygmund:alpha=1,beta=1".
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from quadrature import IntegrationDomain, QuadratureConfig, integrate

logger = logging.getLogger(__name__)

OVERFLOW_LIMIT = 1e300
DELTA2_THRESHOLD = 1e6
DELTA2_SPAN = (1e-6, 1e2)
LAMBDA_MIN = 2.0 ** -40
LAMBDA_MAX = 2.0 ** 40


class OrliczDomainError(ValueError):
    """Raised when a phi-function is evaluated at a negative argument."""


class NotInOrliczSpaceError(ValueError):
    """Raised when the modular is infinite for every probed lambda."""


@dataclass(frozen=True)
class PhiFunction:
    family: str
    p: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.family == 'power':
            if not self.p >= 1:
                raise ValueError(f"power phi needs p >= 1, got {self.p}")
        elif self.family == 'exponential':
            if not self.alpha > 0:
                raise ValueError(f"exponential phi needs alpha > 0, got {self.alpha}")
        elif self.family == 'zygmund':
            if not (self.alpha >= 1 and self.beta > 0):
                raise ValueError(f"zygmund phi needs alpha >= 1 and beta > 0, "
                                 f"got alpha={self.alpha}, beta={self.beta}")
        else:
            raise ValueError(f"Unknown phi family '{self.family}'")
        self._check_axioms()

    def _check_axioms(self):
        grid = np.logspace(-6, 1.5, 400)
        values = self(grid)
        if self(0.0) != 0.0 or np.any(values <= 0) or np.any(np.diff(values) < 0):
            raise ValueError(f"{phi_spec(self)} is not a phi-function on the probe grid")
        mid = self(0.5 * (grid[:-1] + grid[1:]))
        chord = 0.5 * (values[:-1] + values[1:])
        if np.any(mid > chord * (1 + 1e-12)):
            raise ValueError(f"{phi_spec(self)} is not convex on the probe grid")

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        with np.errstate(over='ignore'):
            if self.family == 'power':
                value = xs ** self.p
            elif self.family == 'exponential':
                value = np.expm1(xs ** self.alpha)
            else:
                value = xs ** self.alpha * np.log(math.e + xs) ** self.beta
        return float(value) if np.ndim(x) == 0 else value

    @property
    def delta2_analytic(self) -> bool:
        return self.family in ('power', 'zygmund')


def phi_eval(phi: PhiFunction, x):
    if np.any(np.asarray(x) < 0):
        raise OrliczDomainError(f"phi is defined on [0, inf), got {x!r}")
    return phi(x)


def parse_phi(spec: str) -> PhiFunction:
    """Parse "power:p=2", "exp:alpha=1" or "zygmund:alpha=1,beta=1"."""
    head, _, rest = spec.strip().partition(':')
    params: Dict[str, float] = {}
    if rest:
        for item in rest.split(','):
            key, sep, value = item.partition('=')
            if not sep:
                raise ValueError(f"Malformed phi parameter '{item}' in '{spec}'")
            params[key.strip()] = float(value)
    families = {'power': 'power', 'exp': 'exponential', 'exponential': 'exponential',
                'zygmund': 'zygmund'}
    if head not in families:
        raise ValueError(f"Unknown phi family '{head}'. Known: power, exp, zygmund")
    allowed = {'power': {'p'}, 'exponential': {'alpha'}, 'zygmund': {'alpha', 'beta'}}
    family = families[head]
    unknown = set(params) - allowed[family]
    if unknown:
        raise ValueError(f"Unexpected parameters {sorted(unknown)} for phi family '{head}'")
    return PhiFunction(family, **params)


def phi_spec(phi: PhiFunction) -> str:
    if phi.family == 'power':
        return f"power:p={phi.p:g}"
    if phi.family == 'exponential':
        return f"exp:alpha={phi.alpha:g}"
    return f"zygmund:alpha={phi.alpha:g},beta={phi.beta:g}"


@dataclass(frozen=True)
class ModularValue:
    value: float
    lam: float
    certified: bool = True
    infinite: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


def modular(f: Callable, phi: PhiFunction, lam: float, domain: IntegrationDomain,
            config: Optional[QuadratureConfig] = None, breakpoints: Optional[Sequence[float]] = None,
            min_panels: int = 1) -> ModularValue:
    """
    Integral of phi(lam |f|) over the domain.

    Breakpoints default to ``f.breakpoints`` when f is a piecewise signal.
    Integrand values above 1e300 give an infinite ModularValue.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if breakpoints is None:
        breakpoints = getattr(f, 'breakpoints', ())
    overflow = False

    def integrand(x):
        nonlocal overflow
        values = phi(lam * np.abs(f(x)))
        big = ~np.isfinite(values) | (values > OVERFLOW_LIMIT)
        if big.any():
            overflow = True
            values = np.where(big, OVERFLOW_LIMIT, values)
        return values

    result = integrate(integrand, domain, config, breakpoints=breakpoints, min_panels=min_panels)
    if overflow:
        return ModularValue(value=math.inf, lam=lam, certified=result.certified, infinite=True)
    return ModularValue(value=max(result.value, 0.0), lam=lam, certified=result.certified)


def luxemburg_norm(f: Callable, phi: PhiFunction, domain: IntegrationDomain,
                   config: Optional[QuadratureConfig] = None,
                   breakpoints: Optional[Sequence[float]] = None, min_panels: int = 1,
                   rel_tol: float = 1e-8) -> float:
    """inf{lam > 0 : I(f / lam) <= 1}, by bisection in log(lam) over [2^-40, 2^40]."""
    def fits(lam: float) -> bool:
        value = modular(f, phi, 1.0 / lam, domain, config, breakpoints, min_panels)
        return not value.infinite and value.value <= 1.0

    if fits(LAMBDA_MIN):
        return 0.0
    if not fits(LAMBDA_MAX):
        raise NotInOrliczSpaceError(f"Modular of f/lambda exceeds 1 for every lambda up to "
                                    f"{LAMBDA_MAX:g} under {phi_spec(phi)}")
    lo, hi = LAMBDA_MIN, LAMBDA_MAX
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if fits(mid):
            hi = mid
        else:
            lo = mid
    return hi


def luxemburg_literal(f: Callable, phi: PhiFunction, domain: IntegrationDomain,
                      config: Optional[QuadratureConfig] = None,
                      breakpoints: Optional[Sequence[float]] = None,
                      min_panels: int = 1) -> float:
    """inf{lam > 0 : I(lam f) < inf} on the probe bracket.

    The set of such lam is an interval starting at 0, so the value is 0.0 for
    every f in the Orlicz space; it is reported next to the Luxemburg norm.
    """
    value = modular(f, phi, LAMBDA_MIN, domain, config, breakpoints, min_panels)
    if value.infinite:
        raise NotInOrliczSpaceError("Modular is infinite at every probed lambda")
    return 0.0


@dataclass(frozen=True)
class Delta2Result:
    satisfied: bool
    sup_ratio: float
    infinite: bool
    analytic: bool
    needs_review: bool

    def __iter__(self):
        return iter((self.satisfied, self.sup_ratio))


def delta2_classify(phi: PhiFunction, x_grid: Optional[np.ndarray] = None,
                    threshold: float = DELTA2_THRESHOLD) -> Delta2Result:
    """Max of phi(2x)/phi(x) over a log-spaced grid, combined with the family's
    analytic Delta_2 flag.  Numeric/analytic disagreement is logged for review."""
    grid = np.logspace(-6, 2, 801) if x_grid is None else np.asarray(x_grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("Delta_2 probe grid must lie in (0, inf)")
    lo, hi = DELTA2_SPAN
    if grid.size == 0 or grid.min() > lo * (1 + 1e-9) or grid.max() < hi * (1 - 1e-9):
        raise ValueError(f"Delta_2 probe grid must cover [{lo:g}, {hi:g}]")
    with np.errstate(over='ignore', invalid='ignore'):
        ratios = phi(2.0 * grid) / phi(grid)
    infinite = bool(np.any(~np.isfinite(ratios)))
    sup_ratio = math.inf if infinite else float(np.max(ratios))
    numeric = (not infinite) and sup_ratio <= threshold
    review = numeric != phi.delta2_analytic
    if review:
        logger.warning("Delta_2 disagreement for %s: numeric=%s analytic=%s (sup ratio %g)",
                       phi_spec(phi), numeric, phi.delta2_analytic, sup_ratio)
    return Delta2Result(satisfied=numeric and phi.delta2_analytic, sup_ratio=sup_ratio,
                        infinite=infinite, analytic=phi.delta2_analytic, needs_review=review)


@dataclass
class ModularTable:
    """I(lam (f_w - f)) over lambda rows and w columns."""
    phi: PhiFunction
    lambda_list: List[float]
    w_list: List[float]
    cells: Dict[Tuple[float, float], Union[ModularValue, str]] = field(default_factory=dict)

    def row(self, lam: float) -> List[float]:
        out = []
        for w in self.w_list:
            cell = self.cells[(lam, w)]
            out.append(cell.value if isinstance(cell, ModularValue) else math.nan)
        return out

    def row_decreasing(self, lam: float, slack: float = 0.05) -> bool:
        values = self.row(lam)
        if any(math.isnan(v) for v in values):
            return False
        return all(b <= a * (1 + slack) + 1e-12 for a, b in zip(values, values[1:]))

    @property
    def tags(self) -> Dict[float, str]:
        return {lam: ('decreasing' if self.row_decreasing(lam) else 'not-decreasing')
                for lam in self.lambda_list}

    def to_records(self) -> List[dict]:
        records = []
        for lam in self.lambda_list:
            for w in self.w_list:
                cell = self.cells[(lam, w)]
                if isinstance(cell, ModularValue):
                    records.append({'lambda': lam, 'w': w, 'modular': cell.value,
                                    'infinite': cell.infinite, 'certified': cell.certified})
                else:
                    records.append({'lambda': lam, 'w': w, 'modular': math.nan,
                                    'infinite': False, 'certified': False, 'error': cell})
        return records


def modular_convergence_table(f_family: Callable[[float], Callable], f_target: Callable,
                              phi: PhiFunction, lambda_list: Sequence[float],
                              w_list: Sequence[float], domain: IntegrationDomain,
                              config: Optional[QuadratureConfig] = None,
                              breakpoints: Optional[Sequence[float]] = None,
                              min_panels: int = 1, max_workers: int = 1) -> ModularTable:
    """
    Tabulate I(lam (f_w - f_target)) for every (lam, w).

    ``f_family(w)`` returns the approximant for w.  A failing cell records its
    error message and the rest of the table is still computed.
    """
    if not lambda_list or not w_list:
        raise ValueError("lambda_list and w_list must not be empty")
    if breakpoints is None:
        breakpoints = getattr(f_target, 'breakpoints', ())
    table = ModularTable(phi=phi, lambda_list=list(lambda_list), w_list=list(w_list))

    def compute(lam: float, w: float) -> Union[ModularValue, str]:
        try:
            approximant = f_family(w)
            difference = lambda x: approximant(x) - f_target(x)
            return modular(difference, phi, lam, domain, config, breakpoints, min_panels)
        except (ValueError, ArithmeticError) as e:
            logger.error("Modular cell (lambda=%g, w=%g) failed: %s", lam, w, e)
            return f"failed: {e}"

    keys = [(lam, w) for lam in table.lambda_list for w in table.w_list]
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        results = list(executor.map(lambda key: compute(*key), keys))
    table.cells.update(zip(keys, results))
    for lam, tag in table.tags.items():
        logger.info("Modular row lambda=%g under %s: %s", lam, phi_spec(phi), tag)
    return table
