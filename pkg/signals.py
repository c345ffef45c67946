#!/usr/bin/env python3
"""
Signal Catalog
==============

Piecewise test signals used by the operators and the experiment harness:
the three piecewise signals of the reference experiments (fig2, fig3, fig4)
and property-test signals (constants, indicators, ramp, gauss, tent).

Pieces are half-open intervals [lo, hi); a value at a breakpoint comes from
the piece that starts there.

Usage:
    from signals import parse_signal
    f = parse_signal("fig2")
    f(np.array([-4.0, 0.5]))
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

INF = math.inf


class SignalDomainError(ValueError):
    """Raised when a signal is evaluated outside its domain."""


class UnknownSignalError(KeyError):
    """Raised for a signal name that is not in the catalog."""


@dataclass(frozen=True)
class Formula:
    """Closed-form piece: const c, linear a + b x, power c x^p, gauss c exp(-x^2), none."""
    kind: str
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if self.kind not in ('const', 'linear', 'power', 'gauss', 'none'):
            raise ValueError(f"Unknown formula id '{self.kind}'")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == 'const':
            return np.full_like(x, self.p1)
        if self.kind == 'linear':
            return self.p1 + self.p2 * x
        if self.kind == 'power':
            return self.p1 * np.power(x, self.p2)
        if self.kind == 'gauss':
            return self.p1 * np.exp(-x * x)
        return np.zeros_like(x)

    @property
    def is_zero(self) -> bool:
        return self.kind == 'none' or (self.kind in ('const', 'power', 'gauss') and self.p1 == 0.0) \
            or (self.kind == 'linear' and self.p1 == 0.0 and self.p2 == 0.0)

    def sup_abs(self, lo: float, hi: float) -> float:
        """Supremum of |formula| over [lo, hi)."""
        if self.is_zero:
            return 0.0
        if self.kind == 'const':
            return abs(self.p1)
        if self.kind == 'gauss':
            nearest = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
            return abs(self.p1) * math.exp(-nearest * nearest)
        if self.kind == 'linear':
            if self.p2 != 0.0 and not (math.isfinite(lo) and math.isfinite(hi)):
                return INF
            return max(abs(self.p1 + self.p2 * lo), abs(self.p1 + self.p2 * hi))
        # power pieces are monotone in |x| on intervals that avoid 0
        if lo < 0.0 < hi:
            return INF if self.p2 < 0 else max(self._abs_power(lo), self._abs_power(hi))
        return max(self._abs_power(lo), self._abs_power(hi))

    def _abs_power(self, x: float) -> float:
        if math.isinf(x):
            return 0.0 if self.p2 < 0 else (abs(self.p1) if self.p2 == 0 else INF)
        if x == 0.0:
            return INF if self.p2 < 0 else (abs(self.p1) if self.p2 == 0 else 0.0)
        return abs(self.p1) * abs(x) ** self.p2


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    formula: Formula


@dataclass(frozen=True)
class PiecewiseSignal:
    """A signal made of contiguous half-open pieces.

    ``domain_lo`` excludes itself when ``open_left`` is set (the fig4 signal
    lives on (0, inf)).  Outside the pieces but inside the domain the signal is 0.
    """
    name: str
    pieces: Tuple[Piece, ...]
    domain_lo: float = -INF
    open_left: bool = False
    breakpoints: Tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if not self.pieces:
            raise ValueError(f"Signal '{self.name}' has no pieces")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if left.hi != right.lo:
                raise ValueError(f"Signal '{self.name}': pieces must share endpoints "
                                 f"({left.hi} != {right.lo})")
        for piece in self.pieces:
            if not piece.lo < piece.hi:
                raise ValueError(f"Signal '{self.name}': empty piece [{piece.lo}, {piece.hi})")
        inner = [p.lo for p in self.pieces[1:]]
        if math.isfinite(self.pieces[0].lo) and self.pieces[0].lo > self.domain_lo:
            inner.insert(0, self.pieces[0].lo)
        if math.isfinite(self.pieces[-1].hi):
            inner.append(self.pieces[-1].hi)
        object.__setattr__(self, 'breakpoints', tuple(float(b) for b in inner))

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        if self.open_left:
            bad = xs <= self.domain_lo
        else:
            bad = xs < self.domain_lo
        if np.any(bad):
            raise SignalDomainError(f"Signal '{self.name}' is defined for x "
                                    f"{'>' if self.open_left else '>='} {self.domain_lo}, "
                                    f"got {xs[bad].ravel()[0]!r}")
        out = np.zeros_like(xs)
        for piece in self.pieces:
            mask = (xs >= piece.lo) & (xs < piece.hi)
            if mask.any():
                out[mask] = piece.formula(xs[mask])
        return float(out) if np.ndim(x) == 0 else out

    def eval(self, x):
        return self(x)

    @property
    def sup_norm(self) -> float:
        return max(p.formula.sup_abs(max(p.lo, self.domain_lo), p.hi) for p in self.pieces)

    def sup_outside(self, lo: float, hi: float) -> float:
        """sup |f| over the domain with the open interval (lo, hi) removed."""
        best = 0.0
        for p in self.pieces:
            start = max(p.lo, self.domain_lo)
            for a, b in ((start, min(p.hi, lo)), (max(start, hi), p.hi)):
                if a < b:
                    best = max(best, p.formula.sup_abs(a, b))
        return best

    @property
    def support_bound(self) -> Optional[Tuple[float, float]]:
        """Smallest interval outside which the signal vanishes; None if unbounded."""
        nonzero = [p for p in self.pieces if not p.formula.is_zero]
        if not nonzero:
            return (0.0, 0.0)
        lo, hi = max(nonzero[0].lo, self.domain_lo), nonzero[-1].hi
        if math.isfinite(lo) and math.isfinite(hi):
            return (lo, hi)
        return None

    @property
    def is_compact(self) -> bool:
        return self.support_bound is not None

    @property
    def jumps(self) -> Tuple[float, ...]:
        """Breakpoints where the left and right limits differ."""
        out = []
        for b in self.breakpoints:
            left = self._limit(b, from_left=True)
            right = self._limit(b, from_left=False)
            if not math.isclose(left, right, rel_tol=1e-12, abs_tol=1e-12):
                out.append(b)
        return tuple(out)

    @property
    def continuity_intervals(self) -> List[Tuple[float, float]]:
        edges = [self.domain_lo, *self.jumps, INF]
        return [(lo, hi) for lo, hi in zip(edges, edges[1:]) if lo < hi]

    def _limit(self, b: float, from_left: bool) -> float:
        for piece in self.pieces:
            if (from_left and piece.hi == b) or (not from_left and piece.lo == b):
                return float(piece.formula(np.array([b]))[0])
        return 0.0

    def restricted(self, lo: float, hi: float) -> 'PiecewiseSignal':
        """Signal times the indicator of [lo, hi): a compactly supported surrogate."""
        if not lo < hi:
            raise ValueError("restricted() needs lo < hi")
        kept = []
        for piece in self.pieces:
            a, b = max(piece.lo, lo), min(piece.hi, hi)
            if a < b:
                kept.append(Piece(a, b, piece.formula))
        zero = Formula('none')
        pieces = [Piece(-INF, lo, zero), *kept, Piece(hi, INF, zero)]
        lo_domain = self.domain_lo
        if lo_domain > -INF:
            pieces[0] = Piece(lo_domain, lo, zero) if lo > lo_domain else None
            pieces = [p for p in pieces if p is not None]
        return PiecewiseSignal(f"{self.name}|[{lo:g},{hi:g})", tuple(pieces),
                               domain_lo=lo_domain, open_left=self.open_left)

    def scaled(self, factor: float, name: Optional[str] = None) -> 'PiecewiseSignal':
        pieces = []
        for p in self.pieces:
            f = p.formula
            if f.kind == 'linear':
                formula = Formula('linear', factor * f.p1, factor * f.p2)
            elif f.kind == 'none':
                formula = f
            else:
                formula = Formula(f.kind, factor * f.p1, f.p2)
            pieces.append(Piece(p.lo, p.hi, formula))
        return PiecewiseSignal(name or f"{factor:g}*{self.name}", tuple(pieces),
                               domain_lo=self.domain_lo, open_left=self.open_left)


def _pieces(spec: Sequence[Tuple[float, float, Formula]]) -> Tuple[Piece, ...]:
    return tuple(Piece(float(lo), float(hi), formula) for lo, hi, formula in spec)


def fig2_signal() -> PiecewiseSignal:
    return PiecewiseSignal('fig2', _pieces([
        (-INF, -5, Formula('power', 40.0, -2.0)),
        (-5, -3, Formula('const', -1.0)),
        (-3, -2, Formula('const', 2.0)),
        (-2, -1, Formula('const', -0.5)),
        (-1, 0, Formula('const', 1.5)),
        (0, 1, Formula('const', 1.0)),
        (1, 2, Formula('const', -0.5)),
        (2, INF, Formula('power', -2.0, -5.0)),
    ]))


def fig3_signal() -> PiecewiseSignal:
    return PiecewiseSignal('fig3', _pieces([
        (-INF, -1, Formula('power', 1.0, -2.0)),
        (-1, 0, Formula('const', -1.0)),
        (0, 2, Formula('const', 2.0)),
        (2, INF, Formula('power', -3.0, -3.0)),
    ]))


def fig4_signal() -> PiecewiseSignal:
    return PiecewiseSignal('fig4', _pieces([
        (0, 2, Formula('linear', 0.0, 2.0)),
        (2, 4, Formula('const', 1.0)),
        (4, INF, Formula('power', -25.0, -3.0)),
    ]), domain_lo=0.0, open_left=True)


def const_signal(c: float) -> PiecewiseSignal:
    return PiecewiseSignal(f"const:{c:g}", _pieces([(-INF, INF, Formula('const', float(c)))]))


def indicator_signal(a: float, b: float) -> PiecewiseSignal:
    if not a < b:
        raise ValueError(f"indicator needs a < b, got {a}, {b}")
    return PiecewiseSignal(f"indicator:{a:g},{b:g}", _pieces([
        (-INF, a, Formula('none')),
        (a, b, Formula('const', 1.0)),
        (b, INF, Formula('none')),
    ]))


def ramp_signal() -> PiecewiseSignal:
    return PiecewiseSignal('ramp', _pieces([
        (-INF, 0, Formula('none')),
        (0, 1, Formula('linear', 0.0, 1.0)),
        (1, INF, Formula('const', 1.0)),
    ]))


def tent_signal() -> PiecewiseSignal:
    return PiecewiseSignal('tent', _pieces([
        (-INF, -1, Formula('none')),
        (-1, 0, Formula('linear', 1.0, 1.0)),
        (0, 1, Formula('linear', 1.0, -1.0)),
        (1, INF, Formula('none')),
    ]))


def gauss_signal() -> PiecewiseSignal:
    return PiecewiseSignal('gauss', _pieces([(-INF, INF, Formula('gauss', 1.0))]))


_FIXED = {
    'fig2': fig2_signal,
    'fig3': fig3_signal,
    'fig4': fig4_signal,
    'ramp': ramp_signal,
    'tent': tent_signal,
    'gauss': gauss_signal,
}

# default evaluation windows of the reference experiments
DEFAULT_WINDOWS: Dict[str, Tuple[float, float]] = {
    'fig2': (-6.0, 3.0),
    'fig3': (-3.0, 4.0),
    'fig4': (0.2, 8.0),
}


def catalog() -> Dict[str, PiecewiseSignal]:
    """Named catalog signals, with one example of each parameterized family."""
    signals = {name: factory() for name, factory in _FIXED.items()}
    for example in ('const:1', 'indicator:0,1'):
        signals[example] = parse_signal(example)
    return signals


def parse_signal(spec: str) -> PiecewiseSignal:
    """Resolve a signal spec string: a catalog name, const:<c>, indicator:<a>,<b> or csv:<path>."""
    key = spec.strip()
    if key in _FIXED:
        return _FIXED[key]()
    head, _, rest = key.partition(':')
    try:
        if head == 'const' and rest:
            return const_signal(float(rest))
        if head == 'indicator' and rest:
            a, b = (float(v) for v in rest.split(','))
            return indicator_signal(a, b)
    except ValueError as e:
        raise UnknownSignalError(f"Malformed signal spec '{spec}': {e}")
    if head == 'csv' and rest:
        return load_signal_csv(rest)
    raise UnknownSignalError(f"Unknown signal '{spec}'. Known: {', '.join(sorted(_FIXED))}, "
                             f"const:<c>, indicator:<a>,<b>, csv:<path>")


def load_signal_csv(path: str) -> PiecewiseSignal:
    """
    Load a piecewise signal from CSV rows ``breakpoint,formula_id,p1,p2``.

    Each row starts a piece that runs to the next row's breakpoint; the last
    piece extends to +inf.  Left of the first breakpoint the signal is 0
    unless the first breakpoint is -inf.
    """
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Signal file {path} not found")
    frame = pd.read_csv(file_path, comment='#', skipinitialspace=True)
    required = ['breakpoint', 'formula_id']
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ValueError(f"Signal file {path} is missing columns {missing}")
    for column in ('p1', 'p2'):
        if column not in frame.columns:
            frame[column] = 0.0
    frame = frame.fillna({'p1': 0.0, 'p2': 0.0})
    starts = frame['breakpoint'].astype(float).tolist()
    if any(b >= a for a, b in zip(starts[1:], starts)) or len(starts) == 0:
        raise ValueError(f"Signal file {path}: breakpoints must be strictly increasing")

    pieces = []
    if math.isfinite(starts[0]):
        pieces.append(Piece(-INF, starts[0], Formula('none')))
    ends = starts[1:] + [INF]
    for (_, row), lo, hi in zip(frame.iterrows(), starts, ends):
        formula = Formula(str(row['formula_id']).strip(), float(row['p1']), float(row['p2']))
        pieces.append(Piece(lo, hi, formula))
    signal = PiecewiseSignal(f"csv:{file_path.stem}", tuple(pieces))
    logger.info("Loaded signal %s with %d pieces from %s", signal.name, len(pieces), path)
    return signal
