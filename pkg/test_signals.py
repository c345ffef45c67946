#!/usr/bin/env python3
"""
Tests for the piecewise signal catalog and the CSV signal loader
"""

import math
import os
import tempfile

import numpy as np

from signals import (SignalDomainError, UnknownSignalError, catalog, fig2_signal, fig3_signal,
                     fig4_signal, load_signal_csv, parse_signal, tent_signal)


def test_reference_signal_values():
    assert fig2_signal()(-4.0) == -1.0
    assert fig3_signal()(1.0) == 2.0
    assert abs(fig4_signal()(5.0) + 0.2) <= 1e-15
    assert abs(fig2_signal()(-10.0) - 0.4) <= 1e-15


def test_fig4_domain():
    f = fig4_signal()
    assert abs(f(0.5) - 1.0) <= 1e-15
    for x in (0.0, -1.0):
        try:
            f(x)
        except SignalDomainError:
            continue
        raise AssertionError(f"fig4 accepted x={x}")


def test_parameterized_signals():
    assert parse_signal('const:2')(7.3) == 2.0
    indicator = parse_signal('indicator:0,1')
    assert indicator(0.5) == 1.0
    assert indicator(1.0) == 0.0
    assert indicator(0.0) == 1.0


def test_fig2_breakpoints():
    assert fig2_signal().breakpoints == (-5.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0)
    assert fig2_signal().jumps == fig2_signal().breakpoints


def test_unknown_signal():
    for spec in ('square', 'indicator:1', 'const:abc'):
        try:
            parse_signal(spec)
        except UnknownSignalError:
            continue
        raise AssertionError(f"'{spec}' was accepted")


def test_catalog_metadata():
    signals = catalog()
    for name in ('fig2', 'fig3', 'fig4', 'const:1', 'indicator:0,1', 'ramp', 'gauss', 'tent'):
        assert name in signals
        assert isinstance(signals[name].continuity_intervals, list)


def test_compact_signals_vanish_outside_support():
    for name, f in catalog().items():
        support = f.support_bound
        if support is None or support == (0.0, 0.0):
            continue
        lo, hi = support
        outside = np.concatenate([np.linspace(lo - 10.0, lo, 200, endpoint=False),
                                  np.linspace(hi, hi + 10.0, 200)])
        outside = outside[outside > f.domain_lo]
        assert np.all(f(outside) == 0.0), name


def test_pieces_match_formulas():
    rng = np.random.default_rng(12345)
    for f in (fig2_signal(), fig3_signal(), fig4_signal()):
        for piece in f.pieces:
            lo = piece.lo if math.isfinite(piece.lo) else piece.hi - 10.0
            lo = max(lo, f.domain_lo)
            hi = piece.hi if math.isfinite(piece.hi) else piece.lo + 10.0
            x = rng.uniform(lo, hi, 1000)
            x = x[(x > lo) & (x < hi)]
            assert np.array_equal(f(x), piece.formula(x)), (f.name, piece)


def test_continuity_intervals():
    assert tent_signal().jumps == ()
    assert tent_signal().continuity_intervals == [(-math.inf, math.inf)]
    assert len(fig3_signal().continuity_intervals) == 4


def test_restricted_surrogate():
    f = fig2_signal()
    g = f.restricted(-6.0, 3.0)
    assert g.is_compact
    assert g.support_bound == (-6.0, 3.0)
    x = np.linspace(-6.0, 2.999, 1000)
    assert np.array_equal(f(x), g(x))
    assert g(-7.0) == 0.0 and g(3.5) == 0.0


def test_sup_norm():
    assert fig2_signal().sup_norm == 2.0
    assert fig3_signal().sup_norm == 2.0
    assert tent_signal().sup_norm == 1.0


def test_load_signal_csv():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'step_ramp.csv')
        with open(path, 'w', encoding='utf-8') as f:
            f.write("breakpoint,formula_id,p1,p2\n-2,const,1,0\n0,linear,1,-0.5\n2,none,0,0\n")
        signal = load_signal_csv(path)
        assert signal.breakpoints == (-2.0, 0.0, 2.0)
        assert signal(-3.0) == 0.0
        assert signal(-1.0) == 1.0
        assert abs(signal(1.0) - 0.5) <= 1e-15
        assert signal(5.0) == 0.0
        assert signal.is_compact
        assert parse_signal(f"csv:{path}")(-1.0) == 1.0


def test_load_signal_csv_rejects_unsorted_rows():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'bad.csv')
        with open(path, 'w', encoding='utf-8') as f:
            f.write("breakpoint,formula_id,p1,p2\n1,const,1,0\n0,const,2,0\n")
        try:
            load_signal_csv(path)
        except ValueError:
            return
    raise AssertionError("unsorted breakpoints were accepted")


def main():
    """Run all tests"""
    print("=" * 60)
    print("SIGNALS - TEST SUITE")
    print("=" * 60)
    tests = [value for name, value in sorted(globals().items()) if name.startswith('test_')]
    for test in tests:
        test()
        print(f"✅ {test.__name__}: PASSED")
    print(f"\nAll {len(tests)} signal tests passed")


if __name__ == "__main__":
    main()
