#!/usr/bin/env python3
"""
Tests for sampling grids, sample functionals, the seven operators, the
time-jitter variants and the sample-functional assumption checker
"""

import math

import numpy as np

from kernels import check_chi_assumptions, get_kernel
from operators import (SampleEvaluationError, SamplingGrid, apply_operator, boundedness_constant,
                       build_operator, check_L_assumptions, evaluate_on_grid, jitter_sensitivity,
                       jittered_operator, parse_grid, sample_functional_eval)
from orlicz import parse_phi
from signals import (const_signal, fig2_signal, fig3_signal, fig4_signal, indicator_signal,
                     parse_signal, tent_signal)

POWER_1 = parse_phi('power:p=1')


def test_grids():
    assert np.array_equal(SamplingGrid.regular().nodes(np.arange(-3, 4)), np.arange(-3, 4))
    grid = parse_grid('irregular:sine')
    gaps = grid.gaps(np.arange(-500, 500))
    assert np.all((gaps > grid.delta) & (gaps < grid.Delta))
    jittered = parse_grid('jitter:0.5')
    ks = np.arange(-100, 100)
    assert np.max(np.abs(jittered.jitter(ks, 10.0))) <= 0.05
    assert np.max(np.abs(jittered.jitter(ks, 40.0))) < np.max(np.abs(jittered.jitter(ks, 10.0)))
    for spec in ('hexagonal', 'irregular:unknown', 'jitter:-1'):
        try:
            parse_grid(spec)
        except ValueError:
            continue
        raise AssertionError(f"grid '{spec}' was accepted")


def test_build_operator_errors():
    for kwargs in ({'op_id': 't9'}, {'op_id': 't2', 'psi': 'fejer'},
                   {'op_id': 't6', 'kernel': 'fejer'}, {'op_id': 't1', 'kernel': 'sinc'}):
        try:
            build_operator(**kwargs)
        except ValueError:
            continue
        raise AssertionError(f"{kwargs} was accepted")


def test_sample_functionals_on_constants():
    c = const_signal(3.0)
    t2 = build_operator('t2')
    for k in (-7, 0, 12):
        assert abs(sample_functional_eval(t2, 10.0, k, c) - 3.0) <= 1e-12
    one = const_signal(1.0)
    assert abs(sample_functional_eval(build_operator('t5'), 4.0, 0.3, one) - 1.0) <= 1e-12
    t7 = build_operator('t7', kernel='mellin')
    for t in (0.2, 1.0, 7.5):
        assert abs(sample_functional_eval(t7, 20.0, t, one) - 1.0) <= 1e-10


def test_constant_reproduction():
    f = const_signal(2.0)
    for op_id in ('t1', 't2', 't4', 't5', 't6', 't7'):
        mellin = op_id in ('t6', 't7')
        spec = build_operator(op_id, kernel='mellin' if mellin else 'combined-m')
        xs = np.linspace(0.2, 5.0, 100) if mellin else np.linspace(-3.0, 3.0, 100)
        for w in (5.0, 40.0):
            evaluation = evaluate_on_grid(spec, w, f, xs)
            assert np.max(np.abs(evaluation.values - 2.0)) <= 1e-8, (op_id, w)
            assert evaluation.all_certified


def test_t1_reproduces_constants_exactly():
    spec = build_operator('t1')
    for x in (-1.234, 0.0, 0.05, 3.3):
        assert abs(apply_operator(spec, 10.0, const_signal(3.5), x).value - 3.5) <= 1e-12


def test_t4_mass_preserving():
    value = apply_operator(build_operator('t4'), 5.0, const_signal(1.0), 0.37)
    assert abs(value.value - 1.0) <= 1e-8 and value.certified


def test_t3_fejer_on_constants():
    """The cut Fejer tail is only certified when the signal decays beyond the cut"""
    spec = build_operator('t3', psi='fejer')
    xs = np.linspace(-1.0, 1.0, 11)
    flat = evaluate_on_grid(spec, 5.0, const_signal(2.0), xs)
    assert np.max(np.abs(flat.values - 2.0)) <= 1e-4
    assert not flat.certified.any()
    decaying = evaluate_on_grid(spec, 10.0, fig3_signal(), xs)
    assert decaying.all_certified

    assert const_signal(2.0).sup_outside(-1.0, 1.0) == 2.0
    assert fig3_signal().sup_outside(-10.0, 10.0) <= 1e-2


def test_t2_fig2_interior_point():
    value = apply_operator(build_operator('t2'), 40.0, fig2_signal(), -4.0)
    assert abs(value.value + 1.0) <= 0.02


def test_boundedness_bound():
    report = check_chi_assumptions(get_kernel('combined-m'), SamplingGrid.regular(), [5.0, 20.0])
    xs = np.linspace(-6.0, 3.0, 901)
    for op_id in ('t1', 't2'):
        spec = build_operator(op_id)
        bound = boundedness_constant(spec, report.chi3_moment_M) * fig2_signal().sup_norm
        for w in (5.0, 20.0):
            values = evaluate_on_grid(spec, w, fig2_signal(), xs).values
            assert np.max(np.abs(values)) <= bound + 1e-9, (op_id, w)
    t4 = build_operator('t4')
    values = evaluate_on_grid(t4, 10.0, fig3_signal(), np.linspace(-3.0, 4.0, 141)).values
    assert np.max(np.abs(values)) <= boundedness_constant(t4) * 2.0 + 1e-9

    window = np.linspace(-3.0, 4.0, 141)
    t3 = build_operator('t3', psi='fejer')
    bound = boundedness_constant(t3, report.chi3_moment_M) * fig3_signal().sup_norm
    assert np.max(np.abs(evaluate_on_grid(t3, 10.0, fig3_signal(), window).values)) <= bound + 1e-6
    t5 = build_operator('t5')
    values = evaluate_on_grid(t5, 10.0, fig3_signal(), window).values
    assert np.max(np.abs(values)) <= boundedness_constant(t5) * fig3_signal().sup_norm + 1e-9
    positive = np.linspace(0.2, 8.0, 157)
    for op_id in ('t6', 't7'):
        spec = build_operator(op_id, kernel='mellin')
        assert boundedness_constant(spec) == 1.0
        for w in (5.0, 30.0):
            values = evaluate_on_grid(spec, w, fig4_signal(), positive).values
            assert np.max(np.abs(values)) <= fig4_signal().sup_norm + 1e-8, (op_id, w)
    try:
        boundedness_constant(build_operator('t1'))
    except ValueError:
        return
    raise AssertionError("T1 bound without a moment was accepted")


def test_t7_prefactor_variants():
    exact = build_operator('t7', kernel='mellin')
    approx = build_operator('t7', kernel='mellin', approximate_prefactor=True)
    w, f = 5.0, const_signal(1.0)
    a = apply_operator(exact, w, f, 1.5).value
    b = apply_operator(approx, w, f, 1.5).value
    assert abs(a - 1.0) <= 1e-8
    assert abs(b - w * math.log1p(1.0 / w)) <= 1e-8


def test_sample_error_carries_context():
    try:
        evaluate_on_grid(build_operator('t1'), 5.0, fig4_signal(), [0.5])
    except SampleEvaluationError as e:
        assert e.kind == 'point' and e.w == 5.0
        return
    raise AssertionError("a sample outside the signal's domain was not reported")


def test_mellin_needs_positive_x():
    try:
        apply_operator(build_operator('t6', kernel='mellin'), 5.0, const_signal(1.0), -1.0)
    except ValueError:
        return
    raise AssertionError("x <= 0 was accepted for T6")


def test_zero_jitter_matches_clean_series():
    clean = build_operator('t1')
    still = build_operator('t1', grid='jitter:0')
    for x in (-0.7, 0.1, 0.95):
        assert jittered_operator(still, 10.0, tent_signal(), x).value == \
            apply_operator(clean, 10.0, tent_signal(), x).value


def test_jitter_keeps_constants():
    for op_id in ('t1', 't2'):
        spec = build_operator(op_id, grid='jitter:0.8')
        assert abs(jittered_operator(spec, 10.0, const_signal(2.0), 0.3).value - 2.0) <= 1e-12


def test_jitter_lipschitz_bound():
    eta, w = 0.5, 10.0
    report = check_chi_assumptions(get_kernel('combined-m'), SamplingGrid.regular(), [w])
    spec = build_operator('t1', grid=f"jitter:{eta}")
    xs = np.linspace(-1.5, 1.5, 61)
    moved = evaluate_on_grid(spec, w, tent_signal(), xs, jitter=True).values
    clean = evaluate_on_grid(spec, w, tent_signal(), xs).values
    assert np.max(np.abs(moved - clean)) <= report.chi3_moment_M * eta / w + 1e-12


def test_jitter_sensitivity_keys():
    point = build_operator('t1', grid='jitter:0.5')
    average = build_operator('t2', grid='jitter:0.5')
    result = jitter_sensitivity(point, average, 10.0, tent_signal(), np.linspace(-1.5, 1.5, 31))
    assert set(result) == {'T1', 'T2'}
    assert all(v >= 0.0 for v in result.values())
    try:
        jittered_operator(build_operator('t4'), 10.0, tent_signal(), 0.0)
    except ValueError:
        return
    raise AssertionError("time-jitter was accepted for T4")


def test_linearity():
    xs = np.linspace(-4.0, 2.0, 61)
    f, g = fig2_signal(), tent_signal()
    t1 = build_operator('t1')
    total = evaluate_on_grid(t1, 10.0, lambda x: f(x) + g(x), xs).values
    parts = evaluate_on_grid(t1, 10.0, f, xs).values + evaluate_on_grid(t1, 10.0, g, xs).values
    assert np.max(np.abs(total - parts)) <= 1e-12
    for op_id in ('t2', 't4'):
        spec = build_operator(op_id)
        base = evaluate_on_grid(spec, 10.0, f, xs).values
        for c in (-2.0, 0.5):
            scaled = evaluate_on_grid(spec, 10.0, f.scaled(c), xs).values
            assert np.max(np.abs(scaled - c * base)) <= 5e-9, (op_id, c)


def test_positivity_with_nonnegative_kernel():
    xs = np.linspace(-2.0, 2.0, 81)
    for op_id in ('t1', 't2', 't4', 't5'):
        spec = build_operator(op_id, kernel='bspline:2')
        for f in (tent_signal(), indicator_signal(0.0, 1.0)):
            values = evaluate_on_grid(spec, 10.0, f, xs).values
            assert np.min(values) >= -1e-12, (op_id, f.name)
    positive = np.linspace(0.2, 3.0, 57)
    for op_id in ('t6', 't7'):
        values = evaluate_on_grid(build_operator(op_id, kernel='mellin'), 10.0,
                                  indicator_signal(0.5, 1.5), positive).values
        assert np.min(values) >= -1e-12, op_id


def test_kantorovich_convolution_approaches_convolution():
    xs = np.linspace(-3.0, 3.0, 121)
    t4, t5 = build_operator('t4'), build_operator('t5')
    for f in (tent_signal(), parse_signal('gauss'), parse_signal('ramp')):
        gaps = []
        for w in (5.0, 40.0):
            a = evaluate_on_grid(t4, w, f, xs).values
            b = evaluate_on_grid(t5, w, f, xs).values
            gaps.append(np.max(np.abs(a - b)))
        assert gaps[1] < gaps[0], (f.name, gaps)


def test_L_check_kantorovich_bound_and_norm_class():
    report = check_L_assumptions(build_operator('t2'), indicator_signal(0.0, 1.0), POWER_1,
                                 [5.0, 10.0])
    assert not report.errors
    assert report.upsilon_empirical <= 1.0 + 1e-12 and report.upsilon_holds
    assert report.tail_exact_zero
    assert report.convergence_class == 'norm'
    assert all(row['holds'] for row in report.inequality_rows)


def test_L_check_generalized_series_tail_is_zero():
    report = check_L_assumptions(build_operator('t1'), tent_signal(), POWER_1, [5.0, 20.0])
    assert all(v == 0.0 for v in report.tail_by_w.values())
    assert report.flag == "norm and modular convergence"
    assert all(v >= 0.0 for v in report.continuity_sup_by_w.values())


def test_L_check_durrmeyer_is_non_local():
    spec = build_operator('t3', psi='fejer')
    report = check_L_assumptions(spec, fig3_signal(), parse_phi('zygmund:alpha=1,beta=1'), [10.0],
                                 window=(-3.0, 4.0))
    assert report.surrogate_note
    assert report.nonlocal_witness is not None
    w, k, value = report.nonlocal_witness
    assert w == 10.0 and abs(value) > 1e-4
    assert not -3.0 <= k / w <= 4.0
    assert report.tail_by_w[10.0] > 0.0
    assert report.convergence_class == 'modular-only'
    assert report.flag == "modular-only convergence (norm convergence not applicable)"
    assert report.tail_beyond_window_by_w[10.0] < 1e-3


def test_L_check_without_window_is_reported():
    report = check_L_assumptions(build_operator('t1'), fig2_signal(), POWER_1, [5.0])
    assert report.errors and report.convergence_class == 'not-applicable'


def main():
    """Run all tests"""
    print("=" * 60)
    print("OPERATORS - TEST SUITE")
    print("=" * 60)
    tests = [value for name, value in sorted(globals().items()) if name.startswith('test_')]
    for test in tests:
        test()
        print(f"✅ {test.__name__}: PASSED")
    print(f"\nAll {len(tests)} operator tests passed")


if __name__ == "__main__":
    main()
