#!/usr/bin/env python3
"""
Tests for the kernel catalog and the kernel assumption checker
"""

import math

import numpy as np

from kernels import (FEJER_TAIL_CONSTANT, KernelDomainError, bspline, check_chi_assumptions,
                     combined_m, fejer, get_kernel, mellin_kernel, scaled_l1_norm, sinc)
from operators import SamplingGrid
from quadrature import IntegrationDomain, QuadratureConfig, integrate


def test_sinc_values():
    assert sinc(0.0) == 1.0
    assert abs(sinc(1.0)) <= 1e-15
    assert abs(sinc(0.5) - 2.0 / math.pi) <= 1e-12


def test_fejer_values_and_tail_bound():
    assert fejer(0.0) == 0.5
    assert abs(fejer(2.0)) <= 1e-15
    assert abs(fejer(1.0) - 2.0 / math.pi ** 2) <= 1e-12
    x = np.linspace(0.5, 200.0, 5000)
    assert np.all(fejer(x) <= FEJER_TAIL_CONSTANT / x ** 2 * (1 + 1e-12))


def test_bspline_values():
    assert abs(bspline(2, 0.0) - 1.0) <= 1e-15
    assert abs(bspline(3, 0.0) - 0.75) <= 1e-15
    assert bspline(4, 3.0) == 0.0


def test_bspline_order_zero_is_rejected():
    try:
        bspline(0, 0.0)
    except KernelDomainError:
        return
    raise AssertionError("order 0 was accepted")


def test_combined_m_values():
    assert abs(combined_m(0.0) - 1.0) <= 1e-12
    assert combined_m(2.5) == 0.0
    assert abs(get_kernel('combined-m').integral - 1.0) <= 1e-9


def test_partition_of_unity():
    rng = np.random.default_rng(12345)
    u = rng.uniform(-10.0, 10.0, 1000)
    ks = np.arange(-25, 26)
    offsets = u[:, None] - ks[None, :]
    for n in (1, 2, 3, 4):
        sums = bspline(n, offsets).sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) <= 1e-10, f"M_{n}"
    assert np.max(np.abs(combined_m(offsets).sum(axis=1) - 1.0)) <= 1e-10


def test_unit_mass():
    for n in range(1, 7):
        assert abs(get_kernel(f"bspline:{n}").integral - 1.0) <= 1e-9, f"M_{n}"
    assert abs(get_kernel('fejer').integral - 1.0) <= 2e-4


def test_symmetry():
    x = np.linspace(-6.0, 6.0, 2401)
    for n in (1, 2, 3, 4, 5):
        inner = np.abs(x) < n / 2.0
        assert np.allclose(bspline(n, x[inner]), bspline(n, -x[inner]), rtol=0, atol=1e-13)
    assert np.allclose(fejer(x), fejer(-x), rtol=1e-15, atol=0)


def test_catalog_names():
    for name in ('sinc', 'mellin', 'sinusoid'):
        try:
            get_kernel(name)
        except KernelDomainError:
            continue
        raise AssertionError(f"{name} should not resolve to an L1 kernel")
    assert get_kernel('bspline:3').is_compact
    assert not get_kernel('fejer').is_compact


def test_mellin_normalization():
    for w in (5.0, 20.0, 30.0):
        kernel = mellin_kernel(w)
        for x in (0.5, 1.0, 2.0):
            lo, hi = kernel.log_support(x)
            panels = max(8, int(math.ceil(w * (hi - lo) / 4)))
            mass = integrate(lambda t: kernel(x / t), IntegrationDomain.log_half_line(lo, hi),
                             QuadratureConfig(abs_tol=1e-10), min_panels=panels).value
            assert abs(mass - 1.0) <= 1e-8, (w, x, mass)
            assert abs(kernel.mass_at(x, QuadratureConfig(abs_tol=1e-10)) - mass) <= 1e-12


def test_mellin_rejects_bad_w():
    try:
        mellin_kernel(-1.0)
    except KernelDomainError:
        return
    raise AssertionError("negative w was accepted")


def test_scaled_l1_law():
    for name in ('fejer', 'bspline:3', 'bspline:4', 'combined-m'):
        kernel = get_kernel(name)
        for w in (1.0, 5.0, 40.0):
            scaled = w * scaled_l1_norm(kernel, w)
            assert abs(scaled - kernel.l1_norm) <= 1e-8, (name, w, scaled, kernel.l1_norm)


def test_checker_combined_m_regular():
    report = check_chi_assumptions(get_kernel('combined-m'), SamplingGrid.regular(), [5.0, 10.0],
                                   probe_count=200)
    assert report.valid
    assert report.chi2_partition_defect <= 1e-10
    assert 0.0 < report.chi3_moment_M <= 10.0
    assert report.chi4_monotone
    assert report.chi5_verified
    assert report.gamma_l1_bound == get_kernel('combined-m').l1_norm / 5.0


def test_checker_fejer_regular():
    report = check_chi_assumptions(get_kernel('fejer'), SamplingGrid.regular(), [10.0],
                                   probe_count=50, sum_tail_tol=1e-6)
    assert report.chi2_partition_defect <= 1e-6
    assert report.summation_radius >= 2.0 * FEJER_TAIL_CONSTANT / 1e-6
    assert report.chi5_verified


def test_checker_flags_irregular_grid_defect():
    report = check_chi_assumptions(get_kernel('combined-m'), SamplingGrid.irregular('sine'),
                                   [5.0], probe_count=100)
    assert report.chi2_partition_defect > 1e-6
    assert any('partition' in message for message in report.warnings)


def main():
    """Run all tests"""
    print("=" * 60)
    print("KERNELS - TEST SUITE")
    print("=" * 60)
    tests = [value for name, value in sorted(globals().items()) if name.startswith('test_')]
    for test in tests:
        test()
        print(f"✅ {test.__name__}: PASSED")
    print(f"\nAll {len(tests)} kernel tests passed")


if __name__ == "__main__":
    main()
