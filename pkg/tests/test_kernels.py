import math

import numpy as np
import pytest

from dampedwave.kernels import (
    KernelFactory,
    ModeState,
    euler_kernel,
    fundamental_pair,
    kernel_bound_report,
    mode_kernel,
    mode_kernel_radii,
    ode_oracle,
)
from dampedwave.params import coefficients_for_mu, derive_coefficients

MUS = (0.0, 0.1, 0.1875, 0.25, 0.5)


def _rel_diff(a, b):
    scale = max(1.0, abs(b.E0), abs(b.E1), abs(b.E0_dot), abs(b.E1_dot))
    return max(abs(a.E0 - b.E0), abs(a.E1 - b.E1),
               abs(a.E0_dot - b.E0_dot), abs(a.E1_dot - b.E1_dot)) / scale


def test_identity_at_equal_times():
    for mu in MUS:
        c = coefficients_for_mu(mu, 3)
        k = mode_kernel(c, 3.7, 3.7, 0.8)
        assert k.E0 == pytest.approx(1.0, abs=1e-14)
        assert k.E1 == pytest.approx(0.0, abs=1e-14)
        assert k.E0_dot == pytest.approx(0.0, abs=1e-14)
        assert k.E1_dot == pytest.approx(1.0, abs=1e-14)


def test_free_wave_closed_form():
    c = derive_coefficients(2.0, 0.0, 3)  # mu = 0
    for (t, t0, xi) in [(5.0, 0.0, 1.3), (100.0, 1.0, 0.01), (3.0, 2.0, 7.0)]:
        k = mode_kernel(c, t, t0, xi)
        assert abs(k.E0 - math.cos((t - t0) * xi)) < 1e-10
        assert abs(k.E1 - math.sin((t - t0) * xi) / xi) < 1e-10


def test_determinant_identity():
    rng = np.random.default_rng(3)
    for _ in range(40):
        mu = rng.choice(MUS)
        c = coefficients_for_mu(float(mu), 3)
        t0, t = np.sort(rng.uniform(0.0, 80.0, 2))
        xi = 10 ** rng.uniform(-1.5, 1.5)
        k = mode_kernel(c, float(t), float(t0), float(xi))
        assert abs(k.determinant() - 1.0) <= 1e-9


def test_cocycle_property():
    rng = np.random.default_rng(11)
    for _ in range(40):
        c = coefficients_for_mu(float(rng.choice([0.1875, 0.5])), 3)
        t0, t1, t2 = np.sort(rng.uniform(0.0, 60.0, 3))
        xi = 10 ** rng.uniform(-1.5, 1.3)
        direct = mode_kernel(c, float(t2), float(t0), float(xi)).matrix()
        composed = (mode_kernel(c, float(t2), float(t1), float(xi)).matrix()
                    @ mode_kernel(c, float(t1), float(t0), float(xi)).matrix())
        assert np.max(np.abs(direct - composed)) <= 1e-8 * max(1.0, np.max(np.abs(direct)))


def test_strategy_agreement():
    for mu in (0.1, 0.25, 0.5):
        c = coefficients_for_mu(mu, 3)
        for xi in (0.1, 1.0):
            for (t, t0) in [(10.0, 0.0), (40.0, 1.0)]:
                kb = mode_kernel(c, t, t0, xi)
                ko = mode_kernel(c, t, t0, xi, strategy="ode_oracle")
                assert _rel_diff(kb, ko) < 1e-7


def test_oracle_trivial_cases():
    c = coefficients_for_mu(0.0, 3)
    out = ode_oracle(c, 7.0, 0.0, 1.0, ModeState(1.0, 0.0))
    assert out.value == pytest.approx(math.cos(7.0), abs=1e-9)
    same = ode_oracle(coefficients_for_mu(0.3, 3), 5.0, 5.0, 2.0, ModeState(0.3, -0.1))
    assert same == ModeState(0.3, -0.1)


def test_fundamental_pair_wronskian():
    for mu in MUS:
        c = coefficients_for_mu(mu, 3)
        for t in (0.0, 3.0, 50.0):
            for xi in (0.05, 1.0, 12.0):
                ep, em, epd, emd = fundamental_pair(c, t, xi)
                w = ep * emd - epd * em
                assert abs(w - 2.0 * xi / math.pi) < 1e-9 * (2.0 * xi / math.pi)


def test_fundamental_log_envelope_at_quarter():
    # at mu = 1/4 the second solution carries the log factor for small tau
    c = coefficients_for_mu(0.25, 3)
    for xi in (0.01, 0.1, 1.0):
        _, em, _, _ = fundamental_pair(c, 0.0, xi)
        tau = xi
        bound = math.sqrt(tau) * (1.0 + abs(math.log(tau)))
        assert abs(em) <= 2.0 * bound


def test_free_wave_half_order_pair():
    # mu = 0: e+ = sqrt(2/pi) sin(tau), e- = -sqrt(2/pi) cos(tau)
    c = derive_coefficients(2.0, 0.0, 3)
    amp = math.sqrt(2.0 / math.pi)
    for (t, xi) in [(0.0, 1.0), (4.0, 0.3), (2.0, 9.0)]:
        tau = (1.0 + t) * xi
        ep, em, _, _ = fundamental_pair(c, t, xi)
        assert abs(ep - amp * math.sin(tau)) < 1e-10
        assert abs(em + amp * math.cos(tau)) < 1e-10


def test_realness_imaginary_order():
    c = coefficients_for_mu(0.4375, 3)  # nu = 0.4330...j
    e0, e1, e0d, e1d = mode_kernel_radii(c, 20.0, 0.0, np.geomspace(0.01, 30.0, 50))
    for arr in (e0, e1, e0d, e1d):
        assert np.all(np.isfinite(arr))


def test_euler_kernel_zero_mode():
    # determinant and identity for the zero-frequency closed form
    for mu in MUS:
        c = coefficients_for_mu(mu, 3)
        k0, k1, k0d, k1d = euler_kernel(c, 5.0, 5.0)
        assert (k0, k1, k0d, k1d) == pytest.approx((1.0, 0.0, 0.0, 1.0), abs=1e-12)
        a0, a1, a0d, a1d = euler_kernel(c, 12.0, 2.0)
        assert a0 * a1d - a1 * a0d == pytest.approx(1.0, rel=1e-10)
    # mu = 0 degenerates to E1 = t - t0
    c0 = derive_coefficients(2.0, 0.0, 3)
    assert euler_kernel(c0, 7.0, 3.0)[1] == pytest.approx(4.0, rel=1e-12)


def test_kernel_radii_includes_zero():
    c = coefficients_for_mu(0.1875, 3)
    radii = np.array([0.0, 0.5, 2.0])
    e0, e1, e0d, e1d = mode_kernel_radii(c, 4.0, 0.0, radii)
    ek = euler_kernel(c, 4.0, 0.0)
    assert e0[0] == pytest.approx(ek[0]) and e1[0] == pytest.approx(ek[1])


def test_kernel_factory_matches_direct():
    c = coefficients_for_mu(0.25, 3)
    radii = np.concatenate(([0.0], np.geomspace(0.05, 20.0, 40)))
    factory = KernelFactory(c, radii)
    ref = mode_kernel_radii(c, 9.0, 1.0, radii)
    got = factory.tables(9.0, 1.0)
    for a, b in zip(got, ref):
        assert np.max(np.abs(a - b)) < 1e-12
    # cached sides reused
    again = factory.tables(9.0, 1.0)
    for a, b in zip(again, got):
        assert np.array_equal(a, b)


def test_preconditions():
    c = coefficients_for_mu(0.1, 3)
    with pytest.raises(ValueError):
        mode_kernel(c, 1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        mode_kernel(c, 2.0, 1.0, 1.0, strategy="nope")
    with pytest.raises(ValueError):
        fundamental_pair(c, 1.0, 0.0)


def _report_grid():
    ts = np.linspace(0.0, 100.0, 9)
    t0s = (0.0, 1.0, 10.0)
    xis = 10 ** np.linspace(-2, 2, 9)
    return [(float(t), t0, float(xi)) for t in ts for t0 in t0s if t >= t0 for xi in xis]


@pytest.mark.parametrize("mu", [0.0, 0.1875, 0.25, 0.5])
def test_kernel_bounds_measured_constant(mu):
    report = kernel_bound_report(coefficients_for_mu(mu, 3), _report_grid())
    assert report.worst() <= 10.0, report.max_ratio


def test_kernel_bounds_negative_mu():
    # growth regime: Re nu > 1/2, bounds scale with (1+t)^{-1/2+Re nu}
    report = kernel_bound_report(coefficients_for_mu(-0.5, 3), _report_grid())
    assert report.worst() <= 10.0, report.max_ratio


def test_kernel_bounds_empty_grid():
    with pytest.raises(ValueError):
        kernel_bound_report(coefficients_for_mu(0.1, 3), [])
