import numpy as np
import pytest

from dampedwave.errors import DivergenceError, HorizonError
from dampedwave.fields import (
    FieldState,
    GridSpec,
    free_wave_evolve,
    linear_evolve,
    liouville,
    pair_diff_norm,
    norms,
)
from dampedwave.params import coefficients_for_mu, derive_coefficients
from dampedwave.presets import gaussian
from dampedwave.scattering import (
    DecayCurve,
    decay_curve,
    dw_retransform_check,
    exact_linear_profile,
    extract_profile,
    fit_decay,
    growth_experiment,
    linear_scatter_experiment,
    log_spaced_times,
)


@pytest.fixture(scope="module")
def harness():
    grid = GridSpec(d=1, n=4096, half_width=1024.0)
    return grid, gaussian(grid, width=2.0)


def _trajectory(c, data):
    return lambda t: linear_evolve(c, data, t)


def test_extract_profile_free_case(harness):
    grid, data = harness
    c = derive_coefficients(2.0, 0.0, 1)  # mu = 0
    for t_ext in (50.0, 100.0):
        prof = extract_profile(c, _trajectory(c, data), t_ext)
        assert prof.tail_bound == 0.0
        assert pair_diff_norm(prof.state, data) <= 1e-10


def test_extract_profile_cauchy_bound(harness):
    grid, data = harness
    c = coefficients_for_mu(0.1875, 1)
    traj = _trajectory(c, data)
    p100 = extract_profile(c, traj, 100.0)
    p200 = extract_profile(c, traj, 200.0)
    diff = pair_diff_norm(p100.state, p200.state)
    assert diff <= p100.tail_bound
    assert norms(p200.state).energy_pair > 0.0  # nontrivial profile for mu in (0, 1/4)


def test_extract_profile_horizon(harness):
    grid, data = harness
    c = coefficients_for_mu(0.1875, 1)
    with pytest.raises(HorizonError):
        extract_profile(c, _trajectory(c, data), 5000.0)


def test_extract_profile_flags_non_cauchy(harness):
    grid, data = harness
    c = coefficients_for_mu(0.1875, 1)

    def fake_trajectory(t):  # artificially growing, not a solution
        return FieldState(grid=grid, v=(1.0 + t) * data.v, vt=data.vt, t=t)

    with pytest.raises(DivergenceError):
        extract_profile(c, fake_trajectory, 100.0, diagnose=True)


def test_exact_profile_matches_truncated(harness):
    # the infinite-time profile is within the certified tail bound of the
    # truncated extraction
    grid, data = harness
    c = coefficients_for_mu(0.1875, 1)
    traj = _trajectory(c, data)
    exact = exact_linear_profile(c, data)
    assert exact.tail_bound == 0.0
    trunc = extract_profile(c, traj, 400.0)
    assert pair_diff_norm(exact.state, trunc.state) <= trunc.tail_bound


def test_decay_curve_free_case(harness):
    grid, data = harness
    c = derive_coefficients(2.0, 0.0, 1)
    profile = exact_linear_profile(c, data)
    curve = decay_curve(c, _trajectory(c, data), profile, [1.0, 10.0, 100.0])
    assert np.max(curve.err_pair) <= 1e-10


def test_decay_curve_monotone(harness):
    grid, data = harness
    c = coefficients_for_mu(0.1875, 1)
    profile = exact_linear_profile(c, data)
    curve = decay_curve(c, _trajectory(c, data), profile, log_spaced_times(20, 800, 15))
    increases = np.diff(curve.err_pair)
    assert np.all(increases <= 1e-6 * curve.err_pair[:-1] + 1e-12)


def test_decay_ratio_matches_rate(harness):
    grid, data = harness
    c = coefficients_for_mu(0.1875, 1)
    profile = exact_linear_profile(c, data)
    curve = decay_curve(c, _trajectory(c, data), profile, [100.0, 200.0])
    ratio = curve.err_pair[0] / curve.err_pair[1]
    assert abs(ratio - 2.0 ** 0.25) <= 0.15 * 2.0 ** 0.25


def test_fit_decay_synthetic():
    t = log_spaced_times(5.0, 500.0, 30)
    curve = DecayCurve(times=t, err_pair=(1.0 + t) ** -0.25,
                       err_pos=(1.0 + t) ** -0.25, err_vel=(1.0 + t) ** -0.25)
    fit = fit_decay(curve, coefficients_for_mu(0.1875, 1), window=(5.0, 500.0))
    assert abs(fit.exponent + 0.25) < 1e-6
    assert fit.residual < 1e-10


def test_fit_decay_sentinel_exact():
    t = log_spaced_times(5.0, 500.0, 30)
    tiny = np.full(t.shape, 1e-14)
    curve = DecayCurve(times=t, err_pair=tiny, err_pos=tiny, err_vel=tiny)
    fit = fit_decay(curve, derive_coefficients(2.0, 0.0, 1), window=(5.0, 500.0))
    assert fit.exact


def test_fit_decay_window_validation():
    t = np.linspace(10.0, 15.0, 20)
    curve = DecayCurve(times=t, err_pair=np.ones_like(t), err_pos=np.ones_like(t),
                       err_vel=np.ones_like(t))
    with pytest.raises(ValueError):
        fit_decay(curve, coefficients_for_mu(0.1, 1), window=(10.0, 15.0))
    few = log_spaced_times(1.0, 100.0, 5)
    curve = DecayCurve(times=few, err_pair=np.ones_like(few), err_pos=np.ones_like(few),
                       err_vel=np.ones_like(few))
    with pytest.raises(ValueError):
        fit_decay(curve, coefficients_for_mu(0.1, 1), window=(1.0, 100.0))


def test_fitted_deviation_mid_mu(harness):
    grid, data = harness
    c = coefficients_for_mu(0.1, 1)
    res = linear_scatter_experiment(c, grid, data, t_max=800.0, n_samples=20,
                                    t_min=40.0, window=(50.0, 800.0))
    assert res.fit.abs_deviation <= 0.1


def test_error_scales_linearly_in_mu():
    grid = GridSpec(d=1, n=4096, half_width=512.0)
    data = gaussian(grid, width=2.0)
    errs = {}
    for mu in (0.01, 0.02, 0.04):
        c = coefficients_for_mu(mu, 1)
        profile = exact_linear_profile(c, data)
        errs[mu] = decay_curve(c, _trajectory(c, data), profile, [100.0]).err_pair[0]
    for lo, hi in ((0.01, 0.02), (0.02, 0.04)):
        ratio = errs[hi] / errs[lo]
        assert 1.0 <= ratio <= 4.0  # doubling mu doubles the error within a factor 2


def test_cauchy_differences_decreasing(harness):
    grid, data = harness
    c = coefficients_for_mu(0.1875, 1)
    traj = _trajectory(c, data)
    diffs = []
    for tau in (25.0, 50.0, 100.0, 200.0):
        a = free_wave_evolve(traj(tau), 0.0)
        b = free_wave_evolve(traj(2 * tau), 0.0)
        diffs.append(pair_diff_norm(a, b))
    assert all(x > y for x, y in zip(diffs[:-1], diffs[1:]))


def test_dw_mu1_zero_matches_kg_curve(harness):
    grid, data = harness
    c = coefficients_for_mu(0.1875, 1, mu1=0.0)
    profile = exact_linear_profile(c, data)
    times = log_spaced_times(20, 200, 9)
    kg = decay_curve(c, _trajectory(c, data), profile, times)
    dw = dw_retransform_check(c, _trajectory(c, data), profile, times)
    assert np.allclose(kg.err_pos, dw.err_pos, rtol=1e-12)
    assert np.allclose(kg.err_vel, dw.err_vel, rtol=1e-12)


def test_dw_exact_free_case(harness):
    # mu1 = 2, mu2 = 0: the transformed equation is the free wave equation,
    # so the position error vanishes; the velocity error reduces to the
    # modulation-derivative term (1+t)^{-2} ||v(t)||_2 exactly
    grid, data = harness
    c = derive_coefficients(2.0, 0.0, 1)
    profile = exact_linear_profile(c, data)
    times = [10.0, 50.0]
    curve = dw_retransform_check(c, _trajectory(c, data), profile, times)
    assert np.max(curve.err_pos) <= 1e-9
    data_l2 = norms(data).l2
    for t, ev in zip(times, curve.err_vel):
        v_t = linear_evolve(c, data, t)
        expected = norms(v_t).l2 / (1.0 + t) ** 2
        assert ev == pytest.approx(expected, rel=1e-9)
        assert ev * (1.0 + t) <= 10.0 * data_l2  # decays at least like (1+t)^{-1}


def test_dw_velocity_error_bound():
    # velocity error carries the (mu + mu1) prefactor and the same modulated
    # rate as the position error; the implicit constant is measured
    c = derive_coefficients(1.0, 0.0, 1)  # mu = 1/4, log-corrected rate
    grid = GridSpec(d=1, n=4096, half_width=4096.0)
    u0 = gaussian(grid, width=800.0)
    u_data = FieldState(grid=grid, v=u0.v, vt=-u0.v, t=0.0)
    v_data = liouville(u_data, c.mu1, "to_kg")
    profile = exact_linear_profile(c, v_data)
    times = log_spaced_times(50.0, 800.0, 10)
    curve = dw_retransform_check(c, _trajectory(c, v_data), profile, times)
    data_l2 = norms(u_data).l2 + np.sqrt(grid.dx * np.sum(u_data.vt ** 2))
    rate = (1.0 + times) ** -1.0 * (1.0 + np.log(1.0 + times))
    ratios = curve.err_vel / ((c.mu + abs(c.mu1)) * rate * data_l2)
    assert np.max(ratios) <= 10.0


def test_growth_experiment_prediction():
    grid = GridSpec(d=1, n=512, half_width=65536.0)
    base = gaussian(grid, width=15000.0)
    c = coefficients_for_mu(0.1875, 1)
    data = FieldState(grid=grid, v=base.v, vt=(0.5 + c.re_nu) * base.v, t=0.0)
    res = growth_experiment(c, grid, data, t_min=100.0, t_max=1000.0, n_samples=10)
    assert abs(res.slope - res.prediction) <= 0.07
