"""Scattering profiles, decay curves, and asymptotic-order fits.

The scattering profile v+ is the limit of W(-t)(v, v_t)(t) in Hdot1 x L2.
For linear trajectories two extraction routes are provided: truncation at a
finite time with a certified tail bound, and the exact infinite-time limit
computed per mode from the amplitude/phase asymptotics of the Bessel
fundamental pair.  Decay curves of the scattering error are fitted as power
laws of (1+t), with the log-corrected model compared at mu = 1/4, and the
damped-wave retransform check measures the extra (1+t)^{-mu1/2} shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bessel import bessel_eval_array
from .errors import DivergenceError
from .fields import (
    FieldState,
    GridSpec,
    _spectral_tables,
    _to_real_field,
    check_horizon,
    free_wave_evolve,
    linear_evolve,
    liouville,
    norms,
    lp_norm,
)
from .params import CoefficientSet, predict_rates

Trajectory = Callable[[float], FieldState]


@dataclass(frozen=True)
class ScatterProfile:
    """Free-wave profile (v+, component pair) in the scattering frame t=0."""

    state: FieldState
    extraction_time: float
    tail_bound: float

    def reference_at(self, t: float) -> FieldState:
        """W(t) v+, the modified free solution the trajectory is compared to."""
        return free_wave_evolve(self.state, t)


@dataclass
class DecayCurve:
    """Sampled scattering-error norms over time."""

    times: np.ndarray
    err_pair: np.ndarray
    err_pos: np.ndarray
    err_vel: np.ndarray
    kind: str = "kg"  # "kg" or "dw"


@dataclass
class DecayFit:
    """Least-squares power law err ~ amplitude * (1+t)^exponent in log space."""

    exponent: float
    log_model: bool
    residual: float
    window: tuple[float, float]
    prediction: float
    abs_deviation: float
    amplitude: float = math.nan
    log_residual: float = math.nan
    log_amplitude: float = math.nan
    exact: bool = False


# ---------------------------------------------------------------------------
# profile extraction
# ---------------------------------------------------------------------------

def _backward_to_scatter_frame(state: FieldState) -> FieldState:
    """W(-t) applied to the pair; the result lives at t = 0."""
    return free_wave_evolve(state, 0.0)


def _l2_growth_envelope(c: CoefficientSet, t: float) -> float:
    s = 1.0 + t
    if c.mu == 0.25:
        return math.sqrt(s) * (1.0 + math.log(s))
    return s ** (0.5 + c.re_nu)


def _tail_integral(c: CoefficientSet, t_ext: float) -> float:
    """Closed form of the tail integral of (1+s)^{-2} times the L2 envelope."""
    s = 1.0 + t_ext
    if c.mu == 0.25:
        return s ** -0.5 * (6.0 + 2.0 * math.log(s))
    sigma = 0.5 + c.re_nu
    if sigma >= 1.0:
        return math.inf
    return s ** (sigma - 1.0) / (1.0 - sigma)


def extract_profile(c: CoefficientSet, trajectory: Trajectory, t_ext: float,
                    diagnose: bool = False) -> ScatterProfile:
    """Truncated profile W(-T) (v, v_t)(T) with a certified tail bound.

    The tail bound inserts the measured L2 growth constant of the trajectory
    into the closed-form tail integral of the mass source.  With diagnose
    enabled, extractions at T/4, T/2, T must have decreasing differences,
    else the trajectory is reported as non-Cauchy.
    """
    if c.mu < 0:
        raise ValueError("profile extraction requires mu >= 0")
    start = trajectory(0.0)
    check_horizon(start, t_ext)
    pair_t = trajectory(t_ext)
    profile = _backward_to_scatter_frame(pair_t)
    if c.mu == 0.0:
        tail = 0.0
    else:
        growth_const = 0.0
        for probe in (t_ext / 4.0, t_ext / 2.0, t_ext):
            sample = trajectory(probe)
            growth_const = max(growth_const,
                               lp_norm(sample.v, sample.grid, 2.0) / _l2_growth_envelope(c, probe))
        tail = c.mu * growth_const * _tail_integral(c, t_ext)
    if diagnose:
        p1 = _backward_to_scatter_frame(trajectory(t_ext / 4.0))
        p2 = _backward_to_scatter_frame(trajectory(t_ext / 2.0))
        d01 = _pair_dist(p1, p2)
        d12 = _pair_dist(p2, profile)
        if d12 > d01 and d12 > 10.0 * max(tail, 1e-300):
            raise DivergenceError(
                f"extraction differences grow: {d01:.3e} -> {d12:.3e}; trajectory not Cauchy")
    return ScatterProfile(state=profile, extraction_time=t_ext, tail_bound=tail)


def _pair_dist(a: FieldState, b: FieldState) -> float:
    return norms(FieldState(grid=a.grid, v=a.v - b.v, vt=a.vt - b.vt, t=0.0)).energy_pair


def exact_linear_profile(c: CoefficientSet, state0: FieldState,
                         tau_switch: float = 10.0, tau_asym: float = 40.0) -> ScatterProfile:
    """Exact infinite-time profile of a linear trajectory, mode by mode.

    Writing each mode as A e_J + B e_Y, the large-argument form of the
    fundamental pair makes W(-t) of the mode converge to

        v+   = sqrt(2/pi) (A cos(r - phi) + B sin(r - phi)),
        v+_t = sqrt(2/pi) r (-A sin(r - phi) + B cos(r - phi)),

    with phi = nu pi/2 + pi/4.  No truncation error: the reported
    tail_bound is zero.
    """
    grid = state0.grid
    _, radii, inverse = _spectral_tables(grid)
    vhat = np.fft.fftn(state0.v)
    vthat = np.fft.fftn(state0.vt)

    r = radii[1:]
    tau0 = (1.0 + state0.t) * r
    j, y, jp, yp, _ = bessel_eval_array(c.nu, tau0, tau_switch, tau_asym)
    sq = np.sqrt(tau0)
    ej = sq * j
    ey = sq * y
    ejd = r * (0.5 * j / sq + sq * jp)
    eyd = r * (0.5 * y / sq + sq * yp)
    w = ej * eyd - ejd * ey  # 2 r / pi

    phi = c.nu * math.pi / 2.0 + math.pi / 4.0
    theta = r - phi
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    amp = math.sqrt(2.0 / math.pi)

    # per-radius 2x2 tables mapping (vhat, vthat) at t0 to the profile pair
    m00 = np.concatenate(([1.0 + 0j], amp * (cos_t * eyd - sin_t * ejd) / w))
    m01 = np.concatenate(([0.0 + 0j], amp * (sin_t * ej - cos_t * ey) / w))
    m10 = np.concatenate(([0.0 + 0j], amp * r * (-sin_t * eyd - cos_t * ejd) / w))
    m11 = np.concatenate(([0.0 + 0j], amp * r * (cos_t * ej + sin_t * ey) / w))

    plus_v = m00[inverse] * vhat + m01[inverse] * vthat
    plus_vt = m10[inverse] * vhat + m11[inverse] * vthat
    state = FieldState(grid=grid,
                       v=_to_real_field(np.fft.ifftn(plus_v), "profile v"),
                       vt=_to_real_field(np.fft.ifftn(plus_vt), "profile vt"),
                       t=0.0)
    return ScatterProfile(state=state, extraction_time=math.inf, tail_bound=0.0)


# ---------------------------------------------------------------------------
# decay curves and fits
# ---------------------------------------------------------------------------

def decay_curve(c: CoefficientSet, trajectory: Trajectory, profile: ScatterProfile,
                times) -> DecayCurve:
    """Scattering-error norms ||(v, v_t)(t) - W(t) v+|| sampled over times."""
    times = np.asarray(sorted(times), dtype=np.float64)
    err_pair = np.empty(times.shape)
    err_pos = np.empty(times.shape)
    err_vel = np.empty(times.shape)
    for i, t in enumerate(times):
        pair = trajectory(float(t))
        ref = profile.reference_at(float(t))
        diff = FieldState(grid=pair.grid, v=pair.v - ref.v, vt=pair.vt - ref.vt, t=float(t))
        rep = norms(diff)
        err_pos[i] = rep.hdot1
        err_vel[i] = lp_norm(diff.vt, diff.grid, 2.0)
        err_pair[i] = rep.energy_pair
    return DecayCurve(times=times, err_pair=err_pair, err_pos=err_pos, err_vel=err_vel)


def _log_corrected_shape(t: np.ndarray) -> np.ndarray:
    return (1.0 + t) ** -0.5 * (1.0 + np.log(1.0 + t))


def fit_decay(curve: DecayCurve, c: CoefficientSet, component: str = "pair",
              window: tuple[float, float] | None = None,
              prediction: float | None = None) -> DecayFit:
    """Least-squares slope of log err against log (1+t).

    Requires at least 8 samples spanning a decade in (1+t) within the fit
    window (default [t_max/10, t_max]).  When mu = 1/4, the one-parameter
    log-corrected model A (1+t)^{-1/2}(1+log(1+t)) is fitted alongside and
    log_model records whether it beats the best pure power in RMS.
    """
    err = {"pair": curve.err_pair, "pos": curve.err_pos, "vel": curve.err_vel}[component]
    t = curve.times
    if window is None:
        window = (float(t.max()) / 10.0, float(t.max()))
    mask = (t >= window[0]) & (t <= window[1])
    t_w, err_w = t[mask], err[mask]
    if prediction is None:
        rates = predict_rates(c)
        prediction = rates.linear_order
    if len(t_w) < 8:
        raise ValueError(f"need >= 8 samples in window {window}, got {len(t_w)}")
    if float(np.max(err_w)) < 1e-12:
        return DecayFit(exponent=math.nan, log_model=False, residual=0.0, window=window,
                        prediction=prediction, abs_deviation=0.0, exact=True)
    span = (1.0 + t_w.max()) / (1.0 + t_w.min())
    if span < 10.0:
        raise ValueError(f"window must span a decade in (1+t); got factor {span:.2f}")
    x = np.log1p(t_w)
    z = np.log(err_w)
    slope, intercept = np.polyfit(x, z, 1)
    resid = float(np.sqrt(np.mean((z - (slope * x + intercept)) ** 2)))
    fit = DecayFit(exponent=float(slope), log_model=False, residual=resid, window=window,
                   prediction=prediction, abs_deviation=abs(float(slope) - prediction),
                   amplitude=float(np.exp(intercept)))
    if c.mu == 0.25:
        shape = np.log(_log_corrected_shape(t_w))
        log_amp = float(np.mean(z - shape))
        log_resid = float(np.sqrt(np.mean((z - (shape + log_amp)) ** 2)))
        fit.log_residual = log_resid
        fit.log_amplitude = math.exp(log_amp)
        fit.log_model = log_resid < resid
    return fit


def dw_retransform_check(c: CoefficientSet, kg_trajectory: Trajectory,
                         profile: ScatterProfile, times) -> DecayCurve:
    """Damped-wave error curve against the (1+t)^{-mu1/2}-modulated profile.

    Position error in Hdot1 and velocity error in L2 of

        u(t) - (1+t)^{-mu1/2} (W(t) v+)_1,
        u_t(t) - (1+t)^{-mu1/2} (W(t) v+)_2,

    where u is recovered from the Klein-Gordon trajectory by the inverse
    Liouville transform (the velocity uses the exact derivative relation).
    """
    times = np.asarray(sorted(times), dtype=np.float64)
    err_pair = np.empty(times.shape)
    err_pos = np.empty(times.shape)
    err_vel = np.empty(times.shape)
    for i, t in enumerate(times):
        t = float(t)
        pair = kg_trajectory(t)
        u_state = liouville(pair, c.mu1, "to_dw")
        ref = profile.reference_at(t)
        fac = (1.0 + t) ** (-c.mu1 / 2.0)
        diff = FieldState(grid=pair.grid, v=u_state.v - fac * ref.v,
                          vt=u_state.vt - fac * ref.vt, t=t)
        rep = norms(diff)
        err_pos[i] = rep.hdot1
        err_vel[i] = lp_norm(diff.vt, diff.grid, 2.0)
        err_pair[i] = math.sqrt(rep.hdot1 ** 2 + err_vel[i] ** 2)
    return DecayCurve(times=times, err_pair=err_pair, err_pos=err_pos, err_vel=err_vel,
                      kind="dw")


# ---------------------------------------------------------------------------
# experiment drivers (shared by the CLI and the acceptance suite)
# ---------------------------------------------------------------------------

def log_spaced_times(t_min: float, t_max: float, count: int) -> np.ndarray:
    """Sample times log-spaced in (1+t)."""
    return np.expm1(np.linspace(math.log1p(t_min), math.log1p(t_max), count))


@dataclass
class ScatterResult:
    curve: DecayCurve
    fit: DecayFit
    profile: ScatterProfile
    c: CoefficientSet


def linear_scatter_experiment(c: CoefficientSet, grid: GridSpec, data: FieldState,
                              t_max: float, n_samples: int = 25,
                              t_min: float | None = None,
                              window: tuple[float, float] | None = None,
                              strategy: str = "bessel",
                              dw: bool = False) -> ScatterResult:
    """Evolve linear data, extract the exact profile, fit the decay order."""
    check_horizon(data, t_max)
    trajectory = lambda t: linear_evolve(c, data, t, strategy=strategy)
    profile = exact_linear_profile(c, data)
    if t_min is None:
        t_min = max(t_max / 16.0, 1.0)
    times = log_spaced_times(t_min, t_max, n_samples)
    rates = predict_rates(c)
    if dw:
        curve = dw_retransform_check(c, trajectory, profile, times)
        prediction = rates.linear_order + rates.dw_shift
        fit_component = "pos"
    else:
        curve = decay_curve(c, trajectory, profile, times)
        prediction = rates.linear_order
        fit_component = "pair"
    fit = fit_decay(curve, c, component=fit_component, window=window, prediction=prediction)
    return ScatterResult(curve=curve, fit=fit, profile=profile, c=c)


@dataclass
class GrowthResult:
    times: np.ndarray
    l2: np.ndarray
    hdot1: np.ndarray
    energy_pair: np.ndarray
    slope: float
    prediction: float


def growth_experiment(c: CoefficientSet, grid: GridSpec, data: FieldState,
                      t_min: float = 100.0, t_max: float = 1000.0,
                      n_samples: int = 15, strategy: str = "bessel") -> GrowthResult:
    """L2 growth of the linear solution; slope fitted over [t_min, t_max]."""
    times = log_spaced_times(t_min, t_max, n_samples)
    l2 = np.empty(times.shape)
    hdot1 = np.empty(times.shape)
    pair = np.empty(times.shape)
    for i, t in enumerate(times):
        state = linear_evolve(c, data, float(t), strategy=strategy)
        rep = norms(state)
        l2[i], hdot1[i], pair[i] = rep.l2, rep.hdot1, rep.energy_pair
    slope = float(np.polyfit(np.log1p(times), np.log(l2), 1)[0])
    return GrowthResult(times=times, l2=l2, hdot1=hdot1, energy_pair=pair,
                        slope=slope, prediction=0.5 + c.re_nu)
