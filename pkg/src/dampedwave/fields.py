"""Pseudospectral fields on a periodic box and their exact linear evolution.

The box [-L, L)^d stands in for free space: as long as data stay compactly
supported inside the no-wraparound horizon (finite propagation speed 1),
the discrete Fourier transform makes the mode-kernel propagation exact up
to kernel accuracy, with no time-stepping error.  The module also provides
the free-wave propagator pair, the Liouville transform between the damped
and Klein-Gordon forms, grid norms, and the retarded source integral that
expresses the mass term through the free-wave formulation.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .bessel import BesselRangeError
from .errors import HorizonError, QuadratureError
from .kernels import KernelFactory, mode_kernel, mode_kernel_radii
from .params import CoefficientSet

_IMAG_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid: n points per axis on [-L, L)^d, frequencies pi*k/L."""

    d: int
    n: int
    half_width: float

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def axis(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n)

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*([self.axis()] * self.d), indexing="ij"))

    def radius_lattice(self) -> np.ndarray:
        """|x| over the grid (physical space)."""
        mesh = self.meshgrid()
        return np.sqrt(sum(x * x for x in mesh))


@lru_cache(maxsize=32)
def _spectral_tables(grid: GridSpec):
    """Frequency radius lattice |xi| plus its unique-radius decomposition."""
    xi_axis = 2.0 * math.pi * np.fft.fftfreq(grid.n, d=grid.dx)
    mesh = np.meshgrid(*([xi_axis] * grid.d), indexing="ij")
    r = np.sqrt(sum(x * x for x in mesh))
    radii, inverse = np.unique(r, return_inverse=True)
    return r, radii, inverse.reshape(r.shape)


def frequency_radii(grid: GridSpec) -> np.ndarray:
    """Sorted distinct frequency magnitudes of the grid (first entry 0)."""
    return _spectral_tables(grid)[1]


@dataclass(frozen=True)
class FieldState:
    """Position/velocity pair (v, v_t) on a grid at time t.

    Arrays are treated as immutable; evolution returns new states.
    """

    grid: GridSpec
    v: np.ndarray
    vt: np.ndarray
    t: float

    def __post_init__(self) -> None:
        if self.v.shape != self.grid.shape or self.vt.shape != self.grid.shape:
            raise ValueError("field arrays must match the grid shape")

    def pair_energy_norm(self) -> float:
        """The Hdot1 x L2 norm of the pair."""
        return norms(self).energy_pair


@dataclass(frozen=True)
class NormReport:
    l2: float
    hdot1: float
    h1: float
    energy_pair: float


def _to_real_field(arr: np.ndarray, what: str) -> np.ndarray:
    scale = max(float(np.max(np.abs(arr))), 1.0)
    worst = float(np.max(np.abs(arr.imag))) / scale
    if worst > _IMAG_TOL:
        raise ArithmeticError(f"{what}: imaginary residue {worst:.3e} exceeds {_IMAG_TOL}")
    return np.ascontiguousarray(arr.real)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def lp_norm(values: np.ndarray, grid: GridSpec, p: float) -> float:
    """L^p norm by grid quadrature with weight dx^d."""
    if math.isinf(p):
        return float(np.max(np.abs(values)))
    return float((grid.dx ** grid.d * np.sum(np.abs(values) ** p)) ** (1.0 / p))


def norms(state: FieldState) -> NormReport:
    """L2, Hdot1, H1 of the position and the pair energy norm.

    L2 is physical-space quadrature; Hdot1 applies the |xi| multiplier
    spectrally, consistent with it through the discrete Parseval identity.
    """
    grid = state.grid
    r_lat, _, _ = _spectral_tables(grid)
    n_total = grid.n ** grid.d
    w = grid.dx ** grid.d / n_total
    vhat = np.fft.fftn(state.v)
    l2 = lp_norm(state.v, grid, 2.0)
    hdot1 = math.sqrt(w * float(np.sum((r_lat * np.abs(vhat)) ** 2)))
    h1 = math.sqrt(l2 * l2 + hdot1 * hdot1)
    vt_l2 = lp_norm(state.vt, grid, 2.0)
    energy_pair = math.sqrt(hdot1 * hdot1 + vt_l2 * vt_l2)
    return NormReport(l2=l2, hdot1=hdot1, h1=h1, energy_pair=energy_pair)


def pair_h1_l2_norm(state: FieldState) -> float:
    """H1 x L2 norm of the pair (used by the nonlinear method-agreement checks)."""
    rep = norms(state)
    vt_l2 = lp_norm(state.vt, state.grid, 2.0)
    return math.sqrt(rep.h1 ** 2 + vt_l2 ** 2)


def pair_diff_norm(a: FieldState, b: FieldState) -> float:
    """Hdot1 x L2 distance between two pairs on the same grid."""
    diff = FieldState(grid=a.grid, v=a.v - b.v, vt=a.vt - b.vt, t=a.t)
    return norms(diff).energy_pair


def spacetime_norm(samples: list[FieldState], q: float, r: float) -> float:
    """L^q in time of the L^r spatial norm, by trapezoid over uniform samples."""
    if not samples:
        raise ValueError("spacetime_norm needs at least one sample")
    if math.isinf(r):
        raise ValueError("spatial exponent r must be finite")
    times = np.array([s.t for s in samples])
    if len(samples) == 1:
        raise ValueError("spacetime_norm needs at least two samples")
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
        raise ValueError("samples must be uniformly spaced in time")
    vals = np.array([lp_norm(s.v, s.grid, r) for s in samples])
    if math.isinf(q):
        return float(np.max(vals))
    return float(np.trapezoid(vals ** q, times) ** (1.0 / q))


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def _free_wave_tables(grid: GridSpec, dt: float):
    """Multipliers (cos, sin/r, -r sin) of the free propagator over dt."""
    r_lat, _, _ = _spectral_tables(grid)
    c = np.cos(dt * r_lat)
    s_over = np.empty_like(r_lat)
    nz = r_lat != 0
    s_over[nz] = np.sin(dt * r_lat[nz]) / r_lat[nz]
    s_over[~nz] = dt  # limit of sin(dt r)/r
    s_times = -r_lat * np.sin(dt * r_lat)
    return c, s_over, s_times


def free_wave_evolve(state: FieldState, t_target: float) -> FieldState:
    """Propagate by the free wave group; valid forward and backward in time."""
    dt = t_target - state.t
    if dt == 0.0:
        return state
    c, s_over, s_times = _free_wave_tables(state.grid, dt)
    vhat = np.fft.fftn(state.v)
    vthat = np.fft.fftn(state.vt)
    new_v = np.fft.ifftn(c * vhat + s_over * vthat)
    new_vt = np.fft.ifftn(s_times * vhat + c * vthat)
    return FieldState(grid=state.grid, v=_to_real_field(new_v, "free_wave v"),
                      vt=_to_real_field(new_vt, "free_wave vt"), t=t_target)


class LinearPropagator:
    """One-shot mode-kernel propagation on a fixed grid with kernel caching.

    Kernels depend on xi only through |xi|, so they are evaluated once per
    distinct lattice radius and broadcast.  A small cache keeps recently
    used (t, t0) kernel tables, which makes repeated sampling along a
    trajectory cheap.
    """

    def __init__(self, c: CoefficientSet, grid: GridSpec, strategy: str = "bessel",
                 tau_switch: float = 10.0, tau_asym: float = 40.0, cache_size: int = 64):
        self.c = c
        self.grid = grid
        self.strategy = strategy
        self.tau_switch = tau_switch
        self.tau_asym = tau_asym
        self._factory = KernelFactory(c, _spectral_tables(grid)[1], tau_switch, tau_asym)
        self._cache: dict = {}
        self._cache_size = cache_size

    def _kernel_tables(self, t: float, t0: float):
        key = (t, t0)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        _, radii, _ = _spectral_tables(self.grid)
        if self.c.mu == 0.0:
            # massless case: the kernels reduce exactly to the free propagator
            dt = t - t0
            s_over = np.where(radii > 0, np.sin(dt * radii) / np.where(radii > 0, radii, 1.0), dt)
            tables = (np.cos(dt * radii), s_over,
                      -radii * np.sin(dt * radii), np.cos(dt * radii))
        elif self.strategy == "ode_oracle":
            tables = self._oracle_tables(t, t0, radii)
        else:
            try:
                tables = self._factory.tables(t, t0)
            except BesselRangeError:
                tables = self._mixed_tables(t, t0, radii)
        if len(self._cache) >= self._cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = tables
        return tables

    def _oracle_tables(self, t: float, t0: float, radii: np.ndarray):
        cols = [mode_kernel(self.c, t, t0, float(r),
                            strategy="ode_oracle" if r > 0 else "bessel")
                for r in radii]
        return (np.array([k.E0 for k in cols]), np.array([k.E1 for k in cols]),
                np.array([k.E0_dot for k in cols]), np.array([k.E1_dot for k in cols]))

    def _mixed_tables(self, t: float, t0: float, radii: np.ndarray):
        # bessel where in range, oracle fallback for radii refused at the
        # Y-singularity end (tau below 1e-8); overflow at the other end means
        # the oracle would be equally infeasible, so it propagates
        tau = (1.0 + t) * radii
        tau0 = (1.0 + t0) * radii
        if float(np.max(np.maximum(tau, tau0), initial=0.0)) > 1e6:
            raise BesselRangeError(
                f"kernel argument beyond 1e6 at t={t}: reduce the horizon or split the evolution")
        e0 = np.empty_like(radii)
        e1 = np.empty_like(radii)
        e0d = np.empty_like(radii)
        e1d = np.empty_like(radii)
        ok = (radii == 0) | (np.minimum(tau, tau0) >= 1e-8)
        if ok.any():
            e0[ok], e1[ok], e0d[ok], e1d[ok] = mode_kernel_radii(
                self.c, t, t0, radii[ok], self.tau_switch, self.tau_asym)
        for i in np.where(~ok)[0]:
            k = mode_kernel(self.c, t, t0, float(radii[i]), strategy="ode_oracle")
            e0[i], e1[i], e0d[i], e1d[i] = k.E0, k.E1, k.E0_dot, k.E1_dot
        return e0, e1, e0d, e1d

    def evolve(self, state: FieldState, t_target: float) -> FieldState:
        if t_target < state.t:
            raise ValueError("linear evolution runs forward; evolve from the earlier time")
        if state.grid != self.grid:
            raise ValueError("state grid does not match propagator grid")
        e0, e1, e0d, e1d = self._kernel_tables(t_target, state.t)
        _, _, inverse = _spectral_tables(self.grid)
        vhat = np.fft.fftn(state.v)
        vthat = np.fft.fftn(state.vt)
        new_v = np.fft.ifftn(e0[inverse] * vhat + e1[inverse] * vthat)
        new_vt = np.fft.ifftn(e0d[inverse] * vhat + e1d[inverse] * vthat)
        return FieldState(grid=state.grid, v=_to_real_field(new_v, "linear_evolve v"),
                          vt=_to_real_field(new_vt, "linear_evolve vt"), t=t_target)


_PROPAGATORS: dict = {}


def _propagator_for(c: CoefficientSet, grid: GridSpec, strategy: str) -> LinearPropagator:
    key = (c.mu1, c.mu2, grid, strategy)
    prop = _PROPAGATORS.get(key)
    if prop is None:
        if len(_PROPAGATORS) > 16:
            _PROPAGATORS.pop(next(iter(_PROPAGATORS)))
        prop = LinearPropagator(c, grid, strategy)
        _PROPAGATORS[key] = prop
    return prop


def linear_evolve(c: CoefficientSet, state: FieldState, t_target: float,
                  strategy: str = "bessel") -> FieldState:
    """Exact one-shot propagation of the Klein-Gordon pair to t_target."""
    return _propagator_for(c, state.grid, strategy).evolve(state, t_target)


def liouville(u_state: FieldState, mu1: float, direction: str) -> FieldState:
    """Switch between damped-wave u and Klein-Gordon v = (1+t)^{mu1/2} u.

    to_kg:  v = s^{a} u,  v_t = a s^{a-1} u + s^{a} u_t        (s = 1+t, a = mu1/2)
    to_dw:  the exact inverse; the round trip is the identity.
    """
    s = 1.0 + u_state.t
    a = mu1 / 2.0
    if direction == "to_kg":
        fac = s ** a
        v = fac * u_state.v
        vt = a * s ** (a - 1.0) * u_state.v + fac * u_state.vt
        return FieldState(grid=u_state.grid, v=v, vt=vt, t=u_state.t)
    if direction == "to_dw":
        fac = s ** (-a)
        u = fac * u_state.v
        ut = fac * u_state.vt - a * s ** (-a - 1.0) * u_state.v
        return FieldState(grid=u_state.grid, v=u, vt=ut, t=u_state.t)
    raise ValueError(f"direction must be 'to_kg' or 'to_dw', got {direction!r}")


# ---------------------------------------------------------------------------
# retarded source integral (free-wave formulation of the mass term)
# ---------------------------------------------------------------------------

_GL7_NODES, _GL7_WEIGHTS = np.polynomial.legendre.leggauss(7)


def _spectral_pair(state: FieldState) -> tuple[np.ndarray, np.ndarray]:
    return np.fft.fftn(state.v), np.fft.fftn(state.vt)


def _backward_free_source(grid: GridSpec, s: float, ghat: np.ndarray):
    """W(-s) applied to (0, g) in spectral space: (-sin(sr)/r g, cos(sr) g)."""
    r_lat, _, _ = _spectral_tables(grid)
    sin_over = np.empty_like(r_lat)
    nz = r_lat != 0
    sin_over[nz] = np.sin(s * r_lat[nz]) / r_lat[nz]
    sin_over[~nz] = s
    return -sin_over * ghat, np.cos(s * r_lat) * ghat


def _mass_source_increment(c: CoefficientSet, trajectory: Callable[[float], FieldState],
                           t_from: float, t_to: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    grid = trajectory(t_from).grid
    acc_v = np.zeros(grid.shape, dtype=np.complex128)
    acc_vt = np.zeros(grid.shape, dtype=np.complex128)
    edges = np.linspace(t_from, t_to, panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        for node, weight in zip(_GL7_NODES, _GL7_WEIGHTS):
            s = mid + half * node
            vs = trajectory(s)
            ghat = np.fft.fftn(-c.mu / (1.0 + s) ** 2 * vs.v)
            dv, dvt = _backward_free_source(grid, s, ghat)
            acc_v += (half * weight) * dv
            acc_vt += (half * weight) * dvt
    return acc_v, acc_vt


def duhamel_tail(c: CoefficientSet, trajectory: Callable[[float], FieldState],
                 t_from: float, t_to: float, rtol: float = 1e-8,
                 panel_width: float = 1.0, max_refine: int = 3) -> FieldState:
    """Integral of W(-s) applied to the mass source over [t_from, t_to].

    Returns the pair increment in the scattering frame (t = 0), i.e. the
    amount by which W(-t) (v, v_t)(t) moves between the two times.  Composite
    Gauss-Legendre panels are refined until the increment changes by less
    than rtol relatively; failure to converge raises QuadratureError.
    """
    if t_to < t_from:
        raise ValueError("t_to must be >= t_from")
    grid = trajectory(t_from).grid
    if c.mu == 0.0 or t_to == t_from:
        zero = np.zeros(grid.shape)
        return FieldState(grid=grid, v=zero, vt=zero.copy(), t=0.0)
    panels = max(1, int(math.ceil((t_to - t_from) / panel_width)))
    prev_v, prev_vt = _mass_source_increment(c, trajectory, t_from, t_to, panels)
    for _ in range(max_refine):
        panels *= 2
        cur_v, cur_vt = _mass_source_increment(c, trajectory, t_from, t_to, panels)
        num = np.sqrt(np.sum(np.abs(cur_v - prev_v) ** 2) + np.sum(np.abs(cur_vt - prev_vt) ** 2))
        den = max(np.sqrt(np.sum(np.abs(cur_v) ** 2) + np.sum(np.abs(cur_vt) ** 2)), 1e-300)
        prev_v, prev_vt = cur_v, cur_vt
        if num / den < rtol:
            break
    else:
        raise QuadratureError(
            f"source integral did not converge to rtol={rtol} with {panels} panels")
    v = _to_real_field(np.fft.ifftn(prev_v), "duhamel v")
    vt = _to_real_field(np.fft.ifftn(prev_vt), "duhamel vt")
    return FieldState(grid=grid, v=v, vt=vt, t=0.0)


# ---------------------------------------------------------------------------
# support and horizon checks
# ---------------------------------------------------------------------------

def support_radius(state: FieldState, mass_fraction: float = 1e-10) -> float:
    """Radius containing all but mass_fraction of the pair's L2 mass."""
    grid = state.grid
    r = grid.radius_lattice().ravel()
    mass = (state.v ** 2 + state.vt ** 2).ravel()
    total = float(mass.sum())
    if total == 0.0:
        return 0.0
    order = np.argsort(r, kind="stable")
    cum = np.cumsum(mass[order])
    idx = int(np.searchsorted(cum, (1.0 - mass_fraction) * total))
    idx = min(idx, len(r) - 1)
    return float(r[order][idx])


def check_horizon(state: FieldState, t_final: float, margin: float = 0.0) -> None:
    """Raise HorizonError unless support stays inside the box until t_final."""
    r0 = support_radius(state)
    needed = r0 + (t_final - state.t) + margin
    if needed > state.grid.half_width:
        raise HorizonError(
            f"horizon violation: support radius {r0:.3g} + time span "
            f"{t_final - state.t:.3g} exceeds box half-width {state.grid.half_width:.3g}")


def mass_outside_radius(state: FieldState, radius: float) -> float:
    """L2 norm of the position component outside |x| > radius."""
    grid = state.grid
    outside = grid.radius_lattice() > radius
    return math.sqrt(grid.dx ** grid.d * float(np.sum(state.v[outside] ** 2)))


# ---------------------------------------------------------------------------
# snapshot persistence
# ---------------------------------------------------------------------------

_SNAPSHOT_MAGIC = b"DWFIELD1"


def save_field(path, state: FieldState) -> None:
    """Write a self-describing little-endian binary snapshot of the pair."""
    header = struct.pack("<8sBBIdd", _SNAPSHOT_MAGIC, ord("<"), state.grid.d,
                         state.grid.n, state.grid.half_width, state.t)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.v, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.vt, dtype="<f8").tobytes())


def load_field(path) -> FieldState:
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<8sBBIdd"))
        magic, endian, d, n, half_width, t = struct.unpack("<8sBBIdd", header)
        if magic != _SNAPSHOT_MAGIC or endian != ord("<"):
            raise ValueError("not a field snapshot file")
        grid = GridSpec(d=d, n=n, half_width=half_width)
        count = n ** d
        v = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(grid.shape).copy()
        vt = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(grid.shape).copy()
    return FieldState(grid=grid, v=v, vt=vt, t=t)
