"""Initial-data presets used by the experiments."""

from __future__ import annotations

import numpy as np

from .fields import FieldState, GridSpec


def gaussian(grid: GridSpec, width: float = 1.0, amplitude: float = 1.0,
             velocity_amplitude: float = 0.0) -> FieldState:
    """Centered Gaussian bump exp(-|x|^2 / width^2) with optional velocity part."""
    r = grid.radius_lattice()
    profile = np.exp(-(r / width) ** 2)
    return FieldState(grid=grid, v=amplitude * profile,
                      vt=velocity_amplitude * profile, t=0.0)


def bump(grid: GridSpec, radius: float = 1.0, amplitude: float = 1.0) -> FieldState:
    """Compactly supported smooth bump, exactly zero outside |x| < radius."""
    r = grid.radius_lattice()
    v = np.zeros(grid.shape)
    inside = r < radius
    s2 = (r[inside] / radius) ** 2
    v[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s2))
    return FieldState(grid=grid, v=v, vt=np.zeros(grid.shape), t=0.0)


def multiscale(grid: GridSpec, widths: tuple[float, ...] = (1.0, 4.0, 16.0),
               amplitude: float = 1.0) -> FieldState:
    """Sum of Gaussians with widths spanning decades (low-frequency-rich)."""
    r = grid.radius_lattice()
    v = np.zeros(grid.shape)
    for w in widths:
        v += np.exp(-(r / w) ** 2)
    return FieldState(grid=grid, v=amplitude * v / len(widths),
                      vt=np.zeros(grid.shape), t=0.0)


def plane_wave(grid: GridSpec, k_index: int = 1, amplitude: float = 1.0) -> FieldState:
    """Single lattice mode sin(xi_k x_1), xi_k = pi k / L."""
    xi = np.pi * k_index / grid.half_width
    mesh = grid.meshgrid()
    return FieldState(grid=grid, v=amplitude * np.sin(xi * mesh[0]),
                      vt=np.zeros(grid.shape), t=0.0)


def normalized(state: FieldState, target: float = 1.0) -> FieldState:
    """Scale the pair to H1 x L2 norm equal to target."""
    from .fields import pair_h1_l2_norm

    scale = target / pair_h1_l2_norm(state)
    return FieldState(grid=state.grid, v=scale * state.v, vt=scale * state.vt, t=state.t)


_PRESETS = {
    "gaussian": gaussian,
    "bump": bump,
    "multiscale": multiscale,
    "plane_wave": plane_wave,
}


def make_preset(name: str, grid: GridSpec, width: float | None = None, **kwargs) -> FieldState:
    """Build a named preset; `width` maps onto each preset's length scale.

    gaussian: the Gaussian width; bump: the support radius; multiscale: the
    narrowest of the three widths (the others are 4x and 16x wider);
    plane_wave: the lattice mode index, rounded.
    """
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown data preset {name!r}; choose from {sorted(_PRESETS)}")
    if width is not None:
        if name == "bump":
            kwargs.setdefault("radius", width)
        elif name == "multiscale":
            kwargs.setdefault("widths", (width, 4.0 * width, 16.0 * width))
        elif name == "plane_wave":
            kwargs.setdefault("k_index", max(1, int(round(width))))
        else:
            kwargs.setdefault("width", width)
    return factory(grid, **kwargs)
