"""Target smearings used by the experiments."""
from __future__ import annotations

import numpy as np

from .lattice import LatticeFunction, SpacetimeGrid


def _window(n: np.ndarray, radius: int) -> np.ndarray:
    """cos^2 window vanishing beyond ``radius`` sites from the centre."""
    r = np.abs(n) / (radius + 1)
    return np.where(r < 1, np.cos(0.5 * np.pi * r) ** 2, 0.0)


def bump(grid: SpacetimeGrid, t_center: int, x_center: int, radius_t: int, radius_x: int,
         amplitude: float = 1.0) -> LatticeFunction:
    """Separable cos^2 bump supported on ``|t - tc| <= radius_t``, ``|x - xc| <= radius_x`` (periodic in x)."""
    t = np.arange(grid.nt) - t_center
    x = (np.arange(grid.nx) - x_center + grid.nx // 2) % grid.nx - grid.nx // 2
    v = amplitude * np.outer(_window(t, radius_t), _window(x, radius_x))
    return LatticeFunction(grid, v[None])


def random_profile(grid: SpacetimeGrid, t_center: int, x_center: int, radius_t: int,
                   radius_x: int, amplitude: float = 1.0, seed: int = 0) -> LatticeFunction:
    """Seeded normal noise under the same window as :func:`bump`."""
    rng = np.random.default_rng(seed)
    shape = bump(grid, t_center, x_center, radius_t, radius_x, 1.0).values
    noise = rng.standard_normal(shape.shape)
    return LatticeFunction(grid, amplitude * noise * shape)
