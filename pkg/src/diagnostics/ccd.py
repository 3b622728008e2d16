"""Synthetic camera frames of a linear ion string."""

import math
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from config.config import TrapParams
from src.core.constants import E_CHARGE, EPSILON_0
from src.trap.dynamics import IonCrystal, axial_frequency
from src.utils.logging import get_logger

logger = get_logger(__name__)

MAX_STRING_IONS = 100


def _energy(u: np.ndarray) -> Tuple[float, np.ndarray]:
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    inv = 1.0 / np.abs(diff)
    energy = 0.5 * np.sum(u ** 2) + 0.5 * np.sum(inv)
    grad = u - np.sum(np.sign(diff) * inv ** 2, axis=1)
    return energy, grad


@lru_cache(maxsize=32)
def _dimensionless_positions(n: int) -> Tuple[float, ...]:
    if n == 1:
        return (0.0,)
    start = np.linspace(-1.0, 1.0, n) * (n ** 0.56)
    res = minimize(_energy, start, jac=True, method="BFGS", options={"gtol": 1e-10})
    if not res.success:
        logger.warning("Ion-string minimization did not converge", {"n": n, "message": res.message})
    return tuple(np.sort(res.x))


def equilibrium_positions(n: int, trap: TrapParams, mass: float) -> np.ndarray:
    """Axial equilibrium positions (m) of ``n`` ions in the harmonic endcap well.

    Positions minimize the harmonic plus Coulomb energy in units of
    (e²/(4πε0·m·ωz²))^(1/3).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > MAX_STRING_IONS:
        raise ValueError(f"string rendering supports up to {MAX_STRING_IONS} ions")
    if n == 0:
        return np.empty(0)
    omega_z = axial_frequency(trap, mass)
    length = (E_CHARGE ** 2 / (4.0 * math.pi * EPSILON_0 * mass * omega_z ** 2)) ** (1.0 / 3.0)
    return length * np.asarray(_dimensionless_positions(n))


def render_ccd_frame(crystal: IonCrystal, trap: TrapParams, mass: float, t: Optional[float] = None,
                     shape: Tuple[int, int] = (64, 256), pixel_size: float = 2e-6,
                     spot_sigma: float = 3e-6, counts_per_ion: float = 100.0,
                     background: float = 0.0,
                     rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Image of the ion string with one Gaussian spot per bright, cold ion.

    Dark and hot ions keep their place in the string but do not glow.

    Args:
        crystal: Ion ensemble
        trap: Trap parameters (axial confinement)
        mass: Ion mass (kg)
        t: Time of the exposure; None shows every ion bright
        shape: (rows, columns); the string runs along the columns
        pixel_size: Pixel pitch at the ion plane (m)
        spot_sigma: Point-spread width (m)
        counts_per_ion: Integrated counts of one spot
        background: Mean counts per pixel
        rng: Adds Poisson noise when given

    Returns:
        Float image (noiseless) or integer image (with rng)
    """
    n = crystal.count_at(t) if t is not None else crystal.count
    positions = equilibrium_positions(n, trap, mass)
    if t is None:
        glowing = np.ones(n, dtype=bool)
    else:
        present = np.flatnonzero(crystal.arrival <= t)
        glowing = (crystal.bright_mask(t) & ~crystal.hot_mask(t))[present]

    rows, cols = shape
    x = (np.arange(cols) - 0.5 * (cols - 1)) * pixel_size
    y = (np.arange(rows) - 0.5 * (rows - 1)) * pixel_size
    norm = counts_per_ion * pixel_size ** 2 / (2.0 * math.pi * spot_sigma ** 2)
    profile_y = np.exp(-0.5 * (y / spot_sigma) ** 2)
    profile_x = np.zeros(cols)
    for position in positions[glowing]:
        profile_x += np.exp(-0.5 * ((x - position) / spot_sigma) ** 2)
    image = norm * np.outer(profile_y, profile_x) + background
    if rng is not None:
        return rng.poisson(image)
    return image
