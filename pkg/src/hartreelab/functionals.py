"""Conserved energy and the variational functional family.

For a radial field u on the grid,

    kinetic  = |grad u|^2,
    quartic  = double integral of |u|^2(x) |u|^2(y) / |x-y|^4,
    energy   = kinetic/2 - quartic/4,
    virial   = kinetic - quartic   (the sign functional of the dichotomy),

together with the scale-invariant Weinstein quotient quartic/kinetic^2 and
the cubic-and-higher energy correction around the ground state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidFieldError
from .hartree_potential import kernel_matrix
from .radial_core import SURFACE_MEASURE, RadialGrid, hdot_inner


@dataclass(frozen=True)
class FunctionalReport:
    """All functional values of one field; the identities below are exact.

    quarter_kinetic  = energy - virial/4 = kinetic/4
    quarter_quartic  = energy - virial/2 = quartic/4
    virial           = kinetic - quartic
    """

    energy: float
    virial: float
    quarter_kinetic: float
    quarter_quartic: float
    kinetic: float
    quartic: float


def quartic_interaction(grid: RadialGrid, u: np.ndarray, kern=None) -> float:
    """Double integral of |u|^2(x)|u|^2(y)/|x-y|^4 over R^5 x R^5."""
    if kern is None:
        kern = kernel_matrix(grid)
    rho = np.abs(np.asarray(u)) ** 2
    return float(SURFACE_MEASURE * np.dot(grid.w, rho * (kern @ rho)))


def pair_interaction(grid: RadialGrid, rho_a: np.ndarray, rho_b: np.ndarray,
                     kern=None) -> float:
    """Double integral of rho_a(x) rho_b(y) / |x-y|^4 for real densities."""
    if kern is None:
        kern = kernel_matrix(grid)
    return float(SURFACE_MEASURE * np.dot(grid.w, np.asarray(rho_b) * (kern @ np.asarray(rho_a))))


def energy(grid: RadialGrid, u: np.ndarray, kern=None) -> float:
    """Conserved energy kinetic/2 - quartic/4."""
    return 0.5 * hdot_inner(grid, u, u) - 0.25 * quartic_interaction(grid, u, kern)


def full_report(grid: RadialGrid, u: np.ndarray, kern=None) -> FunctionalReport:
    kin = hdot_inner(grid, u, u)
    quart = quartic_interaction(grid, u, kern)
    return FunctionalReport(
        energy=0.5 * kin - 0.25 * quart,
        virial=kin - quart,
        quarter_kinetic=0.25 * kin,
        quarter_quartic=0.25 * quart,
        kinetic=kin,
        quartic=quart,
    )


def weinstein(grid: RadialGrid, u: np.ndarray, kern=None) -> float:
    """Scale-invariant quotient quartic/kinetic^2, maximized by the ground state."""
    kin = hdot_inner(grid, u, u)
    if kin == 0.0:
        raise InvalidFieldError("Weinstein quotient is undefined for the zero field")
    return quartic_interaction(grid, u, kern) / kin**2


def cubic_correction(grid: RadialGrid, v: np.ndarray, w_vals: np.ndarray,
                     kern=None) -> float:
    """Cubic-and-quartic remainder of the energy expansion around w_vals.

    C(v) = 1/4 * [ B(|v|^2, |v|^2) + 4 B(w * Re v, |v|^2) ]  with
    B(f, g) the pair interaction, so that
    energy(w + v) = energy(w) + (quadratic form)/2 - C(v).
    """
    if kern is None:
        kern = kernel_matrix(grid)
    v = np.asarray(v)
    rho = np.abs(v) ** 2
    pot = kern @ rho
    quart = np.dot(grid.w, rho * pot)
    cross = np.dot(grid.w, (np.asarray(w_vals).real * v.real) * pot)
    return float(SURFACE_MEASURE * (0.25 * quart + cross))
