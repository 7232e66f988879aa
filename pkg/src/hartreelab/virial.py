"""Localized moment (virial) diagnostics for radial fields.

The localized moment weighs the mass density by a window that grows as r^2
inside the window radius, crosses a C^4 polynomial bridge over one more
radius, and is constant beyond twice the radius.  Its first and second time
rates along the flow are assembled from closed-form derivatives of the
window, the field's radial derivative, and the pair interaction; the second
rate splits into eight times the virial functional plus a correction that
vanishes whenever the field is supported inside the window.

Window design: a C^2 window that equals r^2 inside, vanishes beyond twice
the radius, and keeps curvature at most 2 everywhere does not exist (Taylor
with integral remainder forces the spare curvature 2 - profile'' to have
zero first moment on the bridge while being nonnegative, which pins it to
zero).  The bridge here therefore rises monotonically to a plateau of 31/14
instead of descending to zero: curvature stays at most 2 everywhere, all
bridge derivatives through fourth order vanish at both seams, and since
every rate formula uses only window derivatives, the plateau merely adds a
constant (in time) mass offset to the moment itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .distance import cutoff
from .errors import InvalidFieldError, ParameterError
from .functionals import full_report, quartic_interaction
from .hartree_potential import kernel_matrix
from .radial_core import (
    SURFACE_MEASURE,
    RadialGrid,
    radial_derivative,
)

logger = logging.getLogger(__name__)

#: window value on the outer plateau (s >= 2); the bridge slope
#: (2-s)^4 (60 t^3 + 28 t^2 + 10 t + 2), t = s - 1, integrates to 17/14.
PLATEAU = 31.0 / 14.0

# bridge polynomials in t = s - 1 on [0, 1] (coefficients from integrating
# the factored slope; highest degree first, for np.polyval)
_P_PROFILE = np.array([15.0 / 2.0, -212.0 / 7.0, 43.0, -22.0, 0.0, 0.0, 1.0, 2.0, 1.0])
_P_SLOPE = np.array([60.0, -212.0, 258.0, -110.0, 0.0, 0.0, 2.0, 2.0])
_P_CURV = np.array([420.0, -1272.0, 1290.0, -440.0, 0.0, 0.0, 2.0])
_P_THIRD = np.array([2520.0, -6360.0, 5160.0, -1320.0, 0.0, 0.0])
_P_FOURTH = np.array([12600.0, -25440.0, 15480.0, -2640.0, 0.0])


def _piecewise(s, inner, poly, outer_value):
    """Evaluate inner(s) for s <= 1, a bridge polynomial on (1, 2), a
    constant beyond; scalar in, float out."""
    arr = np.asarray(s, dtype=float)
    t = np.clip(arr - 1.0, 0.0, 1.0)
    out = np.where(
        arr <= 1.0,
        inner(arr),
        np.where(arr >= 2.0, outer_value, np.polyval(poly, t)),
    )
    if np.isscalar(s) or arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class VirialWeight:
    """Radial window for the localized moment, evaluated in units s = r/R."""

    radius: float

    def profile(self, s):
        return _piecewise(s, lambda a: a * a, _P_PROFILE, PLATEAU)

    def slope(self, s):
        return _piecewise(s, lambda a: 2.0 * a, _P_SLOPE, 0.0)

    def curvature(self, s):
        return _piecewise(s, lambda a: np.full_like(a, 2.0), _P_CURV, 0.0)

    def third(self, s):
        return _piecewise(s, lambda a: np.zeros_like(a), _P_THIRD, 0.0)

    def fourth(self, s):
        return _piecewise(s, lambda a: np.zeros_like(a), _P_FOURTH, 0.0)

    def spare_curvature(self, s):
        """2 - curvature; nonnegative everywhere by construction."""
        return 2.0 - self.curvature(s)

    def bilaplacian(self, s):
        """Radial bilaplacian of the window in 5 dimensions,
        f'''' + 8 f'''/s + 8 f''/s^2 - 8 f'/s^3; supported on the bridge."""
        arr = np.asarray(s, dtype=float)
        out = np.zeros_like(arr)
        on = (arr > 1.0) & (arr < 2.0)
        if np.any(on):
            a = arr[on]
            t = a - 1.0
            out[on] = (
                np.polyval(_P_FOURTH, t)
                + 8.0 * np.polyval(_P_THIRD, t) / a
                + 8.0 * np.polyval(_P_CURV, t) / a**2
                - 8.0 * np.polyval(_P_SLOPE, t) / a**3
            )
        if np.isscalar(s) or arr.ndim == 0:
            return float(out)
        return out


def make_weight(radius: float, grid: RadialGrid | None = None) -> VirialWeight:
    """Build the moment window; with a grid, certify the curvature bound
    2 - profile'' >= 0 at every node."""
    radius = float(radius)
    if not np.isfinite(radius) or radius <= 0.0:
        raise ParameterError(f"window radius must be positive, got {radius}")
    weight = VirialWeight(radius=radius)
    if grid is not None:
        spare = weight.spare_curvature(grid.r / radius)
        worst = float(np.min(spare))
        if worst < -1e-12:
            raise ParameterError(
                f"window curvature bound violated on the grid (min spare "
                f"curvature {worst:.3e})"
            )
        logger.debug("window certificate: min spare curvature %.3e", worst)
    return weight


def _require_finite(u: np.ndarray):
    if not np.all(np.isfinite(u)):
        raise InvalidFieldError("moment diagnostics need a finite field")


def localized_moment(grid: RadialGrid, u: np.ndarray, weight: VirialWeight) -> float:
    """R^2-scaled windowed second moment of the mass density."""
    u = np.asarray(u)
    _require_finite(u)
    rho = np.abs(u) ** 2
    vals = weight.profile(grid.r / weight.radius)
    return float(
        SURFACE_MEASURE * weight.radius**2 * np.dot(grid.w, vals * rho)
    )


def moment_rate(grid: RadialGrid, u: np.ndarray, weight: VirialWeight) -> float:
    """First time rate of the localized moment along the flow.

    Equals -2 Omega int Im(conj(u) u') R profile'(r/R) r^4 dr; the sign is
    fixed by the continuity equation of the evolution convention used here
    (an incoming quadratic phase contracts the moment).
    """
    u = np.asarray(u, dtype=complex)
    _require_finite(u)
    du = radial_derivative(grid, u)
    current = np.imag(np.conj(u) * du)
    vals = weight.slope(grid.r / weight.radius)
    return float(
        -2.0 * SURFACE_MEASURE * weight.radius * np.dot(grid.w, current * vals)
    )


def pair_flux(grid: RadialGrid, rho: np.ndarray, multiplier: np.ndarray,
              kern=None) -> float:
    """Antisymmetrized pair-interaction flux against a radial multiplier m:

        16 iint m(x) [x.(x-y)/|x-y|^6] rho(x) rho(y) dx dy,

    reduced to -4 Omega int m rho r d_r(pointwise potential) r^4 dr.  With
    m = 1 this is exactly eight times the quartic interaction.
    """
    if kern is None:
        kern = kernel_matrix(grid)
    rho = np.asarray(rho, dtype=float)
    pot = kern @ rho
    dpot = radial_derivative(grid, pot)
    return float(
        -4.0 * SURFACE_MEASURE * np.dot(grid.w, multiplier * rho * grid.r * dpot)
    )


@dataclass(frozen=True)
class MomentAccelTerms:
    """Second rate of the localized moment, split into its pieces."""

    total: float  # eight_virial + a_r
    a_r: float  # window correction: gradient + bilaplacian + pair terms
    eight_virial: float  # 8 (kinetic - quartic)
    gradient_term: float  # (4 curvature - 8) against |u'|^2
    bilaplacian_term: float  # -(1/R^2) bilaplacian against |u|^2
    pair_term: float  # pair flux against 1 - slope/(2s)


def moment_accel_terms(grid: RadialGrid, u: np.ndarray, weight: VirialWeight,
                       kern=None) -> MomentAccelTerms:
    """Assemble the second time rate of the localized moment."""
    if kern is None:
        kern = kernel_matrix(grid)
    u = np.asarray(u, dtype=complex)
    _require_finite(u)
    s = grid.r / weight.radius
    rho = np.abs(u) ** 2
    du = radial_derivative(grid, u)
    grad_sq = np.abs(du) ** 2

    report = full_report(grid, u, kern)
    eight_virial = 8.0 * report.virial

    curv = weight.curvature(s)
    gradient_term = float(
        SURFACE_MEASURE * np.dot(grid.w, (4.0 * curv - 8.0) * grad_sq)
    )
    bilaplacian_term = float(
        -SURFACE_MEASURE / weight.radius**2
        * np.dot(grid.w, weight.bilaplacian(s) * rho)
    )
    # the multiplier 1 - profile'(s)/(2s) vanishes identically inside the
    # window (profile' = 2s there) and tends to 1 far outside
    mult = np.zeros(grid.n)
    outside = s > 1.0
    mult[outside] = 1.0 - weight.slope(s[outside]) / (2.0 * s[outside])
    pair_term = pair_flux(grid, rho, mult, kern)

    a_r = gradient_term + bilaplacian_term + pair_term
    return MomentAccelTerms(
        total=eight_virial + a_r,
        a_r=a_r,
        eight_virial=eight_virial,
        gradient_term=gradient_term,
        bilaplacian_term=bilaplacian_term,
        pair_term=pair_term,
    )


def second_moment_rate(grid: RadialGrid, u: np.ndarray, weight: VirialWeight,
                       kern=None) -> tuple[float, float]:
    """Second time rate of the localized moment and its window correction."""
    terms = moment_accel_terms(grid, u, weight, kern)
    return terms.total, terms.a_r


def windowed_virial(grid: RadialGrid, u: np.ndarray, weight: VirialWeight,
                    kern=None) -> float:
    """Virial functional of the window-truncated field (plateau-to-2R cutoff
    applied pointwise); eight times this approximates the second moment rate
    up to the window error."""
    if kern is None:
        kern = kernel_matrix(grid)
    u = np.asarray(u, dtype=complex)
    _require_finite(u)
    trunc = cutoff(grid.r / weight.radius) * u
    return full_report(grid, trunc, kern).virial


def window_error(grid: RadialGrid, u: np.ndarray, weight: VirialWeight,
                 kern=None) -> float:
    """Cutoff error functional controlling the windowed-virial split:
    gradient and Hardy mass on the transition annulus plus the pair
    interaction outside the inner box."""
    if kern is None:
        kern = kernel_matrix(grid)
    u = np.asarray(u, dtype=complex)
    _require_finite(u)
    r = grid.r
    radius = weight.radius
    on = (r >= radius) & (r <= 2.0 * radius)
    du = radial_derivative(grid, u)
    w_on = grid.w * on
    grad_part = float(SURFACE_MEASURE * np.dot(w_on, np.abs(du) ** 2))
    hardy = np.zeros(grid.n)
    hardy[on] = np.abs(u[on]) ** 2 / r[on] ** 2
    hardy_part = float(SURFACE_MEASURE * np.dot(grid.w, hardy))
    rho = np.abs(u) ** 2
    rho_in = np.where(r <= radius, rho, 0.0)
    pair_full = float(SURFACE_MEASURE * np.dot(grid.w, rho * (kern @ rho)))
    pair_in = float(SURFACE_MEASURE * np.dot(grid.w, rho_in * (kern @ rho_in)))
    return grad_part + hardy_part + (pair_full - pair_in)
