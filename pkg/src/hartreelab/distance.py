"""Distances to the solitary-wave orbit: static, time-mollified, and blended.

The static distance squares theexcess of the conserved energy over the bubble
plus twice the unstable-pair contribution; near the orbit it agrees with the
linearized energy norm up to the cubic remainder of the energy expansion.
Along a trajectory the static square is mollified against a smooth bump in
rescaled time, and the blended distance switches between the mollified value
(near the orbit) and the plain orbital distance (far away) with the same bump.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import DecompositionError, InvalidFieldError, WindowError
from .functionals import energy
from .ground_state import GroundStateBundle
from .linearized import EigenPair, LinearizedOps
from .modulation import VALIDITY_RADIUS, ModulationCoords, decompose

logger = logging.getLogger(__name__)

# switching threshold of the blended distance, as a fraction of the bubble's
# gradient norm; a quarter of the decomposition validity radius
DELTA_L = VALIDITY_RADIUS / 4.0

# total integral of the cutoff bump (plateau of width 2 plus two symmetric
# quintic-smoothstep ramps of width 1 carrying mass 1/2 each)
CUTOFF_MASS = 3.0

# mollification window half-width in rescaled time
WINDOW_HALF_WIDTH = 2.0


def cutoff(t):
    """Smooth even bump: 1 on |t| <= 1, 0 on |t| >= 2, quintic ramp between."""
    u = np.clip(np.abs(np.asarray(t, dtype=float)) - 1.0, 0.0, 1.0)
    out = 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    return out if out.ndim else float(out)


def cutoff_complement(t):
    """1 - cutoff(t)."""
    u = np.clip(np.abs(np.asarray(t, dtype=float)) - 1.0, 0.0, 1.0)
    out = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class StaticDistance:
    """Static orbit distance of one state.

    value is sqrt(max(raw_sq, 0)); raw_sq keeps the unclamped square, which
    discretization can push slightly negative for tiny perturbations.
    """

    value: float
    raw_sq: float
    coords: ModulationCoords


def static_distance(bundle: GroundStateBundle, ops: LinearizedOps,
                    pair: EigenPair, phi: np.ndarray,
                    coords: ModulationCoords | None = None) -> StaticDistance:
    """Energy-excess distance: energy(phi) - energy(bubble) + 2 mu lambda1^2.

    Requires a valid modulation decomposition; pass precomputed coords to
    avoid refitting phase and scale.
    """
    if coords is None:
        coords = decompose(bundle, pair, np.asarray(phi, dtype=complex))
    if not coords.valid:
        raise DecompositionError(
            f"static distance needs a valid decomposition: {coords.reason}"
        )
    raw = (
        energy(bundle.grid, phi, ops.kern)
        - bundle.energy
        + 2.0 * pair.rate * coords.lambda1**2
    )
    if raw < 0.0:
        logger.debug("clamping negative squared static distance %.3e", raw)
    return StaticDistance(value=math.sqrt(max(raw, 0.0)), raw_sq=raw,
                          coords=coords)


def mollified_sq(tau_series: np.ndarray, sq_series: np.ndarray,
                 tau_center: float) -> float:
    """Convolve a squared-distance series against the bump in rescaled time.

    Integrates cutoff(tau - tau_center) * series(tau) over the window
    |tau - tau_center| <= 2, interpolating the series with a cubic spline.
    The result is clamped at zero.
    """
    tau = np.asarray(tau_series, dtype=float)
    vals = np.asarray(sq_series, dtype=float)
    if tau.ndim != 1 or tau.shape != vals.shape or len(tau) < 4:
        raise InvalidFieldError("need matching 1-d series with >= 4 samples")
    if np.any(np.diff(tau) <= 0.0):
        raise InvalidFieldError("rescaled-time series must be increasing")
    lo = tau_center - WINDOW_HALF_WIDTH
    hi = tau_center + WINDOW_HALF_WIDTH
    if lo < tau[0] or hi > tau[-1]:
        raise WindowError(
            f"mollification window [{lo:.4g}, {hi:.4g}] not covered by the "
            f"series range [{tau[0]:.4g}, {tau[-1]:.4g}]"
        )
    spline = CubicSpline(tau, vals)
    s = np.linspace(lo, hi, 801)
    integrand = cutoff(s - tau_center) * spline(s)
    return max(float(simpson(integrand, x=s)), 0.0)


def mollified(tau_series: np.ndarray, sq_series: np.ndarray,
              tau_center: float) -> float:
    """Square root of the mollified squared distance."""
    return math.sqrt(mollified_sq(tau_series, sq_series, tau_center))


def blended_distance(orbit_dist: float, mollified_supplier,
                     grad_norm: float, delta_l: float = DELTA_L) -> float:
    """Blend the mollified and orbital distances with the smooth bump.

    The bump argument is the orbital distance normalized by the bubble's
    gradient norm and the threshold delta_l: inside the plateau the value is
    fully mollified, beyond twice the threshold it is exactly the orbital
    distance — then the (possibly expensive) mollified branch is never
    evaluated.
    """
    weight = float(cutoff(orbit_dist / (grad_norm * delta_l)))
    if weight == 0.0:
        return float(orbit_dist)
    return weight * float(mollified_supplier()) + (1.0 - weight) * float(orbit_dist)
