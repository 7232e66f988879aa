"""Sign assignment and fate diagnostics for flows near the ground bubble.

The classifier assigns +1 (dispersive side) or -1 (concentrating side) to a
state from two redundant rules:

  - the kinetic-excess rule reads the sign of kinetic minus quartic; it
    applies below the bubble energy, and above it whenever the working
    distance to the orbit clears the lower band edge;
  - the unstable-coefficient rule reads the opposite sign of the real
    unstable coefficient; it applies whenever the working distance sits
    below the upper band edge.

Inside the band both rules are evaluated; they agree on every honestly
prepared state, and if numerical noise ever splits them the disagreement is
logged and the kinetic-excess rule wins.  Zero values take the positive
branch.  Above the bubble energy a state is only classifiable when its
energy excess stays below both a fixed cap and the squared working distance
scaled by ``c_D``; the remaining funnel around the orbit is rejected.

The working distance equals the orbital distance far from the orbit and the
time-mollified energy-excess distance near it, evaluated by flowing a short
two-sided window around the state; when the window cannot be covered (the
state ejects or the run terminates) the orbital distance stands in, which
is equivalent up to a bounded factor.

Threshold ladder (fractions of the bubble's gradient norm): delta1 < delta2
bound the band where both sign rules run, delta_B is the crossing level the
one-pass monitor watches, delta_V and delta_M are the variational and
matching margins separating it from the ejection level delta_X, delta_L is
the blending switch of the working distance, and delta_E caps twice the
modulation validity radius.  The config constructor rejects any ordering
violation.

The variational floor ``kappa`` maps a normalized distance to the smallest
magnitude of kinetic-minus-quartic observed over a calibrated family of
admissible states at that distance: measured values never land inside
(-kappa, min(kappa, c_V grad^2)).

Fate classification runs the flow both ways (backward evolution is forward
evolution of the conjugate), monitors the delta_B crossing, fits the
ejection rate, evaluates the sign at exit, and cross-checks it against the
solver's asymptotic proxies; agreement yields scatter or blowup, a quiet
horizon yields trapped, anything inconsistent stays undecided with both
signals on record.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .distance import WINDOW_HALF_WIDTH, blended_distance, cutoff, mollified
from .errors import ConfigError, IntegrityError, NotClassifiableError, ParameterError, WindowError
from .evolution import EvolveConfig, Trajectory, evolve
from .functionals import FunctionalReport, full_report
from .ground_state import GroundStateBundle
from .hartree_potential import kernel_matrix
from .linearized import EigenPair, LinearizedOps
from .modulation import ModulationCoords, decompose, split_on_pair
from .radial_core import RadialGrid, hdot_inner, l2_inner

logger = logging.getLogger(__name__)

# variational floor frozen from a calibration sweep on the working grid
# (families: rescaled bubbles, unstable-pair displacements, and mixtures with
# the worst-case transverse direction), at half the measured envelope
DEFAULT_KAPPA_TABLE: tuple[tuple[float, float], ...] = (
    (0.005, 0.05),
    (0.01, 0.10),
    (0.02, 0.20),
    (0.04, 0.40),
    (0.08, 0.70),
    (0.16, 1.10),
)


@dataclass(frozen=True)
class ClassifierConfig:
    """Threshold ladder and calibration constants of the classifier.

    All ``delta`` entries are fractions of the bubble's gradient norm;
    ``eps`` is the square root of the admissible energy excess; ``c_D``
    scales the distance-dependent part of the admissibility cap; ``c_V``
    scales the small-state branch of the variational floor.
    """

    delta1: float = 0.005
    delta2: float = 0.01
    delta_B: float = 0.012
    delta_V: float = 0.016
    delta_M: float = 0.025
    delta_X: float = 0.04
    delta_L: float = 0.05
    delta_E: float = 0.2
    c_D: float = 0.5
    c_V: float = 0.25
    eps: float = 0.01875
    kappa_table: tuple[tuple[float, float], ...] = DEFAULT_KAPPA_TABLE

    def __post_init__(self):
        ladder = (
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("delta_B", self.delta_B),
            ("delta_V", self.delta_V),
            ("delta_M", self.delta_M),
            ("delta_X", self.delta_X),
            ("delta_L", self.delta_L),
        )
        prev_name, prev = "zero", 0.0
        for name, value in ladder:
            if not (math.isfinite(value) and value > prev):
                raise ConfigError(
                    f"threshold ladder violated: {name}={value!r} must exceed "
                    f"{prev_name}={prev!r}")
            prev_name, prev = name, value
        if not (math.isfinite(self.delta_E) and self.delta_L < 0.5 * self.delta_E):
            raise ConfigError(
                f"delta_L={self.delta_L!r} must stay below half of "
                f"delta_E={self.delta_E!r}")
        if not (math.isfinite(self.c_D) and 0.0 < self.c_D < 1.0):
            raise ConfigError(f"c_D={self.c_D!r} must lie strictly inside (0, 1)")
        if not (math.isfinite(self.c_V) and self.c_V > 0.0):
            raise ConfigError(f"c_V={self.c_V!r} must be positive")
        if not (math.isfinite(self.eps) and self.eps > 0.0):
            raise ConfigError(f"eps={self.eps!r} must be positive")
        if not self.kappa_table:
            raise ConfigError("kappa_table must not be empty")
        last_d, last_k = 0.0, 0.0
        for d, k in self.kappa_table:
            if not (math.isfinite(d) and d > last_d):
                raise ConfigError(
                    f"kappa_table distances must increase strictly; got {d!r} "
                    f"after {last_d!r}")
            if not (math.isfinite(k) and k > 0.0 and k >= last_k):
                raise ConfigError(
                    f"kappa_table floors must be positive and non-decreasing; "
                    f"got {k!r} after {last_k!r}")
            last_d, last_k = d, k

    def kappa(self, delta: float) -> float:
        """Variational floor at normalized distance ``delta`` (clamped interpolation)."""
        ds = np.array([d for d, _ in self.kappa_table])
        ks = np.array([k for _, k in self.kappa_table])
        return float(np.interp(delta, ds, ks))

    def eps_V(self, delta: float, grad_norm: float) -> float:
        """Admissible energy-excess root for the variational floor at ``delta``."""
        return min(self.eps, self.c_D * delta * grad_norm)

    def eps_B(self, delta: float, grad_norm: float) -> float:
        """Energy-excess root under which the one-pass property is monitored."""
        return min(self.eps, 0.5 * self.c_D * delta * grad_norm)


def kinetic_excess(report: FunctionalReport) -> float:
    """Kinetic minus quartic: vanishes on the bubble, signs the two fates."""
    return report.kinetic - report.quartic


# -- the sign functional -------------------------------------------------------


def theta_from_signals(energy_value: float, excess: float, lambda1: float,
                       dtilde: float, *, e_floor: float, grad_norm: float,
                       cfg: ClassifierConfig | None = None,
                       notes: list | None = None) -> int:
    """Assign the sign from precomputed scalars.

    ``energy_value``, ``excess`` (kinetic minus quartic), ``lambda1`` (real
    unstable coefficient, NaN when unavailable), and ``dtilde`` (working
    distance, may be infinite for far states) are combined under the band
    rules; ``e_floor`` is the bubble energy and ``grad_norm`` its gradient
    norm.  Raises NotClassifiableError for inadmissible or undecidable
    inputs.
    """
    cfg = cfg or ClassifierConfig()
    below = energy_value < e_floor
    have_distance = dtilde is not None and not math.isnan(dtilde)
    if not below:
        if not have_distance:
            raise NotClassifiableError(
                "state sits above the bubble energy and no working distance "
                "is available")
        cap = min(cfg.eps**2, (cfg.c_D * dtilde) ** 2)
        if energy_value - e_floor >= cap:
            raise NotClassifiableError(
                f"energy excess {energy_value - e_floor:.3e} reaches the "
                f"admissibility cap {cap:.3e} at working distance "
                f"{dtilde:.3e}: the state lies in the unclassifiable funnel")

    k_applies = (below or (have_distance and dtilde >= cfg.delta1 * grad_norm))
    k_applies = k_applies and math.isfinite(excess)
    lam_applies = (have_distance and dtilde <= cfg.delta2 * grad_norm
                   and lambda1 is not None and math.isfinite(lambda1))
    k_sign = 1 if excess >= 0.0 else -1
    lam_sign = -1 if (lam_applies and lambda1 >= 0.0) else 1

    if k_applies and lam_applies:
        if k_sign != lam_sign:
            message = (
                f"sign rules disagree in the band (excess={excess:.3e}, "
                f"lambda1={lambda1:.3e}, dtilde={dtilde:.3e}); keeping the "
                f"kinetic-excess sign {k_sign:+d}")
            logger.warning(message)
            if notes is not None:
                notes.append(message)
        return k_sign
    if k_applies:
        return k_sign
    if lam_applies:
        return lam_sign
    raise NotClassifiableError(
        "neither sign rule applies: the kinetic excess or the unstable "
        "coefficient is unavailable at this distance")


def nonlinear_distance(bundle: GroundStateBundle, ops: LinearizedOps,
                       pair: EigenPair, phi: np.ndarray,
                       cfg: ClassifierConfig | None = None, *, kern=None,
                       coords: ModulationCoords | None = None,
                       window_dt: float = 2e-3,
                       window_sample: float = 0.08) -> float:
    """Working distance of a bare state to the bubble orbit.

    Far from the orbit this is exactly the orbital distance.  Inside the
    blending region the state is flowed forward and (by conjugation)
    backward over the mollification window, the energy-excess square is
    sampled against the rescaled clock, and the blended value is returned.
    When the window cannot be covered — the state ejects or the flow
    terminates early — the orbital distance stands in.
    """
    cfg = cfg or ClassifierConfig()
    grid = bundle.grid
    phi = np.asarray(phi, dtype=complex)
    if coords is None:
        coords = decompose(bundle, pair, phi)
    od = coords.orbit_distance
    grad_norm = math.sqrt(bundle.kinetic)
    if not coords.valid or cutoff(od / (grad_norm * cfg.delta_L)) == 0.0:
        return od

    wcfg = EvolveConfig(dt0=window_dt, t_max=WINDOW_HALF_WIDTH + 0.9,
                        sample_dt=window_sample, adapt=True)
    mu, e_floor = pair.rate, bundle.energy

    def raw_series(traj: Trajectory):
        raw = traj.energy - e_floor + 2.0 * mu * traj.lambda1**2
        ok = np.isfinite(raw) & np.isfinite(traj.tau)
        stop = int(np.argmax(~ok)) if (~ok).any() else len(ok)
        return traj.tau[:stop], raw[:stop]

    try:
        fwd = evolve(grid, phi, wcfg, kern=kern, bundle=bundle, ops=ops,
                     pair=pair)
        bwd = evolve(grid, np.conj(phi), wcfg, kern=kern, bundle=bundle,
                     ops=ops, pair=pair)
    except IntegrityError:
        logger.warning("window flow around the state lost integrity; the "
                       "orbital distance stands in")
        return od
    tau_f, sq_f = raw_series(fwd)
    tau_b, sq_b = raw_series(bwd)
    taus = np.concatenate([-tau_b[:0:-1], tau_f])
    sqs = np.concatenate([sq_b[:0:-1], sq_f])
    try:
        return blended_distance(od, lambda: mollified(taus, sqs, 0.0),
                                grad_norm, cfg.delta_L)
    except WindowError:
        logger.debug("mollification window not covered; the orbital "
                     "distance stands in")
        return od


def theta(bundle: GroundStateBundle, ops: LinearizedOps, pair: EigenPair,
          phi: np.ndarray, cfg: ClassifierConfig | None = None, *, kern=None,
          coords: ModulationCoords | None = None,
          dtilde: float | None = None) -> int:
    """Sign of a bare state: +1 on the dispersive side, -1 on the
    concentrating side.

    Computes the conserved functionals, the modulation coordinates, and —
    unless the caller supplies ``dtilde`` — the working distance, then
    applies the band rules.  Raises NotClassifiableError inside the
    funnel.
    """
    cfg = cfg or ClassifierConfig()
    grid = bundle.grid
    phi = np.asarray(phi, dtype=complex)
    if kern is None:
        kern = kernel_matrix(grid)
    report = full_report(grid, phi, kern)
    if coords is None:
        coords = decompose(bundle, pair, phi)
    if dtilde is None:
        grad_norm = math.sqrt(bundle.kinetic)
        if not coords.valid:
            dtilde = coords.orbit_distance
        elif cutoff(coords.orbit_distance / (grad_norm * cfg.delta_L)) == 0.0:
            dtilde = coords.orbit_distance
        else:
            dtilde = nonlinear_distance(bundle, ops, pair, phi, cfg,
                                        kern=kern, coords=coords)
    lam1 = coords.lambda1 if coords.valid else math.nan
    return theta_from_signals(report.energy, kinetic_excess(report), lam1,
                              dtilde, e_floor=bundle.energy,
                              grad_norm=math.sqrt(bundle.kinetic), cfg=cfg)


# -- trajectory-level diagnostics ----------------------------------------------


def _level_series(traj: Trajectory) -> np.ndarray:
    """Working distance along a tracked trajectory.

    Prefers the trajectory's blended distance, falls back to the orbital
    distance, and marks samples beyond the decomposition validity radius
    as infinitely far.
    """
    return np.where(np.isfinite(traj.dtilde), traj.dtilde,
                    np.where(np.isfinite(traj.orbit_dist), traj.orbit_dist,
                             np.inf))


@dataclass(frozen=True)
class CrossingEvent:
    """One crossing of the monitored distance level."""

    time: float
    tau: float
    kind: str          # "exit" (leaving the neighborhood) or "entry"
    level: float       # the threshold that was crossed


@dataclass(frozen=True)
class OnePassLog:
    """Crossing record of the distance level ``delta`` along one trajectory."""

    delta: float
    threshold: float
    events: tuple[CrossingEvent, ...]
    exit_count: int
    reentry_count: int
    single_pass_ok: bool
    first_exit_time: float | None
    started_inside: bool
    samples_used: int


def one_pass_monitor(traj: Trajectory, delta: float,
                     grad_norm: float) -> OnePassLog:
    """Record every crossing of the working distance through ``delta``.

    ``delta`` is a fraction of ``grad_norm``.  The trajectory must carry
    modulation tracking.  A sound flow exits the neighborhood at most once
    and never re-enters; the log says whether that held.
    """
    if not (math.isfinite(delta) and delta > 0.0):
        raise ConfigError(f"monitored level delta={delta!r} must be positive")
    threshold = delta * grad_norm
    levels = _level_series(traj)
    times = traj.t
    taus = traj.tau

    events: list[CrossingEvent] = []
    inside_prev: bool | None = None
    started_inside = False
    used = 0
    first_exit: float | None = None
    exits = reentries = 0
    for i in range(len(levels)):
        if not math.isfinite(times[i]) or math.isnan(levels[i]):
            continue
        inside = levels[i] <= threshold
        if inside_prev is None:
            started_inside = inside
        elif inside != inside_prev:
            lo, hi = levels[i - 1], levels[i]
            if math.isfinite(lo) and math.isfinite(hi) and hi != lo:
                frac = (threshold - lo) / (hi - lo)
                t_cross = times[i - 1] + frac * (times[i] - times[i - 1])
            else:
                frac, t_cross = 1.0, times[i]
            if math.isfinite(taus[i - 1]) and math.isfinite(taus[i]):
                tau_cross = taus[i - 1] + frac * (taus[i] - taus[i - 1])
            else:
                tau_cross = math.nan
            kind = "entry" if inside else "exit"
            events.append(CrossingEvent(time=float(t_cross),
                                        tau=float(tau_cross), kind=kind,
                                        level=threshold))
            if kind == "exit":
                exits += 1
                if first_exit is None:
                    first_exit = float(t_cross)
            elif first_exit is not None:
                reentries += 1
        inside_prev = inside
        used += 1
    return OnePassLog(delta=delta, threshold=threshold, events=tuple(events),
                      exit_count=exits, reentry_count=reentries,
                      single_pass_ok=(exits <= 1 and reentries == 0),
                      first_exit_time=first_exit,
                      started_inside=started_inside, samples_used=used)


@dataclass(frozen=True)
class EjectionFit:
    """Log-linear fit of the working distance along an ejection.

    ``status`` is "complete" when the distance reached the ejection level,
    "incomplete" when it never did, "too-few-points" when the rising window
    is too thin to fit, and "no-data" when the trajectory carries nothing
    usable.  ``lambda_residual`` is the largest forward-difference residual
    of the growing pair combination against its exponential law, and
    ``lambda_scale`` the largest squared orbital distance over the fit
    window (the residual is quadratically small in it).
    """

    status: str
    rate: float
    r_squared: float
    t_start: float
    t_exit: float
    n_points: int
    sign_lambda1_constant: bool
    k_sign_matches: bool
    lambda_residual: float
    lambda_scale: float


def _empty_fit(status: str, sign_const: bool = False) -> EjectionFit:
    return EjectionFit(status=status, rate=math.nan, r_squared=math.nan,
                       t_start=math.nan, t_exit=math.nan, n_points=0,
                       sign_lambda1_constant=sign_const, k_sign_matches=False,
                       lambda_residual=math.nan, lambda_scale=math.nan)


def track_ejection(traj: Trajectory, pair: EigenPair,
                   bundle: GroundStateBundle,
                   cfg: ClassifierConfig | None = None,
                   t0: float = 0.0) -> EjectionFit:
    """Fit the exponential ejection of a tracked trajectory.

    Scans samples from ``t0`` for the working distance rising to the
    ejection level, fits log-distance against the rescaled clock over the
    last decade below that level, and cross-checks the unstable-coefficient
    sign, the sign rule at exit, and the exponential law of the growing
    pair combination.
    """
    cfg = cfg or ClassifierConfig()
    grad_norm = math.sqrt(bundle.kinetic)
    mu = pair.rate
    thr_hi = cfg.delta_X * grad_norm
    thr_lo = 0.1 * thr_hi

    levels = _level_series(traj)
    usable = (np.isfinite(traj.t) & (traj.t >= t0) & np.isfinite(traj.tau)
              & np.isfinite(levels))
    idx = np.where(usable)[0]
    if idx.size == 0:
        return _empty_fit("no-data")

    lam1 = traj.lambda1[idx]
    sign_const = bool(np.all(np.isfinite(lam1))
                      and (np.all(lam1 > 0) or np.all(lam1 < 0)))
    reached = idx[levels[idx] >= thr_hi]
    if reached.size == 0:
        return _empty_fit("incomplete", sign_const)
    exit_i = int(reached[0])

    window = idx[(levels[idx] >= thr_lo) & (levels[idx] <= thr_hi)
                 & (idx <= exit_i)]
    if window.size < 3:
        return _empty_fit("too-few-points", sign_const)

    tau_w = traj.tau[window]
    log_w = np.log(levels[window])
    slope, intercept = np.polyfit(tau_w, log_w, 1)
    resid = log_w - (slope * tau_w + intercept)
    total = np.sum((log_w - log_w.mean()) ** 2)
    r_squared = 1.0 - float(np.sum(resid**2) / total) if total > 0 else math.nan

    lam_w = traj.lambda1[window]
    sign_const = bool(np.all(np.isfinite(lam_w))
                      and (np.all(lam_w > 0) or np.all(lam_w < 0)))

    k_exit = 4.0 * traj.energy[exit_i] - traj.grad_sq[exit_i]
    lam_exit = traj.lambda1[exit_i]
    if not math.isfinite(lam_exit):
        finite_lam = window[np.isfinite(traj.lambda1[window])]
        lam_exit = traj.lambda1[finite_lam[-1]] if finite_lam.size else math.nan
    k_sign = 1 if k_exit >= 0.0 else -1
    lam_rule = -1 if lam_exit >= 0.0 else 1
    k_matches = math.isfinite(k_exit) and math.isfinite(lam_exit) \
        and k_sign == lam_rule

    lam_plus = traj.lambda1[window] + traj.lambda2[window]
    od_w = traj.orbit_dist[window]
    good = np.isfinite(lam_plus) & np.isfinite(od_w)
    residual = scale = math.nan
    if good.sum() >= 2:
        lp, tv, od = lam_plus[good], tau_w[good], od_w[good]
        diffs = np.diff(lp) / np.diff(tv)
        mids = 0.5 * (lp[1:] + lp[:-1])
        residual = float(np.max(np.abs(diffs - mu * mids)))
        scale = float(np.max(np.maximum(od[1:], od[:-1]) ** 2))

    return EjectionFit(status="complete", rate=float(slope),
                       r_squared=r_squared, t_start=float(traj.t[window[0]]),
                       t_exit=float(traj.t[exit_i]), n_points=int(window.size),
                       sign_lambda1_constant=sign_const,
                       k_sign_matches=bool(k_matches),
                       lambda_residual=residual, lambda_scale=scale)


# -- fate classification ---------------------------------------------------------


@dataclass(frozen=True)
class FateReport:
    """Outcome of one time direction of the flow."""

    direction: str                 # "forward" or "backward"
    fate: str                      # scatter | blowup | trapped | undecided
    theta_at_exit: int | None
    exit_time: float | None
    termination: str
    ejection: EjectionFit | None
    one_pass: OnePassLog
    notes: tuple[str, ...] = field(default_factory=tuple)


def _fate_from_trajectory(traj: Trajectory, direction: str,
                          cfg: ClassifierConfig, bundle: GroundStateBundle,
                          pair: EigenPair) -> FateReport:
    grad_norm = math.sqrt(bundle.kinetic)
    threshold = cfg.delta_B * grad_norm
    one_pass = one_pass_monitor(traj, cfg.delta_B, grad_norm)
    levels = _level_series(traj)
    notes: list[str] = []

    outside = np.where(~np.isnan(levels) & (levels >= threshold)
                       & np.isfinite(traj.t))[0]
    eval_i = int(outside[0]) if outside.size else None

    theta_val: int | None = None
    exit_time: float | None = None
    if eval_i is not None:
        exit_time = float(traj.t[eval_i])
        excess = 4.0 * traj.energy[eval_i] - traj.grad_sq[eval_i]
        try:
            theta_val = theta_from_signals(
                traj.energy[eval_i], excess, traj.lambda1[eval_i],
                levels[eval_i], e_floor=bundle.energy, grad_norm=grad_norm,
                cfg=cfg, notes=notes)
        except NotClassifiableError as exc:
            notes.append(f"sign unavailable at exit: {exc}")

    proxy = {"blowup": -1, "dispersed": 1}.get(traj.termination)

    if not one_pass.single_pass_ok:
        fate = "undecided"
        notes.append("the working distance re-entered the neighborhood "
                     "after exiting")
    elif proxy is None:
        if eval_i is None and traj.termination == "horizon":
            fate = "trapped"
        else:
            fate = "undecided"
            notes.append("no asymptotic proxy fired within the horizon")
    elif theta_val is None:
        fate = "undecided"
        notes.append("an asymptotic proxy fired but the sign functional "
                     "was unavailable at exit")
    elif theta_val == proxy:
        fate = "scatter" if proxy > 0 else "blowup"
    else:
        fate = "undecided"
        notes.append(f"sign at exit {theta_val:+d} contradicts the "
                     f"asymptotic proxy {proxy:+d}")

    ejection = (track_ejection(traj, pair, bundle, cfg)
                if one_pass.started_inside else None)
    return FateReport(direction=direction, fate=fate, theta_at_exit=theta_val,
                      exit_time=exit_time, termination=traj.termination,
                      ejection=ejection, one_pass=one_pass,
                      notes=tuple(notes))


def classify_fate(grid: RadialGrid, u0: np.ndarray,
                  bundle: GroundStateBundle, ops: LinearizedOps,
                  pair: EigenPair, cfg: ClassifierConfig | None = None,
                  evolve_cfg: EvolveConfig | None = None,
                  kern=None) -> tuple[FateReport, FateReport]:
    """Classify both time directions of the flow through ``u0``.

    The backward direction is the forward flow of the conjugate state.
    Each direction is tracked, monitored for a single crossing of the
    delta_B level, sign-classified at exit, and reconciled with the
    solver's asymptotic proxies.
    """
    cfg = cfg or ClassifierConfig()
    evolve_cfg = evolve_cfg or EvolveConfig(dt0=2e-3, t_max=12.0,
                                            sample_dt=0.05, adapt=True)
    u0 = np.asarray(u0, dtype=complex)
    reports = []
    for direction, state in (("forward", u0), ("backward", np.conj(u0))):
        traj = evolve(grid, state, evolve_cfg, kern=kern, bundle=bundle,
                      ops=ops, pair=pair)
        reports.append(_fate_from_trajectory(traj, direction, cfg, bundle,
                                             pair))
    return reports[0], reports[1]


# -- variational floor calibration ----------------------------------------------


def calibrate_kappa(bundle: GroundStateBundle, ops: LinearizedOps,
                    pair: EigenPair,
                    deltas: tuple[float, ...] = (0.005, 0.01, 0.02, 0.04,
                                                 0.08, 0.16),
                    *, kern=None, cfg: ClassifierConfig | None = None,
                    mix_angles: tuple[float, ...] = (0.3, 0.8, 1.35),
                    safety: float = 0.5) -> tuple[tuple[float, float], ...]:
    """Measure the variational floor over a family of admissible states.

    For each normalized distance the family (rescaled bubbles, unstable-pair
    displacements, and their mixtures with the worst-case transverse
    direction) is bisected onto that distance, states whose energy excess
    breaches the admissibility cap are discarded, and the floor is ``safety``
    times the smallest magnitude of kinetic-minus-quartic that remains.
    Returns a monotone table of (delta, kappa) pairs.
    """
    cfg = cfg or ClassifierConfig()
    grid = bundle.grid
    if kern is None:
        kern = kernel_matrix(grid)
    profile = bundle.profile.astype(complex)
    g1 = pair.mode_real
    mu, e_floor = pair.rate, bundle.energy
    grad_norm = math.sqrt(bundle.kinetic)

    transverse = bundle.potential * bundle.profile
    transverse = transverse - 2.0 * l2_inner(grid, transverse,
                                             pair.mode_imag) * g1
    transverse = transverse / math.sqrt(hdot_inner(grid, transverse,
                                                   transverse))

    def signals(dev: np.ndarray) -> tuple[float, float, float]:
        state = profile + dev
        report = full_report(grid, state, kern)
        lam1 = split_on_pair(grid, pair, dev)[0]
        exc = report.energy - e_floor
        dist = math.sqrt(max(exc + 2.0 * mu * lam1**2, 0.0))
        return exc, kinetic_excess(report), dist

    def member(kind: str, amp: float, sign: float, mix: float) -> np.ndarray:
        if kind == "scale":
            return sign * amp * profile
        if kind == "pair":
            return 2.0 * sign * amp * g1 + 0j
        return (2.0 * sign * amp * math.cos(mix) * g1
                + amp * math.sin(mix) * transverse + 0j)

    def at_distance(kind: str, target: float, sign: float, mix: float):
        hi = 1e-4
        for _ in range(80):
            if signals(member(kind, hi, sign, mix))[2] >= target:
                break
            hi *= 1.6
        else:
            return None
        lo = 0.0
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            if signals(member(kind, mid, sign, mix))[2] < target:
                lo = mid
            else:
                hi = mid
        return signals(member(kind, hi, sign, mix))

    candidates = [("scale", s, 0.0) for s in (1.0, -1.0)]
    candidates += [("pair", s, 0.0) for s in (1.0, -1.0)]
    candidates += [("mix", s, a) for a in mix_angles for s in (1.0, -1.0)]

    table: list[tuple[float, float]] = []
    floor_prev = 0.0
    for delta in deltas:
        target = delta * grad_norm
        cap = cfg.eps_V(delta, grad_norm) ** 2
        best = math.inf
        for kind, sign, mix in candidates:
            out = at_distance(kind, target, sign, mix)
            if out is None:
                continue
            exc, excess_k, _ = out
            if exc >= cap:
                continue
            best = min(best, abs(excess_k))
        if not math.isfinite(best):
            raise ParameterError(
                f"no admissible calibration state found at distance "
                f"{delta!r}")
        floor = max(safety * best, floor_prev)
        table.append((delta, floor))
        floor_prev = floor
    return tuple(table)
