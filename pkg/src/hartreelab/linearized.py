"""Second variation of the energy at the bubble and its unstable eigenpair.

Writing a perturbed state as u = profile + h and splitting h = h1 + i h2,
the flow linearized at the bubble acts blockwise:

    real block   h1 -> -Lap h1 - V h1 - 2 (|x|^{-4} * (profile h1)) profile
    imag block   h2 -> -Lap h2 - V h2,       V = |x|^{-4} * profile^2.

Both blocks are self-adjoint in L2(r^4 dr). The composition
(imag block)(real block) has exactly one negative eigenvalue -rate^2 on
radial fields; its eigenvector together with the recovered partner mode
spans the growing/decaying solutions of the linearized flow, the source of
the instability that the modulation analysis tracks.

Discretization: the blocks are assembled from the exactly symmetric weak
stiffness form, so both are symmetric with respect to the quadrature pairing
to machine precision. The eigenvalue search runs on the symmetrized
similarity diag(sqrt(w)) L diag(1/sqrt(w)) and uses dense shift-inverted
Rayleigh iteration seeded from the most negative direction of the real
block; this is a one-shot setup cost per grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import SpectralError
from .ground_state import GroundStateBundle
from .hartree_potential import apply_potential, kernel_matrix
from .radial_core import RadialGrid, hdot_inner, l2_inner


@dataclass(frozen=True)
class LinearizedOps:
    """Assembled linearization blocks around the bubble on one grid."""

    grid: RadialGrid
    profile: np.ndarray        # the bubble
    dilation_mode: np.ndarray  # generator of the scaling symmetry
    potential: np.ndarray      # |x|^{-4} * profile^2
    kern: np.ndarray           # nonlocal kernel matrix of the grid
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def apply_lminus(self, f: np.ndarray) -> np.ndarray:
        """Imaginary-part block: -Lap f - V f (weak-form Laplacian)."""
        out = (self.grid.stiffness @ f) / self.grid.w
        out -= self.potential * f
        return out

    def apply_lplus(self, f: np.ndarray) -> np.ndarray:
        """Real-part block: imag block minus the nonlocal rank-structured term."""
        out = self.apply_lminus(f)
        out -= 2.0 * self.profile * (self.kern @ (self.profile * f))
        return out


def build_linearized(bundle: GroundStateBundle, kern=None) -> LinearizedOps:
    """Assemble the linearization blocks from a ground-state bundle."""
    if kern is None:
        kern = kernel_matrix(bundle.grid)
    return LinearizedOps(
        grid=bundle.grid,
        profile=bundle.profile,
        dilation_mode=bundle.dilation_mode,
        potential=bundle.potential,
        kern=kern,
    )


@dataclass(frozen=True)
class EigenPair:
    """Instability rate and the real/imaginary parts of the unstable mode.

    Normalized so twice the L2 pairing of the two parts is 1 and the
    imaginary part has positive L2 pairing with the bubble. The growing and
    decaying modes of the linearized flow are mode_real -+ i mode_imag.
    """

    rate: float
    mode_real: np.ndarray
    mode_imag: np.ndarray
    # relative residuals of the two discrete block equations in the
    # quadrature norm: how well the returned pair solves the assembled
    # eigenproblem (grid convergence is audited separately, by doubling)
    residual_real_eq: float   # |(real block) mode_real + rate mode_imag|
    residual_imag_eq: float   # |(imag block) mode_imag - rate mode_real|


def _weighted_forms(ops: LinearizedOps) -> tuple[np.ndarray, np.ndarray]:
    """Dense weighted weak matrices (imag block, real block).

    f . (B g) approximates the radial pairing of the block applied to g
    against f; both are exactly symmetric in floating point.
    """
    if "forms" not in ops._cache:
        grid = ops.grid
        w = grid.w
        b_minus = grid.stiffness.toarray()
        b_minus[np.diag_indices_from(b_minus)] -= w * ops.potential
        pairing = w[:, None] * ops.kern
        pairing += pairing.T
        pairing *= 0.5
        b_plus = b_minus - 2.0 * (
            ops.profile[:, None] * pairing * ops.profile[None, :]
        )
        ops._cache["forms"] = (b_minus, b_plus)
    return ops._cache["forms"]


def _repair_origin(grid: RadialGrid, f: np.ndarray, n_fix: int,
                   n_fit: int = 12) -> np.ndarray:
    """Replace the first n_fix values of an even profile by even extension.

    The end-correction rows of the weak form carry near-vanishing quadrature
    weight, so eigenvector components there are weak-sense only and can be
    pointwise junk; a least-squares quadratic in r^2 through the next n_fit
    nodes (deep inside the core, where r^2 is tiny) restores pointwise
    values without perceptibly moving any weighted functional.
    """
    js = slice(n_fix, n_fix + n_fit)
    rs = grid.r[js] ** 2
    design = np.stack([np.ones(n_fit), rs, rs**2], axis=1)
    coef, *_ = np.linalg.lstsq(design, f[js], rcond=None)
    out = f.copy()
    rfix = grid.r[:n_fix] ** 2
    out[:n_fix] = coef[0] + coef[1] * rfix + coef[2] * rfix**2
    return out


def solve_eigenpair(ops: LinearizedOps, max_iter: int = 60) -> EigenPair:
    """Compute the instability rate and unstable mode of the linearized flow.

    Route: the composition (imag block)(real block) acting on the real part
    of the mode has the unique negative eigenvalue -rate^2. A dense
    shift-inverted Rayleigh iteration on the sqrt-weight similarity, seeded
    from the most negative eigendirection of the real block, converges in a
    handful of steps; the imaginary part is recovered by applying the real
    block and dividing by -rate.
    """
    grid = ops.grid
    w = grid.w
    sw = np.sqrt(w)
    n = grid.n
    b_minus, b_plus = _weighted_forms(ops)
    s_minus = b_minus / sw[:, None] / sw[None, :]
    s_plus = b_plus / sw[:, None] / sw[None, :]

    lam0, vec0 = sla.eigh(s_plus, subset_by_index=[0, 0])
    if lam0[0] >= 0.0:
        raise SpectralError(
            "real block has no negative direction; discretization fault"
        )
    z = vec0[:, 0]

    composed = s_minus @ s_plus

    def rayleigh(vec: np.ndarray) -> float:
        push = s_plus @ vec
        denom = float(vec @ push)
        return float(push @ (s_minus @ push)) / denom

    rho = rayleigh(z)
    eye = np.eye(n)
    best_res = math.inf
    best = (rho, z)
    stalls = 0
    lu = None
    for _ in range(max_iter):
        if lu is None:
            try:
                lu = sla.lu_factor(composed - rho * eye)
            except sla.LinAlgError:
                break
        z_new = sla.lu_solve(lu, z)
        if not np.all(np.isfinite(z_new)):
            break  # shift landed exactly on an eigenvalue; keep best iterate
        z_new /= np.linalg.norm(z_new)
        rho_new = rayleigh(z_new)
        res = float(np.linalg.norm(composed @ z_new - rho_new * z_new))
        z = z_new
        if res < best_res:
            best_res, best = res, (rho_new, z_new)
            stalls = 0
        else:
            stalls += 1
        if res <= 1e-13 * abs(rho_new) or stalls >= 3:
            break
        if abs(rho_new - rho) > 1e-15 * abs(rho):
            rho = rho_new
            lu = None
        # once rho stagnates, keep the factorization and polish the vector
    rho, z = best
    if not rho < 0.0:
        raise SpectralError("composed operator yielded no negative eigenvalue")
    rate = math.sqrt(-rho)

    # Partner component. Seeding it as -(real block) z / rate leaves junk
    # of size eps * |block| in far eigendirections, which a later block
    # application would amplify to eps * |block|^2; two frozen-shift
    # inverse steps on the swapped composition (whose eigenvector the
    # partner is) scrub that junk, and the amplitude is refit by least
    # squares. Each residual then costs a single block application, so
    # both are meaningful down to eps * |block|.
    push = s_plus @ z
    z2 = -push / rate
    try:
        lu2 = sla.lu_factor(s_plus @ s_minus - rho * eye)
        cand = z2
        for _ in range(2):
            nxt = sla.lu_solve(lu2, cand)
            if not np.all(np.isfinite(nxt)):
                break
            cand = nxt / np.linalg.norm(nxt)
        unit2 = cand / np.linalg.norm(cand)
        z2 = unit2 * float(unit2 @ z2)
    except sla.LinAlgError:
        pass
    res_real = float(
        np.linalg.norm(push + rate * z2) / (rate * np.linalg.norm(z2))
    )
    res_imag = float(
        np.linalg.norm(s_minus @ z2 - rate * z) / (rate * np.linalg.norm(z))
    )

    # Pointwise fields: components on the end-correction rows carry
    # near-zero quadrature weight and are weak-sense only, so restore them
    # by smooth even extension before exposing the mode for sampling.
    g1 = _repair_origin(grid, z / sw, 8)
    g2 = _repair_origin(grid, z2 / sw, 10)

    norm_sq = 2.0 * l2_inner(grid, g1, g2)
    if norm_sq <= 0.0:
        raise SpectralError("eigenpair pairing is not positive")
    g1 = g1 / math.sqrt(norm_sq)
    g2 = g2 / math.sqrt(norm_sq)
    if l2_inner(grid, ops.profile, g2) < 0.0:
        g1, g2 = -g1, -g2

    return EigenPair(
        rate=rate,
        mode_real=g1,
        mode_imag=g2,
        residual_real_eq=res_real,
        residual_imag_eq=res_imag,
    )


def composed_spectrum(ops: LinearizedOps) -> np.ndarray:
    """All eigenvalues of the composed operator, sorted by real part.

    Dense and expensive; intended for coarse grids to audit that the
    negative eigenvalue is simple up to discretization pollution.
    """
    sw = np.sqrt(ops.grid.w)
    b_minus, b_plus = _weighted_forms(ops)
    composed = (b_minus / sw[:, None] / sw[None, :]) @ (
        b_plus / sw[:, None] / sw[None, :]
    )
    vals = sla.eigvals(composed)
    return vals[np.argsort(vals.real)]


def second_variation(ops: LinearizedOps, h: np.ndarray) -> float:
    """Half the quadratic form of the linearization: the energy Hessian at
    the bubble evaluated blockwise on real and imaginary parts of h."""
    h = np.asarray(h)
    grid = ops.grid
    parts = (h.real, h.imag) if np.iscomplexobj(h) else (h, None)
    total = 0.0
    for position, part in enumerate(parts):
        if part is None or not np.any(part):
            continue
        quad = float(part @ (grid.stiffness @ part))
        quad -= float(np.dot(grid.w, ops.potential * part * part))
        if position == 0:
            src = ops.profile * part
            quad -= 2.0 * float(np.dot(grid.w * src, ops.kern @ src))
        total += 0.5 * grid.surface * quad
    return total


def _remove_two(grid, f, direction_grad, direction_l2):
    """Subtract the span of two directions so that f is orthogonal to the
    first in the gradient pairing and to the second in the L2 pairing."""
    gram = np.array([
        [hdot_inner(grid, direction_grad, direction_grad),
         hdot_inner(grid, direction_l2, direction_grad)],
        [l2_inner(grid, direction_grad, direction_l2),
         l2_inner(grid, direction_l2, direction_l2)],
    ])
    rhs = np.array([
        hdot_inner(grid, f, direction_grad),
        l2_inner(grid, f, direction_l2),
    ])
    coef = np.linalg.solve(gram, rhs)
    return f - coef[0] * direction_grad - coef[1] * direction_l2


def project_transverse(ops: LinearizedOps, pair: EigenPair,
                       h: np.ndarray) -> np.ndarray:
    """Project onto the subspace where the second variation is coercive.

    Four constraints, which decouple into two real blocks: the real part
    loses its gradient-pairing component along the dilation mode and its L2
    component along mode_imag; the imaginary part loses the gradient-pairing
    component along the bubble and the L2 component along mode_real.
    """
    h = np.asarray(h, dtype=complex)
    out_real = _remove_two(ops.grid, h.real, ops.dilation_mode, pair.mode_imag)
    out_imag = _remove_two(ops.grid, h.imag, ops.profile, pair.mode_real)
    return out_real + 1j * out_imag


def nonlinear_remainder(ops: LinearizedOps, v: np.ndarray) -> np.ndarray:
    """Part of the nonlinearity beyond linear order in the perturbation.

    For u = profile + v the interaction term expands as
    F(u) = F(profile) + V v + 2 (|x|^{-4} * (profile Re v)) profile + N(v);
    this returns N(v), which is quadratic in v near zero.
    """
    v = np.asarray(v, dtype=complex)
    cross = apply_potential(ops.grid, ops.profile * v.real, ops.kern)
    self_pot = apply_potential(ops.grid, np.abs(v) ** 2, ops.kern)
    return 2.0 * cross * v + self_pot * (ops.profile + v)
