"""Nonlocal interaction potential V[f](r) = (|x|^{-4} * f)(r) in d = 5.

Integrating the translation kernel |x - y|^{-4} over the sphere |y| = s gives
a closed-form radial kernel with an integrable logarithmic ridge at s = r:

    V[f](r) = int_0^R K(r, s) f(s) s^4 ds,
    K(r, s) = 2 pi^2 [ (r^2+s^2)/(2 r^3 s^3) ln((r+s)/|r-s|) - 1/(r^2 s^2) ],
    K(0, s) = (8 pi^2 / 3) s^{-4}.

The matrix form uses product quadrature: on every mesh cell the density is
replaced by its cubic interpolant and the moments of y^m against ln(r+s),
ln|r-s|, and polynomials are integrated exactly (log moments via closed
antiderivatives near the ridge, via a convergent Mercator series away from it,
so no catastrophic binomial cancellation occurs at any separation). This keeps
the quadrature 4th-order accurate up to the logarithmic ridge.
"""

from __future__ import annotations

import hashlib
import math
import struct

import numpy as np

from .errors import KernelCacheError
from .radial_core import RadialGrid, SURFACE_MEASURE

_N_SERIES = 30


def kernel_function(r, s):
    """Closed-form radial kernel K(r, s); diverges logarithmically at r = s.

    The two terms of the closed form cancel to O((min/max)^0) as the radii
    separate, so for min/max < 1/2 the convergent power series in
    x = min(r,s)/max(r,s) is used instead:

        K = (2 pi^2 / max^4) sum_k (4k+4)/((2k+1)(2k+3)) x^{2k}.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    r, s = np.broadcast_arrays(r, s)
    lo = np.minimum(np.abs(r), np.abs(s))
    hi = np.maximum(np.abs(r), np.abs(s))
    out = np.empty(lo.shape, dtype=float)

    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(hi > 0, lo / hi, 0.0)
    near = x >= 0.5
    if np.any(near):
        rb, sb = lo[near], hi[near]
        out[near] = 2.0 * np.pi**2 * (
            (rb**2 + sb**2) / (2.0 * rb**3 * sb**3)
            * np.log((rb + sb) / np.abs(rb - sb))
            - 1.0 / (rb**2 * sb**2)
        )
    far = ~near
    if np.any(far):
        xf = x[far]
        x2 = xf * xf
        acc = np.zeros_like(xf)
        p = np.ones_like(xf)
        for k in range(32):            # x^64 < 6e-20 at x = 1/2
            acc += (4.0 * k + 4.0) / ((2.0 * k + 1.0) * (2.0 * k + 3.0)) * p
            p *= x2
        with np.errstate(divide="ignore"):
            out[far] = 2.0 * np.pi**2 * acc / hi[far] ** 4
    return out if out.shape else float(out)


def build_kernel_matrix(grid: RadialGrid) -> np.ndarray:
    """Dense matrix M with (V f)(r_i) = (M f)_i ~ int K(r_i, s) f(s) s^4 ds.

    Each entry is the exact integral of the kernel against a piecewise-cubic
    cardinal function; diag(w) M is then symmetrized so the weighted pairing
    <V[f], g> is symmetric to machine precision.
    """
    r = grid.r
    n = grid.n
    M = np.zeros((n, n))

    # moments J_e = int_{-1/2}^{1/2} y^e dy
    e = np.arange(7 + _N_SERIES + 1)
    J = ((0.5) ** (e + 1) - (-0.5) ** (e + 1)) / (e + 1)

    rows = r[1:]                                  # row radii (r = 0 handled below)
    inv_r3 = 1.0 / rows**3
    p_idx = np.arange(1, _N_SERIES + 1)

    for k in range(n - 1):
        sL, sR = r[k], r[k + 1]
        a = k if k <= 2 else min(k - 1, n - 4)
        idx = np.arange(a, a + 4)
        mid = 0.5 * (sL + sR)
        h = sR - sL
        # cardinal coefficients in scaled coords y = (s - mid)/h
        U = (r[idx] - mid) / h
        V4 = U[None, :] ** np.arange(4)[:, None]        # V4[q, node] = u_node^q
        # cardinal coefficients: l_a(y) = sum_q Cb[a, q] y^q with Cb @ V4 = I
        Cb = np.linalg.inv(V4)

        P = rows + mid                                  # ln(r + s) offsets
        Q = rows - mid                                  # ln|r - s| offsets
        xP = h / P
        xQ = h / np.where(Q != 0.0, Q, np.inf)

        # series moments: T[m] = ln|offset| J_m + sum_p sgn_p (x/?)^p/p J_{m+p}
        # ln(P + h y) = ln P + ln(1 + xP y); ln|Q - h y| = ln|Q| + ln|1 - xQ y|
        TP = np.log(P)[:, None] * J[None, :7]
        TQ = np.log(np.abs(np.where(Q != 0.0, Q, 1.0)))[:, None] * J[None, :7]
        powP = np.cumprod(np.tile(xP[:, None], (1, _N_SERIES)), axis=1)
        powQ = np.cumprod(np.tile(xQ[:, None], (1, _N_SERIES)), axis=1)
        sgn = (-1.0) ** (p_idx + 1)
        for m in range(7):
            Jm = J[m + p_idx]
            TP[:, m] += powP @ (sgn * Jm / p_idx)
            TQ[:, m] -= powQ @ (Jm / p_idx)

        # exact antiderivatives where the series is unreliable (near the ridge)
        nearQ = np.abs(Q) < 2.0 * h
        if np.any(nearQ):
            Qn = Q[nearQ]
            w1 = Qn + 0.5 * h
            w2 = Qn - 0.5 * h
            # T_exact[m] = (1/h^{m+1}) sum_j C(m,j) Q^{m-j} (-1)^j [G_j(w1)-G_j(w2)]
            Texact = np.empty((len(Qn), 7))
            jj = np.arange(7)
            Gw1 = _G_stack(jj, w1)
            Gw2 = _G_stack(jj, w2)
            for m in range(7):
                cj = np.array([math.comb(m, int(j)) for j in range(m + 1)])
                term = (Qn[:, None] ** (m - jj[None, : m + 1])) * ((-1.0) ** jj[None, : m + 1])
                Texact[:, m] = np.sum(cj[None, :] * term * (Gw1[: m + 1] - Gw2[: m + 1]).T, axis=1) / h ** (m + 1)
            TQ[nearQ] = Texact
        nearP = P < 2.0 * h
        if np.any(nearP):
            Pn = P[nearP]
            w1 = Pn + 0.5 * h
            w2 = Pn - 0.5 * h
            Texact = np.empty((len(Pn), 7))
            jj = np.arange(7)
            Gw1 = _G_stack(jj, w1)
            Gw2 = _G_stack(jj, w2)
            for m in range(7):
                cj = np.array([math.comb(m, int(j)) for j in range(m + 1)])
                term = ((-Pn[:, None]) ** (m - jj[None, : m + 1]))
                Texact[:, m] = np.sum(cj[None, :] * term * (Gw1[: m + 1] - Gw2[: m + 1]).T, axis=1) / h ** (m + 1)
            TP[nearP] = Texact

        TD = TP - TQ                                    # moments of ln((r+s)/|r-s|)

        # m_log(s) = s (r^2 + s^2) / (2 r^3) as a cubic in y (row-dependent)
        al0 = (rows**2 * mid + mid**3) * 0.5 * inv_r3
        al1 = (rows**2 + 3.0 * mid**2) * h * 0.5 * inv_r3
        al2 = 3.0 * mid * h**2 * 0.5 * inv_r3
        al3 = np.full_like(rows, h**3 * 0.5) * inv_r3

        # E_log[i, a] = sum_t alpha_t[i] * sum_q Cb[a, q] TD[i, q + t]
        E = np.zeros((n - 1, 4))
        for t, al in enumerate((al0, al1, al2, al3)):
            TT = TD[:, t:t + 4] @ Cb.T
            E += al[:, None] * TT

        # polynomial part: - (1/r^2) * int l_a(y) (mid + h y)^2 dy
        pm = mid**2 * J[:4] + 2.0 * mid * h * J[1:5] + h**2 * J[2:6]
        poly = Cb @ pm
        E -= (1.0 / rows**2)[:, None] * poly[None, :]

        M[1:, idx] += (2.0 * np.pi**2 * h) * E

    # r = 0 row: K(0, s) s^4 = 8 pi^2 / 3, a plain ds integral
    M[0, :] = (8.0 * np.pi**2 / 3.0) * grid.weights_pow(0)

    # make the weighted pairing <V[f], g> = <f, V[g]> exact: replace
    # diag(w) M by a symmetric blend. A plain average (w_i M_ij + w_j M_ji)/2
    # would perturb row i by (asymmetry)/(2 w_i), which is ruinous where the
    # r^4 weight is tiny; the harmonic-weight blend below perturbs both rows
    # by (asymmetry)/(w_i + w_j), i.e. on the scale of the LARGER weight, so
    # the near-origin rows keep their accurate collocation values. The
    # elementwise operations commute, so A is exactly symmetric in floating
    # point. The r = 0 row keeps its plain-quadrature form and feeds column
    # 0; its own weight is a lumped floor value, not a quadrature statement.
    w = grid.w
    A = M + M.T
    A *= w[:, None]
    A *= w[None, :]
    A /= w[:, None] + w[None, :]
    A[0, :] = w[0] * M[0, :]
    A[:, 0] = A[0, :]
    M = A / w[:, None]
    return M


def _G_stack(jj, w):
    """G_j(w) for all j in jj, shape (len(jj), len(w)); G_j(0) = 0."""
    w = np.asarray(w, dtype=float)
    aw = np.abs(w)
    safe = np.where(aw > 0, aw, 1.0)
    val = w[None, :] ** (jj[:, None] + 1) * (
        np.log(safe)[None, :] - 1.0 / (jj[:, None] + 1)
    ) / (jj[:, None] + 1)
    return np.where(aw[None, :] > 0, val, 0.0)


def kernel_matrix(grid: RadialGrid, cache_path=None) -> np.ndarray:
    """Memoized kernel matrix for a grid, with optional binary file cache."""
    if "kernel" in grid._cache:
        return grid._cache["kernel"]
    M = None
    if cache_path is not None:
        try:
            M = load_kernel_cache(grid, cache_path)
        except (KernelCacheError, OSError):
            M = None
    if M is None:
        M = build_kernel_matrix(grid)
        if cache_path is not None:
            save_kernel_cache(grid, M, cache_path)
    M.setflags(write=False)
    grid._cache["kernel"] = M
    return M


def apply_potential(grid: RadialGrid, density: np.ndarray, M=None) -> np.ndarray:
    """V[density](r_i) on the grid; density must be real (it is |u|^2)."""
    if M is None:
        M = kernel_matrix(grid)
    return M @ density


# -- binary cache ----------------------------------------------------------

_MAGIC = b"HKRN"
_VERSION = 1


def save_kernel_cache(grid: RadialGrid, M: np.ndarray, path):
    payload = np.ascontiguousarray(M).tobytes()
    gridbytes = np.ascontiguousarray(grid.r).tobytes()
    header = struct.pack(
        "<4sIIId",
        _MAGIC, _VERSION, grid.dim, grid.n, grid.r_max,
    )
    digest = hashlib.sha256(payload).digest()
    gdigest = hashlib.sha256(gridbytes).digest()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(gdigest)
        fh.write(digest)
        fh.write(payload)


def load_kernel_cache(grid: RadialGrid, path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sIIId"))
        magic, version, dim, n, r_max = struct.unpack("<4sIIId", head)
        if magic != _MAGIC or version != _VERSION:
            raise KernelCacheError("unrecognized kernel cache header")
        if dim != grid.dim or n != grid.n or r_max != grid.r_max:
            raise KernelCacheError("kernel cache was built for a different grid")
        gdigest = fh.read(32)
        digest = fh.read(32)
        payload = fh.read()
    if hashlib.sha256(np.ascontiguousarray(grid.r).tobytes()).digest() != gdigest:
        raise KernelCacheError("kernel cache grid nodes do not match")
    if hashlib.sha256(payload).digest() != digest:
        raise KernelCacheError("kernel cache payload checksum mismatch")
    M = np.frombuffer(payload, dtype=np.float64).reshape(n, n).copy()
    return M
