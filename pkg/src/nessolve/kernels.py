"""Matern-5/2 kernel and Gram-block assembly for operator/boundary features.

Operator features are weak integrals of the linearized operator applied to
the kernel: for sine test functions the Laplacian is moved onto the test
function (exactly, via its eigenvalue), for fem tent functions one
integration by parts is used.  Either way every feature reduces to weighted
sums of kernel values (and, for fem, first kernel derivatives) on a
quadrature grid, so all Gram blocks are products of weight matrices with
pairwise kernel matrices.  The pairwise matrix is streamed in row chunks
when it is too large to hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import spaces
from .errors import ResolutionTooCoarseError
from .spaces import TestSpace, grid_points, trapezoid_weights

__all__ = [
    "KernelSpec",
    "FeatureSet",
    "GramBlocks",
    "kernel_eval",
    "kernel_dx",
    "kernel_matrix",
    "assemble_features",
    "evaluate_features",
    "assemble_collocation",
    "evaluate_collocation",
]

# max elements of a pairwise kernel block held at once
_CHUNK_ELEMENTS = 2 ** 24


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and length scale (only matern52 is implemented)."""

    family: str = "matern52"
    length_scale: float = 0.2

    def __post_init__(self):
        if self.family != "matern52":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        if not 0.0 < self.length_scale < np.inf:
            raise ValueError("length scale must be positive and finite")


def _as_points(x) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    if pts.ndim == 1:
        return pts[:, None]
    return pts


def _matern52(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    a = np.sqrt(5.0) / spec.length_scale
    ar = a * r
    return (1.0 + ar + ar ** 2 / 3.0) * np.exp(-ar)


def _matern52_d1(spec: KernelSpec, t: np.ndarray) -> np.ndarray:
    """d/dx K(x, y) for 1D arguments, t = x - y."""
    a = np.sqrt(5.0) / spec.length_scale
    at = a * np.abs(t)
    return -(a ** 2 / 3.0) * t * (1.0 + at) * np.exp(-at)


def _matern52_d11(spec: KernelSpec, t: np.ndarray) -> np.ndarray:
    """Mixed derivative d^2/dxdy K(x, y) for 1D arguments, t = x - y."""
    a = np.sqrt(5.0) / spec.length_scale
    at = a * np.abs(t)
    return (a ** 2 / 3.0) * (1.0 + at - at ** 2) * np.exp(-at)


def _matern52_d2(spec: KernelSpec, t: np.ndarray) -> np.ndarray:
    """Second derivative d^2/dx^2 K(x, y), 1D (equals -d^2/dxdy K)."""
    return -_matern52_d11(spec, t)


def _matern52_d4(spec: KernelSpec, t: np.ndarray) -> np.ndarray:
    """Fourth derivative d^2/dx^2 d^2/dy^2 K(x, y), 1D.

    Matern-5/2 is exactly C^4 at the diagonal (the first odd term in its
    Taylor expansion is r^5), so this mixed derivative is continuous."""
    a = np.sqrt(5.0) / spec.length_scale
    at = a * np.abs(t)
    return (a ** 4 / 3.0) * (3.0 - 5.0 * at + at ** 2) * np.exp(-at)


def _pairwise(spec: KernelSpec, x, y, kind: str = "val") -> np.ndarray:
    """Pairwise kernel (or 1D derivative) matrix between two point sets."""
    xp, yp = _as_points(x), _as_points(y)
    if kind == "val":
        return _matern52(spec, cdist(xp, yp))
    if xp.shape[1] != 1:
        raise ValueError("derivative matrices are 1D only")
    t = xp[:, 0][:, None] - yp[:, 0][None, :]
    if kind == "d1":
        return _matern52_d1(spec, t)
    if kind == "d11":
        return _matern52_d11(spec, t)
    if kind == "d2":
        return _matern52_d2(spec, t)
    if kind == "d4":
        return _matern52_d4(spec, t)
    raise ValueError(f"unknown pairwise kind {kind!r}")


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Kernel value between two points (scalars or length-d arrays)."""
    r = np.linalg.norm(np.atleast_1d(np.asarray(x, float)) -
                       np.atleast_1d(np.asarray(y, float)))
    return float(_matern52(spec, np.asarray(r)))


def kernel_dx(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of the kernel in its first argument."""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    diff = xv - yv
    r = np.linalg.norm(diff)
    a = np.sqrt(5.0) / spec.length_scale
    return -(a ** 2 / 3.0) * (1.0 + a * r) * np.exp(-a * r) * diff


def kernel_dxx_1d(spec: KernelSpec, x: float, y: float) -> float:
    """Second derivative in the first argument, 1D (equals -d^2/dxdy)."""
    return -float(_matern52_d11(spec, np.asarray(x - y)))


def kernel_matrix(spec: KernelSpec, x, y=None) -> np.ndarray:
    return _pairwise(spec, x, x if y is None else y, "val")


@dataclass(frozen=True)
class FeatureSet:
    """Weak operator features over a quadrature grid plus boundary points.

    The linearized operator is -nu_diff * Laplacian + c(x); ``weights_val``
    and (for fem) ``weights_der`` encode every feature as a weighted sum of
    kernel values / first derivatives at the quadrature nodes.
    """

    space: TestSpace
    c_field: np.ndarray
    nu_diff: float
    boundary_points: np.ndarray
    n_quad: int
    quad_points: np.ndarray = field(default=None, repr=False)
    quad_weights: np.ndarray = field(default=None, repr=False)
    weights_val: np.ndarray = field(default=None, repr=False)
    weights_der: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        sp = self.space
        if sp.kind in ("sine1d", "sine2d"):
            n_modes = sp.n_per_dim if sp.kind == "sine2d" else sp.size
            if self.n_quad < 2 * n_modes + 2:
                raise ResolutionTooCoarseError(
                    f"{self.n_quad} quadrature points per dim cannot resolve "
                    f"{n_modes} sine modes")
        pts = grid_points(self.n_quad, sp.dim)
        w = trapezoid_weights(self.n_quad, sp.dim)
        c = np.broadcast_to(np.asarray(self.c_field, dtype=float).ravel(),
                            w.shape).copy()
        bp = _as_points(self.boundary_points)
        if bp.shape[1] != sp.dim:
            raise ValueError("boundary point dimension mismatch")
        if len(np.unique(bp.round(decimals=14), axis=0)) != bp.shape[0]:
            raise ValueError("boundary points must be distinct")

        phi = spaces.basis_values(sp, pts)
        wv = phi * (w * c)[None, :]
        wd = None
        if sp.kind == "fem1d":
            if self.nu_diff != 0.0:
                x1 = pts if pts.ndim == 1 else pts[:, 0]
                wd = self.nu_diff * spaces.basis_derivatives(sp, x1) \
                    * w[None, :]
        else:
            wv = wv + self.nu_diff * sp.eigenvalues[:, None] * phi * w[None, :]

        object.__setattr__(self, "c_field", c)
        object.__setattr__(self, "boundary_points", bp)
        object.__setattr__(self, "quad_points", pts)
        object.__setattr__(self, "quad_weights", w)
        object.__setattr__(self, "weights_val", wv)
        object.__setattr__(self, "weights_der", wd)

    @property
    def n_features(self) -> int:
        return self.space.size

    @property
    def n_boundary(self) -> int:
        return self.boundary_points.shape[0]


@dataclass(frozen=True)
class GramBlocks:
    """The three matrices of the per-step saddle-point system.

    ``quad_eval`` (optional) evaluates a representer on the quadrature
    grid: values = quad_eval @ coefficients.  It reuses the streamed
    products already formed during assembly, so requesting it is free.
    """

    k_chi_phi: np.ndarray     # N x (N+M)
    k_x_phi: np.ndarray       # M x (N+M)
    k_phi_phi: np.ndarray     # (N+M) x (N+M), symmetric, jittered
    quad_eval: np.ndarray = None


def _weighted_product(spec: KernelSpec, w_left: np.ndarray,
                      left_pts: np.ndarray, right_pts: np.ndarray,
                      kind: str = "val") -> np.ndarray:
    """w_left @ M with M the pairwise matrix, streamed over left rows."""
    n_left = left_pts.shape[0] if left_pts.ndim > 1 else left_pts.shape[0]
    n_right = _as_points(right_pts).shape[0]
    chunk = max(1, _CHUNK_ELEMENTS // max(n_right, 1))
    if n_left <= chunk:
        return w_left @ _pairwise(spec, left_pts, right_pts, kind)
    out = np.zeros((w_left.shape[0], n_right))
    for lo in range(0, n_left, chunk):
        hi = min(lo + chunk, n_left)
        out += w_left[:, lo:hi] @ _pairwise(spec, left_pts[lo:hi],
                                            right_pts, kind)
    return out


def _operator_blocks(spec: KernelSpec, fs: FeatureSet, right_pts):
    """K(chi_i, .) evaluated against kernel features at ``right_pts``.

    Returns (value_part, derivative_pairing) where the first is the block
    pairing features with K(., y_l) and the second with d/dy K(., y_l)
    (fem only, None otherwise).
    """
    val = _weighted_product(spec, fs.weights_val, fs.quad_points, right_pts)
    if fs.weights_der is not None:
        val = val + _weighted_product(spec, fs.weights_der, fs.quad_points,
                                      right_pts, "d1")
    return val


def assemble_features(spec: KernelSpec, fs: FeatureSet,
                      want_quad_eval: bool = False) -> GramBlocks:
    """All Gram blocks of the operator and boundary features."""
    n, m = fs.n_features, fs.n_boundary
    grid = fs.quad_points
    wv, wd = fs.weights_val, fs.weights_der

    # T[i, k] = chi_i applied (in x) to K(x, grid_k)
    t_val = _weighted_product(spec, wv, grid, grid)
    if wd is not None:
        t_val = t_val + _weighted_product(spec, wd, grid, grid, "d1")

    k_cc = t_val @ wv.T
    if wd is not None:
        # pair the remaining y-derivative of K with the fem derivative
        # weights: d/dy K(x, y) = -d1(x - y)
        t_dy = -_weighted_product(spec, wv, grid, grid, "d1")
        t_dy = t_dy + _weighted_product(spec, wd, grid, grid, "d11")
        k_cc = k_cc + t_dy @ wd.T
    k_cc = 0.5 * (k_cc + k_cc.T)

    k_cb = _operator_blocks(spec, fs, fs.boundary_points)     # N x M
    k_bb = kernel_matrix(spec, fs.boundary_points)

    k_phi_phi = np.block([[k_cc, k_cb], [k_cb.T, k_bb]])
    jitter = 1e-10 * np.trace(k_phi_phi) / (n + m)
    k_phi_phi = k_phi_phi + jitter * np.eye(n + m)

    k_chi_phi = np.hstack([k_cc, k_cb])
    k_x_phi = np.hstack([k_cb.T, k_bb])
    quad_eval = None
    if want_quad_eval:
        # t_val[i, k] is exactly K(., chi_i) at grid_k; append boundary rows
        quad_eval = np.vstack([t_val,
                               _pairwise(spec, fs.boundary_points, grid)]).T
    return GramBlocks(k_chi_phi, k_x_phi, k_phi_phi, quad_eval)


def assemble_collocation(spec: KernelSpec, points, c_field, nu_diff: float,
                         boundary_points) -> GramBlocks:
    """Gram blocks for pointwise operator features (1D collocation).

    Feature i is the linearized operator evaluated at a point,
    chi_i(u) = -nu_diff * u''(x_i) + c_i * u(x_i), which is well defined on
    the Matern-5/2 RKHS.  The resulting loss is a plain sum of squared
    residuals at the collocation points (use it with an identity-weight
    seminorm), the pointwise/L2-style alternative to the weak-norm loss.
    """
    x = np.atleast_1d(np.asarray(points, dtype=float))
    c = np.broadcast_to(np.asarray(c_field, dtype=float).ravel(), x.shape)
    bp = _as_points(boundary_points)
    if bp.shape[1] != 1:
        raise ValueError("collocation features are 1D only")
    t = x[:, None] - x[None, :]
    k_cc = nu_diff ** 2 * _matern52_d4(spec, t) \
        - nu_diff * (c[:, None] + c[None, :]) * _matern52_d2(spec, t) \
        + (c[:, None] * c[None, :]) * _matern52(spec, np.abs(t))
    tb = x[:, None] - bp[:, 0][None, :]
    k_cb = -nu_diff * _matern52_d2(spec, tb) \
        + c[:, None] * _matern52(spec, np.abs(tb))
    k_bb = kernel_matrix(spec, bp)

    n, m = x.shape[0], bp.shape[0]
    k_phi_phi = np.block([[k_cc, k_cb], [k_cb.T, k_bb]])
    k_phi_phi = 0.5 * (k_phi_phi + k_phi_phi.T)
    jitter = 1e-10 * np.trace(k_phi_phi) / (n + m)
    k_phi_phi = k_phi_phi + jitter * np.eye(n + m)
    return GramBlocks(np.hstack([k_cc, k_cb]), np.hstack([k_cb.T, k_bb]),
                      k_phi_phi)


def evaluate_collocation(spec: KernelSpec, points, c_field, nu_diff: float,
                         boundary_points, eval_points) -> np.ndarray:
    """Evaluation matrix for a collocation representer, E[p, i] = phi_i(y_p)."""
    x = np.atleast_1d(np.asarray(points, dtype=float))
    c = np.broadcast_to(np.asarray(c_field, dtype=float).ravel(), x.shape)
    bp = _as_points(boundary_points)
    y = np.atleast_1d(np.asarray(eval_points, dtype=float))
    t = y[:, None] - x[None, :]
    op_cols = -nu_diff * _matern52_d2(spec, t) \
        + c[None, :] * _matern52(spec, np.abs(t))
    bd_cols = _matern52(spec, np.abs(y[:, None] - bp[:, 0][None, :]))
    return np.hstack([op_cols, bd_cols])


def evaluate_features(spec: KernelSpec, fs: FeatureSet,
                      points) -> np.ndarray:
    """Evaluation matrix E with E[p, i] = (i-th feature function)(point_p).

    Columns are ordered operator features first, then boundary features, so
    a representer with coefficients c evaluates to E @ c.
    """
    pts = _as_points(points)
    op_cols = _operator_blocks(spec, fs, pts)                 # N x P
    bd_cols = _pairwise(spec, fs.boundary_points, pts)        # M x P
    return np.vstack([op_cols, bd_cols]).T
