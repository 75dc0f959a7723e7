"""Test-function bases on the unit interval/square and grid transforms.

Three basis kinds are supported:

* ``sine1d`` -- L2-orthonormal Dirichlet eigenfunctions sqrt(2)*sin(pi*j*x),
* ``sine2d`` -- tensor products 2*sin(pi*i*x)*sin(pi*j*y),
* ``fem1d``  -- piecewise-linear tent functions on a uniform interior grid.

Projections of grid-sampled fields onto sine bases use the type-I discrete
sine transform on the interior grid points; fem projections use trapezoid
quadrature.  All fields live on uniform grids that include the endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst

from .errors import ResolutionTooCoarseError, UnsupportedExponentError

__all__ = [
    "TestSpace",
    "GridFunction",
    "MeasurementVector",
    "build_test_space",
    "stiffness_matrix",
    "mass_matrix",
    "project",
    "synthesize",
    "grid_points",
    "trapezoid_weights",
]


@dataclass(frozen=True)
class TestSpace:
    """A finite test-function basis with its spectral metadata."""

    kind: str                      # sine1d | sine2d | fem1d
    size: int                      # number of basis functions N
    n_per_dim: int = 0             # sine2d only
    h: float = 0.0                 # fem1d node spacing
    eigenvalues: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return 2 if self.kind == "sine2d" else 1


@dataclass(frozen=True)
class GridFunction:
    """Values of a scalar field on a uniform grid including endpoints."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim == 2 and v.shape[0] != v.shape[1]:
            raise ValueError("2D grid functions must be square")
        if v.ndim not in (1, 2):
            raise ValueError("grid functions are 1D or 2D")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    def __add__(self, other):
        return GridFunction(self.values + _values_of(other))

    def __sub__(self, other):
        return GridFunction(self.values - _values_of(other))

    def __mul__(self, scalar):
        return GridFunction(self.values * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class MeasurementVector:
    """Projections of a field against a test basis."""

    entries: np.ndarray
    space: TestSpace

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", e)
        if e.shape != (self.space.size,):
            raise ValueError(
                f"expected {self.space.size} entries, got {e.shape}")


def _values_of(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f)


def grid_points(n_points: int, dim: int = 1) -> np.ndarray:
    """Uniform grid on [0,1]^dim including endpoints.

    Returns shape (n_points,) in 1D and (n_points**2, 2) in 2D (x-major)."""
    x = np.linspace(0.0, 1.0, n_points)
    if dim == 1:
        return x
    xx, yy = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def trapezoid_weights(n_points: int, dim: int = 1) -> np.ndarray:
    w = np.full(n_points, 1.0 / (n_points - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    if dim == 1:
        return w
    return np.outer(w, w).ravel()


def build_test_space(kind: str, size: int = 0, n_per_dim: int = 0) -> TestSpace:
    """Construct a test space of the given kind.

    For ``sine2d`` either ``n_per_dim`` or a perfect-square ``size`` may be
    given; the basis then has n_per_dim**2 functions indexed row-major by
    (i, j), i outer.
    """
    if kind == "sine1d":
        if size < 1:
            raise ValueError("sine1d requires size >= 1")
        j = np.arange(1, size + 1)
        return TestSpace(kind, size, eigenvalues=(np.pi * j) ** 2)
    if kind == "sine2d":
        if n_per_dim == 0:
            p = int(round(np.sqrt(size)))
            if p * p != size or size < 1:
                raise ValueError("sine2d size must be a perfect square")
            n_per_dim = p
        if n_per_dim < 1:
            raise ValueError("sine2d requires n_per_dim >= 1")
        p = n_per_dim
        ii, jj = np.meshgrid(np.arange(1, p + 1), np.arange(1, p + 1),
                             indexing="ij")
        lam = np.pi ** 2 * (ii ** 2 + jj ** 2)
        return TestSpace(kind, p * p, n_per_dim=p, eigenvalues=lam.ravel())
    if kind == "fem1d":
        if size < 1:
            raise ValueError("fem1d requires size >= 1")
        return TestSpace(kind, size, h=1.0 / (size + 1))
    raise ValueError(f"unknown test space kind {kind!r}")


def stiffness_matrix(space: TestSpace, s: float) -> np.ndarray:
    """Gram matrix of the basis in the (possibly fractional) energy product.

    Sine kinds support any s >= 0 through the eigenvalue powers; fem1d only
    s in {0, 1}.
    """
    if s < 0:
        raise ValueError("exponent must be nonnegative")
    if space.kind in ("sine1d", "sine2d"):
        return np.diag(space.eigenvalues ** s)
    if space.kind == "fem1d":
        if s == 0:
            return mass_matrix(space)
        if s == 1:
            n, h = space.size, space.h
            a = np.diag(np.full(n, 2.0 / h))
            off = np.full(n - 1, -1.0 / h)
            a += np.diag(off, 1) + np.diag(off, -1)
            return a
        raise UnsupportedExponentError(
            f"fem1d supports only s in {{0, 1}}, got {s}")
    raise ValueError(f"unknown kind {space.kind!r}")


def stiffness_diagonal(space: TestSpace, s: float) -> np.ndarray:
    """Diagonal of the stiffness matrix for sine kinds (exact O(N) path)."""
    if space.kind not in ("sine1d", "sine2d"):
        raise ValueError("diagonal shortcut only applies to sine bases")
    return space.eigenvalues ** s


def mass_matrix(space: TestSpace) -> np.ndarray:
    """L2 Gram matrix of the basis (identity for orthonormal sine bases)."""
    if space.kind in ("sine1d", "sine2d"):
        return np.eye(space.size)
    n, h = space.size, space.h
    m = np.diag(np.full(n, 2.0 * h / 3.0))
    off = np.full(n - 1, h / 6.0)
    m += np.diag(off, 1) + np.diag(off, -1)
    return m


def _check_sine_resolution(space: TestSpace, n_points: int):
    n_modes = space.n_per_dim if space.kind == "sine2d" else space.size
    if n_points < 2 * n_modes + 2:
        raise ResolutionTooCoarseError(
            f"grid with {n_points} points per dim cannot resolve "
            f"{n_modes} sine modes (need >= {2 * n_modes + 2})")


def project(f: GridFunction, space: TestSpace) -> MeasurementVector:
    """Integrals of a grid-sampled field against every basis function."""
    v = f.values
    if space.kind == "sine1d":
        if v.ndim != 1:
            raise ValueError("sine1d projection expects a 1D grid function")
        _check_sine_resolution(space, v.shape[0])
        n = v.shape[0] - 1
        coeffs = dst(v[1:-1], type=1) * (np.sqrt(2.0) / (2.0 * n))
        return MeasurementVector(coeffs[:space.size], space)
    if space.kind == "sine2d":
        if v.ndim != 2:
            raise ValueError("sine2d projection expects a 2D grid function")
        _check_sine_resolution(space, v.shape[0])
        n = v.shape[0] - 1
        p = space.n_per_dim
        c = dst(dst(v[1:-1, 1:-1], type=1, axis=0), type=1, axis=1)
        c = c[:p, :p] / (2.0 * n * n)
        return MeasurementVector(c.ravel(), space)
    if space.kind == "fem1d":
        if v.ndim != 1:
            raise ValueError("fem1d projection expects a 1D grid function")
        g = v.shape[0]
        if g - 1 < 2 * (space.size + 1):
            raise ResolutionTooCoarseError(
                "grid too coarse for the tent-function mesh")
        x = grid_points(g)
        w = trapezoid_weights(g)
        phi = basis_values(space, x)          # N x G
        return MeasurementVector(phi @ (w * v), space)
    raise ValueError(f"unknown kind {space.kind!r}")


def synthesize(coeffs, space: TestSpace, n_points: int) -> GridFunction:
    """Evaluate sum_i c_i phi_i on a uniform grid with ``n_points`` per dim."""
    c = coeffs.entries if isinstance(coeffs, MeasurementVector) else \
        np.asarray(coeffs, dtype=float)
    if c.shape != (space.size,):
        raise ValueError("coefficient length must equal the basis size")
    if space.kind == "sine1d":
        n = n_points - 1
        if space.size > n - 1:
            raise ResolutionTooCoarseError("grid cannot carry all modes")
        pad = np.zeros(n - 1)
        pad[:space.size] = c
        out = np.zeros(n_points)
        out[1:-1] = dst(pad, type=1) * (np.sqrt(2.0) / 2.0)
        return GridFunction(out)
    if space.kind == "sine2d":
        n = n_points - 1
        p = space.n_per_dim
        if p > n - 1:
            raise ResolutionTooCoarseError("grid cannot carry all modes")
        pad = np.zeros((n - 1, n - 1))
        pad[:p, :p] = c.reshape(p, p)
        out = np.zeros((n_points, n_points))
        out[1:-1, 1:-1] = dst(dst(pad, type=1, axis=0), type=1, axis=1) / 2.0
        return GridFunction(out)
    if space.kind == "fem1d":
        nodes = np.concatenate([[0.0], (np.arange(1, space.size + 1)) * space.h,
                                [1.0]])
        vals = np.concatenate([[0.0], c, [0.0]])
        x = grid_points(n_points)
        return GridFunction(np.interp(x, nodes, vals))
    raise ValueError(f"unknown kind {space.kind!r}")


def basis_values(space: TestSpace, points: np.ndarray) -> np.ndarray:
    """Matrix of basis-function values, shape (N, P)."""
    pts = np.asarray(points, dtype=float)
    if space.kind == "sine1d":
        j = np.arange(1, space.size + 1)[:, None]
        return np.sqrt(2.0) * np.sin(np.pi * j * pts[None, :])
    if space.kind == "sine2d":
        p = space.n_per_dim
        x, y = pts[:, 0], pts[:, 1]
        i = np.arange(1, p + 1)[:, None]
        sx = np.sin(np.pi * i * x[None, :])     # p x P
        sy = np.sin(np.pi * i * y[None, :])
        return 2.0 * (sx[:, None, :] * sy[None, :, :]).reshape(p * p, -1)
    if space.kind == "fem1d":
        nodes = (np.arange(1, space.size + 1) * space.h)[:, None]
        return np.clip(1.0 - np.abs(pts[None, :] - nodes) / space.h, 0.0, None)
    raise ValueError(f"unknown kind {space.kind!r}")


def basis_derivatives(space: TestSpace, points: np.ndarray) -> np.ndarray:
    """First derivatives of tent functions at 1D points, shape (N, P).

    At the kinks the left-limit value is used; the choice is irrelevant for
    the quadratures this feeds.
    """
    if space.kind != "fem1d":
        raise ValueError("derivative matrix implemented for fem1d only")
    pts = np.asarray(points, dtype=float)
    nodes = (np.arange(1, space.size + 1) * space.h)[:, None]
    d = pts[None, :] - nodes
    out = np.zeros_like(d)
    out[(d > -space.h) & (d <= 0)] = 1.0 / space.h
    out[(d > 0) & (d < space.h)] = -1.0 / space.h
    return out
