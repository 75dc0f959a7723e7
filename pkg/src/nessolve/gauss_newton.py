"""Gauss-Newton solver for the weak-norm optimal-recovery problem.

Each iteration linearizes the operator at the current iterate, assembles
the Gram blocks of the induced operator/boundary features, and solves the
equality-constrained quadratic program

    min_c  (Bc - r)^T A^{-1} (Bc - r) + gamma * c^T G c
    s.t.   C c = g

through its KKT system.  The factored system is exposed separately
(``KKTSystem``) so time steppers can reuse one factorization across many
right-hand sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import operators
from .errors import DegenerateFeaturesError, DivergenceError
from .kernels import FeatureSet, GramBlocks, KernelSpec, assemble_features, \
    evaluate_features
from .operators import OperatorSpec
from .seminorm import SeminormContext, seminorm_squared
from .spaces import GridFunction, MeasurementVector, TestSpace, project

__all__ = ["SolverConfig", "Representer", "SolveReport", "KKTSystem",
           "constrained_ls_solve", "gn_step", "solve", "evaluate"]


@dataclass(frozen=True)
class SolverConfig:
    """Everything the outer solve loop needs besides the operator."""

    space: TestSpace
    kernel: KernelSpec
    boundary_points: np.ndarray
    gamma: float = 1e-10
    s: float = 1.0
    n_quad: int = 0                 # per-dim quadrature points (0 = auto)
    g_boundary: np.ndarray = None   # boundary data, zeros when omitted
    max_iterations: int = 20
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")
        bp = np.atleast_1d(np.asarray(self.boundary_points, dtype=float))
        object.__setattr__(self, "boundary_points", bp)
        n_modes = self.space.n_per_dim if self.space.kind == "sine2d" \
            else self.space.size
        n_quad = self.n_quad or 4 * n_modes + 1
        object.__setattr__(self, "n_quad", n_quad)
        m = bp.shape[0]
        g = np.zeros(m) if self.g_boundary is None \
            else np.asarray(self.g_boundary, dtype=float)
        if g.shape != (m,):
            raise ValueError("boundary data length mismatch")
        object.__setattr__(self, "g_boundary", g)


@dataclass(frozen=True)
class Representer:
    """A kernel representer u = sum_i alpha_i K(., chi_i) + sum_j beta_j
    K(., x_j) with its feature set and constraint multipliers."""

    coefficients: np.ndarray
    multipliers: np.ndarray
    features: FeatureSet = None
    kernel: KernelSpec = None

    def __post_init__(self):
        fs = self.features
        if fs is not None and \
                self.coefficients.shape != (fs.n_features + fs.n_boundary,):
            raise ValueError("coefficient length must be N + M")


@dataclass
class SolveReport:
    """Loss history and termination diagnostics of one solve."""

    misfit_history: list = field(default_factory=list)
    penalty_history: list = field(default_factory=list)
    iterations: int = 0
    reason: str = ""
    final_grid: GridFunction = None    # solution on the quadrature grid

    @property
    def loss_history(self):
        return [a + b for a, b in
                zip(self.misfit_history, self.penalty_history)]


class KKTSystem:
    """Factored KKT matrix of the equality-constrained quadratic step."""

    def __init__(self, ctx: SeminormContext, blocks: GramBlocks,
                 gamma: float):
        self.ctx = ctx
        self.blocks = blocks
        self.gamma = gamma
        b = blocks.k_chi_phi
        c = blocks.k_x_phi
        n = b.shape[0]
        m = c.shape[0]
        self._ainv_b = ctx.apply_inverse(b)
        q = b.T @ self._ainv_b + gamma * blocks.k_phi_phi
        q = 0.5 * (q + q.T)
        kkt = np.zeros((n + 2 * m, n + 2 * m))
        kkt[:n + m, :n + m] = q
        kkt[:n + m, n + m:] = c.T
        kkt[n + m:, :n + m] = c
        self.matrix = kkt
        self.n_primal = n + m
        try:
            self._lu = scipy.linalg.lu_factor(kkt)
        except scipy.linalg.LinAlgError as exc:
            raise DegenerateFeaturesError(
                "KKT factorization failed", block=self._diagnose()) from exc
        # the blocks span many orders of magnitude for high-mode features,
        # so only an exactly vanishing pivot is treated as singular here;
        # near-singularity surfaces through the residual check in solve()
        u_diag = np.abs(np.diag(self._lu[0]))
        if u_diag.min() == 0.0 or not np.all(np.isfinite(u_diag)):
            raise DegenerateFeaturesError(
                "KKT matrix is numerically singular",
                block=self._diagnose())

    def _diagnose(self) -> str:
        c = self.blocks.k_x_phi
        if c.shape[0] and np.linalg.matrix_rank(c) < c.shape[0]:
            return "k_x_phi"
        return "k_phi_phi"

    def solve(self, r_entries: np.ndarray, g_boundary: np.ndarray):
        """Coefficients and multipliers for one right-hand side, with one
        pass of iterative refinement."""
        rhs = np.concatenate([self._ainv_b.T @ r_entries, g_boundary])
        x = scipy.linalg.lu_solve(self._lu, rhs)
        resid = rhs - self.matrix @ x
        x += scipy.linalg.lu_solve(self._lu, resid)
        if not np.all(np.isfinite(x)):
            raise DegenerateFeaturesError("non-finite KKT solution",
                                          block=self._diagnose())
        return x[:self.n_primal], x[self.n_primal:]

    def loss_terms(self, coeffs: np.ndarray, r_entries: np.ndarray):
        resid = self.blocks.k_chi_phi @ coeffs - r_entries
        misfit = seminorm_squared(self.ctx, resid)
        penalty = self.gamma * float(coeffs @
                                     (self.blocks.k_phi_phi @ coeffs))
        return misfit, penalty


def constrained_ls_solve(ctx: SeminormContext, blocks: GramBlocks,
                         r_entries: np.ndarray, g_boundary: np.ndarray,
                         gamma: float):
    """Stable solve of the step QP as an equality-constrained least squares.

    The quadratic objective (Bc-r)^T A^{-1} (Bc-r) + gamma c^T G c is
    rewritten with whitened residual rows stacked on top of the Cholesky
    factor of G and handed to LAPACK's generalized-RQ routine (dgglse).
    This avoids forming B^T A^{-1} B, whose squared conditioning loses the
    high-frequency features in double precision.
    """
    b_w = ctx.whiten(blocks.k_chi_phi)
    r_w = ctx.whiten(r_entries)
    g = blocks.k_phi_phi
    scale = np.trace(g) / g.shape[0]
    g_chol = None
    for bump in (0.0, 1e-13, 1e-11, 1e-9):
        try:
            g_chol = scipy.linalg.cholesky(
                g + bump * scale * np.eye(g.shape[0]), lower=True)
            break
        except scipy.linalg.LinAlgError:
            continue
    if g_chol is None:
        raise DegenerateFeaturesError(
            "feature Gram matrix is not positive definite",
            block="k_phi_phi")
    stack = np.vstack([b_w, np.sqrt(gamma) * g_chol.T])
    d = np.concatenate([r_w, np.zeros(blocks.k_phi_phi.shape[0])])
    out = scipy.linalg.lapack.dgglse(stack, blocks.k_x_phi.copy(), d,
                                     np.asarray(g_boundary, float).copy())
    coeffs, info = out[3], out[-1]
    if info != 0 or not np.all(np.isfinite(coeffs)):
        raise DegenerateFeaturesError(
            f"constrained least-squares solve failed (info={info})",
            block="k_x_phi" if info == 1 else "k_phi_phi")
    # multipliers from the stationarity condition of the Lagrangian
    grad = 2.0 * (blocks.k_chi_phi.T @ ctx.apply_inverse(
        blocks.k_chi_phi @ coeffs - r_entries) +
        gamma * blocks.k_phi_phi @ coeffs)
    mult = -np.linalg.lstsq(blocks.k_x_phi.T, grad, rcond=None)[0]
    return coeffs, mult


def gn_step(ctx: SeminormContext, blocks: GramBlocks, r_entries, g_boundary,
            gamma: float, features: FeatureSet = None,
            kernel: KernelSpec = None):
    """One linearized step; returns (Representer, (misfit, penalty))."""
    r = r_entries.entries if isinstance(r_entries, MeasurementVector) \
        else np.asarray(r_entries, dtype=float)
    coeffs, mult = constrained_ls_solve(ctx, blocks, r,
                                        np.asarray(g_boundary, float), gamma)
    rep = Representer(coeffs, mult, features, kernel)
    misfit = seminorm_squared(ctx, blocks.k_chi_phi @ coeffs - r)
    penalty = gamma * float(coeffs @ (blocks.k_phi_phi @ coeffs))
    return rep, (misfit, penalty)


def solve(op: OperatorSpec, xi: MeasurementVector, cfg: SolverConfig,
          u0: GridFunction = None):
    """Iterate linearize/assemble/step until the loss plateaus.

    Returns the final Representer and a SolveReport.  Gram blocks are
    rebuilt every iteration for nonlinear families (the linearization
    coefficient changes) and reused otherwise.
    """
    ctx = SeminormContext.build(cfg.space, cfg.s)
    dim = cfg.space.dim
    shape = (cfg.n_quad,) * dim
    u_grid = np.zeros(shape) if u0 is None else \
        np.broadcast_to(np.asarray(u0.values, dtype=float), shape).copy()

    report = SolveReport()
    rep = None
    blocks = None
    fs = None
    for it in range(cfg.max_iterations):
        if blocks is None or not op.is_linear:
            lin = operators.linearize(op, GridFunction(u_grid))
            fs = FeatureSet(cfg.space, lin.c_field.values, lin.nu_diff,
                            cfg.boundary_points, cfg.n_quad)
            blocks = assemble_features(cfg.kernel, fs, want_quad_eval=True)
        if op.is_linear:
            r = xi.entries
        else:
            r = xi.entries + project(lin.shift, cfg.space).entries
        rep, (misfit, penalty) = gn_step(ctx, blocks, r, cfg.g_boundary,
                                         cfg.gamma, features=fs,
                                         kernel=cfg.kernel)
        u_grid = (blocks.quad_eval @ rep.coefficients).reshape(shape)
        loss = misfit + penalty
        if not np.isfinite(loss):
            raise DivergenceError("loss became non-finite", iteration=it)
        report.misfit_history.append(misfit)
        report.penalty_history.append(penalty)
        report.iterations = it + 1
        if it > 0:
            prev = report.loss_history[-2]
            if abs(prev - loss) <= cfg.tolerance * max(abs(prev), 1e-300):
                report.reason = "loss_plateau"
                break
    else:
        report.reason = "max_iterations"
    report.final_grid = GridFunction(u_grid)
    return rep, report


def evaluate(rep: Representer, points) -> np.ndarray:
    """Representer values at arbitrary points in the closed domain."""
    e = evaluate_features(rep.kernel, rep.features, points)
    return e @ rep.coefficients
