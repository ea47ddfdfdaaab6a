"""Damped Newton solver for Hermitian Monge-Ampere equations on torus grids.

Given a positive background form field g0 and a strictly positive density f,
the solver finds the real potential u with

    (g0 + i ddbar u)^n = C * f * dV,    g0 + i ddbar u > 0,

pointwise in log form: log(n! det(g0 + H(u))) = log(C f) with H the spectral
complex Hessian.  On the torus the total mass of (g0 + i ddbar u)^n does not
depend on u, so the constant is forced a priori:

    C = integral of g0^n  /  integral of f.

Each Newton step linearizes the log determinant, giving the elliptic equation
trace(g^{-1} H(du)) = -residual, solved by preconditioned GMRES; the
preconditioner inverts the frequency-space symbol of the node-averaged
coefficient operator.  Steps are damped by halving until positivity and
residual decrease hold.  The iteration keeps u mean-zero (the equation only
determines u up to a constant) and shifts to sup-zero once at the end.
Failure is always an explicit error carrying the final iterate, never a
silent clamp.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import PositivityError, SolverError, UsageError
from .hermitian import HermitianForm
from .torus import FormField, PotentialField, TorusGrid, _hessian_entries, integrate_top

__all__ = ["SolverConfig", "SolveResult", "solve_ma", "ma_residual"]


@dataclass(frozen=True)
class SolverConfig:
    """Newton/Krylov knobs; defaults are tuned for desk-scale grids."""

    residual_tol: float = 1e-9
    max_newton_iters: int = 50
    max_line_search_halvings: int = 30
    inner_tol: float = 1e-10
    inner_max_iters: int | None = None  # None means 10 * node count

    def __post_init__(self):
        if self.residual_tol <= 0 or self.inner_tol <= 0:
            raise UsageError("tolerances must be positive")
        if self.max_newton_iters < 1 or self.max_line_search_halvings < 1:
            raise UsageError("iteration caps must be >= 1")
        if self.inner_max_iters is not None and self.inner_max_iters < 1:
            raise UsageError("inner_max_iters must be >= 1")


@dataclass(frozen=True)
class SolveResult:
    """Converged solve: sup-zero potential, forced constant, diagnostics."""

    u: PotentialField
    constant_C: float
    residual: float
    newton_iters: int
    positivity_margin: float


def _as_form_field(background, grid=None) -> FormField:
    if isinstance(background, FormField):
        return background
    if isinstance(background, HermitianForm):
        if grid is None:
            raise UsageError("constant background needs an explicit grid")
        return FormField.constant(grid, background)
    raise UsageError(f"unsupported background type {type(background).__name__}")


def _density_array(grid: TorusGrid, density) -> np.ndarray:
    if isinstance(density, PotentialField):
        if density.grid != grid:
            raise UsageError("density lives on a different grid")
        values = density.values
    else:
        values = np.asarray(density, dtype=float)
        if values.ndim == 0:
            values = np.full(grid.shape, float(values))
        elif values.shape != grid.shape:
            raise UsageError(
                f"density shape {values.shape} does not match grid {grid.shape}"
            )
    if values.min() <= 0.0:
        node = np.unravel_index(int(values.argmin()), grid.shape)
        raise PositivityError(
            f"density must be strictly positive; value {values.min():.6g} at node {node}"
        )
    return values


def _eig_state(entries: np.ndarray):
    """Batched eigenvalues at every node: positivity margin and log det."""
    eigs = np.linalg.eigvalsh(entries)
    margin = float(eigs[..., 0].min())
    return eigs, margin


def _newton_direction(grid: TorusGrid, g_entries: np.ndarray, residual: np.ndarray, cfg):
    """Solve trace(g^{-1} H(du)) = -residual for a mean-zero du via GMRES."""
    n = grid.complex_dim
    nodes = grid.node_count
    shape = grid.shape

    # Frequency-space symbol of the node-averaged operator; modes the Hessian
    # cannot see (the zero mode and pure-Nyquist modes) are projected out.
    mean_inv = np.linalg.inv(g_entries.reshape(nodes, n, n).mean(axis=0))
    symbol = np.zeros(shape, dtype=complex)
    for j in range(n):
        for k in range(n):
            symbol += mean_inv[k, j] * grid.hessian_multiplier(j, k)
    symbol = symbol.real
    unresolved = symbol == 0.0
    safe_symbol = np.where(unresolved, 1.0, symbol)

    def matvec(v):
        u = v.reshape(shape)
        u_hat = np.fft.fftn(u)
        hess = np.empty(shape + (n, n), dtype=complex)
        for j in range(n):
            for k in range(j, n):
                h = np.fft.ifftn(grid.hessian_multiplier(j, k) * u_hat)
                if j == k:
                    hess[..., j, j] = h.real
                else:
                    hess[..., j, k] = h
                    hess[..., k, j] = np.conj(h)
        out = np.trace(np.linalg.solve(g_entries, hess), axis1=-2, axis2=-1).real
        return (out - out.mean()).ravel()

    def precondition(v):
        v_hat = np.fft.fftn(v.reshape(shape))
        v_hat /= safe_symbol
        v_hat[unresolved] = 0.0
        return np.fft.ifftn(v_hat).real.ravel()

    rhs = residual - residual.mean()
    op = LinearOperator((nodes, nodes), matvec=matvec, dtype=float)
    pre = LinearOperator((nodes, nodes), matvec=precondition, dtype=float)
    restart = min(50, nodes)
    cap = cfg.inner_max_iters if cfg.inner_max_iters is not None else 10 * nodes
    maxiter = max(1, cap // restart)
    direction, _ = gmres(
        op, -rhs.ravel(), rtol=cfg.inner_tol, atol=0.0, restart=restart, maxiter=maxiter, M=pre
    )
    direction = direction.reshape(shape)
    return direction - direction.mean()


def solve_ma(background, density, cfg: SolverConfig | None = None, grid: TorusGrid | None = None) -> SolveResult:
    """Solve (background + i ddbar u)^n = C * density * dV on the torus.

    Parameters
    ----------
    background : FormField or HermitianForm
        Positive definite at every node; a constant form needs ``grid``.
    density : array, PotentialField or scalar
        Strictly positive scalar density of the prescribed volume form with
        respect to the unit-volume measure.
    cfg : SolverConfig, optional

    Returns
    -------
    SolveResult
        With ``u`` sup-zero normalized and ``constant_C`` equal to the forced
        quotient (integral of background^n) / (integral of density).

    Raises
    ------
    PositivityError
        Background not positive definite somewhere, or density non-positive.
    SolverError
        Line search cannot restore positivity, or no convergence within the
        Newton iteration cap; the error carries the failing iterate.
    """
    cfg = cfg or SolverConfig()
    bg = _as_form_field(background, grid)
    grid = bg.grid
    n = grid.complex_dim
    f = _density_array(grid, density)

    bg_eigs = np.linalg.eigvalsh(bg.entries)
    if float(bg_eigs[..., 0].min()) <= 0.0:
        node = np.unravel_index(int(bg_eigs[..., 0].argmin()), grid.shape)
        raise PositivityError(
            f"background must be positive definite at every node; "
            f"smallest eigenvalue {bg_eigs[..., 0].min():.6g} at node {node}"
        )

    constant = integrate_top([bg] * n) / float(f.mean())
    log_rhs = math.log(constant) + np.log(f)
    log_nfact = math.log(math.factorial(n))

    u = np.zeros(grid.shape)
    g = bg.entries.copy()
    eigs, margin = _eig_state(g)
    res_field = log_nfact + np.log(eigs).sum(axis=-1) - log_rhs
    res = float(np.abs(res_field).max())

    iters = 0
    while res > cfg.residual_tol:
        if iters >= cfg.max_newton_iters:
            raise SolverError(
                f"no convergence in {cfg.max_newton_iters} Newton steps "
                f"(residual {res:.3e})",
                iterate=PotentialField(grid, u, "mean-zero"),
                residual=res,
            )
        direction = _newton_direction(grid, g, res_field, cfg)
        step = 1.0
        accepted = False
        for _ in range(cfg.max_line_search_halvings + 1):
            u_try = u + step * direction
            u_try -= u_try.mean()
            g_try = bg.entries + _hessian_entries(grid, u_try)
            eigs_try, margin_try = _eig_state(g_try)
            if margin_try > 0.0:
                res_field_try = log_nfact + np.log(eigs_try).sum(axis=-1) - log_rhs
                res_try = float(np.abs(res_field_try).max())
                if res_try < res or res_try <= cfg.residual_tol:
                    u, g = u_try, g_try
                    eigs, margin = eigs_try, margin_try
                    res_field, res = res_field_try, res_try
                    accepted = True
                    break
            step /= 2
        if not accepted:
            raise SolverError(
                f"line search stalled after {cfg.max_line_search_halvings} halvings "
                f"(residual {res:.3e})",
                iterate=PotentialField(grid, u, "mean-zero"),
                residual=res,
            )
        iters += 1

    potential = PotentialField(grid, u, "mean-zero").with_sup_zero()
    return SolveResult(
        u=potential,
        constant_C=float(constant),
        residual=res,
        newton_iters=iters,
        positivity_margin=margin,
    )


def ma_residual(background, u: PotentialField, density, constant_C: float, grid: TorusGrid | None = None) -> float:
    """Independent max-norm log residual of a candidate solution.

    Recomputes the Hessian and the log determinant from scratch (Cholesky
    route, distinct from the solver's eigenvalue route) and returns

        max over nodes |log(n! det(background + i ddbar u)) - log(C density)|.

    If the candidate form fails to be positive definite at some node the
    residual is +inf and a warning names the first offending node.
    """
    bg = _as_form_field(background, grid)
    grid = bg.grid
    if u.grid != grid:
        raise UsageError("potential lives on a different grid")
    n = grid.complex_dim
    f = _density_array(grid, density)
    g = bg.entries + _hessian_entries(grid, u.values)
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        mins = np.linalg.eigvalsh(g)[..., 0]
        node = np.unravel_index(int(mins.argmin()), grid.shape)
        warnings.warn(
            f"candidate form is not positive definite at node {node} "
            f"(smallest eigenvalue {mins.min():.6g}); residual is +inf",
            stacklevel=2,
        )
        return math.inf
    diag = np.einsum("...ii->...i", chol).real
    log_det = 2.0 * np.log(diag).sum(axis=-1)
    res = math.log(math.factorial(n)) + log_det - (math.log(constant_C) + np.log(f))
    return float(np.abs(res).max())
