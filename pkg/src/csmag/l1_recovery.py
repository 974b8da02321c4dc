"""l1-minimizing reconstruction: basis pursuit, basis pursuit denoising,
and a small exact LP oracle for cross-checking.

Both convex programs are solved by operator splitting (ADMM) with
soft-thresholding proximal steps.  The equality-constrained program
projects onto the affine constraint through a cached factorization of
A A^T; the denoising program splits off the residual-ball constraint and
solves its quadratic step through the matrix inversion lemma, so a
single m x m factorization is reused for every iteration.  Results carry
a duality-gap estimate built from the scaled dual iterates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InfeasibleError, OracleFailureError
from .sensing_matrix import SensingMatrix, subsample_rows

# Solver defaults: tight enough that reconstruction-error thresholds in
# the experiment sweeps are far above solver noise.
FEASIBILITY_TOL = 1e-9
OPTIMALITY_TOL = 1e-7
MAX_ITERATIONS = 50_000

_CHECK_EVERY = 10
_RHO_ADAPT_EVERY = 25
_RHO_RATIO = 10.0
_RHO_SCALE = 2.0


@dataclass(frozen=True)
class RecoveryProblem:
    """(A, y, epsilon): epsilon = 0 denotes the equality-constrained program."""

    matrix: SensingMatrix
    y: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size != self.matrix.m:
            raise ValueError("y must have length m")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class RecoveryResult:
    x: np.ndarray
    l1_value: float
    residual_norm: float
    iterations: int
    converged: bool
    duality_gap_estimate: float


def _as_matrix(a):
    if isinstance(a, SensingMatrix):
        return a.matrix
    mat = np.asarray(a, dtype=float)
    if mat.ndim != 2:
        raise ValueError("A must be a 2-d matrix")
    return mat


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _zero_result(n, resid):
    return RecoveryResult(np.zeros(n), 0.0, float(resid), 0, True, 0.0)


class _AffineProjector:
    """Projection onto {x : Ax = y} with a cached A A^T factorization."""

    def __init__(self, a, y, feasibility_tol):
        self.a = a
        self.y = y
        gram = a @ a.T
        m = a.shape[0]
        # Orthonormal rows make the Gram solve a no-op; the subsampled
        # orthonormal pipelines always hit this fast path.
        self.identity_gram = np.max(np.abs(gram - np.eye(m))) < 1e-12
        self.cho = None
        if not self.identity_gram:
            try:
                self.cho = cho_factor(gram)
            except np.linalg.LinAlgError:
                self.cho = None
                self._check_range(gram, y, feasibility_tol)
                self.pinv_gram = np.linalg.pinv(gram)

    @staticmethod
    def _check_range(gram, y, tol):
        w, _, _, _ = np.linalg.lstsq(gram, y, rcond=None)
        if np.linalg.norm(gram @ w - y) > tol * max(1.0, np.linalg.norm(y)):
            raise InfeasibleError("y is not in the range of A")

    def solve_gram(self, r):
        if self.identity_gram:
            return r
        if self.cho is not None:
            return cho_solve(self.cho, r)
        return self.pinv_gram @ r

    def __call__(self, v):
        lam = self.solve_gram(self.a @ v - self.y)
        return v - self.a.T @ lam, lam


def basis_pursuit(a, y, feasibility_tol=FEASIBILITY_TOL, optimality_tol=OPTIMALITY_TOL,
                  max_iterations=MAX_ITERATIONS, rho=1.0):
    """Minimize ||x||_1 subject to Ax = y.

    The returned iterate is exactly feasible (it is a projection onto the
    constraint); `converged` certifies the primal/dual residuals and the
    relative duality gap against `optimality_tol`.
    """
    a = _as_matrix(a)
    y = np.asarray(y, dtype=float)
    m, n = a.shape
    y_norm = np.linalg.norm(y)
    if y_norm == 0.0:
        return _zero_result(n, 0.0)

    project = _AffineProjector(a, y, feasibility_tol)
    x, _ = project(np.zeros(n))
    z = x.copy()
    u = np.zeros(n)
    converged = False
    gap = np.inf
    iterations = 0
    sqrt_n = np.sqrt(n)

    for k in range(1, max_iterations + 1):
        iterations = k
        x, lam = project(z - u)
        z_old = z
        z = _soft_threshold(x + u, 1.0 / rho)
        u = u + x - z

        if k % _CHECK_EVERY == 0 or k == max_iterations:
            r_norm = np.linalg.norm(x - z)
            s_norm = rho * np.linalg.norm(z - z_old)
            scale_pri = max(np.linalg.norm(x), np.linalg.norm(z), 1e-30)
            scale_dua = max(rho * np.linalg.norm(u), 1e-30)
            l1 = np.abs(x).sum()
            nu = -rho * lam
            atnu = a.T @ nu
            nu_scale = max(1.0, np.abs(atnu).max())
            gap = (l1 - y @ nu / nu_scale) / max(1.0, l1)
            if (r_norm <= optimality_tol * scale_pri + 1e-14 * sqrt_n
                    and s_norm <= optimality_tol * scale_dua + 1e-14 * sqrt_n
                    and gap <= optimality_tol):
                converged = True
                break

        if k % _RHO_ADAPT_EVERY == 0:
            r_norm = np.linalg.norm(x - z)
            s_norm = rho * np.linalg.norm(z - z_old)
            if r_norm > _RHO_RATIO * s_norm:
                rho *= _RHO_SCALE
                u /= _RHO_SCALE
            elif s_norm > _RHO_RATIO * r_norm:
                rho /= _RHO_SCALE
                u *= _RHO_SCALE

    residual = np.linalg.norm(a @ x - y)
    return RecoveryResult(x, float(np.abs(x).sum()), float(residual), iterations,
                          converged, float(gap))


def bpdn(a, y, epsilon, feasibility_tol=FEASIBILITY_TOL, optimality_tol=OPTIMALITY_TOL,
         max_iterations=MAX_ITERATIONS, rho=1.0):
    """Minimize ||x||_1 subject to ||y - Ax||_2 <= epsilon (epsilon > 0).

    The final iterate is pulled exactly onto the residual ball through
    the cached Gram factorization, so feasibility holds to rounding.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive; use basis_pursuit for equality")
    a = _as_matrix(a)
    y = np.asarray(y, dtype=float)
    m, n = a.shape
    y_norm = np.linalg.norm(y)
    if epsilon >= y_norm:
        return _zero_result(n, y_norm)

    gram = a @ a.T
    eye_m = np.eye(m)
    ridge_cho = cho_factor(eye_m + gram)
    gram_is_identity = np.max(np.abs(gram - eye_m)) < 1e-12
    gram_cho = None if gram_is_identity else cho_factor(gram)

    def solve_quadratic(b):
        # (I + A^T A)^{-1} b by the matrix inversion lemma.
        return b - a.T @ cho_solve(ridge_cho, a @ b)

    def project_ball(v):
        d = v - y
        d_norm = np.linalg.norm(d)
        if d_norm <= epsilon:
            return v
        return y + d * (epsilon / d_norm)

    x = a.T @ cho_solve(ridge_cho, y)
    z = x.copy()
    w = project_ball(a @ x)
    u1 = np.zeros(n)
    u2 = np.zeros(m)
    converged = False
    gap = np.inf
    iterations = 0
    sqrt_nm = np.sqrt(n + m)

    for k in range(1, max_iterations + 1):
        iterations = k
        x = solve_quadratic((z - u1) + a.T @ (w - u2))
        ax = a @ x
        z_old = z
        w_old = w
        z = _soft_threshold(x + u1, 1.0 / rho)
        w = project_ball(ax + u2)
        u1 = u1 + x - z
        u2 = u2 + ax - w

        if k % _CHECK_EVERY == 0 or k == max_iterations:
            r_norm = np.sqrt(np.linalg.norm(x - z) ** 2 + np.linalg.norm(ax - w) ** 2)
            s_norm = rho * np.linalg.norm((z - z_old) + a.T @ (w - w_old))
            scale_pri = max(np.linalg.norm(x), np.linalg.norm(z),
                            np.linalg.norm(ax), np.linalg.norm(w), 1e-30)
            scale_dua = max(rho * np.linalg.norm(u1 + a.T @ u2), 1e-30)
            l1 = np.abs(x).sum()
            nu = -rho * u2
            atnu = a.T @ nu
            nu_scale = max(1.0, np.abs(atnu).max())
            dual_value = (y @ nu - epsilon * np.linalg.norm(nu)) / nu_scale
            gap = (l1 - dual_value) / max(1.0, l1)
            if (r_norm <= optimality_tol * scale_pri + 1e-14 * sqrt_nm
                    and s_norm <= optimality_tol * scale_dua + 1e-14 * sqrt_nm
                    and gap <= optimality_tol):
                converged = True
                break

        if k % _RHO_ADAPT_EVERY == 0:
            r_norm = np.sqrt(np.linalg.norm(x - z) ** 2 + np.linalg.norm(ax - w) ** 2)
            s_norm = rho * np.linalg.norm((z - z_old) + a.T @ (w - w_old))
            if r_norm > _RHO_RATIO * s_norm:
                rho *= _RHO_SCALE
                u1 /= _RHO_SCALE
                u2 /= _RHO_SCALE
            elif s_norm > _RHO_RATIO * r_norm:
                rho /= _RHO_SCALE
                u1 *= _RHO_SCALE
                u2 *= _RHO_SCALE

    # Pull the iterate exactly onto the residual ball (minimum-norm
    # correction through the Gram factorization).
    residual_vec = a @ x - y
    residual = np.linalg.norm(residual_vec)
    if residual > epsilon:
        shrink = residual_vec * (1.0 - epsilon / residual)
        corr = shrink if gram_is_identity else cho_solve(gram_cho, shrink)
        x = x - a.T @ corr
        residual = np.linalg.norm(a @ x - y)

    return RecoveryResult(x, float(np.abs(x).sum()), float(residual), iterations,
                          converged, float(gap))


def solve(problem, **solver_kwargs):
    """Dispatch a RecoveryProblem to the matching program."""
    if problem.epsilon == 0.0:
        return basis_pursuit(problem.matrix, problem.y, **solver_kwargs)
    return bpdn(problem.matrix, problem.y, problem.epsilon, **solver_kwargs)


def compress(x, sparsity):
    """Best S-term approximation: keep the S largest-magnitude entries.

    Ties break toward the lowest index (any fixed rule works for the
    compressibility bounds, which only use ||x - x_S||_1).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if not 0 <= sparsity <= n:
        raise ValueError("sparsity must lie in [0, n]")
    out = np.zeros_like(x)
    if sparsity:
        keep = np.argsort(-np.abs(x), kind="stable")[:sparsity]
        out[keep] = x[keep]
    return out


def synthesis_problem(phi, psi, indices, measured_values, epsilon=0.0):
    """Pack measured coefficients in Phi into the generic (A, y, eps) form.

    A = rows of Phi^T Psi picked by the index set, y = the measured
    values, so the synthesis-form program becomes plain (denoising)
    basis pursuit over sparse-basis coordinates.
    """
    measured = np.asarray(measured_values, dtype=float)
    idx = list(indices)
    if measured.size != len(idx):
        raise ValueError("need one measured value per index")
    a = subsample_rows(phi, psi, idx)
    return RecoveryProblem(a, measured, epsilon)


def lp_oracle(a, y, tol=1e-9, max_pivots=100_000):
    """Exact small-scale solution of min ||x||_1 s.t. Ax = y.

    Splits x = x+ - x- and runs a dense two-phase simplex with Bland's
    rule (no cycling), then certifies the vertex: feasibility, sign
    constraints and non-negative reduced costs.  Intended for n, m <= 24.
    """
    a = _as_matrix(a)
    y = np.asarray(y, dtype=float)
    m, n = a.shape
    if n > 24 or m > 24:
        raise ValueError("lp_oracle is restricted to n, m <= 24")

    big_a = np.hstack([a, -a])
    cost = np.ones(2 * n)
    x_split = _simplex_two_phase(big_a, y.copy(), cost, tol, max_pivots)
    x = x_split[:n] - x_split[n:]

    if np.any(x_split < -1e3 * tol):
        raise OracleFailureError("simplex returned a negative basic variable")
    if np.linalg.norm(a @ x - y) > 1e3 * tol * max(1.0, np.linalg.norm(y)):
        raise OracleFailureError("simplex vertex does not satisfy Ax = y")
    return x


def _simplex_two_phase(a, b, cost, tol, max_pivots):
    m, n = a.shape
    neg = b < 0
    a = a.copy()
    a[neg] *= -1
    b = b.copy()
    b[neg] *= -1

    # Phase 1: artificial basis.
    tableau = np.hstack([a, np.eye(m)])
    basis = list(range(n, n + m))
    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    tableau, b, basis, pivots = _simplex_iterate(tableau, b, basis, phase1_cost,
                                                 tol, max_pivots)
    phase1_value = phase1_cost[basis] @ b
    if phase1_value > 1e3 * tol:
        raise InfeasibleError("linear program is infeasible")

    # Drive leftover artificial variables out of the basis.
    for row, var in enumerate(basis):
        if var >= n:
            candidates = np.flatnonzero(np.abs(tableau[row, :n]) > tol)
            if candidates.size:
                tableau, b = _pivot(tableau, b, row, int(candidates[0]))
                basis[row] = int(candidates[0])

    keep_rows = [i for i, var in enumerate(basis) if var < n]
    tableau = tableau[keep_rows][:, :n]
    b = b[keep_rows]
    basis = [basis[i] for i in keep_rows]

    tableau, b, basis, _ = _simplex_iterate(tableau, b, basis, cost, tol,
                                            max_pivots - pivots)

    x = np.zeros(n)
    x[basis] = b

    reduced = cost - cost[basis] @ tableau
    if np.any(reduced < -1e3 * tol):
        raise OracleFailureError("optimality certificate failed (negative reduced cost)")
    return x


def _simplex_iterate(tableau, b, basis, cost, tol, max_pivots):
    pivots = 0
    while True:
        reduced = cost - cost[basis] @ tableau
        entering_candidates = np.flatnonzero(reduced < -tol)
        if entering_candidates.size == 0:
            return tableau, b, basis, pivots
        entering = int(entering_candidates[0])  # Bland: smallest index
        col = tableau[:, entering]
        positive = col > tol
        if not np.any(positive):
            raise InfeasibleError("linear program is unbounded")
        ratios = np.where(positive, b / np.where(positive, col, 1.0), np.inf)
        best = ratios.min()
        tie_rows = np.flatnonzero(np.isclose(ratios, best, rtol=0.0, atol=tol))
        leaving = int(min(tie_rows, key=lambda r: basis[r]))  # Bland tie-break
        tableau, b = _pivot(tableau, b, leaving, entering)
        basis[leaving] = entering
        pivots += 1
        if pivots > max_pivots:
            raise OracleFailureError("simplex cycling guard exceeded")


def _pivot(tableau, b, row, col):
    tableau = tableau.copy()
    b = b.copy()
    pivot_val = tableau[row, col]
    tableau[row] /= pivot_val
    b[row] /= pivot_val
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, col] != 0.0:
            factor = tableau[r, col]
            tableau[r] -= factor * tableau[row]
            b[r] -= factor * b[row]
    return tableau, b
