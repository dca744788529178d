"""Sturm-Liouville operator: discretization, eigensystem, inner products, projections.

The operator is the weighted self-adjoint form

    (A f)(x) = (-(p f')' + q f) / r       on (0, 1)

with separated boundary conditions b1 f(0) + b2 f'(0) = 0 and
a1 f(1) + a2 f'(1) = 0, where (a1, a2) and (b1, b2) are unit vectors.
Eigenfunctions are orthonormal in the r-weighted L2 inner product.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import (
    CutoffExceedsComputedModes,
    DimensionMismatch,
    GridTooCoarse,
    NonPositiveCoefficient,
)

NORMALIZATION_TOL = 1e-12
ORTHONORMALITY_TOL = 1e-8
BOUNDARY_RESIDUAL_TOL = 1e-6
OPERATOR_RESIDUAL_TOL = 1e-5
# below this, a derivative boundary coefficient is numerically Dirichlet:
# the implied Robin layer is orders of magnitude thinner than any grid
DIRICHLET_SNAP = 1e-9


@dataclass(frozen=True)
class Coefficient:
    """Scalar coefficient function on [0, 1]: constant, polynomial, or table."""

    kind: str                      # 'constant' | 'polynomial' | 'table'
    values: tuple = ()             # constant: (c,); polynomial: (c0, c1, ...)
    table_x: tuple = ()
    table_y: tuple = ()
    order: int = 3                 # interpolation order for tables (1 or 3)

    @staticmethod
    def constant(c):
        return Coefficient("constant", (float(c),))

    @staticmethod
    def polynomial(coeffs):
        return Coefficient("polynomial", tuple(float(c) for c in coeffs))

    @staticmethod
    def table(x, y, order=3):
        if order not in (1, 3):
            raise ValueError("table interpolation order must be 1 or 3")
        return Coefficient("table", (), tuple(map(float, x)), tuple(map(float, y)), order)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.values[0])
        if self.kind == "polynomial":
            # values are (c0, c1, ...) so c0 + c1 x + ...
            return np.polynomial.polynomial.polyval(x, self.values)
        if self.order == 1:
            return np.interp(x, self.table_x, self.table_y)
        return CubicSpline(self.table_x, self.table_y)(x)

    @property
    def is_constant(self):
        if self.kind == "constant":
            return True
        return self.kind == "polynomial" and len(self.values) == 1

    def spec_string(self):
        """Round-trippable text form used in configs and artifacts."""
        if self.kind == "constant":
            return repr(self.values[0])
        if self.kind == "polynomial":
            return "poly: " + " ".join(repr(c) for c in self.values)
        xs = " ".join(repr(v) for v in self.table_x)
        ys = " ".join(repr(v) for v in self.table_y)
        return f"table(order={self.order}): {xs} | {ys}"


@dataclass(frozen=True)
class SLProblem:
    """Plant definition: coefficients and boundary constants."""

    p: Coefficient
    q: Coefficient
    r: Coefficient
    b1: float
    b2: float
    a1: float
    a2: float

    def __post_init__(self):
        for name, c1, c2 in (("(a1, a2)", self.a1, self.a2), ("(b1, b2)", self.b1, self.b2)):
            if abs(c1 * c1 + c2 * c2 - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"boundary constants {name} must be a unit vector")

    @property
    def left_dirichlet(self):
        return abs(self.b2) <= DIRICHLET_SNAP

    @property
    def right_dirichlet(self):
        return abs(self.a2) <= DIRICHLET_SNAP

    @property
    def constant_coefficients(self):
        return all(c.is_constant for c in (self.p, self.q, self.r))

    def validate_on_grid(self, grid):
        p, r = self.p(grid.x), self.r(grid.x)
        if np.min(p) <= 0.0:
            raise NonPositiveCoefficient(f"p(x) <= 0 at x={grid.x[np.argmin(p)]:.6g}")
        if np.min(r) <= 0.0:
            raise NonPositiveCoefficient(f"r(x) <= 0 at x={grid.x[np.argmin(r)]:.6g}")


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 1] with composite-Simpson quadrature weights."""

    n_points: int
    x: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def h(self):
        return 1.0 / (self.n_points - 1)


def make_grid(n_points=2049):
    if n_points < 129 or n_points % 2 == 0:
        raise ValueError("n_points must be odd and >= 129")
    x = np.linspace(0.0, 1.0, n_points)
    h = 1.0 / (n_points - 1)
    w = np.full(n_points, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return Grid(n_points, x, w * (h / 3.0))


def inner_product(f, g, grid, r=None):
    """Composite-Simpson approximation of the r-weighted inner product."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape[-1] != grid.n_points or g.shape[-1] != grid.n_points:
        raise DimensionMismatch(
            f"grid functions must have {grid.n_points} samples, "
            f"got {f.shape[-1]} and {g.shape[-1]}"
        )
    w = grid.weights if r is None else grid.weights * np.asarray(r, dtype=float)
    return (f * g) @ w


@dataclass
class EigenSystem:
    """Computed eigenvalues and grid-sampled orthonormal eigenfunctions.

    phis[n] is the n-th eigenfunction sampled on grid.x, normalized to unit
    r-weighted norm, with sign fixed by phi'(0) > 0 for a Dirichlet left end
    and phi(0) > 0 otherwise.  dphi0/dphi1 hold one-sided fourth-order
    endpoint derivatives.
    """

    problem: SLProblem
    grid: Grid
    lambdas: np.ndarray            # (K,)
    phis: np.ndarray               # (K, n_points)
    dphi0: np.ndarray              # (K,)
    dphi1: np.ndarray              # (K,)
    r_samples: np.ndarray          # (n_points,)

    @property
    def K(self):
        return self.lambdas.size

    def inner(self, f, g):
        return inner_product(f, g, self.grid, self.r_samples)

    def norm_sq(self, f):
        return self.inner(f, f)

    def gram(self):
        wphi = self.phis * (self.grid.weights * self.r_samples)
        return wphi @ self.phis.T


# -- finite-volume discretization -------------------------------------------

def _assemble_pencil(problem, x):
    """Symmetric tridiagonal pencil (M, D) of the self-adjoint discretization.

    Each row integrates -(p f')' + q f = lam r f over the node's control
    volume; Robin/Neumann ends use the boundary flux directly (half cells),
    Dirichlet ends are eliminated.  Returns active indices, the tridiagonal
    of M, and the diagonal of D.
    """
    n = x.size
    h = x[1] - x[0]
    p = problem.p(x)
    q = problem.q(x)
    r = problem.r(x)
    ph = problem.p(x[:-1] + h / 2)

    i0 = 1 if problem.left_dirichlet else 0
    i1 = n - 2 if problem.right_dirichlet else n - 1
    idx = np.arange(i0, i1 + 1)
    m = idx.size

    diag = np.empty(m)
    vol = np.full(m, h)
    inner = (idx > 0) & (idx < n - 1)
    ii = idx[inner]
    diag[inner] = (ph[ii - 1] + ph[ii]) / h + q[ii] * h
    if not problem.left_dirichlet:
        diag[0] = ph[0] / h - p[0] * (problem.b1 / problem.b2) + q[0] * h / 2
        vol[0] = h / 2
    if not problem.right_dirichlet:
        diag[-1] = ph[-1] / h + p[-1] * (problem.a1 / problem.a2) + q[-1] * h / 2
        vol[-1] = h / 2
    off = -ph[idx[:-1]] / h
    dvol = r[idx] * vol
    return idx, diag, off, dvol


def _tridiagonal_eigs(problem, x, K):
    """Lowest K eigenpairs of the pencil by bisection + inverse iteration."""
    idx, diag, off, dvol = _assemble_pencil(problem, x)
    if K > idx.size:
        raise GridTooCoarse(f"grid supports at most {idx.size} modes, requested {K}")
    s = np.sqrt(dvol)
    lam, psi = eigh_tridiagonal(
        diag / dvol, off / (s[:-1] * s[1:]), select="i", select_range=(0, K - 1)
    )
    phi = np.zeros((x.size, K))
    phi[idx] = psi / s[:, None]
    return lam, phi


# -- fourth-order evaluation machinery ---------------------------------------

_FWD0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_FWD1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def derivative_4th(f, h):
    """Fourth-order first derivative on a uniform grid, one-sided at the ends.

    f may be (n,) or (n, K); the derivative acts along the first axis.
    """
    g = np.zeros_like(f)
    g[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    for row, st in ((0, _FWD0), (1, _FWD1)):
        g[row] = np.tensordot(st, f[:5], axes=(0, 0)) / h
        g[-1 - row] = -np.tensordot(st, f[-5:][::-1], axes=(0, 0)) / h
    return g


def endpoint_derivatives(f, h):
    """One-sided fourth-order derivative estimates at x=0 and x=1."""
    d0 = np.tensordot(_FWD0, f[:5], axes=(0, 0)) / h
    d1 = -np.tensordot(_FWD0, f[-5:][::-1], axes=(0, 0)) / h
    return d0, d1


def sl_apply(problem, grid, f):
    """Apply -(p f')' + q f with fourth-order stencils (one-sided at ends)."""
    h = grid.h
    p = problem.p(grid.x)
    q = problem.q(grid.x)
    d = derivative_4th(f, h)
    pd = p[:, None] * d if f.ndim == 2 else p * d
    return -derivative_4th(pd, h) + (q[:, None] * f if f.ndim == 2 else q * f)


def operator_residuals(problem, grid, lambdas, phis):
    """r-weighted norms of A phi_n - lambda_n phi_n over interior nodes.

    The differential expression is evaluated with fourth-order stencils
    independent of the discretization that produced the eigenpairs; the
    norm excludes the four nodes nearest each end where the one-sided
    stencils interact.
    """
    r = problem.r(grid.x)
    lhs = sl_apply(problem, grid, phis.T)
    res = lhs - r[:, None] * phis.T * lambdas[None, :]
    sl = slice(4, grid.n_points - 4)
    w = (grid.weights * r)[sl, None]
    return np.sqrt(np.sum(w * res[sl] ** 2, axis=0))


def _onesided_d1_weights(offsets):
    """Exact first-derivative weights for the given node offsets."""
    offs = np.asarray(offsets, dtype=float)
    V = np.vander(offs, offs.size, increasing=True).T
    rhs = np.zeros(offs.size)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


# width-7 one-sided rows: keeps the refinement operator's boundary truncation
# from polluting the orthogonality of refined eigenvectors
_REFINE_W0 = _onesided_d1_weights(range(7))
_REFINE_W1 = _onesided_d1_weights(range(-1, 6))


def _first_derivative_matrix(n, h):
    rows, cols, vals = [], [], []

    def put(i, js, cs):
        rows.extend([i] * len(js))
        cols.extend(js)
        vals.extend(np.asarray(cs) / h)

    w = _REFINE_W0.size
    put(0, range(w), _REFINE_W0)
    put(1, range(w), _REFINE_W1)
    interior = np.arange(2, n - 2)
    for offs, c in ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12)):
        rows.extend(interior)
        cols.extend(interior + offs)
        vals.extend(np.full(n - 4, c / h))
    put(n - 2, range(n - w, n), -_REFINE_W1[::-1])
    put(n - 1, range(n - w, n), -_REFINE_W0[::-1])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _boundary_rows(problem, n, h):
    bc0 = np.zeros(n)
    bcn = np.zeros(n)
    bc0[0] = problem.b1
    bcn[-1] = problem.a1
    if not problem.left_dirichlet:
        bc0[:5] += problem.b2 * _FWD0 / h
    if not problem.right_dirichlet:
        bcn[-5:] += problem.a2 * (-_FWD0[::-1]) / h
    return bc0, bcn


def _refine_eigenvectors(problem, grid, lambdas, phis, steps=2):
    """Inverse-iteration polish against a fourth-order discretization.

    Boundary conditions are imposed as exact matrix rows, so refined
    vectors satisfy them to rounding; interior accuracy improves from the
    second-order solve to the fourth-order operator's eigenvectors.
    """
    n = grid.n_points
    h = grid.h
    p = problem.p(grid.x)
    q = problem.q(grid.x)
    r = problem.r(grid.x)
    D1 = _first_derivative_matrix(n, h)
    L4 = (-D1 @ sp.diags(p) @ D1 + sp.diags(q)).tolil()
    bc0, bcn = _boundary_rows(problem, n, h)
    L4[0] = bc0
    L4[n - 1] = bcn
    L4 = L4.tocsc()
    rmask = r.copy()
    rmask[0] = rmask[-1] = 0.0
    B = sp.diags(rmask).tocsc()

    out = np.empty_like(phis)
    for k in range(lambdas.size):
        shift = lambdas[k]
        v = phis[k].copy()
        try:
            lu = spla.splu((L4 - shift * B).tocsc())
        except RuntimeError:
            lu = spla.splu((L4 - shift * (1.0 + 1e-11) * B).tocsc())
        for _ in range(steps):
            v = lu.solve(B @ v)
            norm = np.linalg.norm(v)
            if not np.isfinite(norm) or norm == 0.0:
                raise GridTooCoarse(
                    f"eigenvector refinement diverged for mode {k + 1}"
                )
            v /= norm
        out[k] = v
    return out


def _normalize(phis, grid, r):
    """Unit Simpson r-norm for every eigenvector (diagonal of the Gram matrix)."""
    wr = grid.weights * r
    norms = np.sqrt(np.sum(wr * phis ** 2, axis=1))
    return phis / norms[:, None]


def eigensolve(problem, grid, K, richardson=True, refine="auto"):
    """Compute the lowest K eigenpairs of the Sturm-Liouville operator.

    Eigenvalues come from Sturm-sequence bisection + inverse iteration on the
    symmetric tridiagonal second-order discretization, with one Richardson
    extrapolation step across the grid and its 2h coarsening (fourth-order
    eigenvalues).

    Constant-coefficient problems with Dirichlet ends keep the raw tridiagonal
    eigenvectors (exact discrete modes, machine-exact orthonormality); all
    other problems get an inverse-iteration polish against a fourth-order
    operator whose boundary rows impose the boundary conditions exactly.

    The quantitative contracts (operator residual within 1e-5 * (1 + |lambda|),
    quadrature orthonormality within 1e-8) are enforced for the lower half of
    the computed modes; the upper half serves as guard modes for tail
    estimates.  Violations raise GridTooCoarse.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if grid.n_points < 8 * K:
        raise GridTooCoarse(f"need n_points >= {8 * K} for K={K}, got {grid.n_points}")
    problem.validate_on_grid(grid)

    lam_f, phi = _tridiagonal_eigs(problem, grid.x, K)
    lambdas = lam_f
    if richardson:
        lam_c, _ = _tridiagonal_eigs(problem, grid.x[::2], K)
        lambdas = (4.0 * lam_f - lam_c) / 3.0

    if refine == "auto":
        refine = not (problem.constant_coefficients
                      and problem.left_dirichlet and problem.right_dirichlet)
    phis = phi.T
    if refine:
        phis = _refine_eigenvectors(problem, grid, lambdas, phis)

    r = problem.r(grid.x)
    phis = _normalize(phis, grid, r)

    # sign convention
    d0, d1 = endpoint_derivatives(phis.T, grid.h)
    anchor = d0 if problem.left_dirichlet else phis[:, 0]
    flip = np.sign(anchor)
    flip[flip == 0.0] = 1.0
    phis *= flip[:, None]
    d0 *= flip
    d1 *= flip

    if np.any(np.diff(lambdas) <= 0.0):
        raise GridTooCoarse("computed eigenvalues are not strictly increasing")

    eig = EigenSystem(problem, grid, lambdas, phis, d0, d1, r)

    n_check = max(1, K // 2)
    gram_dev = np.max(np.abs(eig.gram()[:n_check, :n_check] - np.eye(n_check)))
    if gram_dev > ORTHONORMALITY_TOL:
        raise GridTooCoarse(
            f"quadrature orthonormality defect {gram_dev:.3e} exceeds {ORTHONORMALITY_TOL:g}"
        )

    res = operator_residuals(problem, grid, lambdas, phis)
    tol = OPERATOR_RESIDUAL_TOL * (1.0 + np.abs(lambdas))
    bad = np.nonzero(res[:n_check] > tol[:n_check])[0]
    if bad.size:
        raise GridTooCoarse(
            f"operator residual {res[bad[0]]:.3e} exceeds {tol[bad[0]]:.3e} "
            f"for mode {bad[0] + 1}; refine the grid or reduce K"
        )
    return eig


def boundary_residuals(eigsys):
    """Residuals of both boundary conditions, scaled by max |phi_n|."""
    pr = eigsys.problem
    amp = np.max(np.abs(eigsys.phis), axis=1)
    left = np.abs(pr.b1 * eigsys.phis[:, 0] + pr.b2 * eigsys.dphi0)
    right = np.abs(pr.a1 * eigsys.phis[:, -1] + pr.a2 * eigsys.dphi1)
    return left / amp, right / amp


def project(w, eigsys, N):
    """Modal coefficients against the first N eigenfunctions, plus remainder."""
    if N > eigsys.K:
        raise CutoffExceedsComputedModes(f"N={N} exceeds computed modes K={eigsys.K}")
    w = np.asarray(w, dtype=float)
    wr = eigsys.grid.weights * eigsys.r_samples
    coeffs = eigsys.phis[:N] @ (wr * w)
    remainder = w - coeffs @ eigsys.phis[:N]
    return coeffs, remainder


@dataclass
class AssumptionHReport:
    """Numerical diagnostic for the spectral-tail summability assumption."""

    N: int
    lambda_next: float
    hard_pass: bool                # lambda_{N+1} > 0
    partial_sums: np.ndarray       # cumulative sums of lambda_n^-1 max|phi_n|
    increments: np.ndarray
    tail_slope: float              # log-log slope of increments over last half
    summable_trend: bool

    @property
    def passed(self):
        return self.hard_pass


def check_assumption_h(eigsys, N):
    """Diagnostic for the tail assumption: hard sign test plus trend indicator.

    This is numerical evidence, not a proof: the partial sums of
    lambda_n^-1 max|phi_n| over computed modes are reported together with
    the decay slope of their increments (slope < -1 indicates summability).
    """
    if eigsys.K < N + 20:
        raise ValueError(f"need at least N+20={N + 20} computed modes, have {eigsys.K}")
    lambda_next = float(eigsys.lambdas[N])
    hard_pass = lambda_next > 0.0
    tail = np.arange(N, eigsys.K)
    amps = np.max(np.abs(eigsys.phis[tail]), axis=1)
    increments = amps / np.abs(eigsys.lambdas[tail])
    partial = np.cumsum(increments)
    half = tail.size // 2
    ns = np.arange(N + 1, eigsys.K + 1)[half:]
    slope = float(np.polyfit(np.log(ns), np.log(increments[half:]), 1)[0])
    return AssumptionHReport(N, lambda_next, hard_pass, partial, increments,
                             slope, slope < -1.0)


def export_eigensystem_csv(eigsys, path):
    """Write rows (n, lambda, phi samples) for each computed mode."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "lambda"] + [f"x{i}" for i in range(eigsys.grid.n_points)])
        for n in range(eigsys.K):
            writer.writerow([n + 1, repr(float(eigsys.lambdas[n]))]
                            + [repr(float(v)) for v in eigsys.phis[n]])
