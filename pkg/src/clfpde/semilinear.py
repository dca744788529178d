"""Semilinear stabilization: cancellation and domination controllers.

For plants u_t = -Au + F(u) with j = N inputs, invertible input matrix B and
g = -B^-1, two controllers are available:

  nonlinear (cancellation):  v_i = sum_m g_im ((sigma - lambda_m) c_m + f_m),
  linear (domination):       v_i = sum_m g_im (sigma - lambda_m) c_m,

with c_m = <phi_m, w> and f_m = <phi_m, F(u)>.  The cancellation controller
makes the first N modal derivatives exactly -sigma c_n; the domination
controller leaves the projected nonlinearity in place and is admissible for
a strictly smaller set of growth bounds when all retained modes are unstable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDenominator,
    NoAdmissibleA,
    NoAdmissibleZeta,
    RemainderTooLarge,
    SingularB,
)
from .lyapunov import coupling_table
from .spectral import project

GAIN_INVERSE_TOL = 1e-10
KAPPA_GRID_SIZE = 1024
SEARCH_MARGIN = 1e-9
REMAINDER_ENERGY_REL = 1e-6


@dataclass(frozen=True)
class NonlinearitySpec:
    """Pointwise nonlinearity f(s) with declared growth constant lbar.

    Supported kinds: zero, linear_gain, sine_type, saturation, user_table.
    All satisfy f(0) = 0 and |f(s)| <= lbar |s|.
    """

    kind: str
    lbar: float
    scale: float = 0.0
    table_s: tuple = ()
    table_f: tuple = ()

    @staticmethod
    def make(kind, scale=0.0, lbar=None, table_s=(), table_f=()):
        if kind == "zero":
            return NonlinearitySpec("zero", 0.0)
        if kind in ("linear_gain", "sine_type", "saturation"):
            return NonlinearitySpec(kind, abs(scale) if lbar is None else float(lbar),
                                    float(scale))
        if kind == "user_table":
            if lbar is None:
                raise ValueError("user_table nonlinearity needs an explicit lbar")
            return NonlinearitySpec(kind, float(lbar), 0.0,
                                    tuple(map(float, table_s)), tuple(map(float, table_f)))
        raise ValueError(f"unknown nonlinearity kind {kind!r}")

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "linear_gain":
            return self.scale * s
        if self.kind == "sine_type":
            return self.scale * np.sin(s)
        if self.kind == "saturation":
            return self.scale * np.clip(s, -1.0, 1.0)
        return np.interp(s, self.table_s, self.table_f)

    def validate(self, samples=2001):
        s = np.linspace(-10.0, 10.0, samples)
        f = self.evaluate(s)
        if abs(float(self.evaluate(np.zeros(1))[0])) > 1e-14:
            raise ValueError("nonlinearity must vanish at 0")
        excess = np.abs(f) - self.lbar * np.abs(s)
        if np.max(excess) > 1e-9 * (1.0 + self.lbar):
            k = int(np.argmax(excess))
            raise ValueError(
                f"|f({s[k]:.4g})| = {abs(f[k]):.6g} exceeds lbar*|s| = {self.lbar * abs(s[k]):.6g}"
            )
        return True


@dataclass
class SemilinearCLF:
    """Constructive functional parameters produced by the proofs' selections."""

    R: float
    gamma: float
    omegas: np.ndarray
    theta: float
    beta: float
    epsilon: float
    zeta: float | None = None       # cancellation-controller search variable
    a: float | None = None          # domination-controller search variable
    epsilon_convention_note: str = ""


@dataclass
class SemilinearDesign:
    """Everything needed to run and certify a semilinear controller."""

    g: np.ndarray           # (N, N) = -B^-1
    sigma: float
    kappa: float
    lbar: float
    controller_kind: str    # 'nonlinear' | 'linear'
    lambdas: np.ndarray     # (N,)
    mus: np.ndarray         # (N,)
    norms_sq: np.ndarray    # (N,)
    lambda_next: float
    clf: SemilinearCLF | None = None
    certified: bool = False

    @property
    def N(self):
        return self.lambdas.size


def gain_inverse(model):
    """g = -B^-1 with the invertibility guard; g B = -I to rounding."""
    if model.j != model.N:
        raise SingularB(f"need a square input matrix, got {model.N}x{model.j}")
    det = np.linalg.det(model.B)
    if abs(det) <= GAIN_INVERSE_TOL:
        raise SingularB(f"|det B| = {abs(det):.3e} too small")
    g = -np.linalg.inv(model.B)
    err = np.max(np.abs(g @ model.B + np.eye(model.N)))
    if err > GAIN_INVERSE_TOL:
        raise SingularB(f"inverse verification failed: max |gB + I| = {err:.3e}")
    return g


def nonlinear_controls(design, w_coeffs, f_coeffs):
    """Cancellation controller from the first-N modal state and nonlinearity coefficients."""
    c = np.asarray(w_coeffs, dtype=float)[: design.N]
    f = np.asarray(f_coeffs, dtype=float)[: design.N]
    return design.g @ ((design.sigma - design.lambdas) * c + f)


def linear_controls(design, w_coeffs):
    """Domination controller from the first-N modal state."""
    c = np.asarray(w_coeffs, dtype=float)[: design.N]
    return design.g @ ((design.sigma - design.lambdas) * c)


def max_growth_bound(mus, norms_sq, g, lambda_next):
    """Largest admissible growth constant for the cancellation controller.

    lbar_max = sqrt(2 a b / (a + b + sqrt((a - b)^2 + 4 N a b))) with
    a = min_i mu_i^2 / (2 N ||varphi_i||^2 sum_m g_im^2) and
    b = lambda_{N+1}^2 / (1 + 2 N sum_im ||varphi_i||^2 g_im^2).
    """
    mus = np.asarray(mus, dtype=float)
    norms_sq = np.asarray(norms_sq, dtype=float)
    g = np.asarray(g, dtype=float)
    N = mus.size
    if np.any(norms_sq <= 0.0):
        raise DegenerateDenominator("shape norms must be positive")
    if lambda_next <= 0.0:
        raise DegenerateDenominator("lambda_{N+1} must be positive")
    gsq_rows = np.sum(g ** 2, axis=1)
    denom_a = 2.0 * N * norms_sq * gsq_rows
    with np.errstate(divide="ignore"):
        a = float(np.min(np.where(denom_a > 0.0, mus ** 2 / denom_a, np.inf)))
    b = float(lambda_next ** 2 / (1.0 + 2.0 * N * float(norms_sq @ gsq_rows)))
    if not np.isfinite(a):
        # g -> 0 limit: the formula tends to sqrt(b)
        return float(np.sqrt(b))
    lsq = 2.0 * a * b / (a + b + np.sqrt((a - b) ** 2 + 4.0 * N * a * b))
    return float(np.sqrt(lsq))


@dataclass
class AdmissibilityReport:
    passed: bool
    margins: dict = field(default_factory=dict)


def nonlinear_admissibility_margins(mus, norms_sq, g, lambda_next, lbar, kappa):
    """Margins of the two cancellation-controller inequalities at a given kappa."""
    mus = np.asarray(mus, dtype=float)
    norms_sq = np.asarray(norms_sq, dtype=float)
    N = mus.size
    gsq_rows = np.sum(np.asarray(g) ** 2, axis=1)
    y_margins = mus ** 2 - 2.0 * N * lbar ** 2 * (1.0 + 1.0 / kappa) * norms_sq * gsq_rows
    tail = lambda_next ** 2 - lbar ** 2 * (1.0 + kappa * N) * \
        (1.0 + 2.0 * N * float(norms_sq @ gsq_rows))
    return y_margins, float(tail)


def check_nonlinear_admissible(design, lbar=None, kappa=None):
    lbar = design.lbar if lbar is None else lbar
    kappa = design.kappa if kappa is None else kappa
    y_m, tail_m = nonlinear_admissibility_margins(
        design.mus, design.norms_sq, design.g, design.lambda_next, lbar, kappa)
    passed = bool(np.all(y_m > 0.0) and tail_m > 0.0)
    return AdmissibilityReport(passed, {"y": y_m, "tail": tail_m})


def linear_admissibility_margins(lambdas, mus, norms_sq, g, lambda_next, sigma, lbar, kappa):
    """Margins of the three domination-controller inequalities at a given kappa."""
    lambdas = np.asarray(lambdas, dtype=float)
    mus = np.asarray(mus, dtype=float)
    norms_sq = np.asarray(norms_sq, dtype=float)
    g = np.asarray(g, dtype=float)
    N = mus.size
    head = sigma ** 2 - lbar ** 2 * (1.0 + kappa * N)
    if head <= 0.0:
        nan = np.full(N, -np.inf)
        return float(head), -np.inf, nan
    gsl = g ** 2 * ((sigma - lambdas) ** 2)[None, :]
    rows = np.sum(gsl, axis=1)
    tail = lambda_next ** 2 - lbar ** 2 * (1.0 + kappa * N) * \
        (1.0 + 2.0 * N * float(norms_sq @ rows) / head)
    y_margins = mus ** 2 - 2.0 * N * lbar ** 2 * (1.0 + 1.0 / kappa) * norms_sq * rows / head
    return float(head), float(tail), y_margins


def check_linear_admissible(design, lbar=None, kappa=None, sigma=None):
    lbar = design.lbar if lbar is None else lbar
    kappa = design.kappa if kappa is None else kappa
    sigma = design.sigma if sigma is None else sigma
    head, tail, y_m = linear_admissibility_margins(
        design.lambdas, design.mus, design.norms_sq, design.g,
        design.lambda_next, sigma, lbar, kappa)
    passed = bool(head > 0.0 and tail > 0.0 and np.all(y_m > 0.0))
    return AdmissibilityReport(passed, {"head": head, "tail": tail, "y": y_m})


def kappa_grid(n=KAPPA_GRID_SIZE):
    return np.logspace(-4.0, 4.0, n)


def find_kappa(check, grid=None):
    """First grid kappa for which the given margin check passes."""
    grid = kappa_grid() if grid is None else grid
    for kappa in grid:
        if check(kappa):
            return float(kappa)
    return None


def best_kappa(margin_fn, grid=None):
    """Grid kappa maximizing the normalized admissibility margin (None if all fail).

    A first-feasible point sits at the edge of the feasible interval and
    would cascade into near-vacuous functional parameters, so the design
    path optimizes the margin instead.
    """
    grid = kappa_grid() if grid is None else grid
    margins = np.array([margin_fn(k) for k in grid])
    k = int(np.argmax(margins))
    if margins[k] <= 0.0:
        return None
    return float(grid[k])


def _search_grid():
    """Candidate points in (0, 1) for the zeta / a searches.

    Stage one is the 64-point uniform grid searched ascending (so the
    smallest uniform point wins whenever it is feasible); near the
    growth-bound boundary the feasible set shrinks far below 1/65, so a
    log-spaced extension toward 0 is searched descending, returning the
    largest feasible point (the strongest dissipation certificate there).
    """
    uniform = np.linspace(1.0 / 65.0, 64.0 / 65.0, 64)
    extension = np.logspace(np.log10(1.0 / 65.0), -12.0, 97)[1:]
    return np.concatenate([uniform, extension])


def zeta_feasible(design, zeta, lbar=None, kappa=None):
    """Strictly positive dissipation margins at a candidate zeta."""
    _, m1, m2 = _zeta_margins(design, zeta, lbar, kappa)
    return bool(np.all(m1 > SEARCH_MARGIN) and m2 > SEARCH_MARGIN)


def _zeta_margins(design, zeta, lbar=None, kappa=None):
    lbar = design.lbar if lbar is None else lbar
    kappa = design.kappa if kappa is None else kappa
    N = design.N
    h = 2.0 * zeta / ((1.0 - zeta) * (1.0 + lbar ** 2) * (1.0 + kappa * N))
    gsl = design.g ** 2 * ((design.sigma - design.lambdas) ** 2)[None, :]
    T = np.sum(gsl, axis=1)
    S = np.sum(design.g ** 2, axis=1)
    y_m = design.mus ** 2 / (h * T + 2.0 * S) \
        - N * lbar ** 2 * (1.0 + 1.0 / kappa) * design.norms_sq
    denom = 1.0 + N * h * float(design.norms_sq @ T) + 2.0 * N * float(design.norms_sq @ S)
    tail_m = design.lambda_next ** 2 / denom - lbar ** 2 * (1.0 + kappa * N)
    return h, y_m, float(tail_m)


def select_nonlinear_clf_params(design, lbar=None, kappa=None, grid=None):
    """Constructive functional parameters for the cancellation controller.

    Searches an ascending grid for the smallest feasible zeta, then applies
    the proof's closed-form selections for (beta, epsilon, gamma, R, omega_i)
    and reports the resulting strictly positive dissipation coefficient theta.
    """
    lbar = design.lbar if lbar is None else lbar
    kappa = design.kappa if kappa is None else kappa
    N = design.N
    grid = _search_grid() if grid is None else grid
    for zeta in grid:
        h, y_m, tail_m = _zeta_margins(design, zeta, lbar, kappa)
        if not (np.all(y_m > SEARCH_MARGIN) and tail_m > SEARCH_MARGIN):
            continue
        R = N * (1.0 + lbar ** 2) * (1.0 + kappa * N) / design.sigma
        beta = (1.0 - zeta) * design.sigma * R / N
        epsilon = 1.0 / (2.0 * N * zeta)
        gsl = design.g ** 2 * ((design.sigma - design.lambdas) ** 2)[None, :]
        per_input = np.sum(gsl, axis=1) / beta + np.sum(design.g ** 2, axis=1) / zeta
        gamma = design.lambda_next / (epsilon + float(design.norms_sq @ per_input))
        omegas = design.mus / per_input
        theta = min(zeta * N * (1.0 + kappa * N),
                    float(zeta * np.min(y_m)),
                    N * zeta * tail_m)
        return SemilinearCLF(R=float(R), gamma=float(gamma), omegas=omegas,
                             theta=float(theta), beta=float(beta),
                             epsilon=float(epsilon), zeta=float(zeta))
    raise NoAdmissibleZeta(
        "no feasible zeta found; check the admissibility margins for this lbar/kappa"
    )


def a_feasible(design, a, lbar=None, kappa=None):
    m = _a_margins(design, a, lbar, kappa)
    return m is not None and bool(np.all(m[1] > SEARCH_MARGIN) and m[2] > SEARCH_MARGIN)


def _a_margins(design, a, lbar=None, kappa=None, epsilon=0.0):
    lbar = design.lbar if lbar is None else lbar
    kappa = design.kappa if kappa is None else kappa
    N = design.N
    head = design.sigma ** 2 - a - lbar ** 2 * (1.0 + kappa * N)
    if head <= SEARCH_MARGIN:
        return None
    gsl = design.g ** 2 * ((design.sigma - design.lambdas) ** 2)[None, :]
    T = np.sum(gsl, axis=1)
    U = float(design.norms_sq @ T)
    y_m = design.mus ** 2 - (1.0 + 1.0 / kappa) * 2.0 * N * lbar ** 2 \
        * design.norms_sq * (epsilon + T) / head
    tail_m = design.lambda_next ** 2 - lbar ** 2 * (1.0 + kappa * N) * (1.0 + 2.0 * N * U / head)
    return head, y_m, float(tail_m), T, U


def select_linear_clf_params(design, lbar=None, kappa=None, grid=None):
    """Constructive functional parameters for the domination controller.

    The epsilon appearing in the proof's selection formulas is never defined
    for this controller; it is set to 0, consistent with the admissibility
    conditions, and the choice is recorded on the result.
    """
    lbar = design.lbar if lbar is None else lbar
    kappa = design.kappa if kappa is None else kappa
    N = design.N
    epsilon = 0.0
    grid = _search_grid() if grid is None else grid
    for a in grid:
        m = _a_margins(design, a, lbar, kappa, epsilon)
        if m is None:
            continue
        head, y_m, tail_m, T, U = m
        if not (np.all(y_m > SEARCH_MARGIN) and tail_m > SEARCH_MARGIN):
            continue
        beta = head / (2.0 * N)
        gamma = beta * design.lambda_next / (beta + U)
        R = design.sigma
        omegas = beta * design.mus / (epsilon + T)
        theta = min(a / 2.0,
                    0.5 * float(np.min(head * design.mus ** 2 / (2.0 * N * (epsilon + T))
                                       - (1.0 + 1.0 / kappa) * lbar ** 2 * design.norms_sq)),
                    0.5 * (design.lambda_next ** 2 / (1.0 + 2.0 * N * U / head)
                           - lbar ** 2 * (1.0 + kappa * N)))
        return SemilinearCLF(R=float(R), gamma=float(gamma), omegas=omegas,
                             theta=float(theta), beta=float(beta), epsilon=epsilon,
                             a=float(a),
                             epsilon_convention_note="epsilon set to 0 by convention")
    raise NoAdmissibleA(
        "no feasible a found; check the admissibility margins for this lbar/kappa"
    )


def build_semilinear_design(model, shapes, lbar, sigma, controller_kind,
                            kappa=None, kappa_points=None):
    """Assemble a SemilinearDesign, searching kappa and selecting CLF parameters.

    If no kappa on the grid certifies the requested controller, the design is
    returned uncertified (clf=None) so that exploratory simulation remains
    possible.
    """
    g = gain_inverse(model)
    design = SemilinearDesign(
        g=g, sigma=float(sigma), kappa=float("nan"), lbar=float(lbar),
        controller_kind=controller_kind, lambdas=model.lambdas.copy(),
        mus=model.mus.copy(), norms_sq=shapes.norms_sq.copy(),
        lambda_next=model.lambda_next,
    )

    if controller_kind == "nonlinear":
        def margin(k):
            y_m, t_m = nonlinear_admissibility_margins(
                design.mus, design.norms_sq, g, design.lambda_next, lbar, k)
            return min(float(np.min(y_m / design.mus ** 2)),
                       t_m / design.lambda_next ** 2)
    elif controller_kind == "linear":
        def margin(k):
            head, tail, y_m = linear_admissibility_margins(
                design.lambdas, design.mus, design.norms_sq, g,
                design.lambda_next, sigma, lbar, k)
            return min(head / sigma ** 2, tail / design.lambda_next ** 2,
                       float(np.min(y_m / design.mus ** 2)))
    else:
        raise ValueError(f"unknown controller kind {controller_kind!r}")

    grid = kappa_grid() if kappa_points is None else kappa_points
    if kappa is None:
        kappa = best_kappa(margin, grid)
    elif margin(float(kappa)) <= 0.0:
        kappa = None
    if kappa is None:
        design.certified = False
        return design
    design.kappa = kappa
    if controller_kind == "nonlinear":
        design.clf = select_nonlinear_clf_params(design)
    else:
        design.clf = select_linear_clf_params(design)
    design.certified = design.clf.theta > 0.0
    return design


def lyapunov_value_and_rate(w, y, design, shapes, eigsys, F):
    """Evaluate the semilinear functional, its rate, and the certified bound.

    Returns (V, Vdot, bound) with bound = -theta (||w||^2 + sum y_i^2); the
    contract Vdot <= bound + tol holds for certified designs under the
    design's own controller.
    """
    if design.clf is None:
        raise ValueError("design carries no functional parameters (uncertified)")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    N = design.N
    c, _ = project(w, eigsys, eigsys.K)
    norm_sq = eigsys.norm_sq(w)
    rem_sq = norm_sq - float(c @ c)
    if norm_sq > 0.0 and rem_sq > REMAINDER_ENERGY_REL * norm_sq:
        raise RemainderTooLarge(
            f"remainder energy {rem_sq:.3e} exceeds {REMAINDER_ENERGY_REL:g} of total"
        )
    u = np.asarray(w, dtype=float) + y @ shapes.varphis
    fu = F.evaluate(u)
    wr = eigsys.grid.weights * eigsys.r_samples
    f_all = eigsys.phis @ (wr * fu)

    if design.controller_kind == "nonlinear":
        v = nonlinear_controls(design, c, f_all)
    else:
        v = linear_controls(design, c)

    coupling = coupling_table(shapes, eigsys, eigsys.K)
    wdot = -eigsys.lambdas * c - coupling @ v + f_all

    clf = design.clf
    V = 0.5 * clf.R * float(c[:N] @ c[:N]) \
        + 0.5 * clf.gamma * (norm_sq - float(c[:N] @ c[:N])) \
        + 0.5 * float(clf.omegas @ (y * y))
    vdot = clf.R * float(c[:N] @ wdot[:N]) \
        + float(clf.omegas @ (y * v)) \
        - float((design.mus * clf.omegas) @ (y * y)) \
        + clf.gamma * float(c[N:] @ wdot[N:])
    bound = -clf.theta * (norm_sq + float(y @ y))
    return V, vdot, bound


def export_controller_coefficients_csv(design, path):
    """Write rows (i, m, g_im, sigma_minus_lambda_m) of the controller table."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "m", "g", "sigma_minus_lambda"])
        for i in range(design.N):
            for m in range(design.N):
                writer.writerow([i + 1, m + 1, repr(float(design.g[i, m])),
                                 repr(float(design.sigma - design.lambdas[m]))])
