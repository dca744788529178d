"""Control Lyapunov functional assembly and the boundary feedback law.

The functional is

    V(w, y) = 1/2 <Gw, w> + gamma/2 ||w - Pw||^2 + 1/2 sum_i omega_i y_i^2

where G weighs the first N modal coefficients by the gain certificate R and
P projects onto those modes.  Evaluation uses the single-integral form

    V = 1/2 c^T R c + gamma/2 (||w||^2 - |c|^2) + 1/2 sum omega_i y_i^2,

c_n = <phi_n, w>.  The feedback is v_i = <k_i, w> - omega_i L_i y_i with
grid kernels k_i spanning modes up to the truncation index M.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import KernelTruncationExceedsModes, RemainderTooLarge, TailBoundFailed
from .spectral import project

REMAINDER_ENERGY_REL = 1e-6
M_MAX_DEFAULT = 512


@dataclass
class CLFParams:
    """Weights of the functional plus the kernel truncation index."""

    omegas: np.ndarray     # (j,)
    gamma: float
    sigma: float
    M: int
    Ls: np.ndarray         # (j,)

    @property
    def j(self):
        return self.omegas.size


@dataclass
class FeedbackLaw:
    """Grid kernels and their modal representation, plus the y feedback gains."""

    kernels: np.ndarray          # (j, n_points)
    kernel_coeffs: np.ndarray    # (j, M): coefficient of phi_n in k_i
    y_gains: np.ndarray          # (j,) = omega_i * L_i
    mus: np.ndarray              # (j,) input-transformation parameters
    M: int
    N: int


def coupling_table(shapes, eigsys, n_max):
    """<varphi_i, phi_n> for n = 1..n_max; shape (n_max, j)."""
    wr = eigsys.grid.weights * eigsys.r_samples
    return (eigsys.phis[:n_max] * wr) @ shapes.varphis.T


def shape_tail_energy_bound(coupling, M, K):
    """Upper bound on sum_{n > M} <phi_n, varphi_i>^2 per shape.

    Computed coefficients cover n <= K; the residue beyond K is bounded by
    alpha^2 / K using the O(1/n) coefficient decay, with alpha estimated
    from the last computed quarter.
    """
    tail_sq = np.sum(coupling[M:K] ** 2, axis=0)
    lo = max(1, 3 * K // 4)
    ns = np.arange(lo + 1, K + 1)
    alpha = np.max(np.abs(coupling[lo:K]) * ns[:, None], axis=0)
    return tail_sq + alpha ** 2 / K


def weight_inequality_margins(params, design, shapes, eigsys, coupling=None):
    """Margins of the three admissibility inequalities for (omega, gamma, M).

    Returns (per-input margins sigma mu_i - 2 j omega_i |K_i|^2,
             tail margin sigma lambda_{N+1} - 2 j gamma sum ||varphi_i||^2 |K_i|^2,
             truncation margin 4 (lambda_{M+1} - lambda_{N+1}) - gamma sum L_i T_i(M)).
    """
    j = params.j
    N = design.K.shape[1]
    ksq = design.gain_norms_sq
    y_margins = params.sigma * shapes.mus - 2.0 * j * params.omegas * ksq
    tail_margin = params.sigma * eigsys.lambdas[N] - \
        2.0 * j * params.gamma * float(np.sum(shapes.norms_sq * ksq))
    if coupling is None:
        coupling = coupling_table(shapes, eigsys, eigsys.K)
    tails = shape_tail_energy_bound(coupling, params.M, eigsys.K)
    trunc_margin = 4.0 * (eigsys.lambdas[params.M] - eigsys.lambdas[N]) - \
        params.gamma * float(np.sum(params.Ls * tails))
    return y_margins, float(tail_margin), float(trunc_margin)


def select_clf_params(design, shapes, eigsys, Ls, safety=2.0, m_max=M_MAX_DEFAULT):
    """Saturate the weight inequalities with a safety factor and search for M.

    omega_i = sigma mu_i / (2 safety j |K_i|^2)  (or sigma mu_i when the gain
    vanishes, where the inequality is vacuous); gamma analogously from the
    tail inequality; M is the smallest index >= N+1 whose truncation margin
    is nonnegative, using a certified upper bound for the infinite tail.
    """
    Ls = np.atleast_1d(np.asarray(Ls, dtype=float))
    if np.any(Ls < 0.0):
        raise ValueError("controller parameters L_i must be >= 0")
    j = shapes.j
    N = design.K.shape[1]
    sigma = design.sigma
    ksq = design.gain_norms_sq
    omegas = np.where(
        ksq > 0.0,
        sigma * shapes.mus / (2.0 * safety * j * np.maximum(ksq, 1e-300)),
        sigma * shapes.mus,
    )
    denom = 2.0 * safety * j * float(np.sum(shapes.norms_sq * ksq))
    gamma = sigma * eigsys.lambdas[N] / denom if denom > 0.0 else 1.0

    coupling = coupling_table(shapes, eigsys, eigsys.K)
    m_cap = min(m_max, eigsys.K - 1)
    for M in range(N + 1, m_cap + 1):
        tails = shape_tail_energy_bound(coupling, M, eigsys.K)
        lhs = 4.0 * (eigsys.lambdas[M] - eigsys.lambdas[N])
        if lhs >= gamma * float(np.sum(Ls * tails)):
            return CLFParams(omegas, float(gamma), float(sigma), M, Ls)
    raise TailBoundFailed(f"no admissible truncation index M <= {m_cap}")


def weighted_modal_image(coeffs, R):
    """Modal representation of the weighting operator: coefficients -> R @ coefficients."""
    return np.asarray(R) @ np.asarray(coeffs, dtype=float)


def lyapunov_value(w, y, params, design, eigsys):
    """Evaluate V through single integrals only."""
    N = design.K.shape[1]
    c, _ = project(w, eigsys, N)
    norm_sq = eigsys.norm_sq(w)
    return lyapunov_value_modal(c, norm_sq - float(c @ c), y, params, design)


def lyapunov_value_modal(c_N, tail_sq, y, params, design):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    quad = float(c_N @ (design.R @ c_N))
    return 0.5 * quad + 0.5 * params.gamma * tail_sq + 0.5 * float(params.omegas @ (y * y))


def coercivity_constants(params, design):
    """(c_lo, c_hi) with c_lo/2 (||w||^2+|y|^2) <= V <= c_hi/2 (...)."""
    lo = min(design.c1, params.gamma, float(np.min(params.omegas)))
    hi = max(design.c2, params.gamma, float(np.max(params.omegas)))
    return lo, hi


def build_feedback_law(design, params, shapes, eigsys):
    """Assemble the grid kernels k_i and their modal coefficients.

    For n <= N the coefficient is K_i,n + L_i (R . <phi_m, varphi_i>)_n;
    modes N+1..M carry gamma L_i <phi_n, varphi_i>.  With all L_i = 0 this
    reduces to the pure reduced-model feedback.
    """
    if params.M > eigsys.K:
        raise KernelTruncationExceedsModes(f"M={params.M} exceeds computed modes {eigsys.K}")
    N = design.K.shape[1]
    j = shapes.j
    coupling = coupling_table(shapes, eigsys, params.M)    # (M, j)
    coeffs = np.zeros((j, params.M))
    coeffs[:, :N] = design.K + params.Ls[:, None] * (design.R @ coupling[:N]).T
    coeffs[:, N:] = params.gamma * params.Ls[:, None] * coupling[N:params.M].T
    kernels = coeffs @ eigsys.phis[:params.M]
    return FeedbackLaw(kernels, coeffs, params.omegas * params.Ls,
                       shapes.mus.copy(), params.M, N)


def feedback_controls(law, w, y, eigsys):
    """Transformed controls v_i = <k_i, w> - omega_i L_i y_i."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    wr = eigsys.grid.weights * eigsys.r_samples
    return (law.kernels * wr) @ np.asarray(w, dtype=float) - law.y_gains * y


def feedback_controls_modal(c, y, design, params, coupling):
    """Inner-product form of the same law, from modal coefficients.

    c must cover at least M modes; coupling is the <varphi_i, phi_n> table.
    Agreement of this path with the kernel quadrature path is a standing
    verification target.
    """
    N = design.K.shape[1]
    y = np.atleast_1d(np.asarray(y, dtype=float))
    base = design.K @ c[:N]
    g_term = (design.R @ c[:N]) @ coupling[:N]                       # <Gw, varphi_i>
    tail_term = params.gamma * (c[N:params.M] @ coupling[N:params.M])
    return base + params.Ls * (g_term + tail_term - params.omegas * y)


def transform_state(u, y, shapes, direction):
    """Absorb the boundary state into the domain (to_w) or restore it (to_u)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    shift = y @ shapes.varphis
    if direction == "to_w":
        return np.asarray(u, dtype=float) - shift
    if direction == "to_u":
        return np.asarray(u, dtype=float) + shift
    raise ValueError(f"direction must be 'to_w' or 'to_u', got {direction!r}")


def transform_input(v, y, mus, direction):
    """Affine input transformation between v and the raw boundary rate."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mus = np.atleast_1d(np.asarray(mus, dtype=float))
    if direction == "to_vbar":
        return -mus * y + v
    if direction == "to_v":
        return v + mus * y
    raise ValueError(f"direction must be 'to_vbar' or 'to_v', got {direction!r}")


def lyapunov_rate_and_bound(w, y, params, design, law, shapes, eigsys, v=None):
    """Evaluate dV/dt along the closed loop and the certified decay bound.

    Returns (vdot, bound) with the contract vdot <= bound + tol under the
    feedback law; pass an explicit v to probe other controls (the bound then
    only applies when v follows the law).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    N = design.K.shape[1]
    c, _ = project(w, eigsys, eigsys.K)
    norm_sq = eigsys.norm_sq(w)
    rem_sq = norm_sq - float(c @ c)
    if norm_sq > 0.0 and rem_sq > REMAINDER_ENERGY_REL * norm_sq:
        raise RemainderTooLarge(
            f"remainder energy {rem_sq:.3e} exceeds {REMAINDER_ENERGY_REL:g} of total {norm_sq:.3e}"
        )
    if v is None:
        v = feedback_controls(law, w, y, eigsys)
    v = np.atleast_1d(np.asarray(v, dtype=float))

    coupling = coupling_table(shapes, eigsys, eigsys.K)    # (K, j)
    wdot = -eigsys.lambdas * c - coupling @ v
    vdot = float((design.R @ c[:N]) @ wdot[:N]) \
        + params.gamma * float(c[N:] @ wdot[N:]) \
        + float(params.omegas @ (y * v)) \
        - float((shapes.mus * params.omegas) @ (y * y))
    bound = -0.5 * float((params.omegas * shapes.mus) @ (y * y)) \
        - 0.5 * min(params.gamma * eigsys.lambdas[N], params.sigma) * norm_sq
    return vdot, bound


def guaranteed_decay_rate(params, design, shapes, eigsys):
    """Conservative exponential rate implied by the dissipation and coercivity bounds."""
    N = design.K.shape[1]
    num = min(float(np.min(params.omegas * shapes.mus)),
              min(params.gamma * eigsys.lambdas[N], params.sigma))
    _, hi = coercivity_constants(params, design)
    return 0.5 * num / hi


def export_kernels_csv(law, grid, path):
    """Write columns x, k_1(x), ..., k_j(x)."""
    j = law.kernels.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x"] + [f"k_{i + 1}" for i in range(j)])
        for i in range(grid.n_points):
            writer.writerow([repr(float(grid.x[i]))]
                            + [repr(float(law.kernels[k, i])) for k in range(j)])
