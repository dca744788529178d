"""Closed-loop spectral-Galerkin simulation and decay-rate fitting.

The state is truncated to n_modes modal coefficients c_n plus the boundary
states y_i:

    c_n' = -lambda_n c_n - sum_i v_i <varphi_i, phi_n>  (+ <phi_n, F(u)>),
    y_i' = -mu_i y_i + v_i.

The default integrator applies the exact diagonal decay factor
exp(-lambda_n dt) and treats the control / nonlinear coupling with an
explicit midpoint rule (Strang arrangement), which keeps the O(n^2)-stiff
tail stable at practical step sizes.  RK4 is available for cross-checks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTrajectory,
    Instability,
    QuadratureBudgetExceeded,
    RemainderTooLarge,
    StepSizeTooLarge,
)
from .lyapunov import coupling_table, lyapunov_value_modal
from .spectral import project

INSTABILITY_FACTOR = 1e6
RK4_STABILITY = 2.78
W0_REMAINDER_REL = 1e-8


@dataclass
class SimConfig:
    n_modes: int = 64
    dt: float = 1e-4
    t_final: float | None = None     # None: 5/sigma clipped to [1, 20], fallback 10
    integrator: str = "exponential_midpoint"   # | 'rk4'
    record_stride: int = 10
    max_steps: int = 2_000_000

    def resolve_t_final(self, sigma=None):
        if self.t_final is not None:
            return float(self.t_final)
        if sigma is None or sigma <= 0.0:
            return 10.0
        return float(min(max(5.0 / sigma, 1.0), 20.0))


@dataclass
class Trajectory:
    times: np.ndarray        # (S,)
    coeffs: np.ndarray       # (S, n_modes)
    y: np.ndarray            # (S, j)
    norm_w: np.ndarray       # (S,)
    norm_y: np.ndarray       # (S,)
    V: np.ndarray            # (S,)
    U: np.ndarray            # (S,) boundary value sum_i y_i
    v: np.ndarray            # (S, j) transformed controls
    vbar: np.ndarray         # (S, j) raw boundary rates
    certified: bool
    design_N: int
    kind: str                # 'linear' | 'semilinear' | 'open_loop'

    @property
    def samples(self):
        return self.times.size


def _prepare_state(eigsys, w0, y0, n_modes):
    if n_modes > eigsys.K:
        raise ValueError(f"n_modes={n_modes} exceeds computed modes {eigsys.K}")
    w0 = np.asarray(w0, dtype=float)
    c0, _ = project(w0, eigsys, n_modes)
    norm_sq = eigsys.norm_sq(w0)
    rem = norm_sq - float(c0 @ c0)
    if norm_sq > 0.0 and rem > W0_REMAINDER_REL * norm_sq:
        raise RemainderTooLarge(
            f"w0 remainder energy {rem:.3e} exceeds {W0_REMAINDER_REL:g} relative"
        )
    y0 = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    return c0, y0


def _run_loop(lambdas, mus, coupling_rhs, c, y, dt, steps, stride, cfg,
              value_fn, controls_fn):
    """Shared integrator core; returns stacked records."""
    n_rec = steps // stride + 1
    j = y.size
    times = np.empty(n_rec)
    coeffs = np.empty((n_rec, c.size))
    ys = np.empty((n_rec, j))
    vs = np.empty((n_rec, j))

    if cfg.integrator == "exponential_midpoint":
        E = np.exp(-lambdas * dt / 2.0)
        Ey = np.exp(-mus * dt / 2.0)

        def step(c, y):
            ac, ay = E * c, Ey * y
            d1c, d1y = coupling_rhs(ac, ay)
            d2c, d2y = coupling_rhs(ac + 0.5 * dt * d1c, ay + 0.5 * dt * d1y)
            return E * (ac + dt * d2c), Ey * (ay + dt * d2y)
    elif cfg.integrator == "rk4":
        lam_pos = float(np.max(lambdas)) if lambdas.size else 0.0
        if lam_pos * dt > RK4_STABILITY:
            raise StepSizeTooLarge(
                f"dt={dt:g} violates RK4 stability: lambda_max*dt = {lam_pos * dt:.3g} > {RK4_STABILITY}"
            )

        def full_rhs(c, y):
            dc, dy = coupling_rhs(c, y)
            return dc - lambdas * c, dy - mus * y

        def step(c, y):
            k1c, k1y = full_rhs(c, y)
            k2c, k2y = full_rhs(c + 0.5 * dt * k1c, y + 0.5 * dt * k1y)
            k3c, k3y = full_rhs(c + 0.5 * dt * k2c, y + 0.5 * dt * k2y)
            k4c, k4y = full_rhs(c + dt * k3c, y + dt * k3y)
            return (c + dt / 6.0 * (k1c + 2 * k2c + 2 * k3c + k4c),
                    y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y))
    else:
        raise ValueError(f"unknown integrator {cfg.integrator!r}")

    norm0 = np.sqrt(float(c @ c)) + np.linalg.norm(y)
    cap = INSTABILITY_FACTOR * max(norm0, 1e-12)
    rec = 0
    for k in range(steps + 1):
        if k % stride == 0:
            times[rec] = k * dt
            coeffs[rec] = c
            ys[rec] = y
            vs[rec] = controls_fn(c, y)
            size = np.sqrt(float(c @ c)) + np.linalg.norm(y)
            if not np.isfinite(size) or size > cap:
                raise Instability(
                    f"norm {size:.3e} at t={k * dt:.4g} exceeds {INSTABILITY_FACTOR:g} x initial"
                )
            rec += 1
        if k < steps:
            c, y = step(c, y)

    norm_w = np.sqrt(np.sum(coeffs ** 2, axis=1))
    norm_y = np.sqrt(np.sum(ys ** 2, axis=1))
    V = np.array([value_fn(coeffs[i], ys[i]) for i in range(n_rec)])
    vbars = -mus[None, :] * ys + vs
    return times, coeffs, ys, norm_w, norm_y, V, np.sum(ys, axis=1), vs, vbars


def simulate_linear(eigsys, shapes, design, params, law, w0, y0, cfg):
    """Closed-loop linear simulation; pass law=None for the open loop (v = 0)."""
    c, y = _prepare_state(eigsys, w0, y0, cfg.n_modes)
    n_modes = cfg.n_modes
    if law is not None and n_modes <= law.M:
        raise ValueError(f"n_modes={n_modes} must exceed the kernel truncation M={law.M}")
    lambdas = eigsys.lambdas[:n_modes]
    mus = shapes.mus
    T = coupling_table(shapes, eigsys, n_modes)     # (n_modes, j)
    j = shapes.j
    if law is not None:
        Kmat = np.zeros((j, n_modes))
        Kmat[:, : law.M] = law.kernel_coeffs
        y_gains = law.y_gains

        def controls(c, y):
            return Kmat @ c - y_gains * y
    else:
        def controls(c, y):
            return np.zeros(j)

    def coupling_rhs(c, y):
        v = controls(c, y)
        return -T @ v, v

    sigma = design.sigma if design is not None else None
    t_final = cfg.resolve_t_final(sigma)
    dt = cfg.dt
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    steps = int(round(t_final / dt))
    if steps < 100:
        raise ValueError("t_final must cover at least 100 steps")

    if params is not None and design is not None:
        N = design.K.shape[1]

        def value(c, y):
            cN = c[:N]
            return lyapunov_value_modal(cN, float(c @ c) - float(cN @ cN), y, params, design)
    else:
        def value(c, y):
            return 0.5 * (float(c @ c) + float(y @ y))

    out = _run_loop(lambdas, mus, coupling_rhs, c, y, dt, steps,
                    cfg.record_stride, cfg, value, controls)
    kind = "linear" if law is not None else "open_loop"
    return Trajectory(*out, certified=law is not None,
                      design_N=design.K.shape[1] if design is not None else 1, kind=kind)


def simulate_semilinear(eigsys, shapes, model, design, F, w0, y0, cfg):
    """Closed-loop semilinear simulation under the design's controller.

    The nonlinearity coefficients <phi_n, F(u)> are recomputed by quadrature
    at every coupling evaluation, with u reconstructed on the grid from the
    modal state and the shape terms.  Uncertified designs run but are
    flagged on the trajectory.
    """
    c, y = _prepare_state(eigsys, w0, y0, cfg.n_modes)
    n_modes = cfg.n_modes
    N = design.N
    lambdas = eigsys.lambdas[:n_modes]
    mus = design.mus
    T = coupling_table(shapes, eigsys, n_modes)
    Kmat = np.zeros((N, n_modes))
    Kmat[:, :N] = design.g * (design.sigma - design.lambdas)[None, :]
    Phi = eigsys.phis[:n_modes]                      # (n_modes, n_grid)
    Psi = shapes.varphis                              # (N, n_grid)
    wr = eigsys.grid.weights * eigsys.r_samples
    Phi_w = Phi * wr
    zero_f = F.kind == "zero"
    nonlinear = design.controller_kind == "nonlinear"

    t_final = cfg.resolve_t_final(design.sigma)
    dt = cfg.dt
    steps = int(round(t_final / dt))
    if steps < 100:
        raise ValueError("t_final must cover at least 100 steps")
    if 2 * steps > cfg.max_steps:
        raise QuadratureBudgetExceeded(
            f"{steps} steps x 2 quadrature evaluations exceed max_steps={cfg.max_steps}"
        )

    def f_modal(c, y):
        if zero_f:
            return np.zeros(n_modes)
        u = c @ Phi + y @ Psi
        return Phi_w @ F.evaluate(u)

    def controls(c, y):
        v = Kmat @ c
        if nonlinear:
            v = v + design.g @ f_modal(c, y)[:N]
        return v

    def coupling_rhs(c, y):
        f = f_modal(c, y)
        v = Kmat @ c
        if nonlinear:
            v = v + design.g @ f[:N]
        return -T @ v + f, v

    if design.clf is not None:
        clf = design.clf

        def value(c, y):
            cN = c[:N]
            return 0.5 * clf.R * float(cN @ cN) \
                + 0.5 * clf.gamma * (float(c @ c) - float(cN @ cN)) \
                + 0.5 * float(clf.omegas @ (y * y))
    else:
        def value(c, y):
            return 0.5 * (float(c @ c) + float(y @ y))

    out = _run_loop(lambdas, mus, coupling_rhs, c, y, dt, steps,
                    cfg.record_stride, cfg, value, controls)
    return Trajectory(*out, certified=design.certified, design_N=N, kind="semilinear")


@dataclass
class DecayFit:
    amplitude: float       # fitted prefactor at t = 0
    rate: float            # fitted exponential decay rate (positive = decay)
    r_squared: float


def fit_decay_rate(traj):
    """Least-squares exponential fit of norm_w + norm_y over the trailing half."""
    if traj.samples < 20:
        raise ValueError("need at least 20 recorded samples to fit a rate")
    total = traj.norm_w + traj.norm_y
    if np.all(total == 0.0):
        raise DegenerateTrajectory("trajectory is identically zero")
    lo = traj.samples // 2
    t = traj.times[lo:]
    z = np.log(np.clip(total[lo:], 1e-300, None))
    A = np.column_stack([t, np.ones_like(t)])
    (slope, intercept), *_ = np.linalg.lstsq(A, z, rcond=None)
    fit = A @ np.array([slope, intercept])
    ss_res = float(np.sum((z - fit) ** 2))
    ss_tot = float(np.sum((z - np.mean(z)) ** 2))
    r2 = 1.0 if ss_tot < 1e-30 else 1.0 - ss_res / ss_tot
    return DecayFit(float(np.exp(intercept)), float(-slope), r2)


def trajectory_header(j, N):
    cols = ["t", "norm_w", "norm_y", "V", "U"]
    cols += [f"v_{i + 1}" for i in range(j)]
    cols += [f"vbar_{i + 1}" for i in range(j)]
    cols += [f"c_{n + 1}" for n in range(min(8, N))]
    return cols


def write_trajectory_csv(traj, path):
    """Trajectory export: t, norms, V, U, controls, and leading modal coefficients."""
    j = traj.y.shape[1]
    nc = min(8, traj.design_N)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trajectory_header(j, traj.design_N))
        for i in range(traj.samples):
            row = [traj.times[i], traj.norm_w[i], traj.norm_y[i], traj.V[i], traj.U[i]]
            row += list(traj.v[i]) + list(traj.vbar[i]) + list(traj.coeffs[i, :nc])
            writer.writerow([repr(float(x)) for x in row])


def read_trajectory_csv(path):
    """Load a trajectory CSV into (header, float matrix)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    return header, np.asarray(rows)
