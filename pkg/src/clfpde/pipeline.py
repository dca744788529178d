"""Pipeline orchestration: design -> certify -> simulate -> report.

Certification re-derives every contract the design relies on and records a
margin per check; the artifact stores the verdict list so that re-loading
and re-verifying must reproduce it.
"""

from __future__ import annotations

import numpy as np

from .artifact import DesignBundle, Verdict
from .lyapunov import (
    build_feedback_law,
    coercivity_constants,
    coupling_table,
    feedback_controls,
    feedback_controls_modal,
    lyapunov_rate_and_bound,
    lyapunov_value,
    select_clf_params,
    weight_inequality_margins,
)
from .reduced import (
    B_ENTRY_MIN,
    GAIN_INEQUALITY_TOL,
    build_reduced_model,
    check_controllability,
    closed_form_B,
    design_gains,
    gain_inequality_residual,
)
from .semilinear import (
    GAIN_INVERSE_TOL,
    NonlinearitySpec,
    build_semilinear_design,
    check_linear_admissible,
    check_nonlinear_admissible,
    lyapunov_value_and_rate,
    max_growth_bound,
)
from .shapes import (
    BOUNDARY_RESIDUAL_TOL as SHAPE_BC_TOL,
    BVP_RESIDUAL_TOL,
    MU_GAP_REL,
    ORTHOGONALITY_TOL,
    build_shape_set,
    check_orthogonality,
    shape_residuals,
    validate_mu_set,
)
from .sim import simulate_linear, simulate_semilinear
from .spectral import (
    BOUNDARY_RESIDUAL_TOL,
    OPERATOR_RESIDUAL_TOL,
    ORTHONORMALITY_TOL,
    boundary_residuals,
    check_assumption_h,
    eigensolve,
    make_grid,
    operator_residuals,
    project,
)

SPOT_CHECK_STATES = 20
DUAL_PATH_TOL = 1e-8
RATE_TOL_REL = 1e-6
COERCIVITY_TOL_REL = 1e-6
CLOSED_FORM_B_TOL = 1e-7


def design(cfg):
    """Run the full design chain for a validated configuration."""
    grid = make_grid(cfg.n_points)
    cfg.problem.validate_on_grid(grid)
    eigsys = eigensolve(cfg.problem, grid, cfg.modes, richardson=cfg.richardson)
    shapes = build_shape_set(cfg.problem, eigsys, cfg.mus, grid)
    model = build_reduced_model(eigsys, shapes, cfg.N)
    sigmas = cfg.sigma if len(cfg.sigma) == cfg.N else [cfg.sigma[0]] * cfg.N
    gains = design_gains(model, sigmas, cfg.gain_mode)
    params = select_clf_params(gains, shapes, eigsys, cfg.Ls_array,
                               safety=cfg.safety, m_max=cfg.m_max)
    law = build_feedback_law(gains, params, shapes, eigsys)
    sl_design = None
    if cfg.semilinear is not None:
        sl_design = build_semilinear_design(
            model, shapes, cfg.semilinear.lbar, gains.sigma,
            cfg.semilinear.controller, kappa=cfg.semilinear.kappa)
    return DesignBundle(cfg, grid, eigsys, shapes, model, gains, params, law, sl_design)


def random_states(eigsys, j, count, seed, max_mode=40):
    """Seeded smooth random states within the computed modal span."""
    rng = np.random.default_rng(seed)
    n = min(eigsys.K, max_mode)
    decay = 1.0 / np.arange(1, n + 1) ** 2
    states = []
    for _ in range(count):
        w = (rng.standard_normal(n) * decay) @ eigsys.phis[:n]
        y = rng.standard_normal(j)
        states.append((w, y))
    return states


def certify(bundle, states=None):
    """Compute the verdict list for a design bundle and store it."""
    cfg = bundle.config
    eig = bundle.eigsys
    shapes = bundle.shapes
    model = bundle.model
    gains = bundle.gains
    params = bundle.params
    law = bundle.law
    verdicts = []

    n_check = max(1, eig.K // 2)
    gram_dev = float(np.max(np.abs(eig.gram()[:n_check, :n_check] - np.eye(n_check))))
    verdicts.append(Verdict("eigen_orthonormality", gram_dev <= ORTHONORMALITY_TOL,
                            ORTHONORMALITY_TOL - gram_dev))

    left, right = boundary_residuals(eig)
    bc_dev = float(max(np.max(left), np.max(right)))
    verdicts.append(Verdict("eigen_boundary_residual", bc_dev <= BOUNDARY_RESIDUAL_TOL,
                            BOUNDARY_RESIDUAL_TOL - bc_dev))

    res = operator_residuals(cfg.problem, bundle.grid, eig.lambdas, eig.phis)
    tol = OPERATOR_RESIDUAL_TOL * (1.0 + np.abs(eig.lambdas))
    op_margin = float(np.min(tol[:n_check] - res[:n_check]))
    verdicts.append(Verdict("eigen_operator_residual", op_margin >= 0.0, op_margin))

    hrep = check_assumption_h(eig, cfg.N)
    verdicts.append(Verdict("assumption_H", hrep.hard_pass, hrep.lambda_next,
                            f"tail_slope={hrep.tail_slope:.3f}"))

    mu_verdicts = validate_mu_set(shapes.mus, eig)
    mu_margin = min(v.gap - MU_GAP_REL * (1.0 + abs(v.mu)) for v in mu_verdicts)
    verdicts.append(Verdict("mu_admissibility", all(v.passed for v in mu_verdicts),
                            float(mu_margin)))

    worst_res, worst_bc = 0.0, 0.0
    for i in range(shapes.j):
        rnorm, lres, rres = shape_residuals(cfg.problem, bundle.grid,
                                            shapes.mus[i], shapes.varphis[i])
        worst_res = max(worst_res, rnorm)
        worst_bc = max(worst_bc, lres, rres)
    verdicts.append(Verdict("shape_bvp_residual", worst_res <= BVP_RESIDUAL_TOL,
                            BVP_RESIDUAL_TOL - worst_res))
    verdicts.append(Verdict("shape_boundary_residual", worst_bc <= SHAPE_BC_TOL,
                            SHAPE_BC_TOL - worst_bc))

    orth = check_orthogonality(shapes)
    verdicts.append(Verdict("shape_orthogonality", orth.passed,
                            ORTHOGONALITY_TOL - orth.max_offdiag))

    b_min = float(np.min(np.abs(model.B)))
    verdicts.append(Verdict("input_matrix_entries", b_min > B_ENTRY_MIN,
                            b_min - B_ENTRY_MIN))

    B_cf = closed_form_B(cfg.problem, eig, shapes.mus, model.N)
    rel = float(np.max(np.abs(model.B - B_cf) / np.maximum(np.abs(B_cf), 1e-300)))
    verdicts.append(Verdict("input_matrix_closed_form", rel <= CLOSED_FORM_B_TOL,
                            CLOSED_FORM_B_TOL - rel))

    ctrl = check_controllability(model)
    sv_margin = float(ctrl.singular_values[-1] / ctrl.singular_values[0]) \
        if ctrl.singular_values[0] > 0 else 0.0
    verdicts.append(Verdict("controllability", ctrl.passed, sv_margin,
                            f"rank={ctrl.rank} certificate={ctrl.structural_certificate}"))

    residual = gain_inequality_residual(model, gains.K, gains.R, gains.sigma)
    verdicts.append(Verdict("gain_inequality", residual <= GAIN_INEQUALITY_TOL,
                            GAIN_INEQUALITY_TOL - residual))
    verdicts.append(Verdict("gain_certificate_spd", gains.c1 > 0.0, gains.c1))

    y_m, tail_m, trunc_m = weight_inequality_margins(params, gains, shapes, eig)
    verdicts.append(Verdict("clf_weight_inequalities", bool(np.all(y_m >= 0.0)),
                            float(np.min(y_m))))
    verdicts.append(Verdict("clf_tail_inequality", tail_m >= 0.0, tail_m))
    verdicts.append(Verdict("clf_kernel_truncation", trunc_m >= 0.0, trunc_m,
                            f"M={params.M}"))

    if states is None:
        states = random_states(eig, shapes.j, SPOT_CHECK_STATES, cfg.seed)
    coupling = coupling_table(shapes, eig, eig.K)
    dual_dev = 0.0
    coer_margin = np.inf
    diss_margin = np.inf
    for w, y in states:
        v_quad = feedback_controls(law, w, y, eig)
        c, _ = project(w, eig, eig.K)
        v_modal = feedback_controls_modal(c, y, gains, params, coupling)
        dual_dev = max(dual_dev, float(np.max(np.abs(v_quad - v_modal))))

        V = lyapunov_value(w, y, params, gains, eig)
        lo, hi = coercivity_constants(params, gains)
        size = eig.norm_sq(w) + float(y @ y)
        ctol = COERCIVITY_TOL_REL * max(1.0, abs(V))
        coer_margin = min(coer_margin, V - 0.5 * lo * size + ctol,
                          0.5 * hi * size - V + ctol)

        vdot, bound = lyapunov_rate_and_bound(w, y, params, gains, law, shapes, eig)
        rtol = RATE_TOL_REL * (1.0 + abs(bound))
        diss_margin = min(diss_margin, bound + rtol - vdot)
    verdicts.append(Verdict("kernel_dual_path", dual_dev <= DUAL_PATH_TOL,
                            DUAL_PATH_TOL - dual_dev))
    verdicts.append(Verdict("coercivity_spot_check", coer_margin >= 0.0,
                            float(coer_margin)))
    verdicts.append(Verdict("dissipation_spot_check", diss_margin >= 0.0,
                            float(diss_margin)))

    if bundle.sl_design is not None:
        sl = bundle.sl_design
        gb_err = float(np.max(np.abs(sl.g @ model.B + np.eye(model.N))))
        verdicts.append(Verdict("semilinear_gain_inverse", gb_err <= GAIN_INVERSE_TOL,
                                GAIN_INVERSE_TOL - gb_err))
        lbar_max = max_growth_bound(sl.mus, sl.norms_sq, sl.g, sl.lambda_next)
        verdicts.append(Verdict("semilinear_growth_bound", sl.lbar < lbar_max,
                                lbar_max - sl.lbar, f"lbar_max={lbar_max!r}"))
        if np.isfinite(sl.kappa):
            if sl.controller_kind == "nonlinear":
                rep = check_nonlinear_admissible(sl)
                margin = min(float(np.min(rep.margins["y"])), rep.margins["tail"])
            else:
                rep = check_linear_admissible(sl)
                margin = min(rep.margins["head"], rep.margins["tail"],
                             float(np.min(rep.margins["y"])))
            verdicts.append(Verdict("semilinear_admissibility", rep.passed, margin,
                                    f"kappa={sl.kappa!r}"))
        else:
            verdicts.append(Verdict("semilinear_admissibility", False, -1.0,
                                    "no feasible kappa on the search grid"))
        if sl.clf is not None:
            note = sl.clf.epsilon_convention_note
            verdicts.append(Verdict("semilinear_theta_positive", sl.clf.theta > 0.0,
                                    sl.clf.theta, note))
            F = nonlinearity_from_settings(cfg.semilinear)
            sl_margin = np.inf
            for w, y in states:
                V, vdot, bound = lyapunov_value_and_rate(w, y, sl, shapes, eig, F)
                rtol = RATE_TOL_REL * (1.0 + abs(bound))
                sl_margin = min(sl_margin, bound + rtol - vdot)
            verdicts.append(Verdict("semilinear_dissipation_spot_check",
                                    sl_margin >= 0.0, float(sl_margin)))
        else:
            verdicts.append(Verdict("semilinear_theta_positive", False, -1.0,
                                    "no functional parameters"))

    bundle.verdicts = verdicts
    return verdicts


def nonlinearity_from_settings(settings):
    return NonlinearitySpec.make(settings.kind, scale=settings.scale, lbar=settings.lbar)


def initial_state(bundle):
    """Grid initial condition from the configured modal amplitudes."""
    amps = np.asarray(bundle.config.w0_modes, dtype=float)
    w0 = amps @ bundle.eigsys.phis[: amps.size]
    y0 = np.asarray(bundle.config.y0, dtype=float)
    return w0, y0


def simulate(bundle):
    """Run the configured closed-loop simulation for a designed bundle."""
    cfg = bundle.config
    w0, y0 = initial_state(bundle)
    if cfg.semilinear is not None:
        F = nonlinearity_from_settings(cfg.semilinear)
        F.validate()
        return simulate_semilinear(bundle.eigsys, bundle.shapes, bundle.model,
                                   bundle.sl_design, F, w0, y0, cfg.sim)
    return simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains, bundle.params,
                           bundle.law, w0, y0, cfg.sim)


def report_text(bundle):
    lines = [f"clfpde certification report (version {bundle.version})", ""]
    lines.append(f"problem: N={bundle.config.N} j={bundle.config.j} "
                 f"grid={bundle.config.n_points} modes={bundle.eigsys.K}")
    lines.append(f"gain mode: {bundle.gains.mode}  sigma={bundle.gains.sigma!r}")
    lines.append(f"clf: gamma={bundle.params.gamma!r} M={bundle.params.M} "
                 f"omegas={list(map(float, bundle.params.omegas))!r}")
    if bundle.sl_design is not None:
        sl = bundle.sl_design
        lines.append(f"semilinear: controller={sl.controller_kind} lbar={sl.lbar!r} "
                     f"kappa={sl.kappa!r} certified={sl.certified}")
        if sl.clf is not None and sl.clf.epsilon_convention_note:
            lines.append(f"  note: {sl.clf.epsilon_convention_note}")
    lines.append("")
    for v in bundle.verdicts:
        lines.append("  " + v.line())
    lines.append("")
    lines.append(f"overall: {'CERTIFIED' if bundle.certified else 'FAILED'}")
    return "\n".join(lines) + "\n"


def downsample_rows(header, rows, stride):
    """Every stride-th row (always keeping the first); time stays monotone."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return header, rows[::stride]
