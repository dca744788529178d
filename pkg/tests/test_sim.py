import numpy as np
import pytest

from clfpde import pipeline
from clfpde.errors import (
    DegenerateTrajectory,
    Instability,
    QuadratureBudgetExceeded,
    RemainderTooLarge,
    StepSizeTooLarge,
)
from clfpde.semilinear import NonlinearitySpec
from clfpde.sim import (
    SimConfig,
    Trajectory,
    fit_decay_rate,
    read_trajectory_csv,
    simulate_linear,
    simulate_semilinear,
    trajectory_header,
    write_trajectory_csv,
)

PI = np.pi


def synthetic_trajectory(times, norms):
    S = times.size
    return Trajectory(
        times=times, coeffs=np.zeros((S, 1)), y=np.zeros((S, 1)),
        norm_w=norms, norm_y=np.zeros(S), V=norms ** 2, U=np.zeros(S),
        v=np.zeros((S, 1)), vbar=np.zeros((S, 1)), certified=True,
        design_N=1, kind="linear")


# -- decay fitting ------------------------------------------------------------

def test_fit_exact_exponential():
    t = np.linspace(0, 5, 200)
    fit = fit_decay_rate(synthetic_trajectory(t, 3.0 * np.exp(-2.0 * t)))
    assert abs(fit.amplitude - 3.0) < 1e-9
    assert abs(fit.rate - 2.0) < 1e-12
    assert fit.r_squared > 0.9999


def test_fit_constant_trajectory():
    t = np.linspace(0, 5, 100)
    fit = fit_decay_rate(synthetic_trajectory(t, np.full(100, 0.7)))
    assert abs(fit.rate) < 1e-12


def test_fit_guards():
    t = np.linspace(0, 5, 100)
    with pytest.raises(DegenerateTrajectory):
        fit_decay_rate(synthetic_trajectory(t, np.zeros(100)))
    with pytest.raises(ValueError):
        fit_decay_rate(synthetic_trajectory(t[:10], np.exp(-t[:10])))


# -- linear simulation ----------------------------------------------------------

def test_zero_state_stays_zero(single_mode_bundle):
    bundle = single_mode_bundle
    cfg = SimConfig(n_modes=16, dt=1e-3, t_final=0.5, record_stride=5)
    traj = simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                           bundle.params, bundle.law,
                           np.zeros(bundle.grid.n_points), [0.0], cfg)
    assert np.all(traj.norm_w == 0.0) and np.all(traj.norm_y == 0.0)
    assert np.all(traj.V == 0.0)


def test_certified_run_decays_and_V_monotone(single_mode_bundle):
    bundle = single_mode_bundle
    traj = pipeline.simulate(bundle)
    fit = fit_decay_rate(traj)
    assert fit.rate > 0 and fit.r_squared > 0.99
    assert np.all(np.diff(traj.V) <= 1e-6 * np.maximum(traj.V[:-1], 1e-300))
    assert np.all(np.isfinite(traj.coeffs))
    # exponential envelope of the functional at the fitted rate
    envelope = traj.V[0] * np.exp(-2.0 * 0.9 * fit.rate * traj.times)
    assert np.all(traj.V <= envelope * (1.0 + 1e-6))
    # guaranteed-rate floor from the certificate
    from clfpde.lyapunov import guaranteed_decay_rate
    floor = guaranteed_decay_rate(bundle.params, bundle.gains, bundle.shapes,
                                  bundle.eigsys)
    assert fit.rate >= 0.9 * floor


def test_open_loop_grows_at_unstable_rate(single_mode_bundle):
    bundle = single_mode_bundle
    w0, _ = pipeline.initial_state(bundle)
    cfg = SimConfig(n_modes=64, dt=1e-4, t_final=1.0, record_stride=10)
    traj = simulate_linear(bundle.eigsys, bundle.shapes, None, None, None,
                           w0, [0.0], cfg)
    fit = fit_decay_rate(traj)
    growth = -fit.rate
    assert abs(growth - PI ** 2) / PI ** 2 < 0.05
    assert traj.kind == "open_loop"


def test_sample_count_contract(single_mode_bundle):
    bundle = single_mode_bundle
    cfg = SimConfig(n_modes=16, dt=1e-3, t_final=1.0, record_stride=7)
    traj = simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                           bundle.params, bundle.law,
                           bundle.eigsys.phis[0], [0.1], cfg)
    steps = int(round(1.0 / 1e-3))
    assert traj.samples == steps // 7 + 1


def test_integrator_cross_check(single_mode_bundle):
    bundle = single_mode_bundle
    w0, y0 = pipeline.initial_state(bundle)
    a = SimConfig(n_modes=64, dt=1e-4, t_final=0.5, record_stride=50)
    b = SimConfig(n_modes=64, dt=1e-5, t_final=0.5, record_stride=500,
                  integrator="rk4")
    ta = simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                         bundle.params, bundle.law, w0, y0, a)
    tb = simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                         bundle.params, bundle.law, w0, y0, b)
    rel = abs(ta.norm_w[-1] - tb.norm_w[-1]) / tb.norm_w[-1]
    assert rel < 1e-4


def test_truncation_robustness(single_mode_bundle):
    bundle = single_mode_bundle
    w0, y0 = pipeline.initial_state(bundle)
    rates = []
    for n_modes in (48, 96):
        cfg = SimConfig(n_modes=n_modes, dt=1e-4, t_final=3.0, record_stride=10)
        traj = simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                               bundle.params, bundle.law, w0, y0, cfg)
        rates.append(fit_decay_rate(traj).rate)
    assert abs(rates[1] - rates[0]) / rates[1] < 0.02


def test_rk4_stability_guard(single_mode_bundle):
    bundle = single_mode_bundle
    cfg = SimConfig(n_modes=64, dt=1e-3, t_final=1.0, integrator="rk4")
    with pytest.raises(StepSizeTooLarge):
        simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                        bundle.params, bundle.law,
                        bundle.eigsys.phis[0], [0.0], cfg)


def test_instability_guard(single_mode_bundle):
    bundle = single_mode_bundle
    w0, _ = pipeline.initial_state(bundle)
    cfg = SimConfig(n_modes=32, dt=1e-4, t_final=3.0, record_stride=10)
    with pytest.raises(Instability):
        simulate_linear(bundle.eigsys, bundle.shapes, None, None, None,
                        w0, [0.0], cfg)


def test_w0_remainder_guard(single_mode_bundle):
    bundle = single_mode_bundle
    cfg = SimConfig(n_modes=8, dt=1e-3, t_final=1.0)
    w0 = np.sin(20.5 * PI * bundle.grid.x)        # beyond 8 modes
    with pytest.raises(RemainderTooLarge):
        simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                        bundle.params, bundle.law, w0, [0.0], cfg)


def test_energy_identity_along_trajectory(two_mode_bundle):
    # ||u||^2 = ||w||^2 + 2 sum <varphi_i, w> y_i + sum ||varphi_i||^2 y_i^2
    # under mutually orthogonal shapes, at every recorded sample
    bundle = two_mode_bundle
    F = NonlinearitySpec.make("sine_type", scale=0.29)
    w0, y0 = pipeline.initial_state(bundle)
    cfg = SimConfig(n_modes=32, dt=5e-4, t_final=0.5, record_stride=20)
    traj = simulate_semilinear(bundle.eigsys, bundle.shapes, bundle.model,
                               bundle.sl_design, F, w0, y0, cfg)
    eig = bundle.eigsys
    Phi = eig.phis[:32]
    Psi = bundle.shapes.varphis
    wr = eig.grid.weights * eig.r_samples
    coupling = (Phi * wr) @ Psi.T                 # <varphi_i, phi_n>
    for k in range(traj.samples):
        c, y = traj.coeffs[k], traj.y[k]
        u = c @ Phi + y @ Psi
        lhs = float((u * u) @ wr)
        cross = c @ coupling                       # <varphi_i, w>
        rhs = float(c @ c) + 2.0 * float(cross @ y) \
            + float(bundle.shapes.norms_sq @ (y * y))
        # scale by term magnitudes: ||u||^2 itself may cancel to near zero
        scale = float(c @ c) + 2.0 * float(np.abs(cross) @ np.abs(y)) \
            + float(bundle.shapes.norms_sq @ (y * y))
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, scale)


# -- semilinear simulation -------------------------------------------------------

def test_zero_nonlinearity_matches_linear_bitwise(two_mode_bundle):
    bundle = two_mode_bundle
    w0, y0 = pipeline.initial_state(bundle)
    cfg = SimConfig(n_modes=32, dt=5e-4, t_final=0.5, record_stride=10)
    lin = simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                          bundle.params, bundle.law, w0, y0, cfg)
    sem = simulate_semilinear(bundle.eigsys, bundle.shapes, bundle.model,
                              bundle.sl_design, NonlinearitySpec.make("zero"),
                              w0, y0, cfg)
    assert np.array_equal(lin.coeffs, sem.coeffs)
    assert np.array_equal(lin.y, sem.y)
    assert np.array_equal(lin.v, sem.v)


def test_semilinear_certified_decay(two_mode_bundle):
    bundle = two_mode_bundle
    traj = pipeline.simulate(bundle)
    assert traj.certified
    fit = fit_decay_rate(traj)
    assert fit.rate > 0 and fit.r_squared > 0.98
    assert traj.norm_w[-1] + traj.norm_y[-1] < traj.norm_w[0] + traj.norm_y[0]


def test_quadrature_budget_guard(two_mode_bundle):
    bundle = two_mode_bundle
    cfg = SimConfig(n_modes=16, dt=1e-6, t_final=10.0, max_steps=100_000)
    with pytest.raises(QuadratureBudgetExceeded):
        simulate_semilinear(bundle.eigsys, bundle.shapes, bundle.model,
                            bundle.sl_design, NonlinearitySpec.make("zero"),
                            bundle.eigsys.phis[0], [0.0, 0.0], cfg)


# -- trajectory CSV ----------------------------------------------------------------

def test_trajectory_csv_header_and_roundtrip(tmp_path, single_mode_bundle):
    bundle = single_mode_bundle
    cfg = SimConfig(n_modes=16, dt=1e-3, t_final=0.5, record_stride=5)
    traj = simulate_linear(bundle.eigsys, bundle.shapes, bundle.gains,
                           bundle.params, bundle.law,
                           bundle.eigsys.phis[0], [0.2], cfg)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    header, rows = read_trajectory_csv(path)
    assert header == ["t", "norm_w", "norm_y", "V", "U", "v_1", "vbar_1", "c_1"]
    assert header == trajectory_header(1, 1)
    assert rows.shape == (traj.samples, 8)
    assert np.allclose(rows[:, 0], traj.times)
    assert np.all(np.diff(rows[:, 0]) > 0)
