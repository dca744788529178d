import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clfpde.errors import KernelTruncationExceedsModes, RemainderTooLarge, TailBoundFailed
from clfpde.lyapunov import (
    build_feedback_law,
    coercivity_constants,
    coupling_table,
    feedback_controls,
    feedback_controls_modal,
    lyapunov_rate_and_bound,
    lyapunov_value,
    select_clf_params,
    transform_input,
    transform_state,
    weighted_modal_image,
    weight_inequality_margins,
)
from clfpde.presets import single_mode_kernel_closed_form, single_mode_tail_sum
from clfpde.spectral import project

from conftest import random_modal_state

PI = np.pi
S2 = np.sqrt(2.0)


# -- parameter selection -----------------------------------------------------

def test_quoted_inequality_instances(single_mode_bundle):
    # for the single-mode benchmark the weight inequalities reduce to
    # 4 sigma (25 p pi^2 + 4 q) >= 441 pi^2 (sigma - p pi^2 - q)^2 omega and
    # 128 p pi^2 sigma >= 441 pi^2 gamma (sigma - p pi^2 - q)^2, both of
    # which must hold with the safety-factor-2 margin on the first
    p, q, sigma = 1.0, -2.0 * PI ** 2, 1.0
    params = single_mode_bundle.params
    omega = float(params.omegas[0])
    gamma = params.gamma
    s = sigma - p * PI ** 2 - q
    lhs1 = 4.0 * sigma * (25.0 * p * PI ** 2 + 4.0 * q)
    rhs1 = 441.0 * PI ** 2 * s ** 2 * omega
    assert abs(lhs1 / rhs1 - 2.0) < 1e-9
    assert 128.0 * p * PI ** 2 * sigma >= 441.0 * PI ** 2 * gamma * s ** 2
    y_m, tail_m, trunc_m = weight_inequality_margins(
        params, single_mode_bundle.gains, single_mode_bundle.shapes,
        single_mode_bundle.eigsys)
    assert np.all(y_m > 0) and tail_m > 0 and trunc_m >= 0


def test_zero_L_gives_minimal_truncation(single_mode_bundle):
    assert np.all(single_mode_bundle.params.Ls == 0.0)
    assert single_mode_bundle.params.M == single_mode_bundle.model.N + 1


def test_truncation_index_against_closed_form(single_mode_bundle_L1):
    # p pi^4 ((M+1)^2 - (N+1)^2) >= 8 gamma L sum_{n>M} n^2/(25-4n^2)^2,
    # with the tail evaluated to machine convergence
    bundle = single_mode_bundle_L1
    M = bundle.params.M
    gamma = bundle.params.gamma
    L = float(bundle.params.Ls[0])
    assert L == 1.0

    def closed_form_holds(m):
        lhs = PI ** 4 * ((m + 1) ** 2 - 4.0)
        return lhs >= 8.0 * gamma * L * single_mode_tail_sum(m)

    assert M >= 2
    assert closed_form_holds(M)
    # near-minimality: the conservative tail bound may add a little slack
    first = next(m for m in range(2, 600) if closed_form_holds(m))
    assert M <= first + 2


def test_tail_bound_failure(single_mode_bundle):
    with pytest.raises(TailBoundFailed):
        select_clf_params(single_mode_bundle.gains, single_mode_bundle.shapes,
                          single_mode_bundle.eigsys, [1e12], m_max=16)


def test_omega_default_for_zero_gain(two_mode_bundle):
    from clfpde.reduced import GainDesign
    gains = two_mode_bundle.gains
    zero = GainDesign(np.zeros_like(gains.K), gains.R, gains.sigma,
                      gains.c1, gains.c2, gains.mode)
    params = select_clf_params(zero, two_mode_bundle.shapes,
                               two_mode_bundle.eigsys, [0.0, 0.0])
    assert np.allclose(params.omegas, gains.sigma * two_mode_bundle.shapes.mus)
    assert params.gamma > 0.0


# -- weighting operator ------------------------------------------------------

def test_weighted_modal_image_identity():
    c = np.array([0.3, -0.2, 0.9])
    assert np.allclose(weighted_modal_image(c, np.eye(3)), c)


def test_weighted_modal_image_matrix():
    R = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(weighted_modal_image(np.array([1.0, 0.0]), R), [2.0, 1.0])


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_weighting_operator_symmetry(two_mode_bundle, seed):
    # <Gw, u> = <Gu, w> by direct double evaluation on the grid
    eig = two_mode_bundle.eigsys
    R = two_mode_bundle.gains.R
    rng = np.random.default_rng(seed)
    w, _ = random_modal_state(eig, 2, rng)
    u, _ = random_modal_state(eig, 2, rng)
    cw, _ = project(w, eig, 2)
    cu, _ = project(u, eig, 2)
    Gw = weighted_modal_image(cw, R) @ eig.phis[:2]
    Gu = weighted_modal_image(cu, R) @ eig.phis[:2]
    lhs = eig.inner(Gw, u)
    rhs = eig.inner(Gu, w)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


# -- functional value --------------------------------------------------------

def test_value_trivial_zero(single_mode_bundle):
    eig = single_mode_bundle.eigsys
    V = lyapunov_value(np.zeros(eig.grid.n_points), [0.0],
                       single_mode_bundle.params, single_mode_bundle.gains, eig)
    assert V == 0.0


def test_value_first_mode(single_mode_bundle):
    eig = single_mode_bundle.eigsys
    V = lyapunov_value(eig.phis[0], [0.0], single_mode_bundle.params,
                       single_mode_bundle.gains, eig)
    assert abs(V - 0.5) < 1e-10


def test_coercivity_sandwich(single_mode_bundle):
    eig = single_mode_bundle.eigsys
    params, gains = single_mode_bundle.params, single_mode_bundle.gains
    lo, hi = coercivity_constants(params, gains)
    rng = np.random.default_rng(7)
    for _ in range(50):
        w, y = random_modal_state(eig, 1, rng)
        size = eig.norm_sq(w) + float(y @ y)
        V = lyapunov_value(w, y, params, gains, eig)
        tol = 1e-6 * max(1.0, abs(V))
        assert 0.5 * lo * size - tol <= V <= 0.5 * hi * size + tol


# -- kernels and feedback ----------------------------------------------------

def test_kernel_closed_form(single_mode_bundle_L1, grid):
    bundle = single_mode_bundle_L1
    k_ref = single_mode_kernel_closed_form(
        grid.x, 1.0, -2.0 * PI ** 2, 1.0, bundle.params.gamma, 1.0, bundle.params.M)
    scale = np.max(np.abs(k_ref))
    assert np.max(np.abs(bundle.law.kernels[0] - k_ref)) <= 1e-8 * scale


def test_zero_L_kernel_reduction(single_mode_bundle):
    # with L = 0 the kernel is exactly the reduced-model combination
    bundle = single_mode_bundle
    direct = bundle.gains.K @ bundle.eigsys.phis[:1]
    assert np.max(np.abs(bundle.law.kernels - direct)) <= 1e-10


def test_kernel_dual_path(single_mode_bundle_L1):
    bundle = single_mode_bundle_L1
    eig = bundle.eigsys
    coupling = coupling_table(bundle.shapes, eig, eig.K)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        w, y = random_modal_state(eig, 1, rng)
        v_quad = feedback_controls(bundle.law, w, y, eig)
        c, _ = project(w, eig, eig.K)
        v_modal = feedback_controls_modal(c, y, bundle.gains, bundle.params, coupling)
        worst = max(worst, float(np.max(np.abs(v_quad - v_modal))))
    assert worst <= 1e-8


def test_feedback_trivials(single_mode_bundle):
    bundle = single_mode_bundle
    eig = bundle.eigsys
    v = feedback_controls(bundle.law, np.zeros(eig.grid.n_points), [0.0], eig)
    assert np.all(v == 0.0)
    # L = 0: controls are independent of y
    w, _ = random_modal_state(eig, 1, np.random.default_rng(0))
    v1 = feedback_controls(bundle.law, w, [0.0], eig)
    v2 = feedback_controls(bundle.law, w, [5.0], eig)
    assert np.allclose(v1, v2)


def test_feedback_coefficient_pickoff(single_mode_bundle):
    # evaluating the law on the first eigenfunction picks off the gain entry
    bundle = single_mode_bundle
    v = feedback_controls(bundle.law, bundle.eigsys.phis[0], [0.0], bundle.eigsys)
    assert abs(v[0] - bundle.gains.K[0, 0]) < 1e-8 * abs(bundle.gains.K[0, 0])


def test_kernel_truncation_guard(single_mode_bundle):
    from clfpde.lyapunov import CLFParams
    params = single_mode_bundle.params
    bad = CLFParams(params.omegas, params.gamma, params.sigma,
                    single_mode_bundle.eigsys.K + 1, params.Ls)
    with pytest.raises(KernelTruncationExceedsModes):
        build_feedback_law(single_mode_bundle.gains, bad,
                           single_mode_bundle.shapes, single_mode_bundle.eigsys)


# -- transformations ----------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_state_transform_roundtrip(two_mode_bundle, seed):
    shapes = two_mode_bundle.shapes
    rng = np.random.default_rng(seed)
    u, y = random_modal_state(two_mode_bundle.eigsys, 2, rng)
    w = transform_state(u, y, shapes, "to_w")
    back = transform_state(w, y, shapes, "to_u")
    assert np.max(np.abs(back - u)) <= 1e-12 * max(1.0, np.max(np.abs(u)))


def test_state_transform_zero_y(two_mode_bundle):
    u, _ = random_modal_state(two_mode_bundle.eigsys, 2, np.random.default_rng(1))
    assert np.array_equal(transform_state(u, [0.0, 0.0], two_mode_bundle.shapes, "to_w"), u)


def test_modal_relation_of_transformed_state(two_mode_bundle, grid):
    # c_n = integral of sin(n pi x) u - 4 (-1)^n n y_1 / ((25-4n^2) pi)
    #       - 4 (-1)^n n y_2 / ((49-4n^2) pi), in the plain-sine convention
    bundle = two_mode_bundle
    rng = np.random.default_rng(11)
    u, y = random_modal_state(bundle.eigsys, 2, rng)
    w = transform_state(u, y, bundle.shapes, "to_w")
    c, _ = project(w, bundle.eigsys, 2)
    for n in (1, 2):
        sin_n = np.sin(n * PI * grid.x)
        integral = float((sin_n * u) @ grid.weights)
        expected = integral \
            - 4.0 * (-1.0) ** n * n / ((25.0 - 4.0 * n ** 2) * PI) * y[0] \
            - 4.0 * (-1.0) ** n * n / ((49.0 - 4.0 * n ** 2) * PI) * y[1]
        assert abs(c[n - 1] / S2 - expected) < 1e-9


def test_input_transform(two_mode_bundle):
    mus = two_mode_bundle.shapes.mus
    assert np.all(transform_input([0.0, 0.0], [0.0, 0.0], mus, "to_vbar") == 0.0)
    v = np.array([0.4, -0.7])
    y = np.array([1.1, 0.2])
    vbar = transform_input(v, y, mus, "to_vbar")
    assert np.allclose(vbar, -mus * y + v)
    assert abs(mus[0] - 5.0 * PI ** 2 / 4.0) < 1e-12   # y_1' = -(5 pi^2/4) y_1 + v_1
    assert np.allclose(transform_input(vbar, y, mus, "to_v"), v)


# -- derivative of the functional ---------------------------------------------

def test_rate_trivial_zero(single_mode_bundle):
    bundle = single_mode_bundle
    vdot, bound = lyapunov_rate_and_bound(
        np.zeros(bundle.grid.n_points), [0.0], bundle.params, bundle.gains,
        bundle.law, bundle.shapes, bundle.eigsys)
    assert vdot == 0.0 and bound == 0.0


@pytest.mark.parametrize("fixture", ["single_mode_bundle", "single_mode_bundle_L1"])
def test_dissipation_on_random_states(fixture, request):
    bundle = request.getfixturevalue(fixture)
    eig = bundle.eigsys
    rng = np.random.default_rng(23)
    for _ in range(50):
        w, y = random_modal_state(eig, 1, rng)
        vdot, bound = lyapunov_rate_and_bound(
            w, y, bundle.params, bundle.gains, bundle.law, bundle.shapes, eig)
        assert vdot <= bound + 1e-6 * (1.0 + abs(bound))


def test_tail_state_diagonal_rate(single_mode_bundle):
    # states spanning only modes beyond the cutoff with v = 0: the rate is
    # the pure diagonal tail sum, below -gamma lambda_{N+1} ||w||^2
    bundle = single_mode_bundle
    eig = bundle.eigsys
    N = bundle.model.N
    rng = np.random.default_rng(5)
    amps = rng.standard_normal(20) / np.arange(1, 21) ** 2
    w = amps @ eig.phis[N:N + 20]
    vdot, _ = lyapunov_rate_and_bound(
        w, [0.0], bundle.params, bundle.gains, bundle.law, bundle.shapes, eig,
        v=np.zeros(1))
    c, _ = project(w, eig, eig.K)
    gamma = bundle.params.gamma
    direct = -gamma * float((eig.lambdas[N:] * c[N:] ** 2).sum())
    assert abs(vdot - direct) <= 1e-9 * max(1.0, abs(direct))
    assert vdot <= -gamma * eig.lambdas[N] * eig.norm_sq(w) * (1.0 - 1e-9)


def test_remainder_guard(single_mode_bundle):
    bundle = single_mode_bundle
    x = bundle.grid.x
    w = np.sin(150.5 * PI * x)      # far beyond the computed span
    with pytest.raises(RemainderTooLarge):
        lyapunov_rate_and_bound(w, [0.0], bundle.params, bundle.gains,
                                bundle.law, bundle.shapes, bundle.eigsys)
