import numpy as np
import pytest

from aquaplan.control import (DRAINING, FILLING, Dynamics, MpcConfig,
                              OutputVector, ReactiveConfig, ReactiveState,
                              build_mesh, lowpass, mpc_step, predict,
                              reactive_step, select_mesh_point, stage_cost)
from aquaplan.errors import ConfigError
from aquaplan.network import (ControlVector, PlantParams,
                              build_example_plant)


def brute_force_mpc(dyn, x, yc, fd_arr, phi_arr, cin_arr, cfg):
    """Independent exhaustive enumeration used as the mpc_step oracle."""
    mesh = build_mesh(dyn.model, cfg)
    best_idx, best_cost = -1, np.inf
    fb_idx, fb_viol = -1, np.inf
    for k in range(mesh.shape[0]):
        r = predict(dyn, x, yc, mesh[k], fd_arr, phi_arr, cin_arr, cfg)
        if r.feasible and r.cost < best_cost:
            best_idx, best_cost = k, r.cost
        if r.worst_violation < fb_viol:
            fb_idx, fb_viol = k, r.worst_violation
    return best_idx if best_idx >= 0 else fb_idx


@pytest.fixture(scope="module")
def dyn(model):
    return Dynamics(model=model, dt=2.5)


def horizon_inputs(cfg, fd=3472.0, phi=0.28, cin=22.0):
    n = cfg.horizon
    return (np.full(n, fd), np.full(n, phi), np.full(n, cin))


def test_surrogate_quadratic_argmin():
    # cost (u - 3)^2 over the 1-D mesh {0..5} -> u* = 3
    mesh = np.arange(6.0)
    costs = (mesh - 3.0) ** 2
    d = select_mesh_point(costs, np.zeros(6))
    assert d.index == 3 and d.feasible


def test_all_infeasible_fallback_flagged():
    costs = np.array([1.0, 0.5, 2.0])
    viols = np.array([3.0, 2.0, 4.0])
    d = select_mesh_point(costs, viols)
    assert not d.feasible
    assert d.index == 1
    assert d.worst_violation == 2.0


def test_tie_break_first_index():
    costs = np.array([2.0, 1.0, 1.0, 5.0])
    d = select_mesh_point(costs, np.zeros(4))
    assert d.index == 1


def test_stage_cost_weights():
    out = OutputVector(y_c_err=2.0, y_d_err=5.0, y_e=50.0,
                       y_p=np.array([86.0]))
    cfg = MpcConfig(lam_c=0.25, lam_d=0.04, lam_e=4.0e-4)
    assert stage_cost(out, cfg) == pytest.approx(1.0 + 1.0 + 1.0)


def test_mesh_is_full_cartesian(model):
    cfg = MpcConfig(resolution=(2, 3, 2, 2, 2))
    mesh = build_mesh(model, cfg)
    assert mesh.shape == (48, 5)
    # dimension 0 slowest: first block holds p_b at its lower bound
    assert np.all(mesh[:24, 0] == model.control_lower[0])
    assert np.all(mesh[24:, 0] == model.control_upper[0])


def test_mpc_step_matches_brute_force(dyn):
    cfg = MpcConfig(resolution=3)
    rng = np.random.default_rng(23)
    for _ in range(12):
        x = rng.uniform(79.0, 93.0, size=2)
        yc = rng.uniform(6.0, 22.0)
        fd, phi, cin = horizon_inputs(cfg, fd=rng.uniform(2000.0, 5000.0),
                                      phi=rng.uniform(0.2, 0.36))
        u, decision = mpc_step(dyn, x, yc, fd, phi, cin, cfg)
        oracle = brute_force_mpc(dyn, x, yc, fd, phi, cin, cfg)
        assert decision.index == oracle
        mesh = build_mesh(dyn.model, cfg)
        np.testing.assert_array_equal(u.as_array(), mesh[decision.index])


def test_feasibility_soundness(dyn):
    cfg = MpcConfig()
    fd, phi, cin = horizon_inputs(cfg)
    u, decision = mpc_step(dyn, np.array([86.0, 86.0]), 22.0, fd, phi, cin,
                           cfg)
    assert decision.feasible
    r = predict(dyn, np.array([86.0, 86.0]), 22.0, u, fd, phi, cin, cfg)
    assert r.worst_violation <= 0.0


def test_weight_scaling_argmin_invariance(dyn):
    base = MpcConfig(resolution=3)
    fd, phi, cin = horizon_inputs(base)
    x = np.array([84.0, 88.0])
    _, ref = mpc_step(dyn, x, 15.0, fd, phi, cin, base)
    for c in (0.25, 4.0, 1024.0):
        scaled = MpcConfig(resolution=3, lam_c=base.lam_c * c,
                           lam_d=base.lam_d * c, lam_e=base.lam_e * c)
        _, d = mpc_step(dyn, x, 15.0, fd, phi, cin, scaled)
        assert d.index == ref.index


def test_infeasible_bounds_fall_back(dyn):
    cfg = MpcConfig(x_lo=10.0, x_hi=11.0, yp_lo=10.0, yp_hi=11.0)
    fd, phi, cin = horizon_inputs(cfg)
    _, decision = mpc_step(dyn, np.array([86.0, 86.0]), 22.0, fd, phi, cin,
                           cfg)
    assert not decision.feasible
    assert decision.worst_violation > 0.0


def test_predict_horizon_outputs(dyn):
    cfg = MpcConfig()
    fd, phi, cin = horizon_inputs(cfg)
    u = ControlVector(30.0, 0.0, 0.0, 0.0, 0.0)
    r = predict(dyn, np.array([86.0, 86.0]), 22.0, u, fd, phi, cin, cfg)
    assert r.y_d.shape == (cfg.horizon,)
    assert r.x.shape == (cfg.horizon, 2)
    assert r.cost > 0.0


def test_lowpass_identity_and_midpoint():
    model = build_example_plant(PlantParams(p_b_min=0.0))
    prev = ControlVector(0.0, 0.0, 0.0, 0.0, 0.0)
    target = ControlVector(2.0, 0.0, 0.0, 0.0, 0.0)
    assert lowpass(prev, target, 1.0, model) == target
    mixed = lowpass(prev, target, 0.5, model)
    assert mixed.p_b == pytest.approx(1.0)


def test_lowpass_geometric_convergence():
    model = build_example_plant(PlantParams(p_b_min=0.0))
    target = ControlVector(32.0, 0.0, 0.0, 0.0, 0.0)
    u = ControlVector(0.0, 0.0, 0.0, 0.0, 0.0)
    gaps = []
    for _ in range(6):
        u = lowpass(u, target, 0.25, model)
        gaps.append(32.0 - u.p_b)
    ratios = [b / a for a, b in zip(gaps, gaps[1:])]
    assert all(r == pytest.approx(0.75) for r in ratios)


def test_lowpass_stays_in_bounds(model):
    prev = ControlVector(40.0, 2000.0, 2000.0, 60.0, 30.0)
    target = ControlVector(40.0, 2000.0, 2000.0, 60.0, 30.0)
    u = lowpass(prev, target, 0.7, model)
    assert np.all(u.as_array() <= model.control_upper)
    with pytest.raises(ConfigError):
        lowpass(prev, target, 0.0, model)


def test_mpc_config_validation():
    with pytest.raises(ConfigError):
        MpcConfig(lam_c=-1.0)
    with pytest.raises(ConfigError):
        MpcConfig(horizon=0)
    with pytest.raises(ConfigError):
        MpcConfig(resolution=(5, 5))
    with pytest.raises(ConfigError):
        MpcConfig(resolution=1)
    with pytest.raises(ConfigError):
        MpcConfig(alpha=1.5)
    with pytest.raises(ConfigError):
        MpcConfig(x_lo=94.0, x_hi=78.0)


def test_reactive_hysteresis_switching(model):
    cfg = ReactiveConfig()
    st = ReactiveState(modes=(FILLING, FILLING))
    u, st = reactive_step(st, [93.0, 80.0], 86.0, cfg, 2.5, model)
    assert st.modes == (DRAINING, FILLING)
    assert u.f_p1 == 0.0 and u.r_1 > 0.0       # tank 1 drains
    assert u.f_p2 > 0.0 and u.r_2 == 0.0       # tank 2 keeps filling
    u, st = reactive_step(st, [79.0, 80.0], 86.0, cfg, 2.5, model)
    assert st.modes == (FILLING, FILLING)


def test_reactive_no_chatter_between_thresholds(model):
    cfg = ReactiveConfig()
    st = ReactiveState(modes=(DRAINING, FILLING))
    for x1 in (92.0, 88.0, 80.0):  # inside the hysteresis band
        _, st = reactive_step(st, [x1, 85.0], 86.0, cfg, 2.5, model)
        assert st.modes[0] == DRAINING


def test_reactive_pi_at_equilibrium(model):
    cfg = ReactiveConfig()
    u, st = reactive_step(ReactiveState(), [86.0, 86.0], cfg.yd_sp, cfg,
                          2.5, model)
    # zero error, zero integrator: PI output clamps to the lower pump bound
    assert u.p_b == model.control_lower[0]
    assert st.integrator == 0.0


def test_reactive_integrator_ramps(model):
    cfg = ReactiveConfig()
    st = ReactiveState()
    pbs = []
    for _ in range(60):
        u, st = reactive_step(st, [86.0, 86.0], cfg.yd_sp - 4.0, cfg, 2.5,
                              model)
        pbs.append(u.p_b)
    assert st.integrator == pytest.approx(4.0 * 2.5 * 60)
    assert pbs == sorted(pbs) and pbs[-1] > pbs[0]


def test_reactive_integrator_clamped(model):
    cfg = ReactiveConfig()
    st = ReactiveState()
    for _ in range(10000):
        u, st = reactive_step(st, [86.0, 86.0], 0.0, cfg, 2.5, model)
    assert u.p_b == model.control_upper[0]
    assert st.integrator <= model.control_upper[0] / cfg.k_i


def test_reactive_config_validation():
    with pytest.raises(ConfigError):
        ReactiveConfig(low_threshold=93.0, high_threshold=79.0)
    with pytest.raises(ConfigError):
        ReactiveConfig(k_p=-0.1)
    with pytest.raises(ConfigError):
        ReactiveConfig(valve_open_frac=0.0)
