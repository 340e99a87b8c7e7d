import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghecheck import simulator as sim


def small(**kw):
    base = dict(N_x=12, N_y=12, N_z=12, dt=0.01, T=0.1)
    base.update(kw)
    return sim.GridConfig(**base).validate()


def test_config_text_round_trip(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# demo\nN_x = 16\nN_y = 16\nN_z = 16\ndt = 0.005\nb = -0.25\nmonitor = H1, H2\n")
    cfg = sim.GridConfig.from_file(p)
    assert (cfg.N_x, cfg.dt, cfg.b, cfg.monitor) == (16, 0.005, -0.25, ("H1", "H2"))


@pytest.mark.parametrize("text", ["N_x = 4", "dt = 0", "periodic = false", "colour = red", "N_x 16",
                                  "monitor = H9", "b = 100"])
def test_config_validation(text):
    with pytest.raises(sim.ConfigError):
        sim.GridConfig.from_text(text)


def test_steady_state_initial_data():
    cfg = small(eps=0.0)
    st_ = sim.init_state(cfg)
    assert not st_.w.any() and not st_.v.any()
    assert sim.integral_value("H1", sim.Grid(cfg), st_, cfg.b) == 0.0


def test_default_initial_data_floor():
    cfg = sim.GridConfig().validate()
    g = sim.Grid(cfg)
    st_ = sim.init_state(cfg, g)
    m = sim.check_floor(g, st_, cfg.floor)
    assert 1 - 10 * cfg.eps < m <= 1.0 + 1e-12


def test_floor_violation_rejected():
    with pytest.raises(sim.FloorViolation):
        sim.init_state(small(eps=0.2, floor=0.99))


@given(st.integers(0, 2 ** 16))
def test_grid_derivatives_commute(seed):
    cfg = small(seed=seed)
    g = sim.Grid(cfg)
    f = sim.init_state(cfg, g).w
    assert np.abs(g.d(g.d(f, 1), 2) - g.d(g.d(f, 2), 1)).max() < 1e-12


def test_derivative_is_fourth_order():
    errs = []
    for n in (16, 32):
        g = sim.Grid(small(N_x=n, N_y=n, N_z=n))
        errs.append(np.abs(g.d(np.sin(g.x), 0) - np.cos(g.x)).max())
    assert math.log2(errs[0] / errs[1]) > 3.8


def test_richardson_step_consistency():
    cfg = small(eps=0.05)
    g = sim.Grid(cfg)
    s0 = sim.init_state(cfg, g)
    diffs = []
    for dt in (0.02, 0.01):
        one = sim.step(g, s0, dt, cfg.b)
        two = sim.step(g, sim.step(g, s0, dt / 2, cfg.b), dt / 2, cfg.b)
        diffs.append(np.abs(one.v - two.v).max())
    assert math.log2(diffs[0] / diffs[1]) > 4.5


def test_mirror_symmetry():
    cfg = small(eps=0.05, b=0.7)
    g = sim.Grid(cfg)
    s0 = sim.init_state(cfg, g)
    mirror = lambda f: np.roll(f[::-1], 1, axis=0)
    m0 = sim.FieldState(mirror(s0.w), mirror(s0.v))
    a, b = s0, m0
    for _ in range(5):
        a = sim.step(g, a, cfg.dt, cfg.b)
        b = sim.step(g, b, cfg.dt, -cfg.b)
    assert np.abs(mirror(a.w) - b.w).max() < 1e-13
    assert np.abs(mirror(a.v) - b.v).max() < 1e-13


def test_run_outputs(tmp_path):
    rep = sim.run_and_monitor(small(sample_every=2))
    csv_path, json_path = rep.write(tmp_path)
    lines = csv_path.read_text().splitlines()
    head = lines[0].split(",")
    assert head[:7] == ["time", "H1", "H2", "H5", "H6", "H7", "H8"] and "min_uyz" in head
    times = [float(r.split(",")[0]) for r in lines[1:]]
    assert times == sorted(times) and len(times) == 6
    summary = json.loads(json_path.read_text())
    assert set(summary["max_drift"]) == set(sim.MONITORED)


def test_zero_run_has_zero_drift():
    rep = sim.run_and_monitor(small(eps=0.0))
    assert all(d == 0.0 for d in rep.max_drift.values())


def test_time_error_shrinks_sixteenfold():
    base = small(T=0.2, eps=0.05)
    st0 = sim.init_state(base)
    finals = {}
    for dt in (0.04, 0.02, 0.0025):
        rep = sim.run_and_monitor(sim.GridConfig(**{**base.__dict__, "dt": dt}), st0)
        finals[dt] = rep.final_state.v
    e1 = np.abs(finals[0.04] - finals[0.0025]).max()
    e2 = np.abs(finals[0.02] - finals[0.0025]).max()
    assert 12 < e1 / e2 < 20


def test_abort_is_reported():
    cfg = small(eps=0.05, floor=0.95, T=0.05, dt=0.01)
    g = sim.Grid(cfg)
    st_ = sim.FieldState(np.zeros(g.shape), 3.0 * np.sin(g.y + g.z))
    rep = sim.run_and_monitor(cfg, st_)
    assert rep.aborted


def test_hcd_is_a_control_with_visible_drift():
    rep = sim.run_and_monitor(sim.GridConfig(N_x=16, N_y=16, N_z=16, T=0.5, monitor=("H1", "Hcd")))
    assert rep.max_drift["Hcd"] > 1e3 * rep.max_drift["H1"]


def test_w_solve_of_zero_is_zero():
    cfg = small()
    g = sim.Grid(cfg)
    st_ = sim.init_state(cfg, g)
    out = sim.solve_w(g, st_, np.zeros(g.shape))
    assert not out.sigma.any()


def test_w_solve_reports_incompatible_data():
    cfg = small()
    g = sim.Grid(cfg)
    st_ = sim.init_state(cfg, g)
    out = sim.nonlocal_flow_component(g, st_, 0.5)
    assert np.isfinite(out.sigma).all()
    assert out.ill_conditioned


def test_unknown_density():
    cfg = small()
    with pytest.raises(sim.ConfigError):
        sim.integral_value("H4", sim.Grid(cfg), sim.init_state(cfg), 0.5)
