import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tidal_perturbation import full_solver as fs
from tidal_perturbation.errors import DomainError, SolverAbort
from tidal_perturbation.fields import FieldSampler, Harmonic, Scenario, Term, ThetaPeriodicField, default_scenario, vector
from tidal_perturbation.spectral import TorusGrid

from test_spectral import smooth_field

CALM = Scenario()


def random_state(grid, seed, amp=0.3):
    return amp * np.stack([smooth_field(grid, seed + i) for i in range(3)])


def rotation_exact(c, t, eps):
    # dn/dt = -(1/eps) n_perp rotates n clockwise at rate 1/eps
    a = -t / eps
    return np.array([np.cos(a) * c[0] - np.sin(a) * c[1], np.sin(a) * c[0] + np.cos(a) * c[1]])


def rotate(grid, c, eps, T, dt=None):
    u = np.zeros((3,) + grid.shape)
    u[1], u[2] = c
    if dt is None:
        dt = fs.cfl_dt(grid, eps, 0.0, np.hypot(*c))
    steps = int(np.ceil(T / dt))
    dt = T / steps
    stepper = fs.Stepper(grid, FieldSampler(CALM, grid), eps)
    for k in range(steps):
        u = stepper.step(u, k * dt, dt)
    return u, dt


def test_quiescent_state_is_steady():
    g = TorusGrid(16, 16)
    state = fs.State(np.full(g.shape, 0.4), np.zeros((2,) + g.shape))
    for form in ("symmetric", "direct"):
        d = fs.assemble_simplified_rhs(g, state, 0.3, 0.1, FieldSampler(CALM, g), form)
        assert np.max(np.abs(d.as_array())) <= 1e-14


def test_uniform_velocity_feels_only_coriolis():
    g = TorusGrid(16, 16)
    eps = 0.1
    c = np.array([0.7, -0.2])
    state = fs.State(np.zeros(g.shape), c[:, None, None] * np.ones((2,) + g.shape))
    d = fs.assemble_simplified_rhs(g, state, 0.0, eps, FieldSampler(CALM, g))
    assert np.max(np.abs(d.iota)) <= 1e-14
    assert np.allclose(d.n[0], c[1] / eps, atol=1e-13)
    assert np.allclose(d.n[1], -c[0] / eps, atol=1e-13)


def test_a0_entry_and_matrix_structure():
    g = TorusGrid(16, 16)
    eps = 0.2
    u = random_state(g, 5)
    f = fs.Forcing(FieldSampler(default_scenario(), g), eps).at(0.4)
    c = fs.coefficient_matrices(u, f, eps)
    assert np.array_equal(c.a0[0], 1.0 / (1.0 + eps * f["H"] + eps ** 2 * u[0]))
    assert np.all(c.a0[1:] == 1.0)
    assert np.array_equal(c.S1, c.S1.T) and np.array_equal(c.S2, c.S2.T)


def test_positivity_loss_aborts():
    g = TorusGrid(16, 16)
    eps = 0.5
    state = fs.State(np.full(g.shape, -10.0), np.zeros((2,) + g.shape))
    with pytest.raises(DomainError):
        fs.assemble_simplified_rhs(g, state, 0.0, eps, FieldSampler(CALM, g))
    with pytest.raises(SolverAbort) as info:
        fs.step_rk4(g, state, 1e-3, eps, FieldSampler(CALM, g))
    assert info.value.last_state is state


def test_zero_rhs_step_leaves_state_unchanged():
    g = TorusGrid(16, 16)
    state = fs.State(np.zeros(g.shape), np.zeros((2,) + g.shape), 0.5)
    out = fs.step_rk4(g, state, 0.01, 0.1, FieldSampler(CALM, g))
    assert np.array_equal(out.as_array(), state.as_array())
    assert out.time == pytest.approx(0.51)


def test_coriolis_rotation_oracle():
    g = TorusGrid(16, 16)
    eps, T = 0.1, 0.5
    c = np.array([0.6, 0.8])
    u, dt = rotate(g, c, eps, T, dt=0.002)
    err = np.max(np.abs(u[1:, 3, 5] - rotation_exact(c, T, eps))) / np.linalg.norm(c)
    assert err <= 1e-6
    assert np.max(np.abs(u[0])) == 0.0


def test_rk4_temporal_order():
    g = TorusGrid(8, 8)
    eps, T = 0.1, 1.0
    c = np.array([1.0, 0.0])
    errors = []
    for dt in (0.02, 0.01, 0.005):
        u, _ = rotate(g, c, eps, T, dt)
        errors.append(np.linalg.norm(u[1:, 0, 0] - rotation_exact(c, T, eps)))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(orders - 4) <= 0.3)


def test_cfl_law():
    g = TorusGrid(32, 64, Lx=2.0, Ly=2.0)
    assert fs.cfl_dt(g, 0.1, 1.5, 2.0, 0.5) == pytest.approx(0.5 * 0.1 * (2.0 / 64) / (1 + 1.5 + 0.2))


def test_run_with_zero_end_time():
    cfg = fs.FullRunConfig(eps=0.1, T=0.0, grid=TorusGrid(16, 16))
    r = fs.run(cfg)
    assert r.steps == 0 and r.times == [0.0]
    assert r.summary()["h4_sup"] == r.summary()["h4_initial"]


def test_run_config_validation():
    with pytest.raises(DomainError):
        fs.FullRunConfig(eps=1.0, T=1.0)
    with pytest.raises(DomainError):
        fs.FullRunConfig(eps=0.1, T=1.0, safety=1.5)
    with pytest.raises(DomainError):
        fs.FullRunConfig(eps=0.1, T=1.0, output_stride=0)


def test_run_records_diagnostics_and_is_deterministic():
    cfg = fs.FullRunConfig(eps=0.2, T=0.05, grid=TorusGrid(16, 16), output_stride=2)
    a, b = fs.run(cfg), fs.run(cfg)
    assert a.times[-1] == pytest.approx(0.05) and a.times[0] == 0.0
    assert fs.diagnostics_csv(a.diagnostics, fs.DIAGNOSTIC_COLUMNS) == fs.diagnostics_csv(
        b.diagnostics, fs.DIAGNOSTIC_COLUMNS)
    assert all(r["min_depth_factor"] > 0 for r in a.diagnostics)
    assert set(a.diagnostics[0]) == set(fs.DIAGNOSTIC_COLUMNS)


def test_observer_sees_every_step():
    seen = []
    cfg = fs.FullRunConfig(eps=0.2, T=0.02, grid=TorusGrid(16, 16))
    r = fs.run(cfg, observer=lambda t, u: seen.append(t))
    assert len(seen) == r.steps + 1
    assert seen[-1] == pytest.approx(0.02)


def test_initial_data_is_band_limited_and_partly_compressible():
    g = TorusGrid(32, 32)
    s = fs.InitialData().build(g)
    u = s.as_array()
    assert np.max(np.abs(g.dealias(u) - u)) <= 1e-14
    div = g.ddx(s.n[0]) + g.ddy(s.n[1])
    assert g.sobolev_norm(div) > 0.01 * g.sobolev_norm(s.n, 1)


def test_weighted_energy_drift_with_frozen_coefficients():
    # time-independent fields (no theta dependence), no forcing: energy drifts only slowly
    g = TorusGrid(32, 32)
    H = ThetaPeriodicField(1, (Harmonic(0, cos=vector([Term(a=0.2, kx=1)])),))
    M = ThetaPeriodicField(2, (Harmonic(0, cos=vector([Term(a=0.3)], [Term(a=0.1, ky=1)])),))
    cfg = fs.FullRunConfig(eps=0.1, T=0.1, grid=g, scenario=Scenario(M=M, H=H))
    r = fs.run(cfg)
    assert abs(r.energy[-1] - r.energy[0]) / r.energy[0] <= 0.1


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 31), eps=st.sampled_from([0.5, 0.1, 1 / 40]), t=st.floats(0, 2))
def test_symmetric_and_direct_forms_agree(seed, eps, t):
    g = TorusGrid(32, 32)
    u = random_state(g, seed)
    f = fs.Forcing(FieldSampler(default_scenario(), g), eps).at(t)
    a = fs.symmetric_rhs(g, u, f, eps, t)
    b = fs.direct_rhs(g, u, f, eps, t)
    assert np.max(np.abs(a - b)) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_coriolis_is_energy_neutral(seed):
    u = np.random.default_rng(seed).normal(size=(3, 8, 8))
    assert np.all(np.sum(fs.perp(u) * u, axis=0) == 0.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_singular_block_is_skew(seed):
    g = TorusGrid(32, 32)
    u = random_state(g, seed)
    du1, du2 = g.gradient(u)
    s = np.stack([du1[1] + du2[2], du1[0], du2[0]])
    assert abs(np.sum(s * u)) <= 1e-12 * max(1.0, np.sum(u * u))
