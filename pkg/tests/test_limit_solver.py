import inspect

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from tidal_perturbation import limit_solver as ls, manufactured as mf
from tidal_perturbation.errors import DomainError
from tidal_perturbation.fields import FieldSampler, Harmonic, Scenario, Term, ThetaPeriodicField, default_scenario, vector
from tidal_perturbation.full_solver import InitialData
from tidal_perturbation.spectral import TorusGrid

from test_spectral import smooth_field


def zero_coeffs(grid):
    z = np.zeros(grid.shape)
    return ls.AveragedCoeffs(M=np.zeros((2,) + grid.shape), grad_M=np.zeros((2, 2) + grid.shape),
                             H=z, grad_H=np.zeros((2,) + grid.shape), W=np.zeros((2,) + grid.shape), curl_W=z)


def projection_rhs(grid, q, c):
    """Vector form: -curl W + curl[(M.grad)N + (grad M)N] - grad H . N - div(I M), curl v = d1 v2 - d2 v1."""
    I = grid.helmholtz_inverse(q)
    g = grid.gradient(I)
    N = np.stack([-g[1], g[0]])
    gN = np.stack([grid.gradient(N[0]), grid.gradient(N[1])])  # gN[i, j] = d_j N_i
    M, gM = c.M, c.grad_M
    v = np.einsum("jxy,ijxy->ixy", M, gN) + np.einsum("ijxy,jxy->ixy", gM, N)
    curl_v = grid.ddx(v[1]) - grid.ddy(v[0])
    div_IM = grid.ddx(I * M[0]) + grid.ddy(I * M[1])
    return c.curl_W + curl_v - np.sum(c.grad_H * N, axis=0) - div_IM


def test_zero_initial_data():
    g = TorusGrid(16, 16)
    s = ls.init_from_perturbation(g, np.zeros(g.shape), np.zeros((2,) + g.shape), "curl")
    assert np.all(s.q == 0.0) and np.all(s.I == 0.0)


def test_single_mode_initial_data():
    g = TorusGrid(16, 16)
    X1, X2 = g.mesh
    iota = np.cos(X1 + X2)
    s = ls.init_from_perturbation(g, iota, np.zeros((2,) + g.shape))
    assert np.allclose(s.I, iota / 3, atol=1e-14)


def test_curl_variant_recovers_stream_function():
    # n = grad_perp psi = (-d2 psi, d1 psi) gives q0 = -Laplacian psi
    g = TorusGrid(32, 32)
    psi = smooth_field(g, 4)
    d = g.gradient(psi)
    s = ls.init_from_perturbation(g, np.zeros(g.shape), np.stack([-d[1], d[0]]), "curl")
    assert np.allclose(s.q, -g.laplacian(psi), atol=1e-12)
    with pytest.raises(DomainError):
        ls.init_from_perturbation(g, psi, np.stack([-d[1], d[0]]), "other")


def test_curl_variant_preserves_constraint_pairings():
    # for Psi = (phi, -d2 phi, d1 phi): <u, Psi> = <iota + d2 n1 - d1 n2, phi> = <q0, phi>
    g = TorusGrid(32, 32)
    X1, X2 = g.mesh
    u = InitialData().build(g).as_array()
    s = ls.init_from_perturbation(g, u[0], u[1:], "curl")
    limit = ls.stream_array(g, s)
    for phi in (np.cos(X1), np.sin(X1 - 2 * X2)):
        d = g.gradient(phi)
        psi = np.stack([phi, -d[1], d[0]])
        assert g.integrate(np.sum(u * psi, axis=0)) == pytest.approx(g.integrate(np.sum(limit * psi, axis=0)), abs=1e-12)


def test_zero_coefficients_give_zero_rhs():
    g = TorusGrid(16, 16)
    out = ls.assemble_limit_rhs(g, smooth_field(g, 1), zero_coeffs(g))
    assert np.max(np.abs(out)) <= 1e-15


def test_wind_curl_drives_q():
    g = TorusGrid(16, 16)
    X1, X2 = g.mesh
    W = ThetaPeriodicField(2, (Harmonic(0, cos=vector([Term(b=1.0, ky=1)], [])),))
    c = ls.AveragedCoeffs.from_sampler(FieldSampler(Scenario(W=W), g), 0.0)
    out = ls.assemble_limit_rhs(g, np.zeros(g.shape), c)
    assert np.allclose(out, np.cos(X2), atol=1e-14)


def test_oscillating_wind_averages_out():
    g = TorusGrid(16, 16)
    W = ThetaPeriodicField(2, (Harmonic(1, cos=vector([Term(b=1.0, ky=1)], [])),))
    c = ls.AveragedCoeffs.from_sampler(FieldSampler(Scenario(W=W), g), 0.3)
    assert np.max(np.abs(ls.assemble_limit_rhs(g, np.zeros(g.shape), c))) == 0.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), t=st.floats(0, 2))
def test_rhs_matches_vector_form(seed, t):
    g = TorusGrid(32, 32)
    q = g.dealias(smooth_field(g, seed))
    c = ls.AveragedCoeffs.from_sampler(FieldSampler(default_scenario(), g), t)
    a = ls.assemble_limit_rhs(g, q, c, dealias=False)
    b = projection_rhs(g, q, c)
    assert np.max(np.abs(a - b)) <= 1e-10 * max(1.0, np.max(np.abs(b)))


def test_symbolic_operator_matches_vector_form():
    t, x1, x2 = mf.t, mf.x1, mf.x2
    I = sp.sin(x1) * sp.cos(2 * x2)
    M = (sp.cos(x2), sp.sin(x1))
    H = sp.cos(x1 + x2)
    N = (-sp.diff(I, x2), sp.diff(I, x1))
    v = [sum(M[j] * sp.diff(N[i], (x1, x2)[j]) + sp.diff(M[i], (x1, x2)[j]) * N[j] for j in range(2))
         for i in range(2)]
    ref = (sp.diff(v[1], x1) - sp.diff(v[0], x2)
           - sp.diff(H, x1) * N[0] - sp.diff(H, x2) * N[1]
           - sp.diff(I * M[0], x1) - sp.diff(I * M[1], x2))
    assert sp.simplify(mf.limit_operator(I, M, H) - ref) == 0


def test_constant_tide_translates_q():
    # with constant M and no depth or wind, dq/dt = -M . grad q
    g = TorusGrid(32, 32)
    X1, X2 = g.mesh
    M = ThetaPeriodicField(2, (Harmonic(0, cos=vector([Term(a=0.5)], [Term(a=-0.25)])),))
    sampler = FieldSampler(Scenario(M=M), g)
    q0 = np.cos(X1 + 2 * X2) + 0.5 * np.sin(3 * X1)
    T, steps = 1.0, 100
    q = q0
    stepper = ls.LimitStepper(g, sampler)
    for k in range(steps):
        q = stepper.step(q, k * T / steps, T / steps)
    Y1, Y2 = X1 - 0.5 * T, X2 + 0.25 * T
    exact = np.cos(Y1 + 2 * Y2) + 0.5 * np.sin(3 * Y1)
    assert np.max(np.abs(q - exact)) <= 1e-8


def test_zero_forcing_conserves_q():
    g = TorusGrid(16, 16)
    s = ls.StreamState.from_q(g, g.dealias(smooth_field(g, 9)))
    out = ls.step(g, s, 0.1, FieldSampler(Scenario(), g))
    assert np.array_equal(out.q, s.q)
    assert out.time == pytest.approx(0.1)


def test_reconstructed_velocity():
    g = TorusGrid(16, 16)
    X1, X2 = g.mesh
    N = ls.reconstruct_N(g, np.sin(X1) * np.cos(X2))
    assert np.allclose(N[0], np.sin(X1) * np.sin(X2), atol=1e-14)
    assert np.allclose(N[1], np.cos(X1) * np.cos(X2), atol=1e-14)


def test_run_residuals_at_roundoff():
    cfg = ls.LimitRunConfig(T=0.1, grid=TorusGrid(32, 32), variant="curl")
    r = ls.run(cfg)
    s = r.summary()
    assert not r.aborted
    assert s["max_div_residual"] <= 1e-12
    assert s["max_constraint_residual"] <= 1e-12
    assert s["max_helmholtz_residual"] <= 1e-12
    assert ls.limit_csv(r) == ls.limit_csv(ls.run(cfg))


def test_run_config_validation():
    with pytest.raises(DomainError):
        ls.LimitRunConfig(T=-1.0)
    with pytest.raises(DomainError):
        ls.LimitRunConfig(T=1.0, variant="other")


def test_no_eps_in_interface():
    for obj in (ls.assemble_limit_rhs, ls.LimitStepper, ls.run, ls.step, ls.advective_dt, ls.LimitRunConfig):
        assert "eps" not in inspect.signature(obj).parameters


def test_manufactured_spatial_convergence():
    case = mf.default_case()
    e16 = mf.solve(case, TorusGrid(16, 16), 0.5, 200)
    e32 = mf.solve(case, TorusGrid(32, 32), 0.5, 200)
    assert e16 / e32 >= 1e2


def test_manufactured_temporal_order():
    case = mf.default_case()
    g = TorusGrid(32, 32)
    errors = [mf.solve(case, g, 1.0, s) for s in (10, 20, 40)]
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(orders - 4) <= 0.3)
