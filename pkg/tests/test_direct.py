import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mfewave import SourceSpec, build_grid, cosine_modulation, direct_solve, energy_identity_residual, energy_of
from mfewave.direct import energy_series
from mfewave.errors import InvalidArgument, ModulationPositivityError
from mfewave.modulation import ModulationSpec, Profile
from mfewave.spatial import dirichlet_eigenvalues, l2_norm

# Values of u(x, 2) for m = 20, eps = 0.1, rho = 0.3 and the smooth balanced
# source, from a dense DOP853 integration with rtol 1e-12 (see dense_oracle).
ORACLE_NORM_T2 = 0.011562893685929835
ORACLE_MID_T2 = -0.018697728821991277


def dense_oracle(g, eps, rho, T):
    m, h = g.m, g.h
    L = (2 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)) / h**2

    def rhs(t, y):
        u, v = y[:m], y[m:]
        x = g.nodes
        f = np.exp(-100 * (x - 0.5) ** 2 - 10 * (t - 1) ** 2) - np.exp(-100 * (x - 0.5) ** 2 - 10 * (t - 1.1) ** 2)
        return np.concatenate([v, f - (1 + 2 * rho * np.cos(t / eps)) * (L @ u)])

    sol = solve_ivp(rhs, (0, T), np.zeros(2 * m), method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[:m, -1]


def test_dense_oracle_reproduces_frozen_values():
    g = build_grid(20)
    u = dense_oracle(g, 0.1, 0.3, 2.0)
    assert l2_norm(u, g.h) == pytest.approx(ORACLE_NORM_T2, rel=1e-8)
    assert u[9] == pytest.approx(ORACLE_MID_T2, rel=1e-8)


def test_second_order_against_dense_oracle():
    g = build_grid(20)
    spec = cosine_modulation(0.1, 0.3)
    u_ref = dense_oracle(g, 0.1, 0.3, 2.0)
    errs = [l2_norm(direct_solve(g, spec, SourceSpec(), 2.0 / N, N).u[-1] - u_ref, g.h) for N in (128, 256, 512)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9), orders
    assert errs[-1] < 3e-6


def test_single_mode_scalar_recurrence():
    # rho = 0 and f = phi_1 g(t): the scheme reduces to a scalar trapezoidal recurrence
    g = build_grid(30)
    phi = np.sin(np.pi * g.nodes)
    lam = dirichlet_eigenvalues(g)[0]
    gt = lambda t: np.sin(3 * t)
    src = SourceSpec(kind="custom_samples", func=lambda x, t: np.sin(np.pi * x) * gt(t))
    tau, N = 0.01, 300
    d = direct_solve(g, ModulationSpec(0.1, 0.0), src, tau, N)
    y, v = 0.0, 0.0
    M = np.array([[1.0, -tau / 2], [tau / 2 * lam, 1.0]])
    for n in range(N):
        b = np.array([y + tau / 2 * v, v - tau / 2 * lam * y + tau / 2 * (gt(n * tau) + gt((n + 1) * tau))])
        y, v = np.linalg.solve(M, b)
    np.testing.assert_allclose(d.u[-1], y * phi, atol=1e-13)
    np.testing.assert_allclose(d.v[-1], v * phi, atol=1e-11)


def test_static_energy_conserved_after_source():
    g = build_grid(50)
    spec = ModulationSpec(0.1, 0.0)
    d = direct_solve(g, spec, SourceSpec(), 0.01, 400)
    E = energy_series(d, spec, g)
    tail = E[300:]
    assert np.max(np.abs(tail - tail[0])) <= 1e-12 * tail[0]


def test_energy_identity_residual_second_order():
    g = build_grid(60)
    spec = cosine_modulation(0.1, 0.3)
    res = [energy_identity_residual(direct_solve(g, spec, SourceSpec(), 3.0 / N, N), spec, SourceSpec(), g)
           for N in (256, 512, 1024)]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders >= 1.9), orders


def test_energy_of_matches_formula():
    g = build_grid(10)
    spec = cosine_modulation(0.1, 0.2)
    d = direct_solve(g, spec, SourceSpec(), 0.05, 30)
    st = d[-1]
    gu = np.diff(np.pad(st.u, 1)) / g.h
    mu = 1 + 0.4 * np.cos(st.t / 0.1)
    assert energy_of(st, spec, g) == pytest.approx(0.5 * g.h * (np.sum(st.v**2) + mu * np.sum(gu**2)))


def test_stride_and_factorization_reuse():
    g = build_grid(25)
    eps = 0.1
    tau = 2 * np.pi * eps / 16
    spec = cosine_modulation(eps, 0.2)
    a = direct_solve(g, spec, SourceSpec(), tau, 64)
    b = direct_solve(g, spec, SourceSpec(), tau, 64, stride=4, reuse_factorization=True)
    np.testing.assert_allclose(b.u, a.u[::4], rtol=1e-10, atol=1e-16)
    assert a.factorizations == 64
    assert b.factorizations < 64
    assert len(b) == 17 and b.states[-1].t == pytest.approx(64 * tau)


def test_nonpositive_modulation_reports_step():
    g = build_grid(10)
    with pytest.raises(ModulationPositivityError) as info:
        direct_solve(g, cosine_modulation(0.1, 0.6), SourceSpec(), 0.05, 40)
    assert info.value.step is not None and info.value.step >= 1


@pytest.mark.parametrize("tau,N,stride", [(0.0, 10, 1), (0.1, 0, 1), (0.1, 10, 3), (0.1, 10.5, 1)])
def test_time_grid_validation(tau, N, stride):
    with pytest.raises(InvalidArgument):
        direct_solve(build_grid(5), cosine_modulation(0.1, 0.1), SourceSpec(), tau, N, stride)


def test_variable_coefficients_run():
    g = build_grid(30)
    spec = ModulationSpec(0.05, 0.1, mu0=Profile("affine", (1.0, 0.5)), muhat=(Profile("bump", (0.5, 0.5, 0.5, 0.2)),))
    d = direct_solve(g, spec, SourceSpec(), 0.01, 200)
    assert np.all(np.isfinite(d.u)) and np.max(np.abs(d.u)) > 0
