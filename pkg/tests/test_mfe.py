import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from mfewave import (
    MfeConfig,
    SourceSpec,
    assemble_block,
    build_grid,
    coefficient_norms,
    cosine_modulation,
    direct_solve,
    mfe_invariant,
    mfe_solve,
    reconstruct,
    remainder_norm,
)
from mfewave.errors import InvalidArgument
from mfewave.mfe import matching_indices, mfe_invariant_cosine, reconstruct_trajectory
from mfewave.modulation import ModulationSpec, Profile, constant
from mfewave.spatial import l2_norm

# ||z_k(2)|| for k = -2..2 with m = 12, eps = 0.1, rho = 0.3, smooth source,
# from a dense DOP853 integration of the harmonic system (see harmonic_oracle).
ORACLE_NORMS_T2 = np.array([0.00015746, 0.00092802, 0.01076001, 0.00092802, 0.00015746])


def harmonic_oracle(g, eps, rho, K, T):
    """Dense integration of z_k'' + 2i k/eps z_k' - (k/eps)^2 z_k + L z_k + rho L (z_{k-1} + z_{k+1}) = delta_k0 f."""
    m, h = g.m, g.h
    L = (2 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)) / h**2
    ks = np.arange(-K, K + 1)
    nk = len(ks)

    def rhs(t, y):
        z = y[: nk * m].reshape(nk, m)
        w = y[nk * m:].reshape(nk, m)
        x = g.nodes
        f = np.exp(-100 * (x - 0.5) ** 2 - 10 * (t - 1) ** 2) - np.exp(-100 * (x - 0.5) ** 2 - 10 * (t - 1.1) ** 2)
        acc = np.empty_like(z)
        for i, k in enumerate(ks):
            r = -(2j * k / eps) * w[i] + (k / eps) ** 2 * z[i] - L @ z[i]
            if i > 0:
                r -= rho * L @ z[i - 1]
            if i < nk - 1:
                r -= rho * L @ z[i + 1]
            acc[i] = r + (f if k == 0 else 0)
        return np.concatenate([w.ravel(), acc.ravel()])

    sol = solve_ivp(rhs, (0, T), np.zeros(2 * nk * m, complex), method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[: nk * m, -1].reshape(nk, m)


@pytest.fixture(scope="module")
def oracle():
    g = build_grid(12)
    return g, harmonic_oracle(g, 0.1, 0.3, 2, 2.0)


def test_oracle_frozen_norms(oracle):
    g, z = oracle
    np.testing.assert_allclose(l2_norm(z, g.h), ORACLE_NORMS_T2, rtol=1e-4)


def test_trapezoidal_second_order(oracle):
    g, zT = oracle
    spec = cosine_modulation(0.1, 0.3)
    errs = []
    for N in (128, 256, 512):
        tr = mfe_solve(g, spec, SourceSpec(), MfeConfig(2), 2.0 / N, N)
        errs.append(np.sqrt(np.sum(l2_norm(tr.z[-1] - zT, g.h) ** 2)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.1), orders


def test_printed_variant_first_order(oracle):
    g, zT = oracle
    spec = cosine_modulation(0.1, 0.3)
    errs = []
    for N in (256, 512, 1024):
        tr = mfe_solve(g, spec, SourceSpec(), MfeConfig(2), 2.0 / N, N, scheme="printed")
        errs.append(np.sqrt(np.sum(l2_norm(tr.z[-1] - zT, g.h) ** 2)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 1) < 0.15), orders


def test_block_operator_matches_dense_kron():
    g = build_grid(6)
    spec = ModulationSpec(0.2, 0.15, mu0=Profile("affine", (1, 0.5)), muhat=(constant(1.0), Profile("affine", (0.2, 0.1))))
    cfg = MfeConfig(1, 2)
    s = 3.0 + 4.0j
    op = assemble_block(g, spec, cfg, s)
    from mfewave.spatial import assemble_stiffness

    A0 = assemble_stiffness(g, spec.mu0).to_dense()
    A1 = assemble_stiffness(g, spec.muhat[0]).to_dense()
    A2 = assemble_stiffness(g, spec.muhat[1]).to_dense()
    ks = np.arange(-2, 3)
    n = len(ks)
    M = np.kron(np.diag((s + 1j * ks / 0.2) ** 2), np.eye(6)) + np.kron(np.eye(n), A0)
    M += 0.15 * np.kron(np.eye(n, k=1) + np.eye(n, k=-1), A1) + 0.15 * np.kron(np.eye(n, k=2) + np.eye(n, k=-2), A2)
    np.testing.assert_allclose(op.matrix.toarray(), M, rtol=1e-13)
    rhs = np.random.default_rng(0).standard_normal((n, 6)) + 0j
    np.testing.assert_allclose(op.solve(rhs).ravel(), np.linalg.solve(M, rhs.ravel()), rtol=1e-10)
    np.testing.assert_allclose(op.apply(op.solve(rhs)), rhs, atol=1e-10)


def test_single_factorization():
    g = build_grid(10)
    tr = mfe_solve(g, cosine_modulation(0.05, 0.2), SourceSpec(), MfeConfig(2), 0.05, 40)
    assert tr.factorizations == 1
    assert tr.z.shape == (41, 5, 10)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.0, 0.45), st.integers(1, 4))
def test_conjugate_symmetry_every_step_full_system(eps, rho, K):
    # the full complex system is not symmetric by construction
    g = build_grid(15)
    tr = mfe_solve(g, cosine_modulation(eps, rho), SourceSpec(), MfeConfig(K), 0.05, 60, symmetric=False)
    for n in range(len(tr)):
        z = tr.z[n]
        scale = np.max(l2_norm(z, g.h))
        assert np.max(l2_norm(z[::-1] - np.conj(z), g.h)) <= 1e-12 * scale + 1e-300


def test_symmetric_and_full_paths_agree():
    g = build_grid(30)
    spec = cosine_modulation(0.05, 0.3)
    a = mfe_solve(g, spec, SourceSpec(), MfeConfig(2), 0.02, 120)
    b = mfe_solve(g, spec, SourceSpec(), MfeConfig(2), 0.02, 120, symmetric=False)
    np.testing.assert_allclose(a.z, b.z, rtol=0, atol=1e-11 * np.max(np.abs(b.z)))
    np.testing.assert_allclose(a.w, b.w, rtol=0, atol=1e-11 * np.max(np.abs(b.w)))
    assert np.all(a.z[:, ::-1] == np.conj(a.z))


def test_reduced_operator_solves_full_system():
    from mfewave.mfe import BlockOperator, SymmetricBlockOperator, coupled_stiffness

    g = build_grid(9)
    spec = cosine_modulation(0.1, 0.2)
    cfg = MfeConfig(2)
    ks = cfg.ks
    shifts = (3.0 + 1j * ks / 0.1) ** 2
    T = coupled_stiffness(g, spec, cfg)
    full = BlockOperator(shifts, T, g.m)
    red = SymmetricBlockOperator(shifts, T, g.m)
    rng = np.random.default_rng(2)
    r = rng.standard_normal((5, 9)) + 1j * rng.standard_normal((5, 9))
    r = (r + np.conj(r[::-1])) / 2
    np.testing.assert_allclose(red.solve(r), full.solve(r), rtol=1e-12, atol=1e-14)
    with pytest.raises(InvalidArgument):
        SymmetricBlockOperator((1.0 + 1j * ks) ** 2 + 1j, T, g.m)


def test_asymmetric_initial_data():
    g = build_grid(10)
    spec = cosine_modulation(0.1, 0.2)
    z0 = np.zeros((3, 10), complex)
    z0[2] = np.sin(np.pi * g.nodes)
    init = (z0, np.zeros_like(z0))
    tr = mfe_solve(g, spec, SourceSpec(kind="zero"), MfeConfig(1), 0.05, 10, initial=init)
    assert np.max(np.abs(tr.z[-1, 0])) < np.max(np.abs(tr.z[-1, 2]))
    with pytest.raises(InvalidArgument):
        mfe_solve(g, spec, SourceSpec(kind="zero"), MfeConfig(1), 0.05, 10, initial=init, symmetric=True)


def test_invariant_scale_bounds_value():
    g = build_grid(20)
    spec = cosine_modulation(0.1, 0.3)
    tr = mfe_solve(g, spec, SourceSpec(), MfeConfig(2), 0.02, 100)
    val, scale = mfe_invariant(tr[-1], g, spec, return_scale=True)
    assert abs(val) <= scale and val == mfe_invariant(tr[-1], g, spec)


def test_reconstruction_is_real():
    g = build_grid(20)
    tr = mfe_solve(g, cosine_modulation(0.05, 0.3), SourceSpec(), MfeConfig(3), 0.02, 150)
    u, imag = reconstruct_trajectory(tr, return_imag=True)
    assert np.max(imag) <= 1e-12 * np.max(np.abs(u))
    u1, im1 = reconstruct(tr[75], return_imag=True)
    np.testing.assert_allclose(u1, u[75], rtol=1e-12, atol=1e-18)


def test_static_medium_reduces_to_direct():
    g = build_grid(30)
    spec = cosine_modulation(0.05, 0.0)
    tr = mfe_solve(g, spec, SourceSpec(), MfeConfig(3), 0.02, 150)
    d = direct_solve(g, spec, SourceSpec(), 0.02, 150)
    np.testing.assert_allclose(tr.component(0).real, d.u, rtol=0, atol=1e-10 * np.max(np.abs(d.u)))
    assert np.all(tr.z[:, tr.ks != 0] == 0)


def test_invariant_forms_agree_and_are_conserved():
    g = build_grid(25)
    spec = cosine_modulation(0.1, 0.25)
    cfg = MfeConfig(2)
    rng = np.random.default_rng(5)
    z0 = rng.standard_normal((5, 25)) * np.sin(np.pi * g.nodes)
    z0 = z0 + z0[::-1]
    tr = mfe_solve(g, spec, SourceSpec(kind="zero"), cfg, 0.01, 200, initial=(z0 + 0j, np.zeros((5, 25), complex)))
    vals = [mfe_invariant(tr[n], g, spec) for n in range(0, 201, 20)]
    assert mfe_invariant_cosine(tr[100], g, spec) == pytest.approx(vals[5], rel=1e-12)
    assert np.max(np.abs(np.array(vals) - vals[0])) <= 1e-11 * abs(vals[0])


def test_invariant_needs_velocity():
    g = build_grid(8)
    tr = mfe_solve(g, cosine_modulation(0.1, 0.1), SourceSpec(), MfeConfig(1), 0.1, 5, store_velocity=False)
    with pytest.raises(InvalidArgument):
        mfe_invariant(tr[2], g, cosine_modulation(0.1, 0.1))


def test_remainder_decreases_with_truncation():
    g = build_grid(40)
    spec = cosine_modulation(0.1, 0.3)
    T, N = 3.0, 1200
    ref = direct_solve(g, spec, SourceSpec(), T / N, N)
    rem = [remainder_norm(mfe_solve(g, spec, SourceSpec(), MfeConfig(K), T / 300, 300), ref, spec, g) for K in (1, 2, 3)]
    assert rem[0] > rem[1] > rem[2]


def test_coefficient_norms_shape_and_static_case():
    g = build_grid(20)
    tr = mfe_solve(g, cosine_modulation(0.1, 0.0), SourceSpec(), MfeConfig(4), 0.05, 60)
    c = coefficient_norms(tr, g)
    assert c.shape == (5,)
    assert c[0] > 0 and np.all(c[1:] == 0)


def test_matching_indices():
    fine = np.arange(0, 17) * 0.25
    coarse = np.arange(0, 5) * 1.0
    np.testing.assert_array_equal(matching_indices(fine, coarse), [0, 4, 8, 12, 16])
    with pytest.raises(InvalidArgument):
        matching_indices(fine, np.array([0.1]))


@pytest.mark.parametrize("kw", [dict(tau=0.0), dict(N=0), dict(stride=3), dict(scheme="leapfrog")])
def test_mfe_solve_validation(kw):
    args = dict(tau=0.1, N=10, stride=1, scheme="trapezoidal")
    args.update(kw)
    with pytest.raises(InvalidArgument):
        mfe_solve(build_grid(5), cosine_modulation(0.1, 0.1), SourceSpec(), MfeConfig(1), **args)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        MfeConfig(0)
    with pytest.raises(InvalidArgument):
        MfeConfig(2, 0)
    assert MfeConfig(2, 2).span == 4
