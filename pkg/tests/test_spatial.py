import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfewave import build_grid, assemble_stiffness
from mfewave.errors import InvalidArgument
from mfewave.spatial import (
    dirichlet_eigenvalues,
    grad,
    h1_inner,
    h1_seminorm,
    inner,
    l2_norm,
    laplacian,
)


def dense_stiffness(a, b, m, coeff):
    # straightforward loop over rows, independent of the vectorized assembly
    h = (b - a) / (m + 1)
    M = np.zeros((m, m))
    for i in range(m):
        cl = coeff(a + (i + 0.5) * h)
        cr = coeff(a + (i + 1.5) * h)
        M[i, i] = (cl + cr) / h**2
        if i > 0:
            M[i, i - 1] = -cl / h**2
        if i < m - 1:
            M[i, i + 1] = -cr / h**2
    return M


def test_grid_geometry():
    g = build_grid(9, 0.0, 1.0)
    assert g.h == pytest.approx(0.1)
    np.testing.assert_allclose(g.nodes, np.arange(1, 10) / 10)
    np.testing.assert_allclose(g.half_nodes, (np.arange(10) + 0.5) / 10)


@pytest.mark.parametrize("m,a,b", [(0, 0, 1), (-2, 0, 1), (2.5, 0, 1), (5, 1, 1), (5, 2, 1)])
def test_grid_rejects_bad_input(m, a, b):
    with pytest.raises(InvalidArgument):
        build_grid(m, a, b)


def test_stiffness_matches_dense_loop():
    coeff = lambda x: 1.0 + 0.5 * np.sin(3 * x)
    A = assemble_stiffness(build_grid(17, -1.0, 2.0), coeff)
    np.testing.assert_allclose(A.to_dense(), dense_stiffness(-1.0, 2.0, 17, coeff), rtol=1e-14)


def test_laplacian_spectrum_closed_form():
    g = build_grid(31)
    np.testing.assert_allclose(laplacian(g).eigvalsh(), dirichlet_eigenvalues(g), rtol=1e-11)
    # smallest eigenvalue approximates pi^2 to second order in h
    assert abs(dirichlet_eigenvalues(build_grid(999))[0] - np.pi**2) < 1e-5


def test_second_order_consistency():
    errs = []
    for m in (50, 100, 200):
        g = build_grid(m)
        c = lambda x: 2.0 + x
        u = np.sin(np.pi * g.nodes)
        exact = -(np.pi * np.cos(np.pi * g.nodes) - (2 + g.nodes) * np.pi**2 * np.sin(np.pi * g.nodes))
        errs.append(np.max(np.abs(assemble_stiffness(g, c).matvec(u) - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_matvec_complex_batched():
    g = build_grid(12)
    A = laplacian(g)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, 12)) + 1j * rng.standard_normal((3, 12))
    np.testing.assert_allclose(A.matvec(X), X @ A.to_dense().T, rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_gradient_inner_product_is_stiffness_form(m, seed):
    g = build_grid(m)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    A = laplacian(g)
    lhs = h1_inner(u, v, g.h)
    rhs = g.h * np.vdot(u, A.matvec(v))
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(rhs))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_norm_helpers(m, seed):
    g = build_grid(m)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(m)
    assert l2_norm(u, g.h) == pytest.approx(np.sqrt(inner(u, u, g.h).real))
    assert h1_seminorm(u, g.h) ** 2 == pytest.approx(h1_inner(u, u, g.h).real)
    assert grad(u, g.h).shape == (m + 1,)


def test_discrete_poincare():
    # ||v||^2 <= ||grad v||^2 / lambda_min for every v
    g = build_grid(60)
    lam = dirichlet_eigenvalues(g)[0]
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = rng.standard_normal(g.m)
        assert l2_norm(v, g.h) ** 2 <= h1_seminorm(v, g.h) ** 2 / lam * (1 + 1e-12)
