"""Laplace-domain solves, resolvent and decay diagnostics, convolution quadrature."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import FactorizationError, InvalidArgument
from .mfe import (
    MfeConfig,
    MfeTrajectory,
    _config_for,
    assemble_block,
    coupled_stiffness,
)
from .modulation import cosine_modulation, source_samples
from .spatial import h1_seminorm, inner, l2_norm, laplacian


# --- Helmholtz resolvent --------------------------------------------------

def helmholtz_apply(grid, s, g, A=None):
    """w = (s^2 I + A)^{-1} g with A the discrete Dirichlet Laplacian (-d2/dx2)."""
    if A is None:
        A = laplacian(grid)
    ab = np.zeros((3, grid.m), dtype=complex)
    ab[0, 1:] = A.off
    ab[1] = A.diag + s**2
    ab[2, :-1] = A.off
    try:
        w = la.solve_banded((1, 1), ab, np.asarray(g, dtype=complex))
    except la.LinAlgError as exc:
        raise FactorizationError(f"Helmholtz operator singular at s={s!r}", s=s) from exc
    if not np.all(np.isfinite(w)):
        raise FactorizationError(f"Helmholtz operator singular at s={s!r}", s=s)
    return w


def resolvent_bounds(grid, s, g, A=None):
    """Sampled (value, bound) pairs of the Helmholtz resolvent estimates.

    ``g`` is used both as an L2 and an H1_0 argument.  Keys ``R_*`` refer to
    R(s) g, keys ``RA_*`` to R(s) A g.
    """
    if A is None:
        A = laplacian(grid)
    h = grid.h
    re, mod = s.real, abs(s)
    g_l2, g_h1 = l2_norm(g, h), h1_seminorm(g, h)
    w = helmholtz_apply(grid, s, g, A)
    wa = helmholtz_apply(grid, s, A.matvec(g), A)
    return {
        "R_L2_L2": (l2_norm(w, h), g_l2 / (mod * re)),
        "R_H1_L2": (h1_seminorm(w, h), g_l2 / (np.sqrt(2.0) * re)),
        "RA_H1_H1": (h1_seminorm(wa, h), mod / re * g_h1),
        "RA_L2_H1": (l2_norm(wa, h), g_h1 / (np.sqrt(2.0) * re)),
        "RA_L2_L2": (l2_norm(wa, h), mod / re * g_l2),
    }


# --- coupled Laplace-domain system ----------------------------------------

@dataclass
class LaplaceSolveResult:
    s: complex
    ks: np.ndarray
    zhat: np.ndarray
    h1_norms: np.ndarray
    D_norm: float
    grad_norm: float
    f_norm: float
    admissible: bool
    bound_ok: bool

    @property
    def energy(self):
        return self.D_norm**2 + self.grad_norm**2

    @property
    def bound(self):
        return 4.0 / self.s.real**2 * self.f_norm**2


def well_posedness_threshold(spec):
    return 4.0 * spec.rho / spec.epsilon


def laplace_solve(grid, spec, cfg, s, fhat, op=None):
    """Solve (D_K(s)^2 + T_A) zhat = (delta_k0 fhat) and check the a priori bound.

    ``bound_ok`` reports ||D_K(s) zhat||^2 + ||grad zhat||^2 <= 4/(Re s)^2 ||fhat||^2;
    it is only meaningful (and only guaranteed) when ``admissible``, i.e.
    Re s > 4 rho / eps.
    """
    cfg = _config_for(spec, cfg)
    s = complex(s)
    if op is None:
        op = assemble_block(grid, spec, cfg, s)
    h = grid.h
    ks = cfg.ks
    rhs = np.zeros((cfg.n_k, grid.m), dtype=complex)
    rhs[cfg.span] = fhat
    zhat = op.solve(rhs)
    h1 = h1_seminorm(zhat, h)
    dz = np.abs(s + 1j * ks / spec.epsilon) * l2_norm(zhat, h)
    D_norm = float(np.sqrt(np.sum(dz**2)))
    grad_norm = float(np.sqrt(np.sum(h1**2)))
    f_norm = float(l2_norm(fhat, h))
    admissible = s.real > well_posedness_threshold(spec)
    energy = D_norm**2 + grad_norm**2
    bound = 4.0 / s.real**2 * f_norm**2 if s.real > 0 else np.inf
    bound_ok = bool(admissible and energy <= bound * (1 + 1e-12))
    return LaplaceSolveResult(s, ks, zhat, h1, D_norm, grad_norm, f_norm, admissible, bound_ok)


def coercivity_terms(grid, spec, cfg, s, z, op=None):
    """(Re <D_K(s) z, (D_K^2 + T_A) z>, 1/2 Re s (||D_K z||^2 + ||grad z||^2))."""
    cfg = _config_for(spec, cfg)
    if op is None:
        op = assemble_block(grid, spec, cfg, s)
    h = grid.h
    Dz = (s + 1j * cfg.ks / spec.epsilon)[:, None] * z
    lhs = np.sum(inner(Dz, op.apply(z), h)).real
    rhs = 0.5 * s.real * (np.sum(l2_norm(Dz, h) ** 2) + np.sum(h1_seminorm(z, h) ** 2))
    return float(lhs), float(rhs)


@dataclass
class DecayReport:
    s: complex
    ks: np.ndarray
    h1_norms: np.ndarray
    bounds: np.ndarray
    ok: np.ndarray
    admissible: bool

    def rows(self):
        return list(zip(self.ks.tolist(), self.h1_norms.tolist(), self.bounds.tolist(), self.ok.tolist()))


def decay_bound_factor(spec, K, s):
    return 2.0 * K * spec.rho / (spec.epsilon * s.real) + 2.0 * spec.rho * abs(s) / s.real


def decay_diagnostic(grid, spec, cfg, s, fhat, op=None):
    """||zhat_k||_1 next to (factor)^|k| * 2/Re s * ||fhat|| for every k."""
    cfg = _config_for(spec, cfg)
    s = complex(s)
    res = laplace_solve(grid, spec, cfg, s, fhat, op=op)
    q = decay_bound_factor(spec, cfg.K, s)
    bounds = q ** np.abs(res.ks) * 2.0 / s.real * res.f_norm
    ok = res.h1_norms <= bounds * (1 + 1e-12)
    return DecayReport(s, res.ks, res.h1_norms, bounds, ok, res.admissible)


def neumann_k1_defect(grid, epsilon, rho, s, fhat):
    """max over +-1 of ||zhat_{+-1} - rho R(s +- i/eps) Lap R(s) fhat|| for K = 1.

    Lap = -A is the discrete Laplacian, so the leading term reads
    -rho R(s +- i/eps) A R(s) fhat.
    """
    spec = cosine_modulation(epsilon, rho)
    res = laplace_solve(grid, spec, MfeConfig(1), s, fhat)
    A = laplacian(grid)
    r0 = helmholtz_apply(grid, s, fhat, A)
    Ar0 = A.matvec(r0)
    out = 0.0
    for sign, row in ((-1, 0), (1, 2)):
        lead = -rho * helmholtz_apply(grid, s + sign * 1j / epsilon, Ar0, A)
        out = max(out, float(l2_norm(res.zhat[row] - lead, grid.h)))
    return out


# --- convolution quadrature -----------------------------------------------

def delta_trapezoidal(zeta):
    return 2.0 * (1.0 - zeta) / (1.0 + zeta)


def default_radius(N):
    return np.finfo(float).eps ** (1.0 / (2 * N + 2))


def contour(tau, N, lam=None):
    """Radius, scaled roots of unity zeta_l and Laplace points delta(zeta_l)/tau."""
    if lam is None:
        lam = default_radius(N)
    if not 0 < lam < 1:
        raise InvalidArgument(f"contour radius must lie in (0, 1), got {lam}")
    zeta = lam * np.exp(-2j * np.pi * np.arange(N + 1) / (N + 1))
    return lam, zeta, delta_trapezoidal(zeta) / tau


def _act(sample, x):
    if callable(sample):
        return sample(x)
    if np.ndim(sample) == 0:
        return sample * x
    return np.asarray(sample) @ x


@dataclass
class CqWeights:
    """Trapezoidal CQ weights of an operator family, kept as contour samples.

    The weights are never formed explicitly for operator-valued symbols;
    ``apply`` realizes sum_j omega_j g_{n-j} through the scaled FFT.
    """

    tau: float
    N: int
    lam: float
    zeta: np.ndarray
    s_points: np.ndarray
    samples: list

    def weights(self):
        """Explicit omega_0..omega_N (scalar symbols only)."""
        vals = np.asarray(self.samples, dtype=complex)
        if vals.ndim != 1:
            raise InvalidArgument("explicit weights are only available for scalar symbols")
        return self.lam ** -np.arange(self.N + 1) * np.fft.ifft(vals)

    def apply(self, g):
        """(K(d_t^tau) g)_n for n = 0..N from samples g[n] (axis 0)."""
        g = np.asarray(g)
        if g.shape[0] != self.N + 1:
            raise InvalidArgument(f"expected {self.N + 1} time samples, got {g.shape[0]}")
        scale = (self.lam ** np.arange(self.N + 1)).reshape((-1,) + (1,) * (g.ndim - 1))
        G = np.fft.fft(scale * g, axis=0)
        U = np.stack([_act(self.samples[l], G[l]) for l in range(self.N + 1)])
        return np.fft.ifft(U, axis=0) / scale


def cq_weights(symbol, tau, N, lam=None):
    """Sample ``symbol(s)`` at the N+1 contour points s_l = delta(zeta_l)/tau.

    ``symbol`` may return a scalar, a matrix, or a callable acting on vectors.
    """
    lam, zeta, s_pts = contour(tau, N, lam)
    samples = []
    for s in s_pts:
        try:
            samples.append(symbol(s))
        except (ZeroDivisionError, FloatingPointError) as exc:
            raise FactorizationError(f"symbol has a pole at s={s!r}", s=s) from exc
    return CqWeights(tau, N, lam, zeta, s_pts, samples)


def cq_solve(grid, spec, src, cfg, tau, N, lam=None, workers=1, order=None):
    """Coefficient trajectory through independent Laplace-domain solves.

    The block system is solved at every contour point; the source transform is
    taken from the trapezoidal source averages, which makes the result the
    same sequence as :func:`mfe_solve` up to contour-quadrature error.
    ``order`` permutes the processing order of contour points (results are
    always placed by index, so the output does not depend on it).
    """
    cfg = _config_for(spec, cfg)
    lam, zeta, s_pts = contour(tau, N, lam)
    n_k, m, k0 = cfg.n_k, grid.m, cfg.span
    times = np.arange(N + 1) * tau
    f = source_samples(src, grid, times)
    scale = lam ** np.arange(N + 1)
    F = np.fft.fft(scale[:, None] * f, axis=0)
    F -= np.outer(1.0 / (1.0 + zeta), f[0])
    stiffness = coupled_stiffness(grid, spec, cfg)

    Zhat = np.zeros((N + 1, n_k, m), dtype=complex)

    def solve_point(l):
        op = assemble_block(grid, spec, cfg, s_pts[l], stiffness=stiffness)
        rhs = np.zeros((n_k, m), dtype=complex)
        rhs[k0] = F[l]
        Zhat[l] = op.solve(rhs)

    idx = range(N + 1) if order is None else [int(i) for i in order]
    if sorted(idx) != list(range(N + 1)):
        raise InvalidArgument("order must be a permutation of the contour indices")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(solve_point, idx))
    else:
        for l in idx:
            solve_point(l)

    Z = np.fft.ifft(Zhat, axis=0) / scale[:, None, None]
    W = np.fft.ifft(s_pts[:, None, None] * Zhat, axis=0) / scale[:, None, None]
    return MfeTrajectory(tau, N, 1, times, cfg.ks, spec.epsilon, Z, W,
                         factorizations=N + 1, scheme="cq")
