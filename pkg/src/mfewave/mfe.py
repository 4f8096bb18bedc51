"""Coupled constant-coefficient system for the modulated Fourier coefficients.

Harmonics are indexed ``k = -JK..JK``; arrays carry them along axis ``-2`` in
increasing order, so ``z[..., k + JK, :]`` is the coefficient of
``exp(i k t / eps)``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationError, InvalidArgument
from .modulation import source_eval
from .spatial import assemble_stiffness, h1_inner, inner, l2_norm


@dataclass(frozen=True)
class MfeConfig:
    K: int
    J: int = 1

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise InvalidArgument(f"truncation index K must be a positive integer, got {self.K}")
        if int(self.J) != self.J or self.J < 1:
            raise InvalidArgument(f"number of modulation harmonics J must be positive, got {self.J}")

    @property
    def span(self):
        return self.J * self.K

    @property
    def ks(self):
        return np.arange(-self.span, self.span + 1)

    @property
    def n_k(self):
        return 2 * self.span + 1


def _config_for(spec, cfg):
    if cfg.J != spec.J:
        cfg = MfeConfig(cfg.K, spec.J)
    return cfg


@dataclass
class MfeState:
    z: np.ndarray
    w: Optional[np.ndarray]
    t: float
    ks: np.ndarray
    epsilon: float

    def component(self, k):
        return self.z[k + self.ks[-1]]


@dataclass
class MfeTrajectory:
    tau: float
    N: int
    stride: int
    times: np.ndarray
    ks: np.ndarray
    epsilon: float
    z: np.ndarray
    w: Optional[np.ndarray] = None
    factorizations: int = 0
    scheme: str = "trapezoidal"

    def __len__(self):
        return len(self.times)

    def __getitem__(self, n):
        w = None if self.w is None else self.w[n]
        return MfeState(self.z[n], w, float(self.times[n]), self.ks, self.epsilon)

    def component(self, k):
        return self.z[:, k + self.ks[-1]]


def coupled_stiffness(grid, spec, cfg):
    """Sparse T_A: A0 on the block diagonal, rho * Ahat_j on block diagonals +-j."""
    cfg = _config_for(spec, cfg)
    n_k = cfg.n_k
    A0 = assemble_stiffness(grid, spec.mu0).to_sparse()
    T = sp.kron(sp.identity(n_k, format="csc"), A0, format="csc")
    if spec.rho != 0:
        for j, mh in enumerate(spec.muhat, start=1):
            if j >= n_k:
                break
            Aj = assemble_stiffness(grid, mh).to_sparse()
            shift = sp.eye(n_k, k=j, format="csc") + sp.eye(n_k, k=-j, format="csc")
            T = T + spec.rho * sp.kron(shift, Aj, format="csc")
    return T.tocsc()


class BlockOperator:
    """``diag(shift_k) (x) I + T_A`` with its sparse LU computed on construction.

    For the Laplace-domain system the shifts are ``(s + i k / eps)^2``.
    """

    def __init__(self, shifts, stiffness, m, s=None, ks=None):
        self.shifts = np.asarray(shifts, dtype=complex)
        self.n_k = len(self.shifts)
        self.m = m
        self.s = s
        self.ks = ks
        self.stiffness = stiffness
        D = sp.kron(sp.diags(self.shifts), sp.identity(m), format="csc")
        self.matrix = (D + stiffness.astype(complex)).tocsc()
        try:
            self._lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise FactorizationError(f"block operator is singular at s={s!r}", s=s) from exc
        self.factorizations = 1

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, y):
        y = np.asarray(y)
        return (self.matrix @ y.reshape(-1)).reshape(y.shape)

    def apply_stiffness(self, y):
        y = np.asarray(y)
        return (self.stiffness @ y.reshape(-1)).reshape(y.shape)

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=complex)
        x = self._lu.solve(rhs.reshape(-1))
        if not np.all(np.isfinite(x)):
            raise FactorizationError(f"non-finite block solve at s={self.s!r}", s=self.s)
        return x.reshape(rhs.shape)


class SymmetricBlockOperator(BlockOperator):
    """Block operator restricted to conjugate-symmetric vectors.

    When the shifts satisfy ``shift_{-k} = conj(shift_k)`` and the stiffness
    is real, the operator maps vectors with ``z_{-k} = conj(z_k)`` to vectors
    of the same kind.  Such a vector is fixed by ``x_k = Re z_k`` (k >= 0)
    and ``y_k = Im z_k`` (k >= 1); on these (2JK+1) m real unknowns the
    system is real and square.  Solutions are mirrored to negative k, so
    they are conjugate-symmetric by construction.
    """

    def __init__(self, shifts, stiffness, m, s=None, ks=None):
        shifts = np.asarray(shifts, dtype=complex)
        if not np.allclose(shifts[::-1], np.conj(shifts), rtol=1e-14, atol=0):
            raise InvalidArgument("shifts are not conjugate-symmetric in k")
        self.shifts = shifts
        self.n_k = len(shifts)
        self.span = (self.n_k - 1) // 2
        self.m = m
        self.s = s
        self.ks = ks
        self.stiffness = stiffness
        D = sp.kron(sp.diags(shifts), sp.identity(m), format="csc")
        self.matrix = (D + stiffness.astype(complex)).tocsc()
        n_k, S = self.n_k, self.span
        # reduced real unknowns -> (Re z, Im z)
        E = sp.lil_matrix((2 * n_k, n_k))
        for i in range(n_k):
            k = i - S
            E[i, abs(k)] = 1.0
            if k != 0:
                E[n_k + i, S + abs(k)] = np.sign(k)
        # equations kept: real parts for k >= 0, imaginary parts for k >= 1
        Sel = sp.lil_matrix((n_k, 2 * n_k))
        for r in range(S + 1):
            Sel[r, S + r] = 1.0
        for r in range(S + 1, n_k):
            Sel[r, n_k + r] = 1.0
        I = sp.identity(m, format="csc")
        Mr, Mi = self.matrix.real, self.matrix.imag
        R = sp.bmat([[Mr, -Mi], [Mi, Mr]], format="csc")
        self.reduced = (sp.kron(Sel.tocsc(), I) @ R @ sp.kron(E.tocsc(), I)).tocsc()
        try:
            self._lu = spla.splu(self.reduced)
        except RuntimeError as exc:
            raise FactorizationError(f"block operator is singular at s={s!r}", s=s) from exc
        self.factorizations = 1

    def solve(self, rhs):
        """Solve for a conjugate-symmetric right-hand side of shape (2JK+1, m)."""
        rhs = np.asarray(rhs, dtype=complex)
        S = self.span
        b = np.concatenate([rhs[S:].real.ravel(), rhs[S + 1:].imag.ravel()])
        v = self._lu.solve(b)
        if not np.all(np.isfinite(v)):
            raise FactorizationError(f"non-finite block solve at s={self.s!r}", s=self.s)
        x = v[: (S + 1) * self.m].reshape(S + 1, self.m)
        y = v[(S + 1) * self.m:].reshape(S, self.m)
        z = np.empty((self.n_k, self.m), dtype=complex)
        z[S] = x[0]
        z[S + 1:] = x[1:] + 1j * y
        z[:S] = np.conj(z[S + 1:])[::-1]
        return z


def is_conjugate_symmetric(z, rtol=0.0):
    z = np.asarray(z)
    return bool(np.all(np.abs(z[::-1] - np.conj(z)) <= rtol * np.max(np.abs(z), initial=0.0)))


def assemble_block(grid, spec, cfg, s, stiffness=None):
    """Factorized ``D_K(s)^2 + T_A`` on the (2JK+1) m unknowns."""
    cfg = _config_for(spec, cfg)
    ks = cfg.ks
    if stiffness is None:
        stiffness = coupled_stiffness(grid, spec, cfg)
    shifts = (s + 1j * ks / spec.epsilon) ** 2
    return BlockOperator(shifts, stiffness, grid.m, s=s, ks=ks)


SCHEMES = ("trapezoidal", "printed")


def mfe_solve(grid, spec, src, cfg, tau, N, stride=1, store_velocity=True,
              scheme="trapezoidal", initial=None, symmetric=None):
    """Time-march the coupled system with one factorization for all steps.

    ``scheme="trapezoidal"`` is the trapezoidal rule on the first-order form
    (z, w = z'), whose two-step form is the CQ discretization generated by
    delta(zeta) = 2(1 - zeta)/(1 + zeta).  The step matrix is exactly the
    Laplace-domain block operator at ``s = 2 / tau``.

    ``scheme="printed"`` is the variant with a second difference at t_n and
    all other terms averaged over (t_n, t_{n+1}); it is first-order accurate
    and kept for comparison only.

    ``initial`` optionally gives ``(z0, w0)`` of shape (2JK+1, m); by default
    all coefficients start at rest.

    With real sources the coefficients satisfy ``z_{-k} = conj(z_k)``.  By
    default (``symmetric=None``) the steps are solved on the k >= 0 half
    through :class:`SymmetricBlockOperator` whenever the initial data are
    conjugate-symmetric; ``symmetric=False`` forces the full complex system.
    """
    if scheme not in SCHEMES:
        raise InvalidArgument(f"unknown scheme {scheme!r}")
    if not tau > 0:
        raise InvalidArgument(f"time step must be positive, got {tau}")
    if int(N) != N or N < 1 or int(stride) != stride or stride < 1 or N % stride:
        raise InvalidArgument(f"need N >= 1 and stride dividing N, got N={N}, stride={stride}")
    cfg = _config_for(spec, cfg)
    ks = cfg.ks
    kap = ks / spec.epsilon
    m = grid.m
    k0 = cfg.span
    stiffness = coupled_stiffness(grid, spec, cfg)
    if symmetric is None:
        symmetric = initial is None or (is_conjugate_symmetric(initial[0]) and is_conjugate_symmetric(initial[1]))
    elif symmetric and initial is not None and not (
            is_conjugate_symmetric(initial[0]) and is_conjugate_symmetric(initial[1])):
        raise InvalidArgument("symmetric solve needs conjugate-symmetric initial data")
    Op = SymmetricBlockOperator if symmetric else BlockOperator

    if scheme == "trapezoidal":
        op = Op((2.0 / tau + 1j * kap) ** 2, stiffness, m, s=2.0 / tau, ks=ks)
        carry = (8.0 / tau**2 + 8j * kap / tau)[:, None]
    else:
        op = Op(2.0 / tau**2 + 4j * kap / tau - kap**2, stiffness, m, ks=ks)
        carry = (4.0 / tau**2 + 4j * kap / tau + kap**2)[:, None]

    times = np.arange(0, N + 1, stride) * tau
    Z = np.zeros((len(times), cfg.n_k, m), dtype=complex)
    W = np.zeros_like(Z) if store_velocity else None
    z = np.zeros((cfg.n_k, m), dtype=complex)
    w = np.zeros_like(z)
    if initial is not None:
        z[:] = initial[0]
        w[:] = initial[1]
        Z[0] = z
        if W is not None:
            W[0] = w
    z_prev = z - tau * w

    f0 = source_eval(src, grid.nodes, 0.0)
    for n in range(N):
        f1 = source_eval(src, grid.nodes, (n + 1) * tau)
        if scheme == "trapezoidal":
            rhs = carry * z + (4.0 / tau) * w
            rhs[k0] += f0 + f1
            z1 = op.solve(rhs) - z
            w = 2.0 * (z1 - z) / tau - w
        else:
            rhs = carry * z - 2.0 * z_prev / tau**2 - op.apply_stiffness(z)
            rhs[k0] += f0 + f1
            z1 = op.solve(rhs)
            w = (z1 - z) / tau
        z_prev, z = z, z1
        f0 = f1
        if (n + 1) % stride == 0:
            Z[(n + 1) // stride] = z
            if W is not None:
                W[(n + 1) // stride] = w
    return MfeTrajectory(tau, N, stride, times, ks, spec.epsilon, Z, W,
                         factorizations=op.factorizations, scheme=scheme)


def _phases(ks, epsilon, t):
    return np.exp(1j * np.multiply.outer(np.atleast_1d(t), ks) / epsilon)


def reconstruct(state, spec=None, return_imag=False):
    """u = Re sum_k z_k exp(i k t / eps); optionally also max |Im| of the sum."""
    eps = state.epsilon if spec is None else spec.epsilon
    total = _phases(state.ks, eps, state.t)[0] @ state.z
    if return_imag:
        return total.real, float(np.max(np.abs(total.imag), initial=0.0))
    return total.real


def reconstruct_trajectory(traj, spec=None, return_imag=False):
    eps = traj.epsilon if spec is None else spec.epsilon
    ph = _phases(traj.ks, eps, traj.times)
    total = np.einsum("nk,nkm->nm", ph, traj.z)
    if return_imag:
        return total.real, np.max(np.abs(total.imag), axis=1)
    return total.real


def mfe_invariant(state, grid, spec, return_scale=False):
    """Quadratic quantity conserved by the coupled system when f = 0.

    sum_k ||w_k||^2 - (k/eps)^2 ||z_k||^2 + <z_k, A0 z_k>
          + 2 rho sum_{j>=1} Re <z_k, Ahat_j z_{k-j}>;
    for mu = 1 + 2 rho cos the operator terms are ||grad z_k||^2 and
    2 rho Re <grad z_k, grad z_{k-1}>.

    The quantity is indefinite; with ``return_scale`` the sum of the absolute
    sizes of its terms is returned as well, the natural yardstick for
    rounding errors in it.
    """
    if state.w is None:
        raise InvalidArgument("invariant needs the coefficient velocities")
    h = grid.h
    ks = state.ks
    z, w = state.z, state.w
    kin = np.sum(l2_norm(w, h) ** 2)
    osc = np.sum((ks / spec.epsilon) ** 2 * l2_norm(z, h) ** 2)
    A0 = assemble_stiffness(grid, spec.mu0)
    pot = np.sum(inner(z, A0.matvec(z), h).real)
    coup = 0.0
    coup_abs = 0.0
    for j, mh in enumerate(spec.muhat, start=1):
        if j >= len(ks):
            break
        Aj = assemble_stiffness(grid, mh)
        terms = inner(z[j:], Aj.matvec(z[:-j]), h).real
        coup += np.sum(terms)
        coup_abs += np.sum(np.abs(terms))
    value = float(kin - osc + pot + 2.0 * spec.rho * coup)
    if return_scale:
        return value, float(kin + osc + abs(pot) + 2.0 * spec.rho * coup_abs)
    return value


def mfe_invariant_cosine(state, grid, spec):
    """The same quantity written with discrete gradients (mu0 = muhat_1 = 1)."""
    h = grid.h
    ks = state.ks
    z, w = state.z, state.w
    total = 0.0
    for i, k in enumerate(ks):
        total += l2_norm(w[i], h) ** 2 - (k / spec.epsilon) ** 2 * l2_norm(z[i], h) ** 2
        total += h1_inner(z[i], z[i], h).real
        if i > 0:
            total += 2.0 * spec.rho * h1_inner(z[i], z[i - 1], h).real
    return float(total)


def coefficient_norms(traj, grid):
    """(sum_n ||z_k(t_n)||^2)^(1/2) for k = 0..JK (index = k)."""
    k0 = traj.ks[-1]
    sq = l2_norm(traj.z[:, k0:, :], grid.h) ** 2
    return np.sqrt(sq.sum(axis=0))


def matching_indices(fine_times, coarse_times, rtol=1e-12):
    """Indices of ``fine_times`` that coincide with ``coarse_times``."""
    fine_times = np.asarray(fine_times)
    coarse_times = np.asarray(coarse_times)
    idx = np.searchsorted(fine_times, coarse_times - rtol * max(1.0, abs(coarse_times[-1])))
    idx = np.clip(idx, 0, len(fine_times) - 1)
    scale = rtol * max(1.0, abs(fine_times[-1]))
    if not np.all(np.abs(fine_times[idx] - coarse_times) <= scale):
        raise InvalidArgument("time grids do not match: reference does not contain every coarse time")
    return idx


def remainder_norm(mfe_traj, ref_traj, spec, grid):
    """sup_n ||reconstruct(z(t_n)) - u_ref(t_n)|| on the MFE time grid."""
    idx = matching_indices(ref_traj.times, mfe_traj.times)
    u = reconstruct_trajectory(mfe_traj, spec)
    ref = ref_traj.u[idx]
    return float(np.max(l2_norm(u - ref, grid.h)))
