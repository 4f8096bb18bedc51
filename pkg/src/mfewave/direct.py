"""Reference solver: trapezoidal rule on the oscillatory-coefficient wave equation."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.integrate import cumulative_trapezoid

from .errors import InvalidArgument, ModulationPositivityError
from .modulation import modulation_eval, source_eval
from .spatial import grad, stiffness_from_half_values


@dataclass
class WaveState:
    u: np.ndarray
    v: np.ndarray
    t: float


@dataclass
class WaveTrajectory:
    """Displacement and velocity snapshots at ``times = n * tau`` for every
    ``stride``-th step."""

    tau: float
    N: int
    stride: int
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    factorizations: int = 0

    def __len__(self):
        return len(self.times)

    def __getitem__(self, n):
        return WaveState(self.u[n], self.v[n], float(self.times[n]))

    @property
    def states(self):
        return [self[n] for n in range(len(self))]


def _check_time_grid(tau, N, stride):
    if not tau > 0:
        raise InvalidArgument(f"time step must be positive, got {tau}")
    if int(N) != N or N < 1:
        raise InvalidArgument(f"number of steps must be a positive integer, got {N}")
    if int(stride) != stride or stride < 1 or N % stride:
        raise InvalidArgument(f"stride {stride} must be a positive divisor of N={N}")


def direct_solve(grid, spec, src, tau, N, stride=1, reuse_factorization=False):
    """March u'' + A(t) u = f with the trapezoidal rule in first-order form.

    Each step solves ``(I + tau^2/4 A(t_{n+1})) u_{n+1} = rhs`` by a banded
    Cholesky factorization, refactorized every step since A depends on time.
    With ``reuse_factorization`` factors are cached by the exact half-node
    coefficient values, which only pays off when mu(t_n) repeats on the grid.
    """
    _check_time_grid(tau, N, stride)
    m, h = grid.m, grid.h
    half = grid.half_nodes
    times = np.arange(0, N + 1, stride) * tau
    U = np.zeros((len(times), m))
    V = np.zeros((len(times), m))
    u = np.zeros(m)
    v = np.zeros(m)
    q = 0.25 * tau**2
    cache = {}
    n_fact = 0

    c0 = modulation_eval(spec, half, 0.0)
    A0 = stiffness_from_half_values(c0, h)
    f0 = source_eval(src, grid.nodes, 0.0)
    for n in range(N):
        t1 = (n + 1) * tau
        c1 = modulation_eval(spec, half, t1)
        if np.min(c1) <= 0:
            raise ModulationPositivityError(
                f"modulated coefficient non-positive at t={t1:.6g} (min {np.min(c1):.3g})", step=n + 1
            )
        A1 = stiffness_from_half_values(c1, h)
        f1 = source_eval(src, grid.nodes, t1)
        rhs = u + tau * v + q * (f0 + f1 - A0.matvec(u))
        key = c1.tobytes() if reuse_factorization else None
        cb = cache.get(key) if key is not None else None
        if cb is None:
            ab = A1.scaled(q).upper_banded()
            ab[1] += 1.0
            try:
                cb = la.cholesky_banded(ab)
            except la.LinAlgError as exc:
                raise ModulationPositivityError(f"step matrix not positive definite at t={t1:.6g}", step=n + 1) from exc
            n_fact += 1
            if key is not None:
                cache[key] = cb
        u1 = la.cho_solve_banded((cb, False), rhs)
        v = 2.0 * (u1 - u) / tau - v
        u = u1
        A0, f0 = A1, f1
        if (n + 1) % stride == 0:
            U[(n + 1) // stride] = u
            V[(n + 1) // stride] = v
    return WaveTrajectory(tau, N, stride, times, U, V, n_fact)


def _potential_density(u, spec, grid, t):
    mu = modulation_eval(spec, grid.half_nodes, t)
    return mu * grad(u, grid.h) ** 2


def energy_of(state, spec, grid):
    """Kinetic plus modulated potential energy of one state."""
    h = grid.h
    kinetic = 0.5 * h * np.sum(state.v**2)
    potential = 0.5 * h * np.sum(_potential_density(state.u, spec, grid, state.t))
    return float(kinetic + potential)


def energy_series(traj, spec, grid):
    return np.array([energy_of(traj[n], spec, grid) for n in range(len(traj))])


def energy_identity_residual(traj, spec, src, grid, return_series=False):
    """max_n |E(t_n) - E(0) - Q_n| where Q_n integrates the energy flux.

    The flux is int v f + (1/2) d_t mu |grad u|^2, integrated by the
    trapezoidal rule over the stored trajectory samples.
    """
    h = grid.h
    energies = energy_series(traj, spec, grid)
    flux = np.empty(len(traj))
    for n in range(len(traj)):
        t = traj.times[n]
        f = source_eval(src, grid.nodes, t)
        dmu = modulation_eval(spec, grid.half_nodes, t, 1)
        gu = grad(traj.u[n], h)
        flux[n] = h * np.sum(traj.v[n] * f) + 0.5 * h * np.sum(dmu * gu**2)
    Q = cumulative_trapezoid(flux, traj.times, initial=0.0)
    res = np.abs(energies - energies[0] - Q)
    if return_series:
        return float(res.max()), energies, Q
    return float(res.max())
