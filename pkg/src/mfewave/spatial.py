"""Uniform 1D grids and finite-difference stiffness operators.

All vectors live on the ``m`` interior nodes; the homogeneous Dirichlet
boundary values are implicit zeros.  Discrete norms are h-weighted so that
they approximate the continuous L2 and H1-seminorms.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import InvalidArgument


@dataclass(frozen=True)
class Grid1D:
    a: float
    b: float
    m: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    half_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = (self.b - self.a) / (self.m + 1)
        object.__setattr__(self, "h", h)
        nodes = self.a + np.arange(1, self.m + 1) * h
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        # m + 1 cell midpoints, including the two next to the boundary
        half = self.a + (np.arange(self.m + 1) + 0.5) * h
        half.setflags(write=False)
        object.__setattr__(self, "half_nodes", half)


def build_grid(m, a=0.0, b=1.0):
    """Grid with ``m`` interior unknowns on ``(a, b)``."""
    if int(m) != m or m < 1:
        raise InvalidArgument(f"number of interior nodes must be a positive integer, got {m!r}")
    if not a < b:
        raise InvalidArgument(f"need a < b, got a={a}, b={b}")
    return Grid1D(float(a), float(b), int(m))


@dataclass(frozen=True)
class BandedSym:
    """Real symmetric tridiagonal matrix stored as diagonal and off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    @property
    def m(self):
        return self.diag.shape[0]

    def matvec(self, x):
        """Apply to ``x`` along its last axis (real or complex)."""
        x = np.asarray(x)
        y = self.diag * x
        y[..., :-1] += self.off * x[..., 1:]
        y[..., 1:] += self.off * x[..., :-1]
        return y

    def to_sparse(self, fmt="csc"):
        return sp.diags([self.off, self.diag, self.off], [-1, 0, 1], format=fmt)

    def to_dense(self):
        return self.to_sparse().toarray()

    def upper_banded(self):
        """Upper storage layout used by LAPACK's symmetric banded routines."""
        ab = np.zeros((2, self.m))
        ab[0, 1:] = self.off
        ab[1] = self.diag
        return ab

    def eigvalsh(self):
        return la.eigvalsh_tridiagonal(self.diag, self.off)

    def __add__(self, other):
        return BandedSym(self.diag + other.diag, self.off + other.off)

    def scaled(self, c):
        return BandedSym(c * self.diag, c * self.off)


def _sample(coeff, x):
    if callable(coeff):
        vals = np.asarray(coeff(x), dtype=float)
    else:
        vals = np.asarray(coeff, dtype=float)
    return np.broadcast_to(vals, x.shape).astype(float)


def half_node_values(grid, coeff):
    return _sample(coeff, grid.half_nodes)


def stiffness_from_half_values(c, h):
    """Tridiagonal matrix of ``-d/dx(c d/dx)`` from half-node samples ``c``."""
    c = np.asarray(c, dtype=float)
    diag = (c[:-1] + c[1:]) / h**2
    off = -c[1:-1] / h**2
    return BandedSym(diag, off)


def assemble_stiffness(grid, coeff):
    """Second-order finite-difference discretization of ``-d/dx(coeff d/dx)``.

    ``coeff`` is a vectorized callable of ``x`` or a constant.  It is sampled
    at the cell midpoints so the result is symmetric for any coefficient.
    """
    return stiffness_from_half_values(half_node_values(grid, coeff), grid.h)


def laplacian(grid):
    return assemble_stiffness(grid, 1.0)


def dirichlet_eigenvalues(grid):
    """Closed-form spectrum of the constant-coefficient operator."""
    p = np.arange(1, grid.m + 1)
    return 4.0 / grid.h**2 * np.sin(p * np.pi * grid.h / 2) ** 2


# --- discrete norms -------------------------------------------------------

def grad(v, h):
    """Forward differences including both boundary cells (length m+1)."""
    v = np.asarray(v)
    pad = [(0, 0)] * (v.ndim - 1) + [(1, 1)]
    return np.diff(np.pad(v, pad), axis=-1) / h


def inner(u, v, h):
    """h-weighted inner product, antilinear in the first argument."""
    return h * np.sum(np.conj(u) * v, axis=-1)


def l2_norm(v, h):
    return np.sqrt(h * np.sum(np.abs(v) ** 2, axis=-1))


def h1_inner(u, v, h):
    return inner(grad(u, h), grad(v, h), h)


def h1_seminorm(v, h):
    return l2_norm(grad(v, h), h)
