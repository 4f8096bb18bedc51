"""Time-modulated coefficients and excitation sources."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class Profile:
    """Named spatial coefficient profile.

    kinds (params):
      constant (value,)
      affine (c0, c1)                      -> c0 + c1 x
      bump (base, amp, center, width)      -> base + amp exp(-((x-center)/width)^2)
      samples (v_0, ..., v_n)              -> piecewise linear on n+1 equispaced points of [0, 1]
    """

    kind: str
    params: tuple

    def __post_init__(self):
        arity = {"constant": 1, "affine": 2, "bump": 4}
        if self.kind in arity:
            if len(self.params) != arity[self.kind]:
                raise InvalidArgument(
                    f"profile {self.kind!r} takes {arity[self.kind]} parameters, got {len(self.params)}"
                )
        elif self.kind == "samples":
            if len(self.params) < 2:
                raise InvalidArgument("tabulated profile needs at least two samples")
        else:
            raise InvalidArgument(f"unknown profile kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full(x.shape, p[0])
        if self.kind == "affine":
            return p[0] + p[1] * x
        if self.kind == "bump":
            return p[0] + p[1] * np.exp(-(((x - p[2]) / p[3]) ** 2))
        return np.interp(x, np.linspace(0.0, 1.0, len(p)), p)

    def to_config(self):
        return [self.kind, *self.params]

    @classmethod
    def from_config(cls, value):
        if isinstance(value, (int, float)):
            return cls("constant", (value,))
        if isinstance(value, Profile):
            return value
        if isinstance(value, dict):
            return cls(value["kind"], tuple(value.get("params", ())))
        value = list(value)
        return cls(str(value[0]), tuple(value[1:]))


def constant(value):
    return Profile("constant", (value,))


@dataclass(frozen=True)
class ModulationSpec:
    """mu(x, t) = mu0(x) + 2 rho sum_{j=1..J} muhat_j(x) cos(j t / epsilon)."""

    epsilon: float
    rho: float
    mu0: Callable = field(default_factory=lambda: constant(1.0))
    muhat: tuple = field(default_factory=lambda: (constant(1.0),))
    c_mu: Optional[float] = None
    C_mu: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidArgument(f"epsilon must be positive, got {self.epsilon}")
        if not self.rho >= 0:
            raise InvalidArgument(f"rho must be nonnegative, got {self.rho}")
        object.__setattr__(self, "muhat", tuple(self.muhat))
        if len(self.muhat) < 1:
            raise InvalidArgument("at least one modulation harmonic is required")
        if self.c_mu is not None and not self.c_mu > 0:
            raise InvalidArgument(f"c_mu must be positive, got {self.c_mu}")

    @property
    def J(self):
        return len(self.muhat)

    def bounds(self, x):
        """(c_mu, C_mu), falling back to the sampled range of mu0 on ``x``."""
        vals = np.asarray(self.mu0(np.asarray(x, dtype=float)), dtype=float)
        lo = self.c_mu if self.c_mu is not None else float(vals.min())
        hi = self.C_mu if self.C_mu is not None else float(vals.max())
        return lo, hi

    def check_bounds(self, x):
        vals = np.asarray(self.mu0(np.asarray(x, dtype=float)), dtype=float)
        lo, hi = self.bounds(x)
        if not (lo > 0 and np.all(vals >= lo) and np.all(vals <= hi)):
            raise InvalidArgument(
                f"static coefficient must satisfy 0 < c_mu <= mu0 <= C_mu; "
                f"got range [{vals.min()}, {vals.max()}] with bounds [{lo}, {hi}]"
            )
        return lo, hi

    def muhat_sup(self, x):
        return np.array([np.max(np.abs(f(x))) for f in self.muhat])


def cosine_modulation(epsilon, rho):
    """The reference modulation 1 + 2 rho cos(t / epsilon)."""
    return ModulationSpec(epsilon=epsilon, rho=rho, c_mu=1.0, C_mu=1.0)


def modulation_eval(spec, x, t, deriv=0):
    """Evaluate mu(x, t) (``deriv=0``) or its time derivative (``deriv=1``)."""
    if deriv not in (0, 1):
        raise InvalidArgument(f"deriv must be 0 or 1, got {deriv!r}")
    x = np.asarray(x, dtype=float)
    eps, rho = spec.epsilon, spec.rho
    if deriv == 0:
        out = np.array(spec.mu0(x), dtype=float)
        for j, mh in enumerate(spec.muhat, start=1):
            out = out + 2.0 * rho * mh(x) * np.cos(j * t / eps)
        return out
    out = np.zeros(np.shape(x))
    for j, mh in enumerate(spec.muhat, start=1):
        out = out - (2.0 * rho / eps) * j * mh(x) * np.sin(j * t / eps)
    return out


def c_mu_prime(spec, x, n_sub=10_000):
    """Growth constant of the Gronwall energy estimate.

    (2 / (2 pi eps^2)) int_0^{2 pi eps} sup_x (d_theta mu)_+ / mu dt', with the
    fast-variable derivative d_theta mu = eps d_t mu; composite midpoint rule
    on ``n_sub`` cells of one period.
    """
    eps = spec.epsilon
    x = np.asarray(x, dtype=float)
    period = 2.0 * np.pi * eps
    tm = (np.arange(n_sub) + 0.5) * (period / n_sub)
    integrand = np.empty(n_sub)
    for i, t in enumerate(tm):
        dmu = eps * modulation_eval(spec, x, t, 1)
        mu = modulation_eval(spec, x, t, 0)
        integrand[i] = np.max(np.maximum(dmu, 0.0) / mu)
    return 2.0 / (2.0 * np.pi * eps**2) * integrand.sum() * (period / n_sub)


# --- sources --------------------------------------------------------------

SOURCE_KINDS = ("smooth_balanced", "low_regularity_step", "zero", "custom_samples")


@dataclass(frozen=True)
class SourceSpec:
    """Space-time excitation f(x, t).

    ``custom_samples`` takes either a vectorized callable ``func(x, t)`` or a
    table ``samples[n_t, n_x]`` on ``sample_times`` x ``sample_nodes`` that is
    interpolated linearly in both variables.
    """

    kind: str = "smooth_balanced"
    t0: float = 1.0
    width_x: float = 100.0
    center: float = 0.5
    width_t: float = 10.0
    offset: float = 0.1
    interior_support: bool = True
    func: Optional[Callable] = None
    samples: Optional[np.ndarray] = None
    sample_times: Optional[np.ndarray] = None
    sample_nodes: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise InvalidArgument(f"unknown source kind {self.kind!r}; expected one of {SOURCE_KINDS}")
        if self.kind == "custom_samples" and self.func is None and self.samples is None:
            raise InvalidArgument("custom_samples source needs func or samples")

    def gaussian(self, x, t):
        return np.exp(-self.width_x * (x - self.center) ** 2 - self.width_t * t**2)


def source_eval(spec, x, t):
    x = np.asarray(x, dtype=float)
    if spec.kind == "smooth_balanced":
        return spec.gaussian(x, t - spec.t0) - spec.gaussian(x, t - spec.t0 - spec.offset)
    if spec.kind == "low_regularity_step":
        inside = (x >= 0.25) & (x <= 0.75)
        return np.where(inside, np.exp(-10.0 * (t - 1.0) ** 2), 0.0)
    if spec.kind == "zero":
        return np.zeros(x.shape)
    if spec.func is not None:
        return np.broadcast_to(np.asarray(spec.func(x, t), dtype=float), x.shape).copy()
    times = np.asarray(spec.sample_times, dtype=float)
    table = np.asarray(spec.samples, dtype=float)
    col = np.array([np.interp(t, times, table[:, i]) for i in range(table.shape[1])])
    nodes = spec.sample_nodes
    if nodes is None:
        nodes = np.linspace(0.0, 1.0, table.shape[1] + 2)[1:-1]
    return np.interp(x, nodes, col)


def source_samples(spec, grid, times):
    """Source values at all interior nodes for each time, shape (len(times), m)."""
    return np.stack([source_eval(spec, grid.nodes, t) for t in np.asarray(times, dtype=float)])
