"""Experiment drivers behind the CLI subcommands.

Each ``run_*`` function takes a resolved config dict (see :mod:`mfewave.config`),
writes its CSV (and optionally SVG) files into ``output.dir`` and returns a
small result object with the computed arrays.  Sweep points are independent
and may run in worker processes; results are merged in sweep order so the
files do not depend on the worker count.
"""

import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import config as C
from .direct import direct_solve, energy_identity_residual, energy_series
from .laplace import (
    coercivity_terms,
    decay_diagnostic,
    laplace_solve,
    neumann_k1_defect,
    resolvent_bounds,
    well_posedness_threshold,
)
from .mfe import (
    assemble_block,
    coefficient_norms,
    matching_indices,
    mfe_invariant,
    mfe_solve,
    reconstruct_trajectory,
)
from .modulation import c_mu_prime
from .output import heatmap_svg, line_svg, write_csv, write_matrix_csv, write_text
from .spatial import l2_norm, laplacian

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    command: str
    files: list
    data: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def pmap(fn, items, workers=1):
    """Ordered map; worker processes when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def err_measure(u, ref, h):
    """(sum_n ||e_n||^2)^(1/2) with the h-weighted spatial norm, no time weight."""
    return float(np.sqrt(np.sum(l2_norm(u - ref, h) ** 2)))


def fitted_order(taus, errs):
    """Least-squares slope of log err against log tau."""
    return float(np.polyfit(np.log(taus), np.log(errs), 1)[0])


def fitted_ratio(norms):
    """exp of the least-squares slope of log norm against k."""
    norms = np.asarray(norms, dtype=float)
    k = np.arange(len(norms))
    good = norms > 0
    if good.sum() < 2:
        return 0.0
    return float(np.exp(np.polyfit(k[good], np.log(norms[good]), 1)[0]))


def _out(cfg, name):
    return os.path.join(cfg["output"]["dir"], name)


def _ctx(cfg, epsilon=None, rho=None, K=None):
    grid = C.grid_of(cfg)
    spec = C.modulation_spec(cfg, epsilon=epsilon, rho=rho)
    return grid, spec, C.source_spec(cfg), C.mfe_config(cfg, K)


# --- convergence ----------------------------------------------------------

def _convergence_point(args):
    cfg, N, u_ref_sub = args
    grid, spec, src, mcfg = _ctx(cfg)
    T = float(cfg["time"]["T"])
    tau = T / N
    d = direct_solve(grid, spec, src, tau, N)
    tr = mfe_solve(grid, spec, src, mcfg, tau, N, store_velocity=False, scheme=cfg["mfe"]["scheme"])
    u = reconstruct_trajectory(tr, spec)
    return err_measure(d.u, u_ref_sub, grid.h), err_measure(u, u_ref_sub, grid.h)


def run_convergence(cfg, write=True):
    grid, spec, src, mcfg = _ctx(cfg)
    T = float(cfg["time"]["T"])
    Ns = [int(n) for n in cfg["sweep"]["N"]]
    n_ref = int(cfg["reference"]["N"])
    stride = math.gcd(*[n_ref // n for n in Ns])
    log.info("reference MFE run: N=%d, K=%d, m=%d", n_ref, mcfg.K, grid.m)
    ref = mfe_solve(grid, spec, src, mcfg, T / n_ref, n_ref, stride=stride,
                    store_velocity=False, scheme=cfg["mfe"]["scheme"])
    u_ref = reconstruct_trajectory(ref, spec)
    ref_times = ref.times
    del ref
    jobs = []
    for N in Ns:
        idx = matching_indices(ref_times, np.arange(N + 1) * (T / N))
        jobs.append((cfg, N, u_ref[idx]))
    errs = pmap(_convergence_point, jobs, int(cfg["run"]["workers"]))
    taus = np.array([T / N for N in Ns])
    err_d = np.array([e[0] for e in errs])
    err_m = np.array([e[1] for e in errs])
    norm = np.sqrt(np.array(Ns) + 1.0)
    rows = [(N, taus[i], err_d[i], err_m[i], err_d[i] / norm[i], err_m[i] / norm[i]) for i, N in enumerate(Ns)]
    summary = {}
    if len(Ns) > 1:
        summary["order_mfe_rms"] = fitted_order(taus, err_m / norm)
        summary["order_direct_rms"] = fitted_order(taus, err_d / norm)
        summary["order_mfe"] = fitted_order(taus, err_m)
    files = []
    if write:
        # err_*_rms = ERR / sqrt(N + 1): auxiliary column for comparing across tau
        cols = ["N", "tau", "err_direct", "err_mfe", "err_direct_rms", "err_mfe_rms"]
        files.append(write_csv(_out(cfg, "convergence.csv"), "convergence", cfg, cols, rows, summary))
        if cfg["output"]["emit_svg"]:
            svg = line_svg({"direct": (np.log10(taus), err_d / norm), "mfe": (np.log10(taus), err_m / norm)},
                           title="time convergence", xlabel="log10 tau", ylabel="ERR/sqrt(N+1)", logy=True)
            files.append(write_text(_out(cfg, "convergence.svg"), svg))
    data = {"N": np.array(Ns), "tau": taus, "err_direct": err_d, "err_mfe": err_m}
    return RunResult("convergence", files, data, summary)


# --- decay ----------------------------------------------------------------

def _decay_point(args):
    cfg, eps, rho = args
    grid, spec, src, mcfg = _ctx(cfg, epsilon=eps, rho=rho)
    T = float(cfg["time"]["T"])
    N = C.resolve_steps(cfg)
    tr = mfe_solve(grid, spec, src, mcfg, T / N, N, store_velocity=False, scheme=cfg["mfe"]["scheme"])
    return coefficient_norms(tr, grid)


def run_decay(cfg, write=True):
    pairs = list(itertools.product([float(e) for e in cfg["sweep"]["epsilon"]],
                                   [float(r) for r in cfg["sweep"]["rho"]]))
    norms = pmap(_decay_point, [(cfg, e, r) for e, r in pairs], int(cfg["run"]["workers"]))
    rows = []
    summary = {}
    for (eps, rho), c in zip(pairs, norms):
        rel = c / c[0] if c[0] > 0 else np.zeros_like(c)
        for k, val in enumerate(c):
            rows.append((eps, rho, k, val, rel[k], (rho * eps) ** k))
        summary[f"fitted_ratio[epsilon={eps:g},rho={rho:g}]"] = fitted_ratio(c)
    files = []
    if write:
        cols = ["epsilon", "rho", "k", "norm", "norm_rel", "ref_slope"]
        files.append(write_csv(_out(cfg, "decay.csv"), "decay", cfg, cols, rows, summary))
        if cfg["output"]["emit_svg"]:
            series = {f"eps={e:g} rho={r:g}": (np.arange(len(c)), np.maximum(c / c[0] if c[0] > 0 else c, 1e-300))
                      for (e, r), c in zip(pairs, norms)}
            files.append(write_text(_out(cfg, "decay.svg"),
                                    line_svg(series, title="coefficient decay", xlabel="k", ylabel="norm/norm_0", logy=True)))
    return RunResult("decay", files, {"pairs": pairs, "norms": norms}, summary)


# --- energy ---------------------------------------------------------------

def _energy_rho_point(args):
    cfg, rho, N = args
    grid, spec, src, _ = _ctx(cfg, rho=rho)
    T = float(cfg["time"]["T"])
    d = direct_solve(grid, spec, src, T / N, N)
    E = energy_series(d, spec, grid)
    i_off = int(round(float(cfg["energy"]["T_off"]) / (T / N)))
    return float(E[i_off]), float(E[-1]), float(np.max(np.abs(E[i_off:] - E[i_off])))


def invariant_series(traj, grid, spec, return_scale=False):
    vals = np.array([mfe_invariant(traj[n], grid, spec, return_scale=True) for n in range(len(traj))])
    return (vals[:, 0], vals[:, 1]) if return_scale else vals[:, 0]


def _energy_tau_point(args):
    cfg, N = args
    grid, spec, src, mcfg = _ctx(cfg)
    T = float(cfg["time"]["T"])
    d = direct_solve(grid, spec, src, T / N, N)
    resid = energy_identity_residual(d, spec, src, grid)
    tr = mfe_solve(grid, spec, src, mcfg, T / N, N, scheme=cfg["mfe"]["scheme"])
    inv, scale = invariant_series(tr, grid, spec, return_scale=True)
    i_off = int(round(float(cfg["energy"]["T_off"]) / (T / N)))
    # relative to the size of the invariant's terms, which can cancel
    drift = float(np.max(np.abs(inv[i_off:] - inv[i_off])) / max(np.max(scale[i_off:]), np.finfo(float).tiny))
    return resid, drift


def run_energy(cfg, write=True):
    grid, spec, src, mcfg = _ctx(cfg)
    T = float(cfg["time"]["T"])
    N = C.resolve_steps(cfg)
    tau = T / N
    workers = int(cfg["run"]["workers"])
    d = direct_solve(grid, spec, src, tau, N)
    E = energy_series(d, spec, grid)
    tr = mfe_solve(grid, spec, src, mcfg, tau, N, scheme=cfg["mfe"]["scheme"])
    inv = invariant_series(tr, grid, spec)
    del tr
    cmp = c_mu_prime(spec, grid.half_nodes)

    rhos = [float(r) for r in cfg["sweep"]["rho"]]
    sweep = pmap(_energy_rho_point, [(cfg, r, N) for r in rhos], workers)
    changes = np.array([abs(b - a) for a, b, _ in sweep])
    rel = np.array([abs(b - a) / a if a > 0 else np.inf for a, b, _ in sweep])
    max_changes = np.array([c for _, _, c in sweep])

    Ns = [int(n) for n in cfg["sweep"]["N"]]
    tau_rows = pmap(_energy_tau_point, [(cfg, n) for n in Ns], workers)

    summary = {"c_mu_prime": cmp, "T_off": float(cfg["energy"]["T_off"])}
    if len(rhos) > 1:
        summary["rho_halving_ratios"] = [float(x) for x in changes[:-1] / changes[1:]]
    if len(Ns) > 1:
        taus = T / np.array(Ns, dtype=float)
        summary["identity_residual_order"] = fitted_order(taus, [r[0] for r in tau_rows])
    files = []
    if write:
        files.append(write_csv(
            _out(cfg, "energy_series.csv"), "energy", cfg, ["n", "t", "energy_direct", "invariant_mfe"],
            ((n, d.times[n], E[n], inv[n]) for n in range(len(E))), summary))
        files.append(write_csv(
            _out(cfg, "energy_rho_sweep.csv"), "energy", cfg,
            ["rho", "E_T_off", "E_T", "change", "rel_change", "max_change"],
            ((r, a, b, changes[i], rel[i], max_changes[i]) for i, (r, (a, b, _)) in enumerate(zip(rhos, sweep))),
            summary))
        files.append(write_csv(
            _out(cfg, "energy_tau_sweep.csv"), "energy", cfg, ["N", "tau", "identity_residual", "invariant_drift"],
            ((n, T / n, a, b) for n, (a, b) in zip(Ns, tau_rows)), summary))
        if cfg["output"]["emit_svg"]:
            files.append(write_text(_out(cfg, "energy.svg"), line_svg(
                {"direct energy": (d.times, E), "MFE invariant": (d.times, inv)},
                title="energy", xlabel="t", ylabel="E")))
    data = {"times": d.times, "energy": E, "invariant": inv, "rho": np.array(rhos), "change": changes,
            "rel_change": rel, "max_change": max_changes, "N": np.array(Ns), "identity_residual": np.array([r[0] for r in tau_rows]),
            "invariant_drift": np.array([r[1] for r in tau_rows]), "c_mu_prime": cmp}
    return RunResult("energy", files, data, summary)


# --- visualize ------------------------------------------------------------

def run_visualize(cfg, write=True):
    grid, spec, src, mcfg = _ctx(cfg)
    T = float(cfg["time"]["T"])
    N = C.resolve_steps(cfg)
    tr = mfe_solve(grid, spec, src, mcfg, T / N, N, store_velocity=False, scheme=cfg["mfe"]["scheme"])
    u = reconstruct_trajectory(tr, spec).T
    k0 = tr.ks[-1]
    absz = {int(k): np.abs(tr.z[:, k0 + k, :]).T for k in range(k0 + 1)}
    files = []
    if write:
        x = grid.nodes
        files.append(write_matrix_csv(_out(cfg, "visualize_u.csv"), "visualize", cfg, "x", x, tr.times, u))
        for k, mat in absz.items():
            files.append(write_matrix_csv(_out(cfg, f"visualize_absz_k{k}.csv"), "visualize", cfg, "x", x, tr.times, mat))
        if cfg["output"]["emit_svg"]:
            tr_range, x_range = (0.0, T), (grid.a, grid.b)
            files.append(write_text(_out(cfg, "visualize_u.svg"), heatmap_svg(u, tr_range, x_range, title="u(x, t)")))
            for k, mat in absz.items():
                files.append(write_text(_out(cfg, f"visualize_absz_k{k}.svg"),
                                        heatmap_svg(mat, tr_range, x_range, title=f"|z_{k}(x, t)|")))
    return RunResult("visualize", files, {"x": grid.nodes, "times": tr.times, "u": u, "absz": absz})


# --- Laplace-domain diagnostics -------------------------------------------

def _random_vec(rng, m, complex_=True):
    v = rng.standard_normal(m)
    if complex_:
        v = v + 1j * rng.standard_normal(m)
    return v


def _laplace_point(args):
    cfg, i, s, n_coerc = args
    grid, spec, _, mcfg = _ctx(cfg)
    rng = np.random.default_rng([int(cfg["laplace"]["seed"]), i])
    fhat = _random_vec(rng, grid.m)
    rows = []
    op = assemble_block(grid, spec, mcfg, s)
    res = laplace_solve(grid, spec, mcfg, s, fhat, op=op)
    rows.append(("well_posedness", s.real, s.imag, 0, res.energy, res.bound, res.bound_ok))
    rep = decay_diagnostic(grid, spec, mcfg, s, fhat, op=op)
    for k, val, bnd, ok in rep.rows():
        rows.append(("decay", s.real, s.imag, k, val, bnd, bool(ok and rep.admissible)))
    for j in range(n_coerc):
        z = np.stack([_random_vec(rng, grid.m) for _ in range(mcfg.n_k)])
        lhs, rhs = coercivity_terms(grid, spec, mcfg, s, z, op=op)
        rows.append(("coercivity", s.real, s.imag, j, lhs, rhs, bool(lhs >= rhs * (1 - 1e-12))))
    A = laplacian(grid)
    g = _random_vec(rng, grid.m)
    for name, (val, bnd) in resolvent_bounds(grid, s, g, A).items():
        rows.append((f"resolvent_{name}", s.real, s.imag, 0, val, bnd, bool(val <= bnd * (1 + 1e-12))))
    return rows


def run_laplace_diag(cfg, write=True):
    grid, spec, _, mcfg = _ctx(cfg)
    lp = cfg["laplace"]
    thr = well_posedness_threshold(spec)
    s_grid = [complex(a, b) for a in lp["s_re"] for b in lp["s_im"]]
    rng = np.random.default_rng(int(lp["seed"]))
    n_rand = int(lp["samples"])
    lo = max(thr, 1e-3)
    s_rand = [complex(lo * (1.0 + 3.0 * rng.random()), 100.0 * (rng.random() - 0.5)) for _ in range(n_rand)]
    points = s_grid + s_rand
    jobs = [(cfg, i, s, 2 if i < len(s_grid) else 1) for i, s in enumerate(points)]
    rows = [r for chunk in pmap(_laplace_point, jobs, int(cfg["run"]["workers"])) for r in chunk]

    rhos = [float(r) for r in lp["K_neumann_rho"]]
    summary = {"threshold_re_s": thr, "n_points": len(points)}
    if rhos:
        s = s_grid[0]
        fhat = _random_vec(np.random.default_rng([int(lp["seed"]), 10**6]), grid.m)
        defects = [neumann_k1_defect(grid, spec.epsilon, r, s, fhat) for r in rhos]
        for r, dfc in zip(rhos, defects):
            rows.append(("neumann_k1_defect", s.real, s.imag, 0, dfc, r**3, True))
        if len(rhos) > 1:
            slope = fitted_order(rhos, defects)
            summary["neumann_k1_slope"] = slope
            rows.append(("neumann_k1_slope", s.real, s.imag, 0, slope, 3.0, bool(abs(slope - 3.0) <= 0.4)))
    summary["all_pass"] = bool(all(r[-1] for r in rows))
    files = []
    if write:
        cols = ["check", "s_re", "s_im", "index", "value", "bound", "pass"]
        files.append(write_csv(_out(cfg, "laplace_diag.csv"), "laplace-diag", cfg, cols, rows, summary))
    return RunResult("laplace-diag", files, {"rows": rows}, summary)


RUNNERS = {
    "convergence": run_convergence,
    "decay": run_decay,
    "energy": run_energy,
    "visualize": run_visualize,
    "laplace-diag": run_laplace_diag,
}
