"""Experiment configuration: YAML files with dotted keys, CLI overrides, defaults."""

import copy

import yaml

from .errors import InvalidArgument
from .mfe import MfeConfig, SCHEMES
from .modulation import ModulationSpec, Profile, SOURCE_KINDS, SourceSpec
from .spatial import build_grid


class ConfigError(InvalidArgument):
    pass


BASE_DEFAULTS = {
    "grid": {"m": 1000, "a": 0.0, "b": 1.0},
    "modulation": {
        "epsilon": 0.04,
        "rho": 0.4,
        "mu0": ["constant", 1.0],
        "muhat": [["constant", 1.0]],
        "c_mu": None,
        "C_mu": None,
    },
    "source": {"kind": "smooth_balanced", "t0": 1.0},
    "mfe": {"K": 3, "scheme": "trapezoidal"},
    "time": {"T": 4.0, "N": None, "tau": None},
    "reference": {"N": 16384},
    "sweep": {"N": [], "epsilon": [], "rho": [], "K": []},
    "energy": {"T_off": 3.0},
    "laplace": {"s_re": [], "s_im": [], "samples": 100, "seed": 0, "K_neumann_rho": []},
    "cq": {"lam": None},
    "output": {"dir": "out", "emit_svg": False},
    "run": {"workers": 1},
}

COMMAND_DEFAULTS = {
    "convergence": {
        "time": {"T": 5.0},
        "sweep": {"N": [32, 64, 128, 256, 512, 1024]},
    },
    "decay": {
        "grid": {"m": 500},
        "mfe": {"K": 10},
        "time": {"T": 4.0, "N": 1024},
        "sweep": {"epsilon": [0.1, 0.05, 0.025], "rho": [0.4, 0.2, 0.1]},
    },
    "energy": {
        "grid": {"m": 500},
        "time": {"T": 4.0, "N": 4096},
        "sweep": {"rho": [0.4, 0.2, 0.1], "N": [1024, 2048, 4096]},
    },
    "visualize": {
        "grid": {"m": 500},
        "time": {"T": 4.0, "N": 256},
    },
    "laplace-diag": {
        "grid": {"m": 200},
        "modulation": {"rho": 0.1},
        "laplace": {
            "s_re": [12.0, 20.0, 40.0],
            "s_im": [0.0, 10.0, 50.0],
            "K_neumann_rho": [0.1, 0.05, 0.025],
        },
    },
}

COMMANDS = tuple(COMMAND_DEFAULTS)


def deep_merge(base, update):
    out = copy.deepcopy(base)
    for key, val in update.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def expand_dotted(flat):
    """{'a.b': 1} -> {'a': {'b': 1}}; nested dicts are expanded recursively."""
    out = {}
    for key, val in flat.items():
        if isinstance(val, dict):
            val = expand_dotted(val)
        parts = str(key).split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        if isinstance(val, dict) and isinstance(node.get(parts[-1]), dict):
            node[parts[-1]] = deep_merge(node[parts[-1]], val)
        else:
            node[parts[-1]] = val
    return out


def flatten(cfg, prefix=""):
    items = []
    for key in sorted(cfg):
        val = cfg[key]
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            items.extend(flatten(val, name + "."))
        else:
            items.append((name, val))
    return items


def parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        val = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
    return key.strip(), val


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return expand_dotted(data)


def _check_known(cfg, reference, prefix=""):
    for key, val in cfg.items():
        if key not in reference:
            raise ConfigError(f"unknown config key {prefix}{key}")
        if isinstance(reference[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {prefix}{key} must be a mapping")
            _check_known(val, reference[key], f"{prefix}{key}.")


def resolve(command, file_cfg=None, overrides=(), out=None, workers=None):
    """Merge defaults, file contents and overrides, then validate."""
    if command not in COMMAND_DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = deep_merge(BASE_DEFAULTS, COMMAND_DEFAULTS[command])
    if file_cfg:
        _check_known(file_cfg, BASE_DEFAULTS)
        cfg = deep_merge(cfg, file_cfg)
    for item in overrides:
        key, val = parse_override(item) if isinstance(item, str) else item
        upd = expand_dotted({key: val})
        _check_known(upd, BASE_DEFAULTS)
        cfg = deep_merge(cfg, upd)
    if out is not None:
        cfg["output"]["dir"] = str(out)
    if workers is not None:
        cfg["run"]["workers"] = int(workers)
    validate(command, cfg)
    return cfg


def _positive(value, name, kind=float):
    try:
        v = kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}") from exc
    if kind is int and v != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if not v > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return v


def resolve_steps(cfg):
    """Step count N from exactly one of time.N / time.tau."""
    T = _positive(cfg["time"]["T"], "time.T")
    N, tau = cfg["time"]["N"], cfg["time"]["tau"]
    if (N is None) == (tau is None):
        raise ConfigError("exactly one of time.N and time.tau must be given")
    if N is not None:
        return _positive(N, "time.N", int)
    tau = _positive(tau, "time.tau")
    n = T / tau
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError(f"time.tau={tau} does not divide time.T={T}")
    return int(round(n))


def validate(command, cfg):
    try:
        build_grid(cfg["grid"]["m"], cfg["grid"]["a"], cfg["grid"]["b"])
        modulation_spec(cfg)
        source_spec(cfg)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc
    _positive(cfg["mfe"]["K"], "mfe.K", int)
    if cfg["mfe"]["scheme"] not in SCHEMES:
        raise ConfigError(f"mfe.scheme must be one of {SCHEMES}")
    _positive(cfg["time"]["T"], "time.T")
    _positive(cfg["run"]["workers"], "run.workers", int)
    sw = cfg["sweep"]
    if command == "convergence":
        if not sw["N"]:
            raise ConfigError("sweep.N must be a non-empty list of step counts")
        n_ref = _positive(cfg["reference"]["N"], "reference.N", int)
        for n in sw["N"]:
            _positive(n, "sweep.N entry", int)
            if n >= n_ref or n_ref % n:
                raise ConfigError(f"reference.N={n_ref} must be a larger multiple of every sweep.N (got {n})")
    elif command == "decay":
        resolve_steps(cfg)
        if not sw["epsilon"] or not sw["rho"]:
            raise ConfigError("sweep.epsilon and sweep.rho must be non-empty")
    elif command == "energy":
        N = resolve_steps(cfg)
        if not sw["rho"] or not sw["N"]:
            raise ConfigError("sweep.rho and sweep.N must be non-empty")
        T = float(cfg["time"]["T"])
        t_off = float(cfg["energy"]["T_off"])
        if not 0 < t_off < T:
            raise ConfigError("energy.T_off must lie in (0, time.T)")
        for n in list(sw["N"]) + [N]:
            _positive(n, "sweep.N entry", int)
            if abs(t_off * n / T - round(t_off * n / T)) > 1e-9:
                raise ConfigError(f"energy.T_off={t_off} is not on the time grid for N={n}")
    elif command == "visualize":
        resolve_steps(cfg)
    elif command == "laplace-diag":
        lp = cfg["laplace"]
        if not lp["s_re"] or not lp["s_im"]:
            raise ConfigError("laplace.s_re and laplace.s_im must be non-empty")
        _positive(lp["samples"], "laplace.samples", int)
    lam = cfg["cq"]["lam"]
    if lam is not None and not 0 < float(lam) < 1:
        raise ConfigError("cq.lam must lie in (0, 1)")


def grid_of(cfg):
    g = cfg["grid"]
    return build_grid(g["m"], g["a"], g["b"])


def modulation_spec(cfg, epsilon=None, rho=None):
    md = cfg["modulation"]
    muhat = md["muhat"]
    if not isinstance(muhat, list) or not muhat:
        raise ConfigError("modulation.muhat must be a non-empty list of profiles")
    if not isinstance(muhat[0], (list, dict)):
        muhat = [muhat]
    try:
        return ModulationSpec(
            epsilon=float(md["epsilon"] if epsilon is None else epsilon),
            rho=float(md["rho"] if rho is None else rho),
            mu0=Profile.from_config(md["mu0"]),
            muhat=tuple(Profile.from_config(p) for p in muhat),
            c_mu=md["c_mu"],
            C_mu=md["C_mu"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid modulation settings: {exc}") from exc


def source_spec(cfg):
    sc = cfg["source"]
    if sc["kind"] not in SOURCE_KINDS or sc["kind"] == "custom_samples":
        raise ConfigError("source.kind must be one of smooth_balanced, low_regularity_step, zero")
    return SourceSpec(kind=sc["kind"], t0=float(sc["t0"]))


def mfe_config(cfg, K=None):
    return MfeConfig(int(cfg["mfe"]["K"] if K is None else K), len(modulation_spec(cfg).muhat))


def to_yaml(cfg):
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=None)
