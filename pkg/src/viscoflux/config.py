"""INI-style run configuration.

Every key, its default and its meaning is listed in ``SCHEMA``; unknown
sections or keys are rejected with a message naming them.
"""
import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import FluidParams
from .solver import InitSpec, SimConfig

DEFAULT_XI = "0.25, 0.5, 1, 1.5, 2, 3, 4, 8, 16, 64"

# section -> key -> (type, default, description)
SCHEMA = {
    "grid": {
        "n": (int, 2, "space dimension (2 or 3)"),
        "N": (int, 64, "grid points per dimension (power of two >= 8)"),
        "L": (float, 2 * math.pi, "period of the torus"),
    },
    "fluid": {
        "mu0": (float, 1.0, "shear viscosity at the reference density"),
        "lambda0": (float, 0.0, "bulk viscosity at the reference density"),
        "alpha": (float, 1.0, "elastic modulus"),
        "gamma": (float, 1.4, "pressure exponent, Pi(rho) = rho^gamma / gamma"),
        "mu1": (float, 0.0, "slope of mu(rho) = mu0 + mu1 (rho - 1)"),
        "lambda1": (float, 0.0, "slope of lambda(rho) = lambda0 + lambda1 (rho - 1)"),
        "delta_det": (float, 0.1, "blow-up guard: minimum allowed det F"),
    },
    "time": {
        "dt": (float, 1e-2, "time step (capped by the advective CFL limit)"),
        "T_end": (float, 1.0, "final time"),
        "scheme": (str, "etdrk2", "etdrk2 or imex_bdf2"),
        "record_every": (int, 10, "steps between recorded samples"),
        "cfl": (float, 0.5, "CFL number for dt <= cfl dx / max(1, max|u|)"),
    },
    "run": {
        "mode": (str, "perturbation", "perturbation, primitive or linear"),
        "snapshot_every": (int, 0, "records between snapshot files (0: final state only)"),
    },
    "init": {
        "eta": (float, 1e-3, "initial smallness (hybrid norm of (p, tau) + Besov norm of u)"),
        "seed": (int, 0, "random seed"),
        "band_lo": (float, 1.0, "lowest excited lattice frequency"),
        "band_hi": (float, 4.0, "highest excited lattice frequency (< N/3)"),
        "slope": (float, 0.0, "spectral slope of the random amplitudes"),
        "compatible": (bool, False, "enforce rho det F = 1 and div(rho F^T) = 0 initially"),
    },
    "analysis": {
        "R0": (str, "auto", "hybrid frequency threshold; auto = regime transition rounded up"),
        "M_report": (float, 10.0, "report threshold M for the bound M * eta"),
        "fit_start": (str, "auto", "start of the decay-fit window; auto = one viscous time"),
        "fit_end": (str, "auto", "end of the decay-fit window; auto = T_end"),
    },
    "modes": {
        "xi": (str, DEFAULT_XI, "comma-separated frequencies for the dispersion table"),
    },
}


@dataclass
class RunConfig:
    sim: SimConfig
    snapshot_every: int = 0
    M_report: float = 10.0
    fit_window: tuple = (None, None)
    xi: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def resolved(self):
        """All settings with defaults materialized (``auto`` entries resolved)."""
        out = {sec: dict(keys) for sec, keys in self.values.items()}
        out["analysis"]["R0"] = self.sim.threshold
        out["init"]["seed"] = self.sim.init.seed
        return out


def _parse_bool(text, where):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _convert(kind, text, where):
    if kind is bool:
        return _parse_bool(text, where)
    try:
        return kind(text.strip())
    except ValueError:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {text!r}") from None


def parse_xi(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    try:
        xs = [float(t) for t in items]
    except ValueError:
        raise ConfigError(f"modes.xi: not a list of numbers: {text!r}") from None
    bad = [x for x in xs if not x > 0]
    if bad:
        raise ConfigError(f"modes.xi: frequencies must be positive, got {bad}")
    return xs


def _auto_float(text, where):
    if text.strip().lower() == "auto":
        return None
    return _convert(float, text, where)


def load_text(text, seed=None, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {sec: {k: d for k, (_, d, _) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{source}: unknown key '{key}' in section [{sec}]")
            kind = SCHEMA[sec][key][0]
            values[sec][key] = _convert(kind, raw, f"{source}: {sec}.{key}")
    if seed is not None:
        values["init"]["seed"] = int(seed)
    return build(values)


def load(path, seed=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return load_text(text, seed, source=str(path))


def build(values):
    g, f, tm, run, ini, an = (values[k] for k in ("grid", "fluid", "time", "run", "init", "analysis"))
    params = FluidParams(**f)
    init = InitSpec(eta=ini["eta"], seed=ini["seed"], band=(ini["band_lo"], ini["band_hi"]),
                    slope=ini["slope"], compatible=ini["compatible"])
    R0 = _auto_float(str(an["R0"]), "analysis.R0")
    sim = SimConfig(n=g["n"], N=g["N"], L=g["L"], dt=tm["dt"], T_end=tm["T_end"],
                    scheme=tm["scheme"], mode=run["mode"], params=params, init=init,
                    record_every=tm["record_every"], cfl=tm["cfl"], R0=R0)
    if run["snapshot_every"] < 0:
        raise ConfigError("run.snapshot_every must be nonnegative")
    window = (_auto_float(str(an["fit_start"]), "analysis.fit_start"),
              _auto_float(str(an["fit_end"]), "analysis.fit_end"))
    return RunConfig(sim, run["snapshot_every"], an["M_report"], window,
                     parse_xi(values["modes"]["xi"]), values)


def default_text():
    """A complete config file listing every key with its default."""
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key, (_, default, doc) in keys.items():
            lines.append(f"# {doc}")
            val = str(default).lower() if isinstance(default, bool) else default
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)
