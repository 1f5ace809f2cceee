"""Command-line entry point ``viscoflux``.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up,
4 verification failure, 5 numerical instability (non-finite values).
"""
import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__, _kernels, config as configmod, diagnostics, lpx, spectral, verify
from .errors import ConfigError
from .model import PerturbationState, PrimitiveState, write_snapshot
from .solver import LinearState, simulate

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_VERIFY, EXIT_INSTABILITY = 0, 2, 3, 4, 5


# ----------------------------------------------------------------- output


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class OutputDir:
    """Atomic writer that remembers every file and its sha256 digest."""

    def __init__(self, path):
        self.path = path
        os.makedirs(path, exist_ok=True)
        self.files = {}

    def write_bytes(self, name, data):
        target = os.path.join(self.path, name)
        fd, tmp = tempfile.mkstemp(dir=self.path, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.files[name] = hashlib.sha256(data).hexdigest()
        return target

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        return self.write_bytes(name, buf.getvalue().encode())

    def write_snapshot(self, name, grid, t, fields, mode):
        fd, tmp = tempfile.mkstemp(dir=self.path, prefix=".tmp-")
        os.close(fd)
        write_snapshot(tmp, grid, t, fields, mode)
        with open(tmp, "rb") as fh:
            data = fh.read()
        os.unlink(tmp)
        return self.write_bytes(name, data)


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _manifest(out, command, cfg, started):
    body = {
        "command": command,
        "version": __version__,
        "seed": cfg.sim.init.seed,
        "config": cfg.resolved(),
        "kernels": _kernels.backend.name,
        "started": started,
        "finished": _now(),
        "outputs": [{"file": k, "sha256": v} for k, v in sorted(out.files.items())],
    }
    data = json.dumps(body, indent=2, sort_keys=True, default=_json_default).encode()
    out.write_bytes("manifest.json", data)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(type(o))


# --------------------------------------------------------------- commands


def partition_rows(part, fields=20, seed=0):
    """Per dyadic annulus ``2^j <= |xi| < 2^(j+1)``: partition-sum deviation,
    off-diagonal block residual and Bernstein ratio."""
    g = part.grid
    kab = g.kabs
    total = part.multipliers.sum(axis=0)
    dev = np.abs(total - 1.0)
    rng = np.random.default_rng(seed)
    cs = [g.fft(g.random_field(rng, band=(1, g.N // 2))) for _ in range(fields)]
    low = part.low_mask()
    rows = []
    J = len(part.shells)
    for i, j in enumerate(part.shells):
        ann = (kab >= 2.0 ** j) & (kab < 2.0 ** (j + 1))
        max_dev = float(dev[ann].max()) if ann.any() else 0.0
        off, bern = 0.0, 0.0
        for c in cs:
            norm = g.l2_hat(c)
            for k in range(J):
                if abs(k - i) >= 2:
                    off = max(off, g.l2_hat(part.multipliers[i] * part.multipliers[k] * c) / norm)
            b = part.multipliers[i] * c
            nb = g.l2_hat(b)
            if nb > 0:
                bern = max(bern, g.l2_hat(1j * g.k * b) / (2.0 ** j * nb))
        rows.append([int(j), 2.0 ** j, 2.0 ** (j + 1), int(ann.sum()), max_dev, off, bern,
                     "low" if low[i] else "high"])
    return rows


PARTITION_COLUMNS = ["j", "annulus_lo", "annulus_hi", "modes", "max_partition_deviation",
                     "max_offdiagonal_residual", "bernstein_ratio", "side"]


def cmd_partition(cfg, out):
    part = cfg.sim.partition()
    rows = partition_rows(part, seed=cfg.sim.init.seed)
    out.write_csv("partition.csv", PARTITION_COLUMNS, rows)
    homo, _ = lpx.partition_residual(part)
    print(f"partition: shells j = {part.j_min}..{part.j_max}, R0 = {part.R0:g}, "
          f"max deviation {homo:.3e}")
    return EXIT_OK


def cmd_modes(cfg, out):
    params = cfg.sim.params
    out.write_csv("modes.csv", spectral.MODE_COLUMNS, spectral.mode_table(cfg.xi, params))
    rows = []
    for which, c, v in (("P", params.alpha, params.mu0), ("Pperp", 1 + params.alpha, params.nu)):
        b = spectral.regime_boundary(params, which)
        pred = 2 * math.sqrt(c) / v
        rows.append([which, b, pred, abs(b - pred)])
    out.write_csv("modes_boundary.csv", ["subsystem", "boundary", "predicted", "abs_error"], rows)
    print(f"modes: {len(cfg.xi)} rows, boundary P at {rows[0][1]!r}")
    return EXIT_OK


def _snapshot_fields(state):
    if isinstance(state, PerturbationState):
        return {"a": state.a, "p": state.p, "tau": state.tau, "u": state.u}
    if isinstance(state, PrimitiveState):
        return {"rho": state.rho, "u": state.u, "F": state.F}
    if isinstance(state, LinearState):
        return {"theta": state.theta, "u": state.u}
    raise TypeError(type(state))


def fit_rows(traj, window):
    """Decay fits of the shell norms of ``Lambda^{-1} theta`` and of its
    high-frequency hybrid norm."""
    part, params, grid = traj.partition, traj.config.params, traj.grid
    times = np.asarray(traj.times)
    low = part.low_mask()
    first_high = part.shells[~low]
    t_visc = 1.0 / (params.mu0 * 4.0 ** float(first_high[0])) if len(first_high) else 0.0
    t0 = t_visc if window[0] is None else window[0]
    t1 = times[-1] if window[1] is None else window[1]
    series = traj.shell_series("theta_m1")
    rows = []

    def fit(label, values, predicted, envelope):
        try:
            f = diagnostics.decay_fit(times, values, window=(t0, t1), envelope=envelope)
            rate, res, w = f.rate, f.residual, f.window
        except ValueError:
            rate, res, w = math.nan, math.nan, (t0, t1)
        gap = abs(rate - predicted) / predicted if predicted > 0 and math.isfinite(rate) else math.nan
        rows.append([label, w[0], w[1], rate, res, predicted, gap])

    kab = grid.kdabs
    for i, j in enumerate(part.shells):
        support = (part.multipliers[i] > 0) & (kab > 0)
        if not support.any():
            continue
        xs = np.unique(np.round(kab[support], 12))
        pred = min(-max(l.real for l in spectral.green_eigs(x, params).eigs_P
                        + spectral.green_eigs(x, params).eigs_Pperp) for x in xs)
        fit(f"theta_shell_{int(j)}", series[:, i], pred, envelope=bool(low[i]))
    fit("theta_high", diagnostics.high_shell_theta_series(traj), min(spectral.theta_damping_rates(params)),
        envelope=False)
    return rows


FIT_COLUMNS = ["shell", "window_start", "window_end", "rate", "residual", "predicted_rate",
               "relative_gap"]


def trajectory_rows(traj, mon_series):
    names = [k for k in ("mean_rho", "min_det", "max_u", "compat_l2") if k in traj.scalars]
    cols = ["t"] + names + list(mon_series)
    rows = []
    for i, t in enumerate(traj.times):
        rows.append([t] + [traj.scalars[k][i] for k in names] + [mon_series[k][i] for k in mon_series])
    return cols, rows


def _monitor_series(traj):
    part, n = traj.partition, traj.grid.n
    w_hyb, _ = lpx.weights(lpx.BesovSpec(n / 2 - 1, n / 2), part)
    out = {}
    if "p" in traj.shells:
        out["pt_hybrid"] = (traj.shell_series("p") + traj.shell_series("tau")) @ w_hyb
    out["u_besov"] = traj.shell_series("u") @ (2.0 ** (part.shells * (n / 2 - 1.0)))
    out["flux_hybrid"] = traj.shell_series("theta_m1") @ w_hyb
    out["E_norm"] = diagnostics.energy_terms(traj)["E_norm"]
    return out


def cmd_simulate(cfg, out):
    sim = cfg.sim
    grid = sim.grid
    every = cfg.snapshot_every

    def on_record(traj, state):
        k = len(traj.times) - 1
        if every and k % every == 0:
            out.write_snapshot(f"snapshot_{k:05d}.vflx", grid, traj.times[-1],
                               _snapshot_fields(state), sim.mode)

    traj = simulate(sim, on_record=on_record)
    if traj.final_state is not None:
        out.write_snapshot("snapshot_final.vflx", grid, traj.times[-1],
                           _snapshot_fields(traj.final_state), sim.mode)
    cols, rows = trajectory_rows(traj, _monitor_series(traj))
    out.write_csv("trajectory.csv", cols, rows)
    shell_rows = [[t, name, int(j), float(v)]
                  for name in sorted(traj.shells)
                  for t, vals in zip(traj.times, traj.shells[name])
                  for j, v in zip(traj.partition.shells, vals)]
    out.write_csv("shells.csv", ["t", "field", "j", "norm"], shell_rows)
    out.write_csv("energy.csv", diagnostics.ENERGY_COLUMNS, diagnostics.energy_table(traj))
    out.write_csv("fits.csv", FIT_COLUMNS, fit_rows(traj, cfg.fit_window))
    mon = diagnostics.theorem_monitor(traj, sim.init.eta, cfg.M_report)
    out.write_csv("monitor.csv", diagnostics.MONITOR_COLUMNS, mon.rows)
    print(f"simulate: mode={sim.mode} status={traj.status} t={traj.times[-1]:.6g} "
          f"samples={len(traj.times)} monitor={'pass' if mon.passed else 'crossing'}")
    if traj.status == "blowup":
        print(f"blow-up: {traj.error}", file=sys.stderr)
        return EXIT_BLOWUP
    if traj.status == "instability":
        print(f"instability: {traj.error}", file=sys.stderr)
        return EXIT_INSTABILITY
    return EXIT_OK


def cmd_verify(cfg, out, suites):
    failed = False
    for name in suites:
        kwargs = {"params": cfg.sim.params} if name in ("spectrum", "linear", "nonlinear") else {}
        checks = verify.run_suite(name, **kwargs)
        out.write_csv(f"verify_{name}.csv", verify.CHECK_COLUMNS, [c.row() for c in checks])
        for c in checks:
            print(f"{c.status.upper():4s} {name}.{c.name} measured={c.measured:.6g} "
                  f"threshold={c.threshold:.6g}")
            failed |= not c.passed
    return EXIT_VERIFY if failed else EXIT_OK


# ------------------------------------------------------------------- main


def build_parser():
    p = argparse.ArgumentParser(prog="viscoflux", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["partition", "modes", "simulate", "verify"])
    p.add_argument("--config", help="INI configuration file (defaults apply when omitted)")
    p.add_argument("--seed", type=int, help="override init.seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--suite", action="append", choices=sorted(verify.SUITES),
                   help="verification suite (repeatable; default: all)")
    p.add_argument("--version", action="version", version=f"viscoflux {__version__}")
    return p


def _apply_threads():
    raw = os.environ.get("VISCOFLUX_THREADS")
    if raw is None:
        return
    try:
        count = int(raw)
        if count < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"VISCOFLUX_THREADS must be a positive integer, got {raw!r}") from None
    _kernels.set_threads(count)


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = _now()
    try:
        _apply_threads()
        if args.config:
            cfg = configmod.load(args.config, seed=args.seed)
        else:
            cfg = configmod.load_text("", seed=args.seed)
        out = OutputDir(args.out)
        if args.command == "partition":
            code = cmd_partition(cfg, out)
        elif args.command == "modes":
            code = cmd_modes(cfg, out)
        elif args.command == "simulate":
            code = cmd_simulate(cfg, out)
        else:
            code = cmd_verify(cfg, out, args.suite or list(verify.SUITES))
        _manifest(out, args.command, cfg, started)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
