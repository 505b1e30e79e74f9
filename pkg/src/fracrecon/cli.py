"""Command-line front end.

Each command takes a flat ``key=value`` config (file and/or ``--set``
overrides), validates all of it before computing, and writes CSV files into
``--out``. Exit status: 0 on success, 2 for configuration errors, 3 for
numerical failures; failures print one JSON line on stderr and remove any
file the command had already written.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io
from .errors import FracReconError, InputError, NumericalFailure
from .fraclap import FracOrder, apply_spectral, assemble_fd_matrix
from .grid import Grid1D, GridFunction, sample
from .greens import BallSpec, ExteriorFunction, eval_ug
from .kelvin import kelvin_identity_residual
from .profiles import PROFILES, get_profile, heat_gaussian
from .recon import (LocalData, MollifierSpec, green_sweep, heat_reconstruct, kelvin_local_data,
                    reconstruct_green, reconstruct_kelvin, recover_potential)

log = logging.getLogger("fracrecon")

# ---------------------------------------------------------------------------
# config schema: key -> (parser, default, check, message)


def _floats(v):
    return [float(x) for x in str(v).split(",") if x.strip()]


def _ints(v):
    return [int(x) for x in str(v).split(",") if x.strip()]


def _strs(v):
    return [x.strip() for x in str(v).split(",") if x.strip()]


def _open01(x):
    return 0.0 < x < 1.0


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _alphas(xs):
    return len(xs) > 0 and all(0.0 < a < 2.0 for a in xs)


def _nonempty_pos(xs):
    return len(xs) > 0 and all(x > 0 for x in xs)


def _profiles(xs):
    return len(xs) > 0 and all(p in PROFILES for p in xs)


def _solver(maxit):
    return {
        "tol": (float, 1e-8, _pos, "must be positive"),
        "maxit": (int, maxit, lambda n: n >= 1, "must be an integer >= 1"),
        "restart": (int, 50, lambda n: n >= 1, "must be an integer >= 1"),
    }


SCHEMAS = {
    "laplacian": {
        "profile": (str, "gaussian", lambda p: p in PROFILES, f"one of {sorted(PROFILES)}"),
        "s": (float, 0.5, _open01, "must lie in (0, 1)"),
        "N": (int, 1024, lambda n: n >= 2, "must be an integer >= 2"),
        "a": (float, -10.0, None, ""),
        "b": (float, 10.0, None, ""),
    },
    "kelvin-table": {
        "profiles": (_strs, "gaussian,sinc", _profiles, f"comma list from {sorted(PROFILES)}"),
        "alphas": (_floats, "0.2,0.6,1,1.5,1.9", _alphas, "nonempty comma list inside (0, 2)"),
        "N": (int, 2000, lambda n: n >= 11, "must be an integer >= 11"),
        "B": (float, 5.0, lambda b: b > 1.0, "must exceed 1"),
        "width": (float, 0.5, _pos, "must be positive"),
        "method": (str, "fd", lambda m: m in ("fd", "spectral"), "fd or spectral"),
    },
    "recon-kelvin": {
        "profile": (str, "sinc", lambda p: p in PROFILES, f"one of {sorted(PROFILES)}"),
        "Ns": (_ints, "100,150,300,420,600", lambda xs: len(xs) > 0 and min(xs) >= 20,
               "nonempty comma list of integers >= 20"),
        "alphas": (_floats, "0.2,0.6,1,1.5,1.9", _alphas, "nonempty comma list inside (0, 2)"),
        "B": (float, 5.0, lambda b: b > 1.0, "must exceed 1"),
        "lam": (float, 1e-4, _pos, "must be positive"),
        "support_radius": (float, 1.5, lambda r: r > 1.0, "must exceed 1"),
        "fourier_floor": (float, 1e-8, _pos, "must be positive"),
        "penalty": (str, "as-printed", lambda p: p in ("as-printed", "half-order"),
                    "as-printed or half-order"),
        "recon_N": (int, 420, lambda n: n >= 20, "must be an integer >= 20"),
        "recon_alpha": (float, 0.6, lambda a: 0.0 < a < 2.0, "must lie in (0, 2)"),
        **_solver(1000),
    },
    "recon-green": {
        "s": (float, 0.5, _open01, "must lie in (0, 1)"),
        "r": (float, 1.0, _pos, "must be positive"),
        "N_ball": (int, 81, lambda n: n >= 5, "must be an integer >= 5"),
        "R_out": (float, 10.0, None, ""),
        "N_radial": (int, 361, lambda n: n >= 2, "must be an integer >= 2"),
        "exterior": (str, "exp", lambda e: e in EXTERIOR, "one of const, exp, lorentz"),
        "lambdas": (_floats, "1e-10,1e-8,1e-6,1e-4,1e-2", _nonempty_pos,
                    "nonempty comma list of positive numbers"),
        "penalty": (str, "h1", lambda p: p in ("identity", "gradient", "h1"),
                    "identity, gradient or h1"),
        "noise": (float, 0.0, _nonneg, "must be >= 0"),
        # the Fredholm normal equations need more Krylov steps than the library default
        **_solver(5000),
    },
    "heat-demo": {
        "s": (float, 0.5, _open01, "must lie in (0, 1)"),
        "r": (float, 1.0, _pos, "must be positive"),
        "N_ball": (int, 41, lambda n: n >= 5, "must be an integer >= 5"),
        "slices": (int, 4, None, ""),
        "t0": (float, 0.5, _nonneg, "must be >= 0"),
        "dt": (float, 0.05, _pos, "must be positive"),
        "omega": (float, 3.0, None, ""),
        "N_omega": (int, 121, lambda n: n >= 2, "must be an integer >= 2"),
        "lam": (float, 1e-4, _pos, "must be positive"),
        "penalty": (str, "h1", lambda p: p in ("identity", "gradient", "h1"),
                    "identity, gradient or h1"),
        "noise": (float, 0.0, _nonneg, "must be >= 0"),
        # the Fredholm normal equations need more Krylov steps than the library default
        **_solver(5000),
    },
    "potential": {
        "data": (str, "", None, ""),
        "a": (float, -3.0, None, ""),
        "b": (float, 3.0, None, ""),
        "N": (int, 301, lambda n: n >= 2, "must be an integer >= 2"),
        "floor": (float, 1e-8, _nonneg, "must be >= 0"),
        "floors": (_floats, "1e-12,1e-8,1e-4,1e-2", lambda xs: all(x >= 0 for x in xs),
                   "comma list of numbers >= 0"),
        "u": (str, "bump", lambda p: p in ("bump", "wave"), "bump or wave"),
    },
}

EXTERIOR = {
    "exp": lambda y, r: np.exp(-(np.abs(y) - r)) * (1.0 + 0.3 * np.sign(y)),
    "lorentz": lambda y, r: 1.0 / (1.0 + y * y),
    "const": lambda y, r: np.full_like(y, 2.0),
}

POTENTIAL_U = {
    "bump": lambda x: (1.0 + 0.5 * np.cos(3.0 * x)) * np.exp(-0.25 * x * x),
    "wave": lambda x: np.sin(2.0 * x) + 0.1,
}


def parse_config_file(path):
    cfg = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError("config-invalid", f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError("config-invalid", f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        cfg[k.strip()] = v.strip()
    return cfg


def validate(command, raw):
    """Typed config for ``command``; raises ``config-invalid`` naming the key."""
    schema = SCHEMAS[command]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise InputError("config-invalid", f"unknown key(s) for {command}: {', '.join(unknown)}")
    cfg = {}
    for key, (parse, default, check, msg) in schema.items():
        val = raw.get(key, default)
        try:
            val = parse(val)
        except (TypeError, ValueError):
            raise InputError("config-invalid", f"{key}={raw.get(key)!r}: cannot parse") from None
        if isinstance(val, float) and not np.isfinite(val):
            raise InputError("config-invalid", f"{key}={val}: must be finite")
        if check is not None and not check(val):
            raise InputError("config-invalid", f"{key}={raw.get(key, default)}: {msg}")
        cfg[key] = val
    _cross_checks(command, cfg)
    return cfg


def _cross_checks(command, cfg):
    def bad(key, msg):
        raise InputError("config-invalid", f"{key}={cfg[key]}: {msg}")

    if command in ("laplacian", "potential") and not cfg["a"] < cfg["b"]:
        bad("b", "need a < b")
    if command == "recon-green" and not cfg["R_out"] > cfg["r"]:
        bad("R_out", "must exceed r")
    if command == "recon-green" and sorted(cfg["lambdas"]) != cfg["lambdas"]:
        bad("lambdas", "must be sorted ascending")
    if command == "heat-demo":
        if cfg["slices"] < 3:
            raise InputError("insufficient-slices", f"slices={cfg['slices']}: need at least 3")
        if not cfg["omega"] > cfg["r"]:
            bad("omega", "must exceed r")
    if command == "recon-kelvin" and cfg["support_radius"] >= cfg["B"] - 1.0:
        bad("support_radius", "probes need B > 1 + support_radius")


def _config_record(cfg, extra):
    rec = {k: (",".join(format(x) for x in v) if isinstance(v, list) else v)
           for k, v in cfg.items()}
    rec.update(extra)
    return rec


# ---------------------------------------------------------------------------
# commands; each returns the list of files written


def cmd_laplacian(cfg, out, rec, **_):
    order = FracOrder(cfg["s"])
    g = Grid1D(cfg["a"], cfg["b"], cfg["N"])
    f, _ = get_profile(cfg["profile"])
    u = sample(f, g)
    fd = assemble_fd_matrix(g, order) @ u.values
    sp = apply_spectral(u, order).values
    path = os.path.join(out, "laplacian.csv")
    io.write_csv(path, ["x", "fd", "spectral", "difference"],
                 zip(g.nodes, fd, sp, fd - sp), rec)
    return [path]


def kelvin_table_rows(profile, alphas, N, B, width=0.5, method="fd"):
    g = Grid1D(-B, B, N)
    f, _ = get_profile(profile)
    u = sample(f, g)
    rows = []
    for a in alphas:
        rel, linf = kelvin_identity_residual(u, FracOrder.from_alpha(a), g, g, width=width,
                                             method=method)
        rows.append((a, rel, linf))
    return rows


def cmd_kelvin_table(cfg, out, rec, **_):
    paths = []
    for prof in cfg["profiles"]:
        rows = kelvin_table_rows(prof, cfg["alphas"], cfg["N"], cfg["B"], cfg["width"],
                                 cfg["method"])
        path = os.path.join(out, f"kelvin_table_{prof}.csv")
        io.write_csv(path, ["alpha", "rel_l2", "abs_linf"], rows, rec)
        paths.append(path)
    return paths


def _check_supercritical_list(alphas, allow):
    if not allow and any(a >= 1.0 for a in alphas):
        raise InputError("config-invalid",
                         "alpha >= n = 1 violates the continuation theorem's hypothesis; "
                         "pass --allow-supercritical to run it anyway")


def _solver_args(cfg):
    return {k: cfg[k] for k in ("tol", "maxit", "restart")}


def cmd_recon_kelvin(cfg, out, rec, allow_supercritical=False, **_):
    _check_supercritical_list(cfg["alphas"] + [cfg["recon_alpha"]], allow_supercritical)
    moll = MollifierSpec(cfg["support_radius"], cfg["fourier_floor"])
    B = cfg["B"]

    def run(N, alpha):
        order = FracOrder.from_alpha(alpha)
        full = Grid1D(-B, B, N)
        data, truth = kelvin_local_data(cfg["profile"], full, order)
        return reconstruct_kelvin(data, full, order, moll, cfg["lam"], truth=truth,
                                  allow_supercritical=allow_supercritical,
                                  penalty=cfg["penalty"], **_solver_args(cfg)), truth

    table = []
    for N in cfg["Ns"]:
        table.append([N] + [run(N, a)[0].rel_l2_error for a in cfg["alphas"]])
    rep, truth = run(cfg["recon_N"], cfg["recon_alpha"])
    paths = [os.path.join(out, n) for n in ("reconstruction.csv", "error_table.csv",
                                            "diagnostics.csv")]
    io.write_reconstruction(paths[0], rep, rec, truth)
    io.write_csv(paths[1], ["N"] + [f"alpha_{a:g}" for a in cfg["alphas"]], table, rec)
    io.write_diagnostics(paths[2], dict(rep.stage_diagnostics, error=rep.rel_l2_error), rec)
    return paths


def green_problem(cfg, rng):
    """Manufactured s-harmonic data on the ball from a named exterior profile."""
    ball = BallSpec(cfg["r"], FracOrder(cfg["s"]))
    r = cfg["r"]
    bgrid = Grid1D(-r, r, cfg["N_ball"])
    radial = Grid1D(r, cfg["R_out"], cfg["N_radial"])
    f = EXTERIOR[cfg["exterior"]]
    truth = ExteriorFunction.sample(lambda y: f(y, r), radial)
    x = bgrid.nodes
    inner = np.abs(x) < r * (1 - 1e-12)
    u = np.empty_like(x)
    u[inner] = eval_ug(truth, x[inner], ball)
    u[~inner] = f(x[~inner], r)
    if cfg["noise"] > 0:
        u = u + cfg["noise"] * np.sqrt(np.mean(u ** 2)) * rng.standard_normal(u.size)
    data = LocalData(GridFunction(bgrid, u), GridFunction(bgrid, np.zeros_like(u)))
    return data, radial, ball, truth


def cmd_recon_green(cfg, out, rec, rng=None, **_):
    data, radial, ball, truth = green_problem(cfg, rng)
    rows, reps = green_sweep(data, radial, ball, cfg["lambdas"], penalty=cfg["penalty"],
                             truth=truth, **_solver_args(cfg))
    best = min(range(len(rows)), key=lambda i: rows[i][3])
    rep = reconstruct_green(data, radial, ball, cfg["lambdas"][best], penalty=cfg["penalty"],
                            truth=truth, **_solver_args(cfg))
    paths = [os.path.join(out, n) for n in ("reconstruction.csv", "lcurve.csv",
                                            "diagnostics.csv")]
    io.write_reconstruction(paths[0], rep, rec)
    io.write_csv(paths[1], ["lambda", "residual", "penalty", "error"], rows, rec)
    io.write_diagnostics(paths[2], dict(rep.stage_diagnostics, lam=cfg["lambdas"][best],
                                        error=rep.rel_l2_error), rec)
    return paths


def heat_problem(cfg, rng):
    s, r = cfg["s"], cfg["r"]
    ball = BallSpec(r, FracOrder(s))
    bgrid = Grid1D(-r, r, cfg["N_ball"])
    omega = Grid1D(-cfg["omega"], cfg["omega"], cfg["N_omega"])
    times = cfg["t0"] + cfg["dt"] * np.arange(cfg["slices"])
    slices = []
    for t in times:
        v = heat_gaussian(bgrid.nodes, t, s)
        if cfg["noise"] > 0:
            v = v + cfg["noise"] * np.sqrt(np.mean(v ** 2)) * rng.standard_normal(v.size)
        slices.append(GridFunction(bgrid, v))
    truths = [GridFunction(omega, heat_gaussian(omega.nodes, t, s)) for t in times]
    return slices, times, omega, ball, truths


def cmd_heat_demo(cfg, out, rec, rng=None, **_):
    slices, times, omega, ball, truths = heat_problem(cfg, rng)
    reps = heat_reconstruct(slices, cfg["dt"], omega, ball, cfg["lam"], penalty=cfg["penalty"],
                            truths=truths, **_solver_args(cfg))
    paths = [os.path.join(out, n) for n in ("reconstruction.csv", "error.csv", "diagnostics.csv")]
    rows = [(t, x, v, w) for t, rep, tr in zip(times, reps, truths)
            for x, v, w in zip(omega.nodes, rep.reconstructed.values, tr.values)]
    io.write_csv(paths[0], ["t", "x", "u_reconstructed", "u_true"], rows, rec)
    io.write_csv(paths[1], ["slice", "t", "rel_l2"],
                 [(k, t, rep.rel_l2_error) for k, (t, rep) in enumerate(zip(times, reps))], rec)
    diag = []
    for k, rep in enumerate(reps):
        diag += [(f"slice{k}.{st}", key, val) for st, key, val in
                 io.flatten_diagnostics(rep.stage_diagnostics)]
    io.write_csv(paths[2], ["stage", "key", "value"], diag, rec)
    return paths


def potential_problem(cfg):
    if cfg["data"]:
        d = io.read_local_data(cfg["data"])
        return d.u_local, d.lap_local, None
    g = Grid1D(cfg["a"], cfg["b"], cfg["N"])
    u = sample(POTENTIAL_U[cfg["u"]], g)
    q = 1.0 + g.nodes ** 2
    return u, GridFunction(g, -q * u.values), q


def cmd_potential(cfg, out, rec, **_):
    u, lap, q_true = potential_problem(cfg)
    q = recover_potential(u, lap, cfg["floor"])
    paths = [os.path.join(out, n) for n in ("potential.csv", "error.csv", "diagnostics.csv")]
    cols = ["x", "u", "lap", "q", "known"] + ([] if q_true is None else ["q_true"])
    rows = []
    for i, x in enumerate(u.grid.nodes):
        row = [x, u.values[i], lap.values[i], q.values[i] if q.known[i] else None, q.known[i]]
        rows.append(row + ([] if q_true is None else [q_true[i]]))
    io.write_csv(paths[0], cols, rows, rec)
    err_rows = []
    for fl in cfg["floors"]:
        try:
            qf = recover_potential(u, lap, fl)
        except NumericalFailure:
            err_rows.append((fl, u.grid.N, None))
            continue
        e = None if q_true is None else float(np.max(np.abs(qf.values[qf.known] - q_true[qf.known])))
        err_rows.append((fl, qf.n_masked, e))
    io.write_csv(paths[1], ["floor", "masked", "max_abs_error"], err_rows, rec)
    io.write_diagnostics(paths[2], {"potential": {"masked": q.n_masked, "nodes": u.grid.N}}, rec)
    return paths


COMMANDS = {
    "laplacian": cmd_laplacian,
    "kelvin-table": cmd_kelvin_table,
    "recon-kelvin": cmd_recon_kelvin,
    "recon-green": cmd_recon_green,
    "heat-demo": cmd_heat_demo,
    "potential": cmd_potential,
}


def build_parser():
    p = argparse.ArgumentParser(prog="fracrecon", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key=value file")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-supercritical", action="store_true",
                   help="permit alpha >= n in the Kelvin route")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _fail(code, message, status):
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    written = []
    try:
        raw = parse_config_file(args.config) if args.config else {}
        for item in args.set:
            if "=" not in item:
                raise InputError("config-invalid", f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        cfg = validate(args.command, raw)
        rec = _config_record(cfg, {"command": args.command, "seed": args.seed,
                                   "allow_supercritical": int(args.allow_supercritical)})
        os.makedirs(args.out, exist_ok=True)
        before = set(os.listdir(args.out))
        rng = np.random.default_rng(args.seed)
        try:
            written = COMMANDS[args.command](cfg, args.out, rec, rng=rng,
                                             allow_supercritical=args.allow_supercritical)
        except BaseException:
            for name in set(os.listdir(args.out)) - before:
                os.unlink(os.path.join(args.out, name))
            raise
    except InputError as exc:
        return _fail(exc.code, str(exc), 2)
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _fail(getattr(exc, "code", "numerical-failure"), str(exc), 3)
    except FracReconError as exc:  # pragma: no cover
        return _fail(exc.code, str(exc), 3)
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
