"""CSV reading and writing.

Every file written here starts with a ``# config:`` comment line followed by
a header row. Floats are written with ``repr`` precision so identical inputs
give byte-identical files.
"""
import csv
import os
import tempfile

import numpy as np

from .errors import InputError
from .grid import Grid1D, GridFunction
from .recon import LocalData


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def config_line(config):
    return "# config: " + " ".join(f"{k}={config[k]}" for k in sorted(config))


def write_csv(path, header, rows, config=None):
    """Write ``rows`` under ``header`` atomically (temp file + rename)."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            if config is not None:
                fh.write(config_line(config) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_value(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_csv(path):
    """Return ``(header, rows as float array)``; ``#`` lines are skipped."""
    try:
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.lstrip().startswith("#") and ln.strip()]
    except OSError as exc:
        raise InputError("config-invalid", f"cannot read {path}: {exc}") from None
    if not lines:
        raise InputError("config-invalid", f"{path} has no header")
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    try:
        data = np.array([[float(v) if v.strip() else np.nan for v in row] for row in reader])
    except ValueError as exc:
        raise InputError("config-invalid", f"{path}: {exc}") from None
    return header, data.reshape(-1, len(header))


def _uniform_grid(x, path):
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise InputError("config-invalid", f"{path}: x must be strictly increasing")
    g = Grid1D(x[0], x[-1], x.size)
    if np.max(np.abs(g.nodes - x)) > 1e-9 * g.length:
        raise InputError("config-invalid", f"{path}: x must be uniformly spaced")
    return g


def read_local_data(path):
    """LocalData from a CSV with columns ``x, u, lap`` on a uniform grid."""
    header, data = read_csv(path)
    try:
        cols = [header.index(c) for c in ("x", "u", "lap")]
    except ValueError:
        raise InputError("config-invalid", f"{path}: need columns x, u, lap; got {header}") from None
    x, u, lap = (data[:, c] for c in cols)
    g = _uniform_grid(x, path)
    return LocalData(GridFunction(g, u), GridFunction(g, lap))


def write_local_data(path, data, config=None):
    rows = zip(data.grid.nodes, data.u_local.values, data.lap_local.values)
    return write_csv(path, ["x", "u", "lap"], rows, config)


def write_reconstruction(path, report, config=None, truth=None):
    u = report.reconstructed
    if truth is None:
        return write_csv(path, ["x", "u_reconstructed"], zip(u.grid.nodes, u.values), config)
    return write_csv(path, ["x", "u_reconstructed", "u_true"],
                     zip(u.grid.nodes, u.values, truth.values), config)


def flatten_diagnostics(diag, prefix=""):
    """``{'a': {'b': 1}}`` -> ``[('a', 'b', 1)]``; top-level scalars get key ``value``."""
    rows = []
    for k in diag:
        v = diag[k]
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            for kk in v:
                rows.append((name, kk, v[kk]))
        else:
            rows.append((name, "value", v))
    return rows


def write_diagnostics(path, diag, config=None):
    return write_csv(path, ["stage", "key", "value"], flatten_diagnostics(diag), config)
