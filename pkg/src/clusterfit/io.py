"""Config files (TOML) and the CSV / text artefact formats."""
from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib
import tomli_w

from . import relunet
from .datagen import Dataset


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def dump_config(cfg: dict, path) -> None:
    Path(path).write_bytes(tomli_w.dumps(_plain(cfg)).encode())


def _plain(obj):
    # TOML has no null and no numpy scalars
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def fmt(v) -> str:
    """Deterministic cell text: shortest round-trip repr for floats."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# -- datasets ---------------------------------------------------------------------

def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".toml")


def write_dataset(ds: Dataset, path) -> None:
    """CSV ``subject,obs,x1..xd,y`` plus a TOML sidecar holding the generation meta."""
    header = ["subject", "obs", *[f"x{j + 1}" for j in range(ds.d)], "y"]
    rows = ([i, j, *ds.x[i, j], ds.y[i, j]] for i in range(ds.n) for j in range(ds.m))
    write_csv(path, header, rows)
    dump_config({"dataset": {"n": ds.n, "m": ds.m, "d": ds.d, **ds.meta}}, sidecar_path(path))


def read_dataset(path) -> Dataset:
    header, rows = read_csv(path)
    if header[:2] != ["subject", "obs"] or header[-1] != "y":
        raise ValueError(f"{path}: expected header subject,obs,x1..xd,y")
    arr = np.array(rows, dtype=float)
    n = int(arr[:, 0].max()) + 1
    m = int(arr[:, 1].max()) + 1
    d = arr.shape[1] - 3
    x = np.empty((n, m, d))
    y = np.empty((n, m))
    idx = arr[:, :2].astype(int)
    x[idx[:, 0], idx[:, 1]] = arr[:, 2:2 + d]
    y[idx[:, 0], idx[:, 1]] = arr[:, -1]
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = load_config(side).get("dataset", {})
        for key in ("n", "m", "d"):
            meta.pop(key, None)
    return Dataset(x, y, meta)


def write_net(net: relunet.MLP, path) -> None:
    Path(path).write_text(relunet.to_text(net))


def read_net(path) -> relunet.MLP:
    return relunet.from_text(Path(path).read_text())


def write_spline(model, path) -> None:
    lines = ["clusterfit-spline 1", f"r {model.r}", f"k {model.k}", f"d {model.d}",
             f"box {model.box:.17g}", " ".join(f"{v:.17g}" for v in model.coef)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_spline(path):
    from .splines import SplineModel

    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or rows[0][0] != "clusterfit-spline":
        raise ValueError(f"{path}: not a clusterfit spline file")
    head = {r[0]: r[1] for r in rows[1:5]}
    coef = np.array(rows[5] if len(rows) > 5 else [], dtype=float)
    return SplineModel(int(head["r"]), int(head["k"]), int(head["d"]), coef, float(head["box"]))


def write_complexity(report, path) -> None:
    """``r,phi_hat,stderr`` rows with the fixed point echoed in a footer row."""
    fp = report.fixed_point if report.fixed_point is not None else "none"
    write_csv(path, ("r", "phi_hat", "stderr"), report.rows() + [("fixed_point", fp, "")])
