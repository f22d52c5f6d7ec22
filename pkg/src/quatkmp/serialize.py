"""JSON/CSV (de)serialization of demos, models and trajectories.

JSON floats are written with ``repr`` precision, so arrays survive a
write/read round trip bit for bit.  CSV uses 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import kmp
from .gmm import GaussianMixture, Reference
from .highdim import PoseDemo, PoseModel
from .orient import OrientationModel, OrientationTrajectory
from .quat import QuatDemo

MODEL_FORMAT = "quatkmp-model"
DEMO_FORMAT = "quatkmp-demos"


def _arr(x) -> list:
    return np.asarray(x, dtype=float).tolist()


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# demos


def demos_to_dict(demos) -> dict:
    demos = list(demos)
    if demos and isinstance(demos[0], PoseDemo):
        items = [
            {"inputs": _arr(d.inputs), "positions": _arr(d.positions), "quats": _arr(d.quats)}
            for d in demos
        ]
        return {"format": DEMO_FORMAT, "kind": "pose", "demos": items}
    items = [{"times": _arr(d.times), "quats": _arr(d.quats)} for d in demos]
    return {"format": DEMO_FORMAT, "kind": "quat", "demos": items}


def demos_from_dict(data: dict) -> list:
    if data.get("format") != DEMO_FORMAT:
        raise ValueError("not a demonstration file")
    if data.get("kind") == "pose":
        return [PoseDemo(d["inputs"], d["positions"], d["quats"]) for d in data["demos"]]
    return [QuatDemo(d["times"], d["quats"]) for d in data["demos"]]


# models


def _kernel_to_dict(spec: kmp.KernelSpec) -> dict:
    return {"kind": spec.kind, "length": spec.length, "period": spec.period, "delta": spec.delta}


def _kmp_to_dict(m: kmp.KmpModel) -> dict:
    return {
        "train_inputs": _arr(m.train_inputs),
        "kernel": _kernel_to_dict(m.kernel),
        "layout": {"kind": m.layout.kind, "orders": list(m.layout.orders), "dim": m.layout.dim},
        "lam": m.lam,
        "lam_a": m.lam_a,
        "dual_coeffs": _arr(m.dual_coeffs),
        "rcond": m.rcond,
    }


def _kmp_from_dict(d: dict) -> kmp.KmpModel:
    k = d["kernel"]
    spec = kmp.KernelSpec(k["kind"], k["length"], k["period"], k["delta"])
    lay = d["layout"]
    layout = kmp.BlockLayout(lay["kind"], tuple(lay["orders"]), lay["dim"])
    return kmp.KmpModel(
        np.asarray(d["train_inputs"], dtype=float),
        spec,
        layout,
        d["lam"],
        np.asarray(d["dual_coeffs"], dtype=float),
        d["lam_a"],
        d.get("rcond", float("nan")),
    )


def _gmm_to_dict(g: GaussianMixture | None):
    if g is None:
        return None
    return {
        "priors": _arr(g.priors),
        "means": _arr(g.means),
        "covs": _arr(g.covs),
        "input_dim": g.input_dim,
    }


def _gmm_from_dict(d):
    if d is None:
        return None
    return GaussianMixture(d["priors"], d["means"], d["covs"], d["input_dim"])


def _ref_to_dict(r: Reference) -> dict:
    return {"inputs": _arr(r.inputs), "means": _arr(r.means), "covs": _arr(r.covs)}


def _ref_from_dict(d: dict) -> Reference:
    return Reference(d["inputs"], d["means"], d["covs"])


def model_to_dict(model, mode: str) -> dict:
    out = {
        "format": MODEL_FORMAT,
        "mode": mode,
        "q_a": _arr(model.q_a),
        "kmp": _kmp_to_dict(model.kmp),
        "gmm": _gmm_to_dict(model.gmm),
        "reference": _ref_to_dict(model.reference),
    }
    if isinstance(model, PoseModel):
        out["input_mean"] = _arr(model.input_mean)
        out["input_scale"] = _arr(model.input_scale)
    else:
        out["delta_t"] = model.delta_t
        out["jerk"] = model.jerk
    return out


def model_from_dict(d: dict):
    """Returns ``(model, mode)``."""
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a model file")
    common = dict(
        q_a=np.asarray(d["q_a"], dtype=float),
        kmp=_kmp_from_dict(d["kmp"]),
        gmm=_gmm_from_dict(d["gmm"]),
        reference=_ref_from_dict(d["reference"]),
    )
    if d["mode"] == "highdim":
        model = PoseModel(
            input_mean=np.asarray(d["input_mean"], dtype=float),
            input_scale=np.asarray(d["input_scale"], dtype=float),
            **common,
        )
    else:
        model = OrientationModel(delta_t=d["delta_t"], jerk=d["jerk"], **common)
    return model, d["mode"]


# trajectories

QUAT_COLS = ["qw", "qx", "qy", "qz"]
OMEGA_COLS = ["wx", "wy", "wz"]
ZETA_COLS = ["zeta_x", "zeta_y", "zeta_z"]


def trajectory_table(traj: OrientationTrajectory) -> tuple[list, np.ndarray]:
    cols = ["t"] + QUAT_COLS + OMEGA_COLS
    parts = [np.asarray(traj.times)[:, None], traj.quats, traj.omegas]
    if traj.zetas is not None:
        cols += ZETA_COLS
        parts.append(traj.zetas)
    return cols, np.hstack(parts)


def pose_table(inputs, positions, quats) -> tuple[list, np.ndarray]:
    inputs = np.atleast_2d(inputs)
    cols = [f"s{i}" for i in range(inputs.shape[1])] + ["px", "py", "pz"] + QUAT_COLS
    return cols, np.hstack([inputs, positions, quats])


def table_to_text(cols, rows, fmt: str = "csv") -> str:
    rows = np.atleast_2d(rows)
    if fmt == "json":
        return dumps({"columns": list(cols), "rows": rows.tolist()})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow(["%.17g" % v for v in row])
    return buf.getvalue()


def read_table(path) -> tuple[list, np.ndarray]:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return list(data["columns"]), np.asarray(data["rows"], dtype=float).reshape(
            -1, len(data["columns"])
        )
    reader = csv.reader(io.StringIO(text))
    cols = next(reader)
    rows = [[float(v) for v in r] for r in reader if r]
    return cols, np.asarray(rows, dtype=float).reshape(-1, len(cols))


def table_to_trajectory(cols, rows) -> OrientationTrajectory:
    idx = {c: i for i, c in enumerate(cols)}
    missing = [c for c in ["t"] + QUAT_COLS + OMEGA_COLS if c not in idx]
    if missing:
        raise ValueError(f"trajectory table lacks columns {missing}")
    pick = lambda names: rows[:, [idx[c] for c in names]]  # noqa: E731
    zetas = pick(ZETA_COLS) if all(c in idx for c in ZETA_COLS) else None
    return OrientationTrajectory(rows[:, idx["t"]], pick(QUAT_COLS), pick(OMEGA_COLS), zetas)
