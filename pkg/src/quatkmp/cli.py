"""Command-line front end.

Exit codes: 0 success, 2 configuration/input error, 3 numerical failure,
4 violated orientation assumption (hemisphere alignment or log-map domain).
Set ``QUATKMP_LOG`` to ``error``, ``info`` or ``debug`` for diagnostics.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import highdim, kmp, orient, quat, serialize
from .errors import (
    AlignmentError,
    ConditionError,
    DimError,
    DomainError,
    FitError,
    LayoutError,
    LengthError,
    SolveError,
)

log = logging.getLogger("quatkmp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSUMPTION = 0, 2, 3, 4

MODES = ("time", "time_accel", "rhythmic", "highdim")
MODE_DEFAULTS = {
    "time": {"kernel": {"type": "gaussian", "length": 0.01}, "lambda": 1.0},
    "time_accel": {"kernel": {"type": "gaussian", "length": 0.01}, "lambda": 1.0},
    "rhythmic": {"kernel": {"type": "periodic", "length": 0.4, "period": 10.0}, "lambda": 10.0},
    "highdim": {"kernel": {"type": "gaussian", "length": 1.0}, "lambda": 2.0},
}
DEFAULT_KEYS = [[1.0, 0.0, 0.0, 0.0], [0.7, 0.4, 0.5, 0.3]]
DEFAULT_LAMBDA_A = [10.0, 100.0, 1000.0, 10000.0, 100000.0]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "time"
    kernel: dict | None = None
    delta: float = 1e-4
    lam: float | None = None
    lam_a: float = 0.0
    jerk: bool = False
    C: int = 5
    grid_N: int | None = None
    sample_N: int | None = None
    seed: int = 0
    q_a: list | None = None
    delta_t: float = orient.DEFAULT_DELTA_T
    desired_points: list = field(default_factory=list)
    gen: dict = field(default_factory=dict)
    rollout: dict = field(default_factory=dict)
    lambda_a_values: list = field(default_factory=lambda: list(DEFAULT_LAMBDA_A))
    theorem: dict = field(default_factory=dict)

    # JSON key -> attribute
    ALIASES = {"lambda": "lam", "lambda_a": "lam_a"}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = cls.ALIASES.get(key, key)
            if name not in names:
                raise ConfigError(f"unknown config field {key!r}")
            kwargs[name] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"field 'mode': expected one of {MODES}, got {self.mode!r}")
        defaults = MODE_DEFAULTS[self.mode]
        if self.kernel is None:
            self.kernel = dict(defaults["kernel"])
        if self.lam is None:
            self.lam = defaults["lambda"]
        kind = self.kernel.get("type")
        if self.mode == "rhythmic" and kind != "periodic":
            raise ConfigError("field 'kernel': rhythmic mode requires a periodic kernel")
        if self.mode in ("time", "time_accel", "highdim") and kind != "gaussian":
            raise ConfigError(f"field 'kernel': {self.mode} mode requires a gaussian kernel")
        if self.mode == "time_accel" and not self.lam_a > 0:
            raise ConfigError("field 'lambda_a': time_accel mode needs lambda_a > 0")
        for name in ("lam", "delta", "delta_t"):
            if not _is_number(getattr(self, name)) or not getattr(self, name) > 0:
                raise ConfigError(f"field {name!r} must be a positive number")
        if not _is_number(self.lam_a) or self.lam_a < 0:
            raise ConfigError("field 'lambda_a' must be a non-negative number")
        for name in ("C", "seed"):
            if not isinstance(getattr(self, name), int):
                raise ConfigError(f"field {name!r} must be an integer")
        if self.C < 1:
            raise ConfigError("field 'C' must be >= 1")
        for name in ("grid_N", "sample_N"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"field {name!r} must be a positive integer")
        if self.q_a is not None and (len(self.q_a) != 4 or not any(self.q_a)):
            raise ConfigError("field 'q_a' must be a non-zero 4-vector [w, x, y, z]")
        if not isinstance(self.desired_points, list):
            raise ConfigError("field 'desired_points' must be a list")
        try:
            self.kernel_spec()
        except (LayoutError, TypeError, KeyError) as exc:
            raise ConfigError(f"field 'kernel': {exc}") from None

    def kernel_spec(self) -> kmp.KernelSpec:
        k = self.kernel
        if k.get("type") == "periodic":
            return kmp.KernelSpec.periodic(float(k["length"]), float(k["period"]), self.delta)
        return kmp.KernelSpec.gaussian(float(k["length"]), self.delta)

    def q_a_or_default(self):
        if self.q_a is not None:
            return np.asarray(self.q_a, dtype=float)
        return quat.IDENTITY if self.mode == "highdim" else None


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig.from_dict({})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return RunConfig.from_dict(data)


def _cov_from(item: dict, where: str) -> np.ndarray:
    if "cov" in item:
        cov = np.asarray(item["cov"], dtype=float)
        if cov.shape != (6, 6):
            raise ConfigError(f"{where}: 'cov' must be 6x6")
        return cov
    return float(item.get("sigma", orient.DEFAULT_DESIRED_COV)) * np.eye(6)


def desired_states(cfg: RunConfig) -> list:
    """Desired points from the config, typed for the configured mode."""
    out = []
    for h, item in enumerate(cfg.desired_points):
        where = f"desired_points[{h}]"
        try:
            cov = _cov_from(item, where)
            if cfg.mode == "highdim":
                out.append(highdim.DesiredPose(item["s"], item["p"], item["q"], cov))
            else:
                out.append(
                    orient.DesiredQuatState(item["t"], item["q"], item.get("omega", [0, 0, 0]), cov)
                )
        except KeyError as exc:
            raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from None
        except (AlignmentError, DomainError):
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return out


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        serialize.write_text(out, text)


def _read_demos(path):
    try:
        return serialize.demos_from_dict(serialize.read_json(path))
    except (AlignmentError, DomainError):
        raise
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load demonstrations from {path}: {exc}") from None


def _read_model(path):
    try:
        return serialize.model_from_dict(serialize.read_json(path))
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load model from {path}: {exc}") from None


# commands


def generate(cfg: RunConfig) -> list:
    g = dict(cfg.gen)
    seed = cfg.seed
    if cfg.mode == "highdim":
        return highdim.gen_handover_demos(seed=seed, **g)
    if cfg.mode == "rhythmic":
        g.setdefault("period", float(cfg.kernel.get("period", 10.0)))
        return quat.gen_rhythmic_demos(seed=seed, **g)
    keys = g.pop("keys", DEFAULT_KEYS)
    return quat.gen_minjerk_demos(keys, seed=seed, **g)


def cmd_gen_demos(args, cfg: RunConfig) -> int:
    try:
        demos = generate(cfg)
    except TypeError as exc:
        raise ConfigError(f"field 'gen': {exc}") from None
    except DomainError as exc:
        log.error("demo generation failed: %s", exc)
        return EXIT_NUMERIC
    _emit(serialize.dumps(serialize.demos_to_dict(demos)), args.out)
    span = demos[0].times[-1] - demos[0].times[0] if cfg.mode != "highdim" else float("nan")
    print(f"M={len(demos)} N={len(demos[0])} duration={span:g}", file=sys.stderr)
    return EXIT_OK


def train(cfg: RunConfig, demos):
    spec = cfg.kernel_spec()
    if cfg.mode == "highdim":
        if not isinstance(demos[0], highdim.PoseDemo):
            raise ConfigError("highdim mode needs pose demonstrations")
        return highdim.learn_pose(
            demos, cfg.q_a_or_default(), cfg.C, spec, cfg.lam, cfg.sample_N, cfg.seed
        )
    if not isinstance(demos[0], quat.QuatDemo):
        raise ConfigError(f"{cfg.mode} mode needs time-indexed quaternion demonstrations")
    return orient.learn(
        demos,
        cfg.q_a_or_default(),
        C=cfg.C,
        spec=spec,
        lam=cfg.lam,
        lam_a=cfg.lam_a,
        grid_N=cfg.grid_N,
        seed=cfg.seed,
        jerk=cfg.jerk,
        delta_t=cfg.delta_t,
    )


def adapt_model(model, mode: str, desired):
    if mode == "highdim":
        return highdim.adapt_pose(model, desired)
    return orient.adapt(model, desired)


def cmd_train(args, cfg: RunConfig) -> int:
    model = train(cfg, _read_demos(_one_input(args)))
    _emit(serialize.dumps(serialize.model_to_dict(model, cfg.mode)), args.out)
    return EXIT_OK


def cmd_adapt(args, cfg: RunConfig) -> int:
    model, mode = _read_model(_one_input(args))
    cfg.mode = mode
    adapted = adapt_model(model, mode, desired_states(cfg))
    _emit(serialize.dumps(serialize.model_to_dict(adapted, mode)), args.out)
    return EXIT_OK


def rollout_times(cfg: RunConfig, model) -> np.ndarray:
    r = cfg.rollout
    inputs = model.reference.inputs[:, 0]
    start = float(r.get("start", inputs.min()))
    stop = float(r.get("stop", inputs.max()))
    num = int(r.get("num", len(inputs)))
    if num < 1 or stop < start:
        raise ConfigError("field 'rollout': need num >= 1 and stop >= start")
    return np.linspace(start, stop, num)


def cmd_rollout(args, cfg: RunConfig) -> int:
    if not args.inputs:
        raise ConfigError("rollout needs a model file")
    model, mode = _read_model(args.inputs[0])
    if mode == "highdim":
        if len(args.inputs) < 2:
            raise ConfigError("highdim rollout needs a table of inputs (columns s0, s1, ...)")
        cols, rows = serialize.read_table(args.inputs[1])
        s_cols = [i for i, c in enumerate(cols) if c.startswith("s")]
        S = rows[:, s_cols]
        P, Q = highdim.predict_poses(model, S)
        cols, table = serialize.pose_table(S, P, Q)
    else:
        traj = orient.rollout(model, rollout_times(cfg, model))
        cols, table = serialize.trajectory_table(traj)
    _emit(serialize.table_to_text(cols, table, args.format), args.out)
    return EXIT_OK


def evaluate(traj: orient.OrientationTrajectory, desired) -> dict:
    report = dict(orient.metrics(traj))
    report["desired"] = orient.trajectory_desired_errors(traj, desired)
    return report


def cmd_eval(args, cfg: RunConfig) -> int:
    cols, rows = serialize.read_table(_one_input(args))
    if "t" not in cols:
        if cfg.mode != "highdim":
            raise ConfigError("a pose table (no 't' column) needs a highdim config")
        report = _eval_pose(cols, rows, desired_states(cfg))
    else:
        traj = serialize.table_to_trajectory(cols, rows)
        report = evaluate(traj, desired_states(cfg))
    _emit(serialize.dumps(report), args.out)
    return EXIT_OK


def _eval_pose(cols, rows, desired) -> dict:
    idx = {c: i for i, c in enumerate(cols)}
    S = rows[:, [i for c, i in idx.items() if c.startswith("s")]]
    P = rows[:, [idx[c] for c in ("px", "py", "pz")]]
    Q = rows[:, [idx[c] for c in serialize.QUAT_COLS]]
    out = []
    for d in desired:
        i = int(np.argmin(np.linalg.norm(S - d.input, axis=1)))
        out.append(
            {
                "s": d.input.tolist(),
                "position_error": float(np.linalg.norm(P[i] - d.position)),
                "quat_distance": quat.quat_distance(Q[i], d.quat),
            }
        )
    return {"desired": out}


def cmd_verify_theorems(args, cfg: RunConfig) -> int:
    th = cfg.theorem
    q_a = cfg.q_a if cfg.q_a is not None else quat.IDENTITY
    report = orient.verify_theorems(
        th.get("delta", [0.01, 0.0, 0.0]), q_a, int(th.get("N", 50)), float(th.get("delta_t", 0.01))
    )
    data = {
        "omega_expected": report.omega_const.tolist(),
        "linear_max_omega_dot": report.linear_max_omega_dot,
        "linear_omega_err": report.linear_omega_err,
        "quadratic_max_omega_ddot": report.quadratic_max_omega_ddot,
        "quadratic_step_err": report.quadratic_step_err,
        "passed": report.passed(),
    }
    _emit(serialize.dumps(data), args.out)
    return EXIT_OK if report.passed() else EXIT_NUMERIC


def sweep_lambda_a(cfg: RunConfig, demos, times=None) -> list[dict]:
    """Train once, then refit the adapted reference for each lambda_a value."""
    base = train(RunConfig(**{**cfg.__dict__, "lam_a": 0.0, "mode": "time"}), demos)
    desired = desired_states(cfg)
    adapted = orient.adapt(base, desired)
    if times is None:
        times = demos[0].times
    rows = []
    for lam_a in cfg.lambda_a_values:
        m = orient.with_lam_a(adapted, float(lam_a), cfg.jerk)
        traj = orient.rollout(m, times)
        errs = orient.desired_errors(m, desired)
        row = {"lambda_a": float(lam_a), **orient.metrics(traj)}
        row["max_quat_distance"] = max((e["quat_distance"] for e in errs), default=0.0)
        row["max_omega_error"] = max((e["omega_error"] for e in errs), default=0.0)
        rows.append(row)
    return rows


def cmd_sweep(args, cfg: RunConfig) -> int:
    if cfg.mode not in ("time", "time_accel"):
        raise ConfigError("sweep-lambda-a needs a time-driven gaussian-kernel config")
    rows = sweep_lambda_a(cfg, _read_demos(_one_input(args)))
    cwd = [r["c_omegad"] for r in rows]
    monotone = all(b <= a for a, b in zip(cwd, cwd[1:]))
    if args.format == "json":
        _emit(serialize.dumps({"rows": rows, "c_omegad_non_increasing": monotone}), args.out)
    else:
        cols = list(rows[0])
        _emit(serialize.table_to_text(cols, [[r[c] for c in cols] for r in rows]), args.out)
    return EXIT_OK


def _one_input(args) -> str:
    if len(args.inputs) != 1:
        raise ConfigError(f"{args.command} takes exactly one input file")
    return args.inputs[0]


COMMANDS = {
    "gen-demos": cmd_gen_demos,
    "train": cmd_train,
    "adapt": cmd_adapt,
    "rollout": cmd_rollout,
    "eval": cmd_eval,
    "verify-theorems": cmd_verify_theorems,
    "sweep-lambda-a": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quatkmp", description="Learn and adapt orientation trajectories with kernelized movement primitives."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "gen-demos": "generate synthetic demonstrations",
        "train": "learn a model from a demonstration file",
        "adapt": "add the config's desired points to a model",
        "rollout": "evaluate a model over time (or over an input table)",
        "eval": "smoothness costs and desired-point errors of a trajectory",
        "verify-theorems": "numerically check the zero-acceleration / zero-jerk constructions",
        "sweep-lambda-a": "acceleration costs over a range of lambda_a values",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("inputs", nargs="*", help="input files")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("QUATKMP_LOG", "error").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s"
    )


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, DimError, LayoutError, LengthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AlignmentError, DomainError) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (FitError, SolveError, ConditionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
