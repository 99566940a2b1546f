"""Command-line entry point: ``leashguide <generate|train|evaluate|simulate|plan>``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
Every run writes ``manifest.json`` to its output directory with the version,
seed, resolved configuration and sha256 of every input and output file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PROFILES, ConfigError, build_config, describe, section
from .core import Timebase
from .mpc import ShootingConfig, plan_to_csv
from .nn import ARCHITECTURES, ModelSpec, WeightFileError, load_model, save_model
from .predictors import (InteractionLog, TrainConfig, TrainingDiverged, build_human_dataset,
                         build_robot_dataset, geoc_factory, kfold_evaluate, linear_factory, neural_factory,
                         read_log, train_predictor, vdcm_factory, write_log)
from .sim import (GuidanceConfig, HumanAgentModel, ScenarioError, ScenarioSpec, plan_route, plan_step,
                  run_collection_protocol, run_guided_episode, synthetic_subjects)
from .worldmap import PlanningError, extract_obstacle_points

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
SUBCOMMANDS = ("generate", "train", "evaluate", "simulate", "plan")

log = logging.getLogger("leashguide")


class InputError(Exception):
    """Bad user input: exit code 2."""


class RunFailure(Exception):
    """Runtime failure: exit code 3."""


# helpers --------------------------------------------------------------------

def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Output directory plus the bookkeeping needed for the manifest."""

    def __init__(self, name: str, out: Path, cfg: dict, seed: int, profile: str):
        self.name, self.out, self.cfg, self.seed, self.profile = name, out, cfg, seed, profile
        self.inputs, self.outputs = [], []
        try:
            out.mkdir(parents=True, exist_ok=True)
            probe = out / ".write_probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise RunFailure(f"output directory {out} is not writable: {exc}") from exc

    def add_input(self, path):
        self.inputs.append(Path(path))

    def write(self, rel: str, text) -> Path:
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(text, bytes):
            p.write_bytes(text)
        else:
            p.write_text(text)
        self.outputs.append(p)
        return p

    def record(self, path) -> None:
        self.outputs.append(Path(path))

    def finish(self, extra: dict | None = None) -> Path:
        mpath = self.out / "manifest.json"
        manifest = {"version": __version__, "runs": {}}
        if mpath.exists():
            try:
                old = json.loads(mpath.read_text())
                if isinstance(old.get("runs"), dict):
                    manifest["runs"] = old["runs"]
            except (json.JSONDecodeError, AttributeError):
                pass
        entry = {
            "seed": self.seed,
            "profile": self.profile,
            "config": self.cfg,
            "inputs": {str(p): sha256(p) for p in sorted(set(self.inputs))},
            "outputs": {str(p.relative_to(self.out)): sha256(p) for p in sorted(set(self.outputs))},
        }
        if extra:
            entry.update(extra)
        manifest["runs"][self.name] = entry
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return mpath


def load_scenario(cfg: dict, seed: int) -> ScenarioSpec:
    path = cfg["paths.scenario"]
    if path is None:
        sc = ScenarioSpec()
    else:
        if not Path(path).exists():
            raise InputError(f"scenario file not found: {path}")
        sc = ScenarioSpec.load(path)
    sc.seed = seed
    sc.inflate = cfg["path.inflate"]
    sc.angle_threshold = cfg["path.angle_threshold"]
    sc.session_s = cfg["data.session_s"]
    sc.episode_s = cfg["sim.episode_s"]
    return sc


def timebase(cfg) -> Timebase:
    return Timebase(cfg["timebase.period_T"])


def train_config(cfg: dict, seed: int) -> TrainConfig:
    t = section(cfg, "train")
    return TrainConfig(epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"], lr_final=t["lr_final"],
                       rollout_k=t["rollout_k"], teacher_forcing=t["teacher_forcing"], stride=t["stride"],
                       eval_samples=t["eval_samples"], seed=seed)


def model_spec(cfg: dict, arch: str, ds) -> ModelSpec:
    m = section(cfg, "model")
    return ModelSpec(arch, ds.input_channels, ds.window, conv_channels=tuple(m["conv_channels"]),
                     kernel=m["kernel"], lstm_hidden=m["lstm_hidden"], lstm_layers=m["lstm_layers"],
                     tcn_channels=m["tcn_channels"], tcn_dilations=tuple(m["tcn_dilations"]))


def arch_list(name) -> list:
    names = list(ARCHITECTURES) if name == "all" else [name]
    for a in names:
        if a not in ARCHITECTURES:
            raise InputError(f"unknown architecture {a!r}; choose from {', '.join(ARCHITECTURES)} or all")
    return names


def guidance_config(cfg: dict) -> GuidanceConfig:
    g, s = section(cfg, "guidance"), section(cfg, "solver")
    solver = ShootingConfig(population=s["population"], iterations=s["iterations"], elite_frac=s["elite_frac"],
                            init_std=s["init_std"], refine_steps=s["refine_steps"],
                            refine_step_size=s["refine_step_size"], refine_method=s["refine_method"])
    return GuidanceConfig(**g, human_solver=solver, robot_solver=solver)


def read_logs(directory: Path, run: Run) -> list:
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise InputError(f"no log files in {directory}")
    logs = []
    for f in files:
        try:
            logs.append(read_log(f))
        except (ValueError, IndexError) as exc:
            raise InputError(f"{f}: {exc}") from exc
        run.add_input(f)
    return logs


def datasets(cfg: dict, run: Run):
    d = cfg["paths.dataset"]
    if d is None:
        raise InputError("paths.dataset is not set (use --set paths.dataset=DIR)")
    root = Path(d)
    if not root.is_dir():
        raise InputError(f"dataset directory not found: {root}")
    tb, k, sw = timebase(cfg), cfg["data.rollout_k"], cfg["data.smooth_window"]
    out = {}
    for kind, build, W in (("hmp", build_human_dataset, cfg["data.window_h"]),
                           ("rdm", build_robot_dataset, cfg["data.window_r"])):
        sub = root / ("human" if kind == "hmp" else "robot")
        if sub.is_dir():
            ds = build(read_logs(sub, run), W, k, tb, sw)
            if len(ds) == 0:
                raise InputError(f"{sub}: logs too short for window {W} and rollout {k}")
            out[kind] = ds
    if not out:
        raise InputError(f"{root} has neither human/ nor robot/ log directories")
    return out


def load_weights(cfg: dict, run: Run):
    d = cfg["paths.weights"]
    if d is None:
        raise InputError("paths.weights is not set (use --set paths.weights=DIR)")
    arch = "tcn" if cfg["model.arch"] == "all" else cfg["model.arch"]
    models = []
    for kind in ("hmp", "rdm"):
        p = Path(d) / f"{kind}_{arch}.json"
        if not p.exists():
            raise InputError(f"weight file not found: {p}")
        try:
            models.append(load_model(p))
        except WeightFileError as exc:
            raise InputError(f"{p}: {exc}") from exc
        run.add_input(p)
    return models


# subcommands ----------------------------------------------------------------

def cmd_generate(cfg: dict, run: Run) -> dict:
    sc = load_scenario(cfg, run.seed)
    if cfg["paths.scenario"] is not None:
        run.add_input(cfg["paths.scenario"])
    d = section(cfg, "data")
    if not sc.subjects:
        if d["subjects"] <= 0:
            raise InputError("no subjects configured")
        sc.subjects = synthetic_subjects(d["subjects"], run.seed, tuple(d["speed_range"]), tuple(d["resp_range"]),
                                         tuple(d["tau_range"]), tuple(d["compliance_range"]), d["noise_std"])
    tb = timebase(cfg)
    for i in range(len(sc.subjects)):
        for mode, folder in (("human_data", "human"), ("robot_data", "robot")):
            lg: InteractionLog = run_collection_protocol(sc, mode, i, timebase=tb, F_range=tuple(d["force_range"]),
                                                         resample_s=d["resample_s"])
            p = run.out / folder / f"{lg.subject_id}.csv"
            p.parent.mkdir(parents=True, exist_ok=True)
            write_log(lg, p)
            run.record(p)
    run.write("scenario.json", json.dumps(sc.to_dict(), indent=2, sort_keys=True) + "\n")
    return {"parameter_ranges": {k: d[k] for k in ("speed_range", "resp_range", "tau_range",
                                                    "compliance_range", "force_range")},
            "subjects": len(sc.subjects)}


def cmd_train(cfg: dict, run: Run) -> dict:
    data = datasets(cfg, run)
    tc = train_config(cfg, run.seed)
    summary = {}
    curves = {}
    from .plots import loss_figure
    for kind, ds in data.items():
        for arch in arch_list(cfg["model.arch"]):
            spec = model_spec(cfg, arch, ds)
            try:
                model, hist = train_predictor(ds, spec, tc)
            except TrainingDiverged as exc:
                raise RunFailure(f"training {kind}_{arch} diverged: {exc}") from exc
            p = run.out / f"{kind}_{arch}.json"
            save_model(model, p, {"kind": kind, "samples": len(ds)})
            run.record(p)
            rows = ["epoch,train_loss,monitor_loss", f"-1,nan,{hist.initial_loss!r}"]
            rows += [f"{i},{a!r},{b!r}" for i, (a, b) in enumerate(zip(hist.epoch_loss, hist.monitor_loss))]
            run.write(f"loss_{kind}_{arch}.csv", "\n".join(rows) + "\n")
            curves[f"{kind}_{arch}"] = [hist.initial_loss] + hist.monitor_loss
            summary[f"{kind}_{arch}"] = {"initial_loss": hist.initial_loss, "final_loss": hist.final_loss,
                                         "best_epoch": hist.best_epoch}
            log.info("%s_%s: loss %.3e -> %.3e", kind, arch, hist.initial_loss, hist.final_loss)
    run.write("loss_curves.svg", loss_figure(curves))
    run.write("train_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {}


def cmd_evaluate(cfg: dict, run: Run) -> dict:
    k = cfg["eval.k_folds"]
    if k < 2:
        raise InputError(f"eval.k_folds must be at least 2, got {k}")
    data = datasets(cfg, run)
    tc = train_config(cfg, run.seed)
    for kind, ds in data.items():
        factories = {}
        for arch in cfg["eval.archs"]:
            arch_list(arch)
            factories[f"{arch.upper()}"] = neural_factory(model_spec(cfg, arch, ds), tc)
        if kind == "hmp":
            factories["Linear"] = linear_factory
            factories["GeoC"] = geoc_factory
        else:
            factories["VDCM"] = vdcm_factory
        try:
            rep = kfold_evaluate(ds, factories, k, run.seed, cfg["eval.per_subject"], keep_predictions=False)
        except TrainingDiverged as exc:
            raise RunFailure(f"{kind}: training diverged: {exc}") from exc
        except ValueError as exc:
            raise InputError(f"{kind}: {exc}") from exc
        title = "Human motion predictors" if kind == "hmp" else "Robot dynamics models"
        text = rep.to_text(title)
        run.write(f"eval_{kind}.txt", text)
        run.write(f"eval_{kind}.csv", rep.to_csv())
        print(text)
    return {}


def cmd_simulate(cfg: dict, run: Run) -> dict:
    sc = load_scenario(cfg, run.seed)
    if cfg["paths.scenario"] is not None:
        run.add_input(cfg["paths.scenario"])
    hmp, rdm = load_weights(cfg, run)
    gc = guidance_config(cfg)
    s = section(cfg, "sim")
    from .plots import write_episode_plots
    summaries = []
    for i, cs in enumerate(s["comfortable_speeds"]):
        agent = HumanAgentModel(comfortable_speed=cs, responsiveness=s["responsiveness"],
                                time_constant=s["time_constant"], heading_compliance=s["heading_compliance"],
                                noise_std=s["noise_std"], seed=run.seed + i)
        try:
            trace = run_guided_episode(sc, hmp, rdm, agent, gc, timebase(cfg), seed=run.seed + 100 * i)
        except PlanningError as exc:
            raise InputError(f"{type(exc).__name__}: {exc}") from exc
        stem = f"episode_{i:02d}"
        run.write(f"{stem}_trace.csv", trace.to_csv())
        for p in write_episode_plots(trace, run.out, stem, f"comfortable speed {cs:g} m/s"):
            run.record(p)
        sm = {"agent": i, "comfortable_speed": cs, **trace.summary(s["settle_s"])}
        sm["speed_ratio"] = sm["robot_speed_mean"] / sm["human_speed_mean"] if sm["human_speed_mean"] > 0 else None
        summaries.append(sm)
        print(f"agent {i} (comfortable {cs:g} m/s): {sm['outcome']} in {sm['duration_s']:.2f} s, "
              f"speeds human {sm['human_speed_mean']:.3f} robot {sm['robot_speed_mean']:.3f} m/s, "
              f"separation {sm['separation_mean']:.3f} ({sm['separation_std']:.3f}) m")
    run.write("summary.json", json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    return {}


SNAPSHOT_FIELDS = {"human", "robot", "goal", "leash"}


def _vector(snap, where, n):
    try:
        v = np.asarray(snap, float).reshape(-1)
    except (TypeError, ValueError):
        raise InputError(f"snapshot field {where!r} must be a list of {n} numbers") from None
    if v.size != n or not np.all(np.isfinite(v)):
        raise InputError(f"snapshot field {where!r} must be a list of {n} finite numbers")
    return v


def read_snapshot(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise InputError(f"snapshot file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError(f"{p}: top level must be an object")
    extra = set(raw) - SNAPSHOT_FIELDS
    if extra:
        raise InputError(f"unknown snapshot field(s): {', '.join(sorted(extra))}")
    for f in ("human", "robot", "goal"):
        if f not in raw:
            raise InputError(f"snapshot field {f!r} is missing")
    out = {"goal": _vector(raw["goal"], "goal", 2)}
    for who in ("human", "robot"):
        part = raw[who]
        if not isinstance(part, dict) or "x" not in part:
            raise InputError(f"snapshot field '{who}.x' is missing")
        out[who + ".x"] = _vector(part["x"], f"{who}.x", 2)
        out[who + ".v"] = _vector(part.get("v", [0.0, 0.0]), f"{who}.v", 2)
    out["robot.u"] = _vector(raw["robot"].get("u", [0.0, 0.0, 0.0]), "robot.u", 3)
    leash = raw.get("leash", {})
    if not isinstance(leash, dict):
        raise InputError("snapshot field 'leash' must be an object")
    for k in leash:
        if k not in ("F",):
            raise InputError(f"unknown snapshot field 'leash.{k}'")
    out["leash.F"] = float(_vector(leash.get("F", 0.0), "leash.F", 1)[0]) if "F" in leash else None
    return out


def cmd_plan(cfg: dict, run: Run) -> dict:
    if cfg["paths.snapshot"] is None:
        raise InputError("paths.snapshot is not set (use --set paths.snapshot=FILE)")
    snap = read_snapshot(cfg["paths.snapshot"])
    run.add_input(cfg["paths.snapshot"])
    sc = load_scenario(cfg, run.seed)
    if cfg["paths.scenario"] is not None:
        run.add_input(cfg["paths.scenario"])
    hmp, rdm = load_weights(cfg, run)
    gc = guidance_config(cfg)
    T = cfg["timebase.period_T"]
    grid = sc.grid()
    xh, vh, xr, vr = snap["human.x"], snap["human.v"], snap["robot.x"], snap["robot.v"]
    try:
        path = plan_route(grid, [xh, snap["goal"]], sc.inflate, sc.angle_threshold)
    except PlanningError as exc:
        raise InputError(f"{type(exc).__name__}: {exc}") from exc
    l_now, e = sc.leash.geometry(xh, xr)
    l_now = float(np.clip(l_now, sc.leash.l_min, sc.leash.l_max))
    theta = float(np.arctan2(-e[1], -e[0]))
    F_now = gc.F_init if snap["leash.F"] is None else snap["leash.F"]
    Fh = F_now * np.array([np.cos(theta), np.sin(theta)])
    # steady history: the snapshot state held over the past windows
    h_rows = [np.array([*vh, *Fh])] * (hmp.spec.window - 1)
    r_rows = [np.array([*vr, *snap["robot.u"], *(-Fh)])] * (rdm.spec.window - 1)
    solver = gc.human_solver
    step = plan_step(path, hmp, rdm, xh, vh, xr, vr, h_rows, r_rows, (F_now, theta, l_now, theta), 0.0,
                     extract_obstacle_points(grid), sc.leash, sc.robot, gc, T,
                     ShootingConfig(**{**solver.__dict__, "seed": run.seed}),
                     ShootingConfig(**{**gc.robot_solver.__dict__, "seed": run.seed + 1}), run.seed)
    run.write("plan.csv", plan_to_csv(step.waypoints, step.human, step.robot))
    info = {
        "human_cost": step.human.cost, "human_breakdown": step.human.breakdown,
        "human_violation": step.human.violation,
        "robot_cost": step.robot.cost, "robot_breakdown": step.robot.breakdown,
        "predicted_speeds": [float(v) for v in step.speeds],
    }
    run.write("plan.json", json.dumps(info, indent=2, sort_keys=True) + "\n")
    print(f"human plan cost {step.human.cost:.6g}, robot plan cost {step.robot.cost:.6g}, "
          f"first command ({', '.join(f'{v:.4f}' for v in step.robot.u[0])})")
    return {}


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate,
            "simulate": cmd_simulate, "plan": cmd_plan}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (nested sections or dotted keys)")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")
    common.add_argument("--profile", default="paper-default", choices=sorted(PROFILES),
                        help="named parameter bundle")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="leashguide", description="Leash-guided walking: data, models, planners.")
    p.add_argument("--version", action="version", version=f"leashguide {__version__}")
    p.add_argument("--list-keys", action="store_true", help="print every config key and exit")
    sub = p.add_subparsers(dest="command")
    helps = {"generate": "simulate data-collection sessions and write raw logs",
             "train": "train predictors on generated logs",
             "evaluate": "k-fold comparison of predictors and baselines",
             "simulate": "closed-loop guiding episodes with trained predictors",
             "plan": "solve one planning cycle from a state snapshot"}
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_keys:
        sys.stdout.write(describe())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("leashguide: error: a subcommand is required", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed < 0:
        print("leashguide: error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = build_config(args.profile, args.config, args.set)
        run = Run(args.command, Path(args.out), cfg, args.seed, args.profile)
        if args.config:
            run.add_input(args.config)
        extra = COMMANDS[args.command](cfg, run)
        run.finish(extra)
    except (ConfigError, InputError, ScenarioError) as exc:
        print(f"leashguide: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RunFailure, OSError) as exc:
        print(f"leashguide: failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
