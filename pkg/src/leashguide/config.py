"""Run configuration: a flat schema of dotted keys, named profiles and overrides.

Every parameter the CLI accepts lives in ``SCHEMA`` with its default value;
the type of the default decides how ``--set key=value`` strings are parsed.
Unknown keys are errors everywhere (config files, overrides, profiles).
"""

from __future__ import annotations

import copy
import json
from pathlib import Path


class ConfigError(ValueError):
    pass


# key -> (default, help). Lists hold numbers; None means "unset".
SCHEMA: dict = {
    "timebase.period_T": (0.02, "control and logging period, s"),
    # data generation
    "data.subjects": (10, "number of synthetic subjects"),
    "data.session_s": (120.0, "length of each collection log, s"),
    "data.speed_range": ([0.5, 1.2], "comfortable speed range of synthetic subjects, m/s"),
    "data.resp_range": ([0.05, 0.15], "responsiveness range, (m/s)/N"),
    "data.tau_range": ([0.3, 0.6], "human velocity time constant range, s"),
    "data.compliance_range": ([0.3, 0.8], "heading compliance range"),
    "data.noise_std": (0.01, "human velocity noise per step, m/s"),
    "data.force_range": ([2.0, 20.0], "sampled tension range, N"),
    "data.resample_s": (10.0, "tension redraw interval in human collection, s"),
    "data.smooth_window": (5, "moving-average width for finite-difference velocities"),
    "data.window_h": (20, "human predictor window W^h, steps"),
    "data.window_r": (20, "robot predictor window W^r, steps"),
    "data.rollout_k": (10, "rollout length of the position loss, steps"),
    # models
    "model.arch": ("tcn", "architecture to train: cnn, lstm, tcn or all"),
    "model.conv_channels": ([8, 16], "CNN channels per layer"),
    "model.kernel": (3, "convolution kernel size"),
    "model.lstm_hidden": (16, "LSTM hidden size"),
    "model.lstm_layers": (3, "LSTM layer count"),
    "model.tcn_channels": (16, "TCN channels"),
    "model.tcn_dilations": ([1, 2, 4, 8], "TCN dilation per residual block"),
    # training
    "train.epochs": (10, "training epochs"),
    "train.batch_size": (64, "minibatch size"),
    "train.lr": (3e-3, "Adam learning rate"),
    "train.lr_final": (3e-4, "final learning rate of a geometric decay"),
    "train.rollout_k": (5, "rollout length used by the loss"),
    "train.stride": (5, "train on every stride-th sample"),
    "train.eval_samples": (1024, "monitor subset size for the loss curve"),
    "train.teacher_forcing": (False, "feed measured velocities back during the rollout"),
    # evaluation
    "eval.k_folds": (5, "cross-validation folds"),
    "eval.per_subject": (False, "evaluate each subject separately"),
    "eval.archs": (["tcn"], "neural architectures evaluated next to the baselines"),
    # guidance
    "guidance.horizon_h": (10, "human planner horizon M^h"),
    "guidance.horizon_r": (10, "robot planner horizon M^r"),
    "guidance.w1": (400.0, "waypoint tracking weight"),
    "guidance.w2": (0.02, "tension vector smoothness weight"),
    "guidance.w3": (0.02, "tension magnitude smoothness weight"),
    "guidance.w4": (1.0, "bearing smoothness weight"),
    "guidance.w5": (5.0, "leash length smoothness weight"),
    "guidance.w6": (400.0, "robot target tracking weight"),
    "guidance.w7": (0.05, "robot command effort weight"),
    "guidance.F_min": (2.0, "minimum tension, N"),
    "guidance.F_max": (20.0, "maximum tension, N"),
    "guidance.phi_F": (0.03, "per-step tension direction change limit, rad"),
    "guidance.phi_theta": (0.3, "bearing offset limit, rad"),
    "guidance.r_obs": (0.3, "obstacle clearance, m"),
    "guidance.obstacle_range": (3.0, "obstacle points considered around the person, m"),
    "guidance.F_init": (12.0, "tension before the first plan, N"),
    "guidance.goal_tol": (0.3, "goal reached distance, m"),
    "solver.population": (48, "sampling population per iteration"),
    "solver.iterations": (4, "sampling iterations"),
    "solver.elite_frac": (0.125, "elite fraction"),
    "solver.init_std": (0.5, "initial sampling spread relative to the box"),
    "solver.refine_steps": (0, "projected-gradient refinement steps"),
    "solver.refine_step_size": (0.1, "refinement step relative to the box (projected method)"),
    "solver.refine_method": ("lbfgsb", "refinement method: lbfgsb or projected"),
    # simulation
    "sim.comfortable_speeds": ([0.6, 1.0], "comfortable speed per simulated agent, m/s"),
    "sim.responsiveness": (0.1, "agent responsiveness, (m/s)/N"),
    "sim.time_constant": (0.4, "agent time constant, s"),
    "sim.heading_compliance": (0.5, "agent heading compliance"),
    "sim.noise_std": (0.01, "agent velocity noise per step, m/s"),
    "sim.settle_s": (3.0, "summary statistics ignore the first settle_s seconds"),
    "sim.episode_s": (60.0, "episode time limit, s"),
    # path smoothing
    "path.inflate": (0.3, "obstacle inflation before the grid search, m"),
    "path.angle_threshold": (0.05, "turning-angle pruning threshold, rad"),
    # files
    "paths.scenario": (None, "scenario JSON; the built-in corridor scenario when unset"),
    "paths.dataset": (None, "directory with raw-log CSVs"),
    "paths.weights": (None, "directory with weight files"),
    "paths.snapshot": (None, "state snapshot JSON for the plan subcommand"),
}

PROFILES: dict = {
    "paper-default": {},
    # small, quick settings for smoke runs and tests
    "fast": {
        "data.subjects": 2,
        "data.session_s": 20.0,
        "train.epochs": 3,
        "train.stride": 5,
        "train.rollout_k": 5,
        "train.eval_samples": 256,
        "eval.k_folds": 2,
        "solver.population": 24,
        "solver.iterations": 3,
        "sim.comfortable_speeds": [0.8],
        "sim.episode_s": 4.0,
    },
}


def defaults() -> dict:
    return {k: copy.deepcopy(v[0]) for k, v in SCHEMA.items()}


def _check_key(key: str) -> None:
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")


def _coerce(key: str, value):
    """Validate ``value`` against the type of the schema default."""
    default = SCHEMA[key][0]
    if value is None:
        return None
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            raise TypeError
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float) or (default is None and not key.startswith("paths.")):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, list):
            if not isinstance(value, list):
                raise TypeError
            kind = str if default and isinstance(default[0], str) else type(default[0]) if default else float
            return [kind(v) for v in value]
        if isinstance(value, str):
            return value
        raise TypeError
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None


def parse_value(key: str, text: str):
    """Parse an override string: JSON first, bare words as strings."""
    _check_key(key)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    default = SCHEMA[key][0]
    if isinstance(default, list) and isinstance(value, str):
        value = [v for v in value.split(",") if v]
        if default and not isinstance(default[0], str):
            try:
                value = [json.loads(v) for v in value]
            except json.JSONDecodeError:
                raise ConfigError(f"bad value for {key!r}: {text!r}") from None
    return _coerce(key, value)


def flatten(d: dict, prefix: str = "") -> dict:
    """Nested sections to dotted keys; dotted keys at any level are kept."""
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def build_config(profile: str = "paper-default", config_file=None, overrides=()) -> dict:
    """Layer defaults, profile, config file and ``key=value`` overrides, in that order."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    cfg = defaults()
    for k, v in PROFILES[profile].items():
        cfg[k] = _coerce(k, v)
    if config_file is not None:
        path = Path(config_file)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        for k, v in flatten(raw).items():
            _check_key(k)
            cfg[k] = _coerce(k, v)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        k, text = item.split("=", 1)
        cfg[k.strip()] = parse_value(k.strip(), text.strip())
    return cfg


def section(cfg: dict, name: str) -> dict:
    """Keys of one section with the prefix stripped."""
    p = name + "."
    return {k[len(p):]: v for k, v in cfg.items() if k.startswith(p)}


def describe() -> str:
    """Plain-text listing of every key, its default and meaning."""
    width = max(len(k) for k in SCHEMA)
    lines = [f"{k:<{width}}  {json.dumps(v[0]):<14}  {v[1]}" for k, v in SCHEMA.items()]
    return "\n".join(lines) + "\n"
