"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

import itertools
import json
import math
import time

import numpy as np
import pytest

from leashguide.cli import main
from leashguide.core import Timebase, TensionSample, compose_human_position, decompose_tension
from leashguide.mpc import (HumanPlanProblem, RobotPlanProblem, ShootingConfig, constraint_violation,
                            human_recursion_law, solve_human_plan, solve_robot_plan, tension_law, vdcm_law)
from leashguide.nn import rollout_loss
from leashguide.pathsmooth import AnalyticPath, select_waypoints
from leashguide.sim import GuidanceConfig, HumanAgentModel, ScenarioSpec, run_guided_episode
from leashguide.sim import episode as episode_module
from leashguide.worldmap import GridMap, NoPath, plan_cells

from oracles import exhaustive_cost, human_one_step_grid, robot_one_step_grid
from test_nn import EXO, FEEDBACK, mini, window_loss

pytestmark = pytest.mark.acceptance


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def run_cli(*args):
    rc = main([str(a) for a in args])
    assert rc == 0, f"leashguide {' '.join(map(str, args))} exited with {rc}"


def fd_error_all_params(model, loss_fn, h=1e-5):
    """Worst relative gap between analytic and central-difference gradients over every parameter entry.

    At this step truncation error is about 1e-10 while rounding in the
    quotient stays near 1e-11; steps of 1e-6 and below are rounding-bound.
    """
    _, grads = loss_fn()
    worst = 0.0
    for k in sorted(model.params):
        P = model.params[k]
        for idx in np.ndindex(P.shape):
            old = P[idx]
            P[idx] = old + h
            up, _ = loss_fn()
            P[idx] = old - h
            dn, _ = loss_fn()
            P[idx] = old
            num, ana = (up - dn) / (2 * h), grads[k][idx]
            worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-3))
    return worst


def test_gradient_correctness(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    errors = {}
    for arch in ("cnn", "lstm", "tcn"):
        m = mini(arch)
        X, target = rng.normal(size=(3, 6, 4)), rng.normal(size=(3, 2))
        hist, exo = rng.normal(size=(2, 6, 4)), rng.normal(size=(2, 4, 2))
        x0, xt = rng.normal(size=(2, 2)), rng.normal(size=(2, 4, 2))
        errors[f"{arch}/window"] = fd_error_all_params(m, window_loss(m, X, target))
        errors[f"{arch}/rollout"] = fd_error_all_params(
            m, lambda: rollout_loss(m, hist, exo, x0, xt, 0.1, FEEDBACK, EXO))
    dt = time.perf_counter() - t0
    worst = max(errors.values())
    verdict(capsys, 1, worst < 1e-6 and dt < 30,
            f"max relative FD error {worst:.2e} over all parameters of cnn/lstm/tcn ({dt:.1f} s)")


def four_by_four_maps(n_random=200, seed=0):
    rng = np.random.default_rng(seed)
    maps = []
    for k in range(4):
        for blocked in itertools.combinations(range(16), k):
            occ = np.zeros(16, bool)
            occ[list(blocked)] = True
            maps.append(occ.reshape(4, 4))
    maps += [rng.random((4, 4)) < rng.uniform(0.1, 0.6) for _ in range(n_random)]
    return maps


def test_dijkstra_matches_exhaustive(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    corners = [(0, 0), (0, 3), (3, 0), (3, 3)]
    maps = four_by_four_maps()
    checked = mismatches = unreachable = 0
    for occ in maps:
        free = [tuple(int(v) for v in c) for c in np.argwhere(~occ)]
        if not free:
            continue
        pairs = [(a, b) for a in corners for b in corners if a != b and not occ[a] and not occ[b]]
        pairs += [(free[i], free[j]) for i, j in rng.integers(len(free), size=(4, 2))]
        for s, g in pairs:
            ref = exhaustive_cost(occ, s, g)
            try:
                _, cost = plan_cells(GridMap(occ), s, g)
            except NoPath:
                cost = math.inf
            checked += 1
            unreachable += not math.isfinite(ref)
            same = (cost == ref) if not math.isfinite(ref) else abs(cost - ref) <= 1e-9
            mismatches += not same
    dt = time.perf_counter() - t0
    verdict(capsys, 2, mismatches == 0 and dt < 60,
            f"{mismatches} mismatches over {checked} queries on {len(maps)} 4x4 maps "
            f"({unreachable} unreachable, {dt:.1f} s)")


def test_waypoint_spacing(capsys):
    line = AnalyticPath(np.column_stack([np.linspace(0, 10, 11), np.zeros(11)]))
    wp = select_waypoints(line, 0.3, 1.0, 20, Timebase(0.02))
    line_err = float(np.max(np.abs(wp.spacings - 0.02)))
    a = np.linspace(0, math.pi / 2, 1000)
    arc = AnalyticPath(np.column_stack([np.cos(a), np.sin(a)]))
    wq = select_waypoints(arc, 0.0, 1.0, 15, Timebase(0.1))
    arc_err = float(np.max(np.abs(wq.spacings - 2 * math.sin(0.05))))
    verdict(capsys, 3, line_err <= 1e-12 and arc_err <= 1e-9,
            f"straight spacing error {line_err:.1e}, quarter-circle chord error {arc_err:.1e}")


T = 0.02
RES = 1e-3


def close(value, ref, scale):
    """Within 1% of ``scale`` plus one grid cell."""
    return abs(value - ref) <= 0.01 * scale + RES


def random_human_problem(rng):
    c = 0.1
    a0 = rng.uniform(-math.pi, math.pi)
    phi_F = rng.uniform(0.1, 0.3)
    dist = rng.uniform(0.5, 1.2) * rng.uniform(2.0, 20.0) * c * T
    off = rng.uniform(-1.5, 1.5) * phi_F
    x0 = rng.uniform(-5, 5, 2)
    wp = x0 + dist * np.array([[math.cos(a0 + off), math.sin(a0 + off)]])
    p = HumanPlanProblem(waypoints=wp, history=np.zeros((20, 4)), x_start=x0, period=T,
                         F_now=rng.uniform(2.0, 20.0), angle_now=a0, l_now=rng.uniform(0.9, 1.3), theta_now=a0,
                         w1=1.0, w2=0.0, w3=0.0, w4=0.0, w5=0.0, phi_F=phi_F)
    return p, c


def random_robot_problem(rng):
    d, w6, w7 = 0.02, 400.0, rng.uniform(0.001, 0.05)
    F = rng.uniform(-10, 10, 2)
    x0 = rng.uniform(-5, 5, 2)
    tgt = x0 + T * (rng.uniform(-1.8, 1.8, 2) - d * F)
    p = RobotPlanProblem(targets=tgt[None], history=np.zeros((20, 7)), x_start=x0, period=T,
                         F_forecast=F[None], w6=w6, w7=w7)
    return p, d


def test_one_step_planners_match_grid(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    cfg = ShootingConfig(population=64, iterations=8, refine_steps=50)
    bad_h = bad_r = 0
    worst_violation, bounds_ok = 0.0, True
    n = 100
    for i in range(n):
        p, c = random_human_problem(rng)
        s = solve_human_plan(p, tension_law(c), ShootingConfig(**{**cfg.__dict__, "seed": i}))
        m, inc, _ = human_one_step_grid(c, T, p.x_start, p.waypoints[0], p.angle_now, p.F_min, p.F_max, p.phi_F, RES)
        ok = close(s.magnitude[0], m, m) and close(s.angle[0] - p.angle_now, inc, 2 * p.phi_F)
        bad_h += not ok
        v = constraint_violation(p, s.F, s.l, s.theta, s.x_pred)
        worst_violation = max(worst_violation, max(v.values()))

        q, d = random_robot_problem(rng)
        r = solve_robot_plan(q, vdcm_law(d), ShootingConfig(**{**cfg.__dict__, "seed": i}))
        u_grid, _ = robot_one_step_grid(d, T, q.x_start, q.targets[0], q.F_forecast[0], q.w6, q.w7, q.u_max, RES)
        bad_r += not all(close(r.u[0, j], u_grid[j], abs(u_grid[j])) for j in range(3))
        bounds_ok &= bool(np.all(np.abs(r.u) <= np.asarray(q.u_max)))
    dt = time.perf_counter() - t0
    ok = bad_h == 0 and bad_r == 0 and worst_violation <= 1e-6 and bounds_ok and dt < 300
    verdict(capsys, 4, ok,
            f"{n - bad_h}/{n} human and {n - bad_r}/{n} robot plans at the grid optimum, "
            f"max violation {worst_violation:.1e}, command bounds {'held' if bounds_ok else 'broken'} ({dt:.0f} s)")


@pytest.fixture(scope="module")
def full_workspace(tmp_path_factory):
    """Full-size synthetic dataset and default-recipe weights."""
    root = tmp_path_factory.mktemp("full")
    t0 = time.perf_counter()
    run_cli("generate", "--out", root / "data")
    gen_s = time.perf_counter() - t0
    run_cli("train", "--out", root / "weights", "--set", f"paths.dataset={root / 'data'}")
    return root, gen_s


def read_report(path):
    import csv
    with open(path) as fh:
        return {r["model"]: r for r in csv.DictReader(fh)}


def test_model_ordering(capsys, full_workspace):
    root, gen_s = full_workspace
    t0 = time.perf_counter()
    run_cli("evaluate", "--out", root / "eval", "--set", f"paths.dataset={root / 'data'}")
    dt = gen_s + time.perf_counter() - t0
    hmp, rdm = read_report(root / "eval" / "eval_hmp.csv"), read_report(root / "eval" / "eval_rdm.csv")
    f_h = float(hmp["Linear"]["e_mean"]) / float(hmp["TCN"]["e_mean"])
    f_r = float(rdm["VDCM"]["e_mean"]) / float(rdm["TCN"]["e_mean"])
    text = (root / "eval" / "eval_hmp.txt").read_text() + (root / "eval" / "eval_rdm.txt").read_text()
    layout = "Avg (StdDev)" in text and text.count(" * ") + text.count("* ") >= 2
    layout &= all(r["best"] in ("0", "1") for r in [*hmp.values(), *rdm.values()])
    ok = f_h >= 2 and f_r >= 2 and layout and dt < 1200
    verdict(capsys, 5, ok,
            f"TCN beats Linear by {f_h:.1f}x and VDCM by {f_r:.1f}x, layout {'ok' if layout else 'wrong'} "
            f"({dt / 60:.1f} min)")


@pytest.mark.parametrize("speed", [0.6, 1.0])
def test_speed_synchronization(capsys, full_workspace, speed):
    root, _ = full_workspace
    out = root / f"sim_{speed:g}"
    t0 = time.perf_counter()
    run_cli("simulate", "--out", out, "--set", f"paths.weights={root / 'weights'}",
            "--set", f"sim.comfortable_speeds=[{speed}]")
    dt = time.perf_counter() - t0
    sm = json.loads((out / "summary.json").read_text())[0]
    leash = ScenarioSpec().leash
    ratio = sm["robot_speed_mean"] / sm["human_speed_mean"]
    ok = (sm["outcome"] == "goal" and abs(ratio - 1) <= 0.15 and sm["separation_std"] < 0.15
          and leash.l_min <= sm["separation_min"] and sm["separation_max"] <= leash.l_max and dt < 300)
    verdict(capsys, 6, ok,
            f"agent {speed:g} m/s: {sm['outcome']} in {sm['duration_s']:.1f} s, robot/human speed {ratio:.3f}, "
            f"separation {sm['separation_mean']:.3f} (std {sm['separation_std']:.3f}) in "
            f"[{sm['separation_min']:.3f}, {sm['separation_max']:.3f}] ({dt:.0f} s)")


def pipeline(root):
    common = ["--profile", "fast", "--seed", 11]
    run_cli("generate", "--out", root / "data", *common)
    run_cli("train", "--out", root / "weights", "--set", f"paths.dataset={root / 'data'}", *common)
    run_cli("evaluate", "--out", root / "eval", "--set", f"paths.dataset={root / 'data'}", *common)
    run_cli("simulate", "--out", root / "sim", "--set", f"paths.weights={root / 'weights'}", *common)
    hashes = {}
    for stage in ("data", "weights", "eval", "sim"):
        runs = json.loads((root / stage / "manifest.json").read_text())["runs"]
        for name, entry in runs.items():
            hashes.update({f"{stage}/{k}": v for k, v in entry["outputs"].items()})
    return hashes


def test_end_to_end_determinism(capsys, tmp_path):
    a, b = pipeline(tmp_path / "a"), pipeline(tmp_path / "b")
    diff = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    verdict(capsys, 7, not diff and len(a) > 0,
            f"{len(a)} output files across four stages, {len(diff)} differ between runs")


def test_force_and_position_round_trips(capsys, monkeypatch):
    seen = {"human": [], "robot": []}
    real_h, real_r = episode_module.step_human, episode_module.step_robot

    def spy_human(agent, state, F_h, *a, **kw):
        seen["human"].append((state.x[:2].copy(), np.asarray(F_h, float).copy()))
        return real_h(agent, state, F_h, *a, **kw)

    def spy_robot(model, state, u, F_r, *a, **kw):
        seen["robot"].append((state.x[:2].copy(), np.asarray(F_r, float).copy()))
        return real_r(model, state, u, F_r, *a, **kw)

    monkeypatch.setattr(episode_module, "step_human", spy_human)
    monkeypatch.setattr(episode_module, "step_robot", spy_robot)
    cheap = ShootingConfig(population=16, iterations=2)
    cfg = GuidanceConfig(horizon_h=5, horizon_r=5, human_solver=cheap, robot_solver=cheap)
    # a slow walker never reaches the goal, so the episode runs its full length
    agent = HumanAgentModel(comfortable_speed=0.15, noise_std=0.01, seed=3)
    tr = run_guided_episode(ScenarioSpec(episode_s=60.0), human_recursion_law(0.95, 0.005), vdcm_law(-0.02),
                            agent, cfg, max_steps=3000)

    steps = len(tr.rows)
    worst = {"reciprocity": 0.0, "decompose": 0.0, "compose": 0.0, "logged": 0.0}
    for k in range(steps):
        xh, Fh = seen["human"][k]
        xr, Fr = seen["robot"][k]
        F, l = tr.column("F")[k], tr.column("l")[k]
        e = (xh - xr) / l
        sample = TensionSample(F, e)
        worst["reciprocity"] = max(worst["reciprocity"], np.max(np.abs(Fh + Fr)))
        worst["decompose"] = max(worst["decompose"],
                                 np.max(np.abs(decompose_tension(sample, "human")[:2] - Fh)),
                                 np.max(np.abs(decompose_tension(sample, "robot")[:2] - Fr)))
        worst["compose"] = max(worst["compose"], np.max(np.abs(compose_human_position(xr, l, e)[:2] - xh)))
        logged = np.array([tr.column("xh_x")[k], tr.column("xh_y")[k], tr.column("xr_x")[k], tr.column("xr_y")[k]])
        worst["logged"] = max(worst["logged"], np.max(np.abs(logged - np.concatenate([xh, xr]))))
    ok = steps == 3000 and len(seen["human"]) == steps and max(worst.values()) <= 1e-9
    verdict(capsys, 8, ok, f"{steps} steps, worst residuals " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
