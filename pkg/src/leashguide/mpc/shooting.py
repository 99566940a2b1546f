"""Box-constrained cross-entropy shooting with optional projected-gradient polish."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize


@dataclass
class ShootingConfig:
    population: int = 64
    elite_frac: float = 0.125
    iterations: int = 6
    init_std: float = 0.5  # fraction of each variable's scale
    min_std: float = 1e-4
    smoothing: float = 0.2  # weight of the old mean/std in the update
    penalty_obstacle: float = 1e4
    refine_steps: int = 0
    refine_step_size: float = 0.1
    refine_method: str = "lbfgsb"  # or "projected"
    seed: int = 0

    def __post_init__(self):
        if self.refine_method not in ("lbfgsb", "projected"):
            raise ValueError(f"unknown refine method {self.refine_method!r}")
        if self.population < 1 or self.n_elite < 1 or self.n_elite > self.population:
            raise ValueError("need population >= elite count >= 1")

    @property
    def n_elite(self) -> int:
        return max(1, int(round(self.elite_frac * self.population)))


@dataclass
class ShootingResult:
    z: np.ndarray
    cost: float  # objective without penalties
    violation: float
    history: list = field(default_factory=list)  # best penalized cost per iteration
    evaluations: int = 0


def _better(c, v, best_c, best_v, tol):
    """Feasible beats infeasible; then lower cost, or lower violation."""
    f, bf = v <= tol, best_v <= tol
    if f != bf:
        return f
    return c < best_c if f else v < best_v


def cem_minimize(evaluate, mean, scale, lower, upper, config: ShootingConfig, rng,
                 extra=(), feas_tol: float = 1e-6) -> ShootingResult:
    """Minimize over the box ``[lower, upper]``.

    ``evaluate(Z)`` takes candidates ``(N, D)`` and returns ``(cost,
    violation)``. Candidates are clipped into the box before evaluation.
    The current mean, the best so far and any ``extra`` points are part of
    every population, so the best penalized cost never increases.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    mean = np.clip(np.asarray(mean, float), lower, upper)
    std = np.maximum(config.init_std * np.asarray(scale, float), config.min_std)
    extra = [np.clip(np.asarray(e, float), lower, upper) for e in extra]
    pen = config.penalty_obstacle
    best_z, best_c, best_v = None, np.inf, np.inf  # best by feasibility, then cost
    lead_z, lead_score = None, np.inf  # best by penalized score
    hist = []
    n_eval = 0
    for _ in range(config.iterations):
        keep = [z for z in (best_z, lead_z) if z is not None]
        n_rand = max(config.population - 1 - len(extra) - len(keep), 0)
        draws = mean + std * rng.standard_normal((n_rand, len(mean)))
        Z = np.clip(np.concatenate([mean[None], *(e[None] for e in extra + keep), draws]), lower, upper)
        c, v = evaluate(Z)
        n_eval += len(Z)
        score = c + pen * v
        feas = v <= feas_tol
        i = int(np.argmin(np.where(feas, c, np.inf))) if feas.any() else int(np.argmin(v))
        if _better(c[i], v[i], best_c, best_v, feas_tol):
            best_z, best_c, best_v = Z[i].copy(), float(c[i]), float(v[i])
        j = int(np.argmin(score))
        if score[j] < lead_score:
            lead_z, lead_score = Z[j].copy(), float(score[j])
        hist.append(float(score[j]))  # population best; non-increasing since lead_z is resampled
        elite = Z[np.argsort(score, kind="stable")[:config.n_elite]]
        a = config.smoothing
        mean = a * mean + (1 - a) * elite.mean(0)
        std = np.maximum(a * std + (1 - a) * elite.std(0), config.min_std)
        extra = []
    return ShootingResult(best_z, best_c, best_v, hist, n_eval)


def projected_gradient(fun_grad, z0, lower, upper, steps: int, step_size: float,
                       max_backtracks: int = 12):
    """Projected gradient descent with backtracking; never increases ``fun``."""
    z = np.clip(np.asarray(z0, float), lower, upper)
    f, g = fun_grad(z)
    for _ in range(steps):
        t = step_size
        gn = np.linalg.norm(g)
        if not np.isfinite(gn) or gn == 0:
            break
        improved = False
        for _ in range(max_backtracks):
            zn = np.clip(z - t * g / max(gn, 1.0), lower, upper)
            fn, gn_vec = fun_grad(zn)
            if fn < f:
                z, f, g = zn, fn, gn_vec
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return z, f


def lbfgsb_refine(fun_grad, z0, lower, upper, steps: int):
    """Box-constrained quasi-Newton polish; returns the start point if nothing improves.

    Planning costs near the optimum are often below 1e-6, under the default
    absolute gradient tolerance, so only the iteration cap stops the search.
    """
    z0 = np.clip(np.asarray(z0, float), lower, upper)
    f0 = fun_grad(z0)[0]
    res = minimize(fun_grad, z0, jac=True, method="L-BFGS-B", bounds=list(zip(lower, upper)),
                   options={"maxiter": steps, "ftol": 1e-15, "gtol": 1e-15})
    z = np.clip(res.x, lower, upper)
    f = fun_grad(z)[0]
    return (z, f) if f < f0 else (z0, f0)


def refine(fun_grad, z0, lower, upper, config: ShootingConfig, step_size: float):
    if config.refine_method == "lbfgsb":
        return lbfgsb_refine(fun_grad, z0, lower, upper, config.refine_steps)
    return projected_gradient(fun_grad, z0, lower, upper, config.refine_steps, step_size)
